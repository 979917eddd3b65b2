#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cla::csv {

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;
    /// 1-based line number in the source file for each row (for error messages).
    std::vector<std::size_t> line_numbers;

    /// Index of a header column; throws InputError if absent.
    std::size_t column(const std::string& name) const;
};

/// Parses RFC 4180 style CSV (quoted fields, doubled quotes). Blank lines are skipped.
Table parse(const std::string& text, const std::string& source_name = "<memory>");
Table read_file(const std::filesystem::path& path);

std::string escape(const std::string& field);
std::string join(const Row& row);

/// Accumulates rows and writes them with '\n' line endings.
class Writer {
public:
    explicit Writer(Row header);
    void add(Row row);
    std::string str() const;
    void write(const std::filesystem::path& path) const;

private:
    std::string buffer_;
};

double parse_double(const std::string& cell, const std::string& where);
long parse_int(const std::string& cell, const std::string& where);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cla::csv
