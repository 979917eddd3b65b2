#include "cla/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cla/common.hpp"

namespace cla::csv {

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw InputError("missing column '" + name + "'");
}

Table parse(const std::string& text, const std::string& source_name) {
    Table table;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t row_line = 1;
    bool header_done = false;

    auto end_row = [&] {
        row.push_back(std::move(field));
        field.clear();
        const bool blank = row.size() == 1 && row[0].empty();
        if (!blank) {
            if (!header_done) {
                table.header = std::move(row);
                header_done = true;
            } else {
                table.rows.push_back(std::move(row));
                table.line_numbers.push_back(row_line);
            }
        }
        row.clear();
        field_started = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (!field_started && row.empty() && field.empty()) row_line = line;
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                break;
            case '\n':
                end_row();
                ++line;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) throw InputError(source_name + ": unterminated quoted field");
    if (field_started || !field.empty() || !row.empty()) end_row();
    if (!header_done) throw InputError(source_name + ": empty file, header expected");
    return table;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path.string());
    out << text;
}

Table read_file(const std::filesystem::path& path) {
    return parse(read_text(path), path.string());
}

std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string join(const Row& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.push_back(',');
        out += escape(row[i]);
    }
    return out;
}

Writer::Writer(Row header) { buffer_ = join(header) + "\n"; }

void Writer::add(Row row) { buffer_ += join(row) + "\n"; }

std::string Writer::str() const { return buffer_; }

void Writer::write(const std::filesystem::path& path) const { write_text(path, buffer_); }

double parse_double(const std::string& cell, const std::string& where) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && *first == ' ') ++first;
    while (last > first && last[-1] == ' ') --last;
    if (first < last && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (first == last || res.ec != std::errc() || res.ptr != last)
        throw InputError("non-numeric value '" + cell + "' at " + where);
    return v;
}

long parse_int(const std::string& cell, const std::string& where) {
    const double v = parse_double(cell, where);
    if (std::floor(v) != v) throw InputError("non-integer value '" + cell + "' at " + where);
    return static_cast<long>(v);
}

}  // namespace cla::csv
