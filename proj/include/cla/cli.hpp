#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cla/drs.hpp"
#include "cla/mas.hpp"
#include "cla/synthetic.hpp"

namespace cla::cli {

enum ExitCode { kOk = 0, kInvalidResults = 1, kInputError = 2 };

/// Input file locations; relative paths in the config resolve against its directory.
struct InputPaths {
    std::optional<std::filesystem::path> expression;
    std::optional<std::filesystem::path> mutation;
    std::optional<std::filesystem::path> copy_number;
    std::optional<std::filesystem::path> tissue;
    /// Files or directories (every *.txt inside).
    std::vector<std::filesystem::path> gene_sets;
    std::optional<std::filesystem::path> responses;
    std::string response_column = "auc";
    std::optional<std::filesystem::path> dose_response;
    std::optional<std::filesystem::path> mas_best;
};

struct RunConfig {
    std::filesystem::path source;
    std::string text;  // raw bytes, hashed into the manifest
    InputPaths inputs;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    MasRunConfig mas;
    DrsConfig drs;

    /// Throws InputError on a missing file, malformed JSON or an unknown key.
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir,
                           const std::filesystem::path& source = "<memory>");
};

/// Every key with its default value; written as config.example.
nlohmann::json example_config();

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<double> epsilon;
    std::optional<int> top_n;
    std::optional<std::filesystem::path> mas_best;
};

class Manifest {
public:
    explicit Manifest(std::string command);

    void set_config(const std::string& text);
    void add_input(const std::string& label, const std::filesystem::path& path);
    void set_seed(std::uint64_t seed) { seed_ = seed; }
    void warn(const std::string& message) { warnings_.push_back(message); }
    void warn_all(const std::vector<std::string>& messages);
    void add_output(const std::filesystem::path& path) { outputs_.push_back(path.filename().string()); }
    const std::vector<std::string>& warnings() const { return warnings_; }

    nlohmann::json to_json(int exit_code) const;
    void write(const std::filesystem::path& dir, int exit_code,
               const std::string& filename = "run_manifest.json") const;

private:
    std::string command_;
    std::string config_hash_;
    nlohmann::json inputs_ = nlohmann::json::object();
    std::uint64_t seed_ = 0;
    std::vector<std::string> warnings_;
    std::vector<std::string> outputs_;
    double start_;
};

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Loads the inputs a command needs; records hashes in the manifest.
GenomicData load_genomic_data(const InputPaths& inputs, const std::vector<FeatureType>& types, Manifest& manifest);

int cmd_synth(const std::optional<std::filesystem::path>& config, const std::filesystem::path& out,
              const Overrides& overrides);
int cmd_mas(const std::filesystem::path& config, const std::filesystem::path& out, const Overrides& overrides);
int cmd_drs(const std::filesystem::path& config, const std::filesystem::path& out, const Overrides& overrides);
/// Regenerates plot-data files from a results directory into out.
int cmd_report(const std::filesystem::path& results, const std::filesystem::path& out);

/// R2-by-drug, gene set usage and top importance tables from a MAS results directory.
std::vector<std::filesystem::path> write_mas_plot_data(const std::filesystem::path& results,
                                                       const std::filesystem::path& out);
/// Rank CDF, inclusion, gap and epsilon* tables from a Dr.S results directory.
std::vector<std::filesystem::path> write_drs_plot_data(const std::filesystem::path& results,
                                                       const std::filesystem::path& out);

}  // namespace cla::cli
