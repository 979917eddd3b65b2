#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace cla {

/// Normalized concentration levels 0..9.
inline constexpr int kDoseLevels = 10;

using ViabilityRow = std::array<std::optional<double>, kDoseLevels>;

/// Viabilities of one drug per cell line. A cell line is "tested" when it has a row.
struct DoseResponseTable {
    std::string drug_id;
    std::map<std::string, ViabilityRow> rows;

    /// Throws InputError when a viability lies outside [0,1] or is not finite.
    void validate() const;
};

using DoseResponseData = std::map<std::string, DoseResponseTable>;

/// CSV `drug_id,cell_line_id,level_0,...,level_9`; empty cell = missing.
DoseResponseData load_dose_response(const std::filesystem::path& path);
DoseResponseData parse_dose_response(const std::string& text, const std::string& source = "<memory>");
void write_dose_response(const DoseResponseData& data, const std::filesystem::path& path);

/// drug -> cell line -> value. CSV `drug_id,cell_line_id,<column>`.
using ScalarResponse = std::map<std::string, std::map<std::string, double>>;
ScalarResponse load_scalar_response(const std::filesystem::path& path, const std::string& column);
void write_scalar_response(const ScalarResponse& data, const std::string& column,
                           const std::filesystem::path& path);

struct CalibratedDose {
    std::string drug_id;
    int level = 0;
    double mean_viability = 0.0;
};

inline constexpr double kTargetViability = 0.75;
inline constexpr double kMinLevelCoverage = 0.5;

/// Level whose mean viability (over cell lines measured there) is closest to target;
/// ties go to the lower level. A level is eligible when measured for at least
/// `min_coverage` of the tested cell lines. `exclude` leaves one cell line out of
/// every count. Throws ComputeError when no level is eligible.
CalibratedDose calibrate_concentration(const DoseResponseTable& table, double target = kTargetViability,
                                       double min_coverage = kMinLevelCoverage,
                                       const std::string* exclude = nullptr);

/// Throws InputError for a level outside 0..9.
std::optional<double> viability_at(const DoseResponseTable& table, const std::string& cell_line, int level);

struct NormalizedViabilities {
    std::map<std::string, double> values;
    /// All inputs equal; every value mapped to 0.
    bool degenerate = false;
};

/// (v - min) / (max - min). Throws InputError for fewer than 2 drugs.
NormalizedViabilities normalize_viabilities(const std::map<std::string, double>& viabilities);

/// 1 + number of drugs with strictly lower viability. Throws InputError for an unknown drug.
int true_rank(const std::map<std::string, double>& viabilities, const std::string& drug);

}  // namespace cla
