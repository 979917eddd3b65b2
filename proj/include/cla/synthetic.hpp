#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cla/dose_response.hpp"
#include "cla/genomic_data.hpp"

namespace cla {

enum class Link { Linear, Threshold, Interaction };

std::string_view to_string(Link link);
Link parse_link(std::string_view text);

struct InformativeGene {
    FeatureType type = FeatureType::Expression;
    std::string gene;
    double weight = 1.0;
};

/// Explicit signal for one drug; replaces the sampled one.
struct SyntheticDrugSpec {
    std::vector<InformativeGene> informative;
    Link link = Link::Linear;
    double noise = 0.1;
};

struct SyntheticSpec {
    std::size_t n_cell_lines = 300;
    std::size_t n_genes = 500;
    std::size_t n_drugs = 5;

    /// Sampled signal: each drug draws this many genes from the planted pool.
    std::size_t informative_per_drug = 20;
    FeatureType informative_type = FeatureType::Expression;
    Link link = Link::Linear;
    double noise = 0.1;
    /// Standard deviation of the genomic score in latent units.
    double signal_scale = 1.0;

    /// The curated set "planted"; 0 means informative_per_drug.
    std::size_t planted_pool_size = 40;
    /// Curated sets "decoy_1".. disjoint from the pool.
    std::size_t n_decoy_sets = 2;
    std::size_t decoy_set_size = 40;

    std::size_t n_tissues = 4;
    double tissue_effect = 0.0;

    double mutation_prevalence = 0.1;
    double copy_number_sd = 0.7;
    /// Fraction of (drug, cell line) pairs left untested.
    double missingness = 0.0;

    /// viability(c) = 1 / (1 + exp(-slope (z - dose_step c))).
    double slope = 1.0;
    double dose_step = 0.5;
    double offset_min = 2.5;
    double offset_max = 4.0;

    /// Indexed by drug position; entries beyond n_drugs are an error.
    std::map<std::size_t, SyntheticDrugSpec> drug_overrides;

    std::uint64_t seed = 0;

    /// Throws InputError on an inconsistent spec.
    void validate() const;
    nlohmann::json to_json() const;
    /// Keys absent from j keep their defaults; unknown keys are an InputError.
    static SyntheticSpec from_json(const nlohmann::json& j);
};

struct SyntheticDrugTruth {
    std::string drug;
    std::vector<InformativeGene> informative;
    Link link = Link::Linear;
    double noise = 0.0;
    double offset = 0.0;
    std::map<std::string, double> tissue_effects;
    /// Latent score per tested cell line (noise included).
    std::map<std::string, double> latent;
};

struct SyntheticWorld {
    GenomicData data;
    DoseResponseData dose;
    /// Area under each generated dose-response curve (mean over levels).
    ScalarResponse auc;
    std::vector<SyntheticDrugTruth> drugs;
    std::map<std::string, CalibratedDose> calibration;
    /// Per cell line: tested drugs ordered by viability at the calibrated level, best first.
    std::map<std::string, std::vector<std::string>> best_order;
};

SyntheticWorld generate_world(const SyntheticSpec& spec);

std::string synthetic_cell_line_id(std::size_t index, std::size_t count);
std::string synthetic_gene_id(std::size_t index, std::size_t count);
std::string synthetic_drug_id(std::size_t index, std::size_t count);

nlohmann::json ground_truth_json(const SyntheticWorld& world, const SyntheticSpec& spec);

/// Writes every input file plus ground_truth.json into dir.
void write_world(const SyntheticWorld& world, const SyntheticSpec& spec, const std::filesystem::path& dir);

}  // namespace cla
