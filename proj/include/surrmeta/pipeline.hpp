#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "surrmeta/data.hpp"
#include "surrmeta/equivalence.hpp"
#include "surrmeta/meta.hpp"
#include "surrmeta/metrics.hpp"
#include "surrmeta/rank.hpp"
#include "surrmeta/signature.hpp"

namespace surrmeta {

// Within-study estimate for one marker, complete cases for that marker only.
// Returns nullopt when too few complete cases remain.
std::optional<WithinStudyEstimate> estimate_study_marker(const StudyDataset& study,
                                                         std::size_t marker_index);

struct EpsilonPolicy {
    double fixed = 0.0; // > 0 -> fixed bound
    double alpha = 0.05;
    double power = 0.8;

    bool is_fixed() const { return fixed > 0.0; }
};

struct ScreenConfig {
    double alpha = 0.05;
    EpsilonPolicy epsilon;
    PoolMethod method = PoolMethod::RE;
    VarianceMethod variance_method = VarianceMethod::HKSJ;
    unsigned threads = 1;
};

struct MarkerScreenRow {
    std::string marker_id;
    PooledResult pooled;
    EquivalenceResult equivalence;
    std::size_t n_studies = 0;
};

struct ScreenOutput {
    double epsilon_used = 0.0;
    std::vector<MarkerScreenRow> rows; // one per analyzable marker, input order
    std::vector<std::size_t> gamma;    // indices into rows
    SignatureSpec spec;
    // per-marker per-study estimates, for forest plots and diagnostics
    std::vector<std::vector<WithinStudyEstimate>> per_study;
};

// Stages 1-2: within-study estimation, pooling, TOST, BH, signature weights.
ScreenOutput run_screen(const std::vector<StudyDataset>& data, const ScreenConfig& config);

struct EvaluateConfig {
    double alpha = 0.05;
    EpsilonPolicy epsilon;
    PoolMethod method = PoolMethod::RE;
    VarianceMethod variance_method = VarianceMethod::HKSJ;
    std::size_t min_n = 2;
    std::size_t n_boot = 2000;
    std::uint64_t seed = 1;
};

struct EvaluationReport {
    double epsilon_used = 0.0;
    std::vector<WithinStudyEstimate> per_study;
    PooledResult pooled;
    EquivalenceResult equivalence;
    double ccc_value = 0.0;
    double icc_value = 0.0;
    double r2_value = 0.0;
    BootstrapCI ccc_ci, icc_ci, r2_ci;
    bool icc_defined = true;
    bool r2_defined = true;
    std::vector<std::string> skipped_studies;
};

// Stage 3: standardize holdout, compose signature, pool and test the
// composite, report concordance metrics with BCa intervals.
EvaluationReport run_evaluate(const std::vector<StudyDataset>& holdout, SignatureSpec spec,
                              const EvaluateConfig& config);

} // namespace surrmeta
