#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "surrmeta/data.hpp"
#include "surrmeta/meta.hpp"

namespace surrmeta {

enum class MuRegime { LFC, uniform_valid, fixed };

struct SimConfig {
    std::size_t n_markers = 20000;          // J
    std::size_t n_studies = 10;             // M
    std::vector<std::size_t> n_per_study;   // scalar broadcast if size 1
    double epsilon = 0.1;
    double alpha = 0.05;
    double u_tau2_max = 0.01;
    double u_nu_max = 10.0;
    MuRegime mu_regime = MuRegime::LFC;
    double mu_fixed = 0.0;
    PoolMethod method = PoolMethod::RE;
    VarianceMethod variance_method = VarianceMethod::HKSJ;
    std::uint64_t seed = 1;
    unsigned threads = 1;

    std::size_t study_size(std::size_t m) const {
        return n_per_study.size() == 1 ? n_per_study[0] : n_per_study.at(m);
    }
    void validate() const;
};

struct MarkerDraw {
    double mu_true = 0.0;
    std::vector<double> delta_hat;
    std::vector<double> sigma2; // reported as the known generator variances
};

// One marker under the two-level generator: tau2 ~ U(0, u_tau2_max),
// sigma2_m = nu/n_m with nu ~ U(0, u_nu_max), delta_m ~ N(mu, tau2),
// delta_hat_m ~ N(delta_m, sigma2_m).
MarkerDraw draw_marker(const SimConfig& config, std::mt19937_64& rng);

struct SimSummary {
    std::vector<double> alpha_grid;
    std::vector<double> rate;  // empirical FPR or power per nominal alpha
    std::vector<double> mc_se; // sqrt(r(1-r)/J)
    std::size_t n_markers = 0;
};

// Scenario 1: invalid surrogates on the null boundary; rejection rate = FPR.
SimSummary run_calibration(const SimConfig& config, const std::vector<double>& alpha_grid);

// Scenario 2: valid surrogates; rejection rate = power (single alpha).
SimSummary run_power(const SimConfig& config);

// Permute paired Y (pre, post) jointly across subjects within the study,
// leaving all surrogate pairs untouched. Paired design only.
StudyDataset permute_within_study(const StudyDataset& data, std::uint64_t seed);

struct PermutationConfig {
    std::size_t n_reps = 500;
    std::size_t subsample_n = 0;       // 0 = keep all subjects
    std::size_t subsample_studies = 0; // 0 = keep all studies
    double alpha = 0.05;
    double epsilon = 0.0; // <= 0 -> power-based selection per replicate
    double power_alpha = 0.05;
    double power_target = 0.8;
    std::uint64_t seed = 1;
};

struct PermutationSummary {
    std::vector<double> fpr_per_rep; // fraction of markers with raw p < alpha
    double mean_fpr = 0.0;
    double max_fpr = 0.0;
};

PermutationSummary run_permutation_fpr(const std::vector<StudyDataset>& data,
                                       const PermutationConfig& config);

} // namespace surrmeta
