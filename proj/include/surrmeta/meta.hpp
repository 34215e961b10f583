#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace surrmeta {

enum class PoolMethod { FE, RE };
enum class VarianceMethod { conventional, HKSJ };

struct MetaInput {
    std::string marker_id;
    std::vector<double> deltas;
    std::vector<double> variances; // within-study sampling variances
    std::vector<std::string> study_ids;
    std::vector<std::size_t> n_per_study;

    std::size_t n_studies() const { return deltas.size(); }
    void validate() const; // M >= 2, finite, variances >= 0 and not all zero
};

struct PooledResult {
    std::string marker_id;
    double mu_hat = 0.0;
    double tau2_hat = 0.0;
    double se_pooled = 0.0;
    double q_scale = 0.0; // HKSJ rescaling factor
    double ci_low = 0.0, ci_high = 0.0;
    double pi_low = 0.0, pi_high = 0.0;
    PoolMethod method = PoolMethod::RE;
    VarianceMethod variance_method = VarianceMethod::HKSJ;
    std::size_t df = 0; // 0 means normal reference (conventional)
    bool degenerate_se = false;
};

// Restricted log-likelihood profile in tau^2, constants dropped.
double restricted_log_likelihood(double tau2, const MetaInput& input);

// REML tau^2: fixed-point iteration on the restricted score equation,
// golden-section maximization of the restricted log-likelihood as fallback.
// tau2_max <= 0 selects the default bound 10 * Var(deltas).
double estimate_tau2_reml(const MetaInput& input, double tau2_max = -1.0);

PooledResult pool_effects(const MetaInput& input, PoolMethod method, VarianceMethod variance_method);

std::pair<double, double> confidence_interval(const PooledResult& result, double level);

// HKSJ RE only; throws on FE input.
std::pair<double, double> prediction_interval(const PooledResult& result, double level);

} // namespace surrmeta
