#include "surrmeta/meta.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "surrmeta/dist.hpp"
#include "surrmeta/errors.hpp"

namespace surrmeta {

namespace {

constexpr double kRemlTol = 1e-10;
constexpr int kRemlMaxIter = 200;

// Zero within-study variances make the weights singular at tau2 = 0. A tiny
// floor realizes the continuity limit (the study is treated as near-exact)
// without affecting any regular input.
constexpr double kVarianceFloor = 1e-12;

MetaInput floor_variances(const MetaInput& input) {
    MetaInput out = input;
    for (auto& v : out.variances)
        if (v == 0.0) v = kVarianceFloor;
    return out;
}

bool has_zero_variance(const MetaInput& input) {
    return std::any_of(input.variances.begin(), input.variances.end(),
                       [](double v) { return v == 0.0; });
}

double weighted_mean(const MetaInput& input, double tau2) {
    double sw = 0.0, swd = 0.0;
    for (std::size_t m = 0; m < input.n_studies(); ++m) {
        const double w = 1.0 / (input.variances[m] + tau2);
        sw += w;
        swd += w * input.deltas[m];
    }
    return swd / sw;
}

double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(v.size() - 1);
}

// Golden-section maximization of the restricted log-likelihood on [0, hi].
double golden_section_reml(const MetaInput& input, double hi) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = hi;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = restricted_log_likelihood(c, input);
    double fd = restricted_log_likelihood(d, input);
    while (b - a > 1e-12 * std::max(1.0, hi)) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = restricted_log_likelihood(c, input);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = restricted_log_likelihood(d, input);
        }
    }
    const double mid = 0.5 * (a + b);
    // The boundary tau2 = 0 competes with any interior stationary point.
    if (restricted_log_likelihood(0.0, input) >= restricted_log_likelihood(mid, input)) return 0.0;
    return mid;
}

} // namespace

void MetaInput::validate() const {
    if (deltas.size() < 2) throw InsufficientDataError("meta-analysis requires at least 2 studies");
    if (variances.size() != deltas.size()) throw DataError("meta input: deltas/variances length mismatch");
    bool any_positive = false;
    for (std::size_t m = 0; m < deltas.size(); ++m) {
        if (!std::isfinite(deltas[m]) || !std::isfinite(variances[m]))
            throw DataError("meta input: non-finite entry");
        if (variances[m] < 0.0) throw DataError("meta input: negative within-study variance");
        if (variances[m] > 0.0) any_positive = true;
    }
    if (!any_positive) throw DataError("meta input: all within-study variances are zero");
}

double restricted_log_likelihood(double tau2, const MetaInput& input) {
    if (tau2 < 0.0) throw NumericalError("restricted log-likelihood: tau2 < 0");
    double sw = 0.0, log_total = 0.0;
    for (double v : input.variances) {
        const double total = v + tau2;
        if (total <= 0.0) throw NumericalError("restricted log-likelihood: zero total variance");
        sw += 1.0 / total;
        log_total += std::log(total);
    }
    const double mu = weighted_mean(input, tau2);
    double wss = 0.0;
    for (std::size_t m = 0; m < input.n_studies(); ++m) {
        const double d = input.deltas[m] - mu;
        wss += d * d / (input.variances[m] + tau2);
    }
    return -0.5 * (log_total + std::log(sw) + wss);
}

double estimate_tau2_reml(const MetaInput& raw, double tau2_max) {
    raw.validate();
    if (has_zero_variance(raw)) return estimate_tau2_reml(floor_variances(raw), tau2_max);
    const MetaInput& input = raw;
    if (tau2_max <= 0.0) tau2_max = 10.0 * sample_variance(input.deltas);
    if (tau2_max <= 0.0) return 0.0; // all deltas equal

    double tau2 = sample_variance(input.deltas); // moment-style start
    double prev = -1.0, prev2 = -1.0;
    for (int iter = 0; iter < kRemlMaxIter; ++iter) {
        double sw = 0.0, sw2 = 0.0, num = 0.0;
        const double mu = weighted_mean(input, tau2);
        for (std::size_t m = 0; m < input.n_studies(); ++m) {
            const double w = 1.0 / (input.variances[m] + tau2);
            const double d = input.deltas[m] - mu;
            sw += w;
            sw2 += w * w;
            num += w * w * (d * d - input.variances[m]);
        }
        double next = num / sw2 + 1.0 / sw;
        next = std::clamp(next, 0.0, tau2_max);
        if (std::abs(next - tau2) < kRemlTol) return next;
        if (std::abs(next - prev2) < kRemlTol && std::abs(next - prev) > kRemlTol)
            return golden_section_reml(input, tau2_max); // two-cycle oscillation
        prev2 = prev;
        prev = tau2;
        tau2 = next;
    }
    return golden_section_reml(input, tau2_max);
}

PooledResult pool_effects(const MetaInput& raw, PoolMethod method, VarianceMethod variance_method) {
    raw.validate();
    if (has_zero_variance(raw)) return pool_effects(floor_variances(raw), method, variance_method);
    const MetaInput& input = raw;
    const std::size_t m_studies = input.n_studies();

    PooledResult result;
    result.marker_id = input.marker_id;
    result.method = method;
    result.variance_method = variance_method;
    result.tau2_hat = method == PoolMethod::RE ? estimate_tau2_reml(input) : 0.0;

    double sw = 0.0, swd = 0.0;
    for (std::size_t m = 0; m < m_studies; ++m) {
        const double total = input.variances[m] + result.tau2_hat;
        if (total <= 0.0) throw NumericalError("pooling: zero total variance in study " +
                                               (m < input.study_ids.size() ? input.study_ids[m]
                                                                           : std::to_string(m)));
        const double w = 1.0 / total;
        sw += w;
        swd += w * input.deltas[m];
    }
    if (!(sw > 0.0)) throw NumericalError("pooling: zero total weight");
    result.mu_hat = swd / sw;

    if (variance_method == VarianceMethod::HKSJ) {
        double q = 0.0;
        for (std::size_t m = 0; m < m_studies; ++m) {
            const double w = 1.0 / (input.variances[m] + result.tau2_hat);
            const double d = input.deltas[m] - result.mu_hat;
            q += w * d * d;
        }
        q /= static_cast<double>(m_studies - 1);
        result.q_scale = q;
        result.se_pooled = std::sqrt(q / sw);
        result.df = m_studies - 1;
    } else {
        result.q_scale = 0.0;
        result.se_pooled = std::sqrt(1.0 / sw);
        result.df = 0; // normal quantiles
    }
    result.degenerate_se = result.se_pooled == 0.0;
    return result;
}

std::pair<double, double> confidence_interval(const PooledResult& result, double level) {
    if (!(level > 0.0 && level < 1.0)) throw DataError("confidence level must lie in (0,1)");
    const double q = dist::t_quantile(1.0 - (1.0 - level) / 2.0, static_cast<double>(result.df));
    return {result.mu_hat - q * result.se_pooled, result.mu_hat + q * result.se_pooled};
}

std::pair<double, double> prediction_interval(const PooledResult& result, double level) {
    if (result.method != PoolMethod::RE || result.variance_method != VarianceMethod::HKSJ)
        throw DataError("prediction interval requires a random-effects (HKSJ) result");
    if (!(level > 0.0 && level < 1.0)) throw DataError("prediction level must lie in (0,1)");
    const double q = dist::t_quantile(1.0 - (1.0 - level) / 2.0, static_cast<double>(result.df));
    const double half = q * std::sqrt(result.se_pooled * result.se_pooled + result.tau2_hat);
    return {result.mu_hat - half, result.mu_hat + half};
}

} // namespace surrmeta
