#include "surrmeta/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "surrmeta/dist.hpp"
#include "surrmeta/errors.hpp"
#include "surrmeta/rng.hpp"

namespace surrmeta {

namespace {

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_pairs(const EffectPairs& pairs, std::size_t min_m) {
    if (pairs.u_y.size() != pairs.u_s.size()) throw DataError("effect pairs: unequal vector lengths");
    if (pairs.size() < min_m)
        throw InsufficientDataError("effect pairs: need at least " + std::to_string(min_m) + " studies");
}

bool is_constant(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

} // namespace

double ccc(const EffectPairs& pairs, bool* degenerate) {
    check_pairs(pairs, 2);
    const std::size_t m = pairs.size();
    const double my = mean(pairs.u_y), ms = mean(pairs.u_s);
    double var_y = 0.0, var_s = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double dy = pairs.u_y[i] - my, ds = pairs.u_s[i] - ms;
        var_y += dy * dy;
        var_s += ds * ds;
        cov += dy * ds;
    }
    var_y /= static_cast<double>(m);
    var_s /= static_cast<double>(m);
    cov /= static_cast<double>(m);

    const double shift = (my - ms) * (my - ms);
    const double denom = var_y + var_s + shift;
    if (denom == 0.0) {
        // Both vectors constant and equal.
        if (degenerate) *degenerate = true;
        return 1.0;
    }
    if (var_y == 0.0 && var_s == 0.0) {
        // Both constant but unequal.
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    if (degenerate) *degenerate = false;
    return 2.0 * cov / denom;
}

double icc21(const EffectPairs& pairs) {
    check_pairs(pairs, 2);
    const std::size_t m = pairs.size();
    const double md = static_cast<double>(m);
    const double mean_s = mean(pairs.u_s), mean_y = mean(pairs.u_y);
    const double grand = 0.5 * (mean_s + mean_y);

    double ms_r = 0.0, ms_e = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double row = 0.5 * (pairs.u_s[i] + pairs.u_y[i]);
        ms_r += (row - grand) * (row - grand);
        const double es = pairs.u_s[i] - row - mean_s + grand;
        const double ey = pairs.u_y[i] - row - mean_y + grand;
        ms_e += es * es + ey * ey;
    }
    ms_r *= 2.0 / (md - 1.0);
    ms_e /= md - 1.0;
    const double ms_c = md * ((mean_s - grand) * (mean_s - grand) + (mean_y - grand) * (mean_y - grand));

    const double denom = ms_r + ms_e + (2.0 / md) * (ms_c - ms_e);
    if (denom == 0.0) throw NumericalError("ICC(2,1) undefined: all values identical");
    return (ms_r - ms_e) / denom;
}

double r2_trial_wls(const EffectPairs& pairs) {
    check_pairs(pairs, 3);
    if (is_constant(pairs.u_s)) throw DataError("trial-level R^2: constant surrogate effects");
    const std::size_t m = pairs.size();
    std::vector<double> w(m, 1.0);
    if (pairs.n_per_study.size() == m) w = pairs.n_per_study;

    double sw = 0.0, swx = 0.0, swy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sw += w[i];
        swx += w[i] * pairs.u_s[i];
        swy += w[i] * pairs.u_y[i];
    }
    const double xbar = swx / sw, ybar = swy / sw;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double dx = pairs.u_s[i] - xbar, dy = pairs.u_y[i] - ybar;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if (sxx == 0.0) throw DataError("trial-level R^2: zero weighted variance of surrogate effects");
    if (syy == 0.0) return 1.0; // constant response fit exactly by the intercept
    const double slope = sxy / sxx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double resid = pairs.u_y[i] - ybar - slope * (pairs.u_s[i] - xbar);
        ss_res += w[i] * resid * resid;
    }
    return 1.0 - ss_res / syy;
}

BootstrapCI bca_bootstrap_ci(const std::function<double(const EffectPairs&)>& statistic,
                             const EffectPairs& pairs, std::size_t n_boot, double level,
                             std::uint64_t seed) {
    if (n_boot < 200) throw DataError("BCa bootstrap: need at least 200 replicates");
    if (!(level > 0.0 && level < 1.0)) throw DataError("BCa bootstrap: level must lie in (0,1)");
    const std::size_t m = pairs.size();
    const bool has_weights = pairs.n_per_study.size() == m;

    const double theta_hat = statistic(pairs); // throws if undefined on the sample

    std::vector<double> boot;
    boot.reserve(n_boot);
    std::size_t failures = 0;
    EffectPairs resample;
    resample.u_y.resize(m);
    resample.u_s.resize(m);
    if (has_weights) resample.n_per_study.resize(m);
    for (std::size_t b = 0; b < n_boot; ++b) {
        auto rng = substream(seed, "bca", b);
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t k = pick(rng);
            resample.u_y[i] = pairs.u_y[k];
            resample.u_s[i] = pairs.u_s[k];
            if (has_weights) resample.n_per_study[i] = pairs.n_per_study[k];
        }
        try {
            const double value = statistic(resample);
            if (!std::isfinite(value)) throw NumericalError("non-finite replicate");
            boot.push_back(value);
        } catch (const std::exception&) {
            ++failures;
        }
    }
    if (failures * 10 > n_boot)
        throw NumericalError("BCa bootstrap: statistic undefined on " + std::to_string(failures) +
                             " of " + std::to_string(n_boot) + " replicates");

    std::sort(boot.begin(), boot.end());
    BootstrapCI ci;
    if (boot.front() == boot.back()) {
        ci.low = ci.high = boot.front();
        ci.degenerate = true;
        return ci;
    }

    // Bias correction from the proportion of replicates below the estimate.
    std::size_t below = 0, equal = 0;
    for (double v : boot) {
        if (v < theta_hat) ++below;
        else if (v == theta_hat) ++equal;
    }
    double prop = (static_cast<double>(below) + 0.5 * static_cast<double>(equal)) /
                  static_cast<double>(boot.size());
    prop = std::clamp(prop, 0.5 / static_cast<double>(boot.size()),
                      1.0 - 0.5 / static_cast<double>(boot.size()));
    const double z0 = dist::norm_quantile(prop);

    // Acceleration from jackknife skewness.
    std::vector<double> loo;
    loo.reserve(m);
    EffectPairs jack;
    jack.u_y.reserve(m - 1);
    jack.u_s.reserve(m - 1);
    if (has_weights) jack.n_per_study.reserve(m - 1);
    for (std::size_t skip = 0; skip < m; ++skip) {
        jack.u_y.clear();
        jack.u_s.clear();
        jack.n_per_study.clear();
        for (std::size_t i = 0; i < m; ++i) {
            if (i == skip) continue;
            jack.u_y.push_back(pairs.u_y[i]);
            jack.u_s.push_back(pairs.u_s[i]);
            if (has_weights) jack.n_per_study.push_back(pairs.n_per_study[i]);
        }
        try {
            loo.push_back(statistic(jack));
        } catch (const std::exception&) {
            // leave-one-out failure: omit from the skewness estimate
        }
    }
    double accel = 0.0;
    if (loo.size() >= 3) {
        const double loo_mean = mean(loo);
        double num = 0.0, den = 0.0;
        for (double v : loo) {
            const double d = loo_mean - v;
            num += d * d * d;
            den += d * d;
        }
        if (den > 0.0) accel = num / (6.0 * std::pow(den, 1.5));
    }

    const double alpha = 1.0 - level;
    auto adjusted_quantile = [&](double a) {
        const double za = dist::norm_quantile(a);
        const double arg = z0 + (z0 + za) / (1.0 - accel * (z0 + za));
        const double adj = dist::norm_cdf(arg);
        const auto n = static_cast<double>(boot.size());
        auto idx = static_cast<std::size_t>(std::clamp(std::ceil(adj * n) - 1.0, 0.0, n - 1.0));
        return boot[idx];
    };
    ci.low = adjusted_quantile(alpha / 2.0);
    ci.high = adjusted_quantile(1.0 - alpha / 2.0);
    return ci;
}

} // namespace surrmeta
