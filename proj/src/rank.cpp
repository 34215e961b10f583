#include "surrmeta/rank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "surrmeta/dist.hpp"
#include "surrmeta/errors.hpp"

namespace surrmeta {

namespace {

double sample_variance(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(n - 1);
}

} // namespace

WithinStudyEstimate estimate_paired(std::span<const double> y0, std::span<const double> y1,
                                    std::span<const double> s0, std::span<const double> s1) {
    const std::size_t n = y0.size();
    if (y1.size() != n || s0.size() != n || s1.size() != n)
        throw DataError("paired estimate: input vectors have unequal lengths");
    if (n < 2) throw InsufficientDataError("paired estimate requires at least 2 complete pairs");

    std::vector<double> gy(n), diff(n);
    for (std::size_t i = 0; i < n; ++i) {
        gy[i] = g_compare(y1[i], y0[i]);
        diff[i] = gy[i] - g_compare(s1[i], s0[i]);
    }
    WithinStudyEstimate est;
    est.u_y = std::accumulate(gy.begin(), gy.end(), 0.0) / static_cast<double>(n);
    est.delta = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
    est.u_s = est.u_y - est.delta;
    est.var_delta = sample_variance(diff) / static_cast<double>(n);
    est.se_u_y = std::sqrt(sample_variance(gy) / static_cast<double>(n));
    est.n_effective = n;
    return est;
}

WithinStudyEstimate estimate_two_arm(std::span<const double> y_t, std::span<const double> s_t,
                                     std::span<const double> y_c, std::span<const double> s_c) {
    const std::size_t n1 = y_t.size(), n0 = y_c.size();
    if (s_t.size() != n1 || s_c.size() != n0)
        throw DataError("two-arm estimate: y and s lengths differ within an arm");
    if (n1 < 2 || n0 < 2) throw InsufficientDataError("two-arm estimate requires at least 2 per arm");

    // Projection components: p_i averages over controls, q_l over treated.
    std::vector<double> p(n1, 0.0), q(n0, 0.0), py(n1, 0.0), qy(n0, 0.0);
    double sum_gy = 0.0, sum_gs = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t l = 0; l < n0; ++l) {
            const double gy = g_compare(y_t[i], y_c[l]);
            const double gs = g_compare(s_t[i], s_c[l]);
            sum_gy += gy;
            sum_gs += gs;
            p[i] += gy - gs;
            q[l] += gy - gs;
            py[i] += gy;
            qy[l] += gy;
        }
    }
    const double denom = static_cast<double>(n1) * static_cast<double>(n0);
    for (std::size_t i = 0; i < n1; ++i) {
        p[i] /= static_cast<double>(n0);
        py[i] /= static_cast<double>(n0);
    }
    for (std::size_t l = 0; l < n0; ++l) {
        q[l] /= static_cast<double>(n1);
        qy[l] /= static_cast<double>(n1);
    }

    WithinStudyEstimate est;
    est.u_y = sum_gy / denom;
    est.u_s = sum_gs / denom;
    est.delta = est.u_y - est.u_s;
    est.var_delta = sample_variance(p) / static_cast<double>(n1) +
                    sample_variance(q) / static_cast<double>(n0);
    est.se_u_y = std::sqrt(sample_variance(py) / static_cast<double>(n1) +
                           sample_variance(qy) / static_cast<double>(n0));
    est.n_effective = n1 + n0;
    return est;
}

double jackknife_var_two_arm(std::span<const double> y_t, std::span<const double> s_t,
                             std::span<const double> y_c, std::span<const double> s_c) {
    const std::size_t n1 = y_t.size(), n0 = y_c.size();
    if (n1 < 3 || n0 < 3) throw InsufficientDataError("jackknife requires at least 3 per arm");

    auto delta_without = [&](std::size_t skip_t, std::size_t skip_c) {
        double sum = 0.0;
        std::size_t m1 = 0;
        for (std::size_t i = 0; i < n1; ++i) {
            if (i == skip_t) continue;
            ++m1;
            for (std::size_t l = 0; l < n0; ++l) {
                if (l == skip_c) continue;
                sum += g_compare(y_t[i], y_c[l]) - g_compare(s_t[i], s_c[l]);
            }
        }
        const std::size_t m0 = n0 - (skip_c < n0 ? 1 : 0);
        return sum / (static_cast<double>(m1) * static_cast<double>(m0));
    };

    const std::size_t none = static_cast<std::size_t>(-1);
    std::vector<double> loo_t(n1), loo_c(n0);
    for (std::size_t i = 0; i < n1; ++i) loo_t[i] = delta_without(i, none);
    for (std::size_t l = 0; l < n0; ++l) loo_c[l] = delta_without(none, l);

    auto jk = [](const std::vector<double>& loo) {
        const double n = static_cast<double>(loo.size());
        const double mean = std::accumulate(loo.begin(), loo.end(), 0.0) / n;
        double acc = 0.0;
        for (double x : loo) acc += (x - mean) * (x - mean);
        return (n - 1.0) / n * acc;
    };
    return jk(loo_t) + jk(loo_c);
}

double select_epsilon_power(const std::vector<WithinStudyEstimate>& estimates, double alpha,
                            double power) {
    if (estimates.empty()) throw InsufficientDataError("epsilon selection: no study estimates");
    if (!(alpha > 0.0 && alpha < 1.0) || !(power > 0.0 && power < 1.0))
        throw DataError("epsilon selection: alpha and power must lie in (0,1)");
    const double z = dist::norm_quantile(1.0 - alpha) + dist::norm_quantile(power);
    double sum = 0.0;
    for (const auto& est : estimates) {
        if (!(est.se_u_y > 0.0))
            throw NumericalError("epsilon selection: se(U_Y) = 0 in study " + est.study_id);
        sum += z * est.se_u_y;
    }
    return sum / static_cast<double>(estimates.size());
}

DominanceDiagnostic check_dominance_c2(std::span<const double> s_t, std::span<const double> s_c,
                                       double tol) {
    if (s_t.empty() || s_c.empty()) throw DataError("dominance check: empty input");
    std::vector<double> support(s_t.begin(), s_t.end());
    support.insert(support.end(), s_c.begin(), s_c.end());
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());

    std::vector<double> t_sorted(s_t.begin(), s_t.end()), c_sorted(s_c.begin(), s_c.end());
    std::sort(t_sorted.begin(), t_sorted.end());
    std::sort(c_sorted.begin(), c_sorted.end());
    auto ecdf = [](const std::vector<double>& sorted, double x) {
        return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) /
               static_cast<double>(sorted.size());
    };

    DominanceDiagnostic diag;
    for (double s : support)
        diag.max_violation = std::max(diag.max_violation, ecdf(t_sorted, s) - ecdf(c_sorted, s));
    diag.max_violation = std::max(diag.max_violation, 0.0);
    diag.pass = diag.max_violation <= tol;
    return diag;
}

} // namespace surrmeta
