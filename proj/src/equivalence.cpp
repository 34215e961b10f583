#include "surrmeta/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "surrmeta/dist.hpp"
#include "surrmeta/errors.hpp"

namespace surrmeta {

TostP tost_p(double mu_hat, double se, std::size_t df, double epsilon) {
    if (!(epsilon > 0.0)) throw DataError("TOST: epsilon must be positive");
    if (se < 0.0) throw DataError("TOST: negative standard error");

    TostP result;
    if (se == 0.0) {
        // Point-mass inference: the estimate is the truth.
        auto one_sided = [](double stat) { return stat > 0.0 ? 0.0 : (stat == 0.0 ? 0.5 : 1.0); };
        result.p_lower = one_sided(mu_hat + epsilon);
        result.p_upper = one_sided(epsilon - mu_hat);
    } else {
        const double dof = static_cast<double>(df);
        result.p_lower = 1.0 - dist::t_cdf((mu_hat + epsilon) / se, dof);
        result.p_upper = dist::t_cdf((mu_hat - epsilon) / se, dof);
    }
    result.p_tost = std::max(result.p_lower, result.p_upper);
    return result;
}

std::vector<double> bh_adjust(const std::vector<double>& p) {
    const std::size_t n = p.size();
    for (double x : p)
        if (!(x >= 0.0 && x <= 1.0)) throw DataError("BH adjustment: p-value outside [0,1]");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

    std::vector<double> adjusted(n);
    double running_min = 1.0;
    for (std::size_t k = n; k-- > 0;) {
        const std::size_t idx = order[k];
        const double scaled = std::min(1.0, p[idx] * static_cast<double>(n) / static_cast<double>(k + 1));
        running_min = std::min(running_min, scaled);
        adjusted[idx] = running_min;
    }
    return adjusted;
}

std::vector<std::size_t> screen_markers(const std::vector<EquivalenceResult>& results, double alpha) {
    std::vector<std::size_t> gamma;
    for (std::size_t j = 0; j < results.size(); ++j)
        if (results[j].p_adjusted < alpha) gamma.push_back(j);
    std::sort(gamma.begin(), gamma.end(), [&](std::size_t a, std::size_t b) {
        return results[a].marker_id < results[b].marker_id;
    });
    return gamma;
}

double lead_margin(double mu_hat, double se, std::size_t df, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("LEAD: alpha must lie in (0,1)");
    // p_tost is monotone nonincreasing in epsilon; bisect for p_tost = alpha.
    double lo = std::abs(mu_hat) > 0.0 ? std::abs(mu_hat) : 1e-12;
    double hi = std::max(1.0, std::abs(mu_hat) + 1.0);
    while (tost_p(mu_hat, se, df, hi).p_tost > alpha) {
        hi *= 2.0;
        if (hi > 1e12) throw NumericalError("LEAD: no finite margin achieves the target level");
    }
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (tost_p(mu_hat, se, df, mid).p_tost > alpha)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace surrmeta
