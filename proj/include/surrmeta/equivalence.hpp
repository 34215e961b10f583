#pragma once

#include <string>
#include <vector>

namespace surrmeta {

struct TostP {
    double p_lower = 1.0;
    double p_upper = 1.0;
    double p_tost = 1.0;
};

struct EquivalenceResult {
    std::string marker_id;
    double p_lower = 1.0;
    double p_upper = 1.0;
    double p_tost = 1.0;
    double p_adjusted = 1.0;
    double epsilon = 0.0;
    bool significant = false;
};

// TOST of H0: |mu| >= epsilon against the t reference with `df` degrees of
// freedom (df == 0 -> normal). se == 0 is treated as point-mass inference.
TostP tost_p(double mu_hat, double se, std::size_t df, double epsilon);

// Benjamini-Hochberg step-up adjusted p-values, returned in input order.
std::vector<double> bh_adjust(const std::vector<double>& p);

// Indices of markers with p_adjusted < alpha, ordered by marker_id.
std::vector<std::size_t> screen_markers(const std::vector<EquivalenceResult>& results, double alpha);

// Least equivalence allowable difference: smallest epsilon with p_tost = alpha,
// found by bisection. Optional report.
double lead_margin(double mu_hat, double se, std::size_t df, double alpha);

} // namespace surrmeta
