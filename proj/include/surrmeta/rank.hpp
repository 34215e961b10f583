#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace surrmeta {

// Rank comparison kernel: 1 if x > y, 1/2 on ties, 0 otherwise.
inline double g_compare(double x, double y) {
    if (x > y) return 1.0;
    if (x < y) return 0.0;
    return 0.5;
}

struct WithinStudyEstimate {
    std::string study_id;
    std::string marker_id;
    double u_y = 0.0;
    double u_s = 0.0;
    double delta = 0.0;     // u_y - u_s
    double var_delta = 0.0; // sampling variance of delta
    double se_u_y = 0.0;
    std::size_t n_effective = 0;
};

// Paired (pre/post) design. Vectors must have equal length N >= 2 and hold
// complete cases only.
WithinStudyEstimate estimate_paired(std::span<const double> y0, std::span<const double> y1,
                                    std::span<const double> s0, std::span<const double> s1);

// Active-vs-control design. Variance via the two-sample projection estimator.
WithinStudyEstimate estimate_two_arm(std::span<const double> y_t, std::span<const double> s_t,
                                     std::span<const double> y_c, std::span<const double> s_c);

// Jackknife variance of delta for the two-arm design; cross-check for the
// projection estimator.
double jackknife_var_two_arm(std::span<const double> y_t, std::span<const double> s_t,
                             std::span<const double> y_c, std::span<const double> s_c);

// Data-driven equivalence bound: smallest effect on U_Y detectable at
// one-sided level alpha with the target power, averaged over studies.
double select_epsilon_power(const std::vector<WithinStudyEstimate>& estimates,
                            double alpha, double power);

struct DominanceDiagnostic {
    double max_violation = 0.0;
    bool pass = true;
};

// Empirical check that treatment does not stochastically decrease the
// surrogate: max over pooled support of F_treated(s) - F_control(s).
DominanceDiagnostic check_dominance_c2(std::span<const double> s_t, std::span<const double> s_c,
                                       double tol = 0.0);

} // namespace surrmeta
