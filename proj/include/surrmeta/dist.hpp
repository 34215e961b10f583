#pragma once

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace surrmeta::dist {

inline double norm_cdf(double x) {
    static const boost::math::normal_distribution<double> nd;
    return boost::math::cdf(nd, x);
}

inline double norm_quantile(double p) {
    static const boost::math::normal_distribution<double> nd;
    return boost::math::quantile(nd, p);
}

// df <= 0 selects the normal reference distribution (conventional / FE pooling).
inline double t_cdf(double x, double df) {
    if (df <= 0.0) return norm_cdf(x);
    boost::math::students_t_distribution<double> td(df);
    return boost::math::cdf(td, x);
}

inline double t_quantile(double p, double df) {
    if (df <= 0.0) return norm_quantile(p);
    boost::math::students_t_distribution<double> td(df);
    return boost::math::quantile(td, p);
}

} // namespace surrmeta::dist
