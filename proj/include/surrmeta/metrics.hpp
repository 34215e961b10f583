#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace surrmeta {

// Per-study treatment-effect pairs (U_Y, U_S) used by the agreement metrics.
struct EffectPairs {
    std::vector<double> u_y;
    std::vector<double> u_s;
    std::vector<double> n_per_study; // weights for the WLS R^2

    std::size_t size() const { return u_y.size(); }
};

// Lin's concordance correlation coefficient with population (divisor M) moments.
// Both-constant inputs resolve by convention: equal -> 1, unequal -> 0
// (warning flag set when provided).
double ccc(const EffectPairs& pairs, bool* degenerate = nullptr);

// Two-way random-effects ICC, absolute agreement, single measurement.
double icc21(const EffectPairs& pairs);

// R^2 of the sample-size-weighted regression of u_y on u_s.
double r2_trial_wls(const EffectPairs& pairs);

struct BootstrapCI {
    double low = 0.0;
    double high = 0.0;
    bool degenerate = false; // all replicates equal
};

// BCa interval for a statistic of EffectPairs, resampling study pairs with
// replacement. Replicates use independent seed substreams so results do not
// depend on evaluation order. Throws if the statistic is undefined on more
// than 10% of replicates.
BootstrapCI bca_bootstrap_ci(const std::function<double(const EffectPairs&)>& statistic,
                             const EffectPairs& pairs, std::size_t n_boot, double level,
                             std::uint64_t seed);

} // namespace surrmeta
