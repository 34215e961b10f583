#include <doctest.h>

#include <cmath>
#include <random>

#include "surrmeta/errors.hpp"
#include "surrmeta/metrics.hpp"
#include "surrmeta/rng.hpp"

using namespace surrmeta;

namespace {

EffectPairs make_pairs(std::vector<double> u_y, std::vector<double> u_s,
                       std::vector<double> n = {}) {
    EffectPairs p;
    p.u_y = std::move(u_y);
    p.u_s = std::move(u_s);
    if (n.empty()) n.assign(p.u_y.size(), 1.0);
    p.n_per_study = std::move(n);
    return p;
}

double pearson(const EffectPairs& p) {
    const std::size_t m = p.size();
    double my = 0.0, ms = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        my += p.u_y[i];
        ms += p.u_s[i];
    }
    my /= m;
    ms /= m;
    double sy = 0.0, ss = 0.0, c = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sy += (p.u_y[i] - my) * (p.u_y[i] - my);
        ss += (p.u_s[i] - ms) * (p.u_s[i] - ms);
        c += (p.u_y[i] - my) * (p.u_s[i] - ms);
    }
    return c / std::sqrt(sy * ss);
}

} // namespace

TEST_CASE("ccc worked values") {
    CHECK(ccc(make_pairs({0.5, 0.7, 0.9}, {0.5, 0.7, 0.9})) == doctest::Approx(1.0));
    CHECK(ccc(make_pairs({0.6, 0.7}, {0.7, 0.8})) == doctest::Approx(1.0 / 3.0));
    CHECK(ccc(make_pairs({0.1, 0.9}, {0.9, 0.1})) < 0.0);

    bool degenerate = false;
    CHECK(ccc(make_pairs({0.5, 0.5}, {0.5, 0.5}), &degenerate) == 1.0);
    CHECK(degenerate);
    degenerate = false;
    CHECK(ccc(make_pairs({0.5, 0.5}, {0.7, 0.7}), &degenerate) == 0.0);
    CHECK(degenerate);
}

TEST_CASE("ccc properties") {
    auto rng = substream(13, "ccc");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        EffectPairs p = make_pairs({}, {});
        for (int i = 0; i < 8; ++i) {
            p.u_y.push_back(unif(rng));
            p.u_s.push_back(unif(rng));
            p.n_per_study.push_back(1.0);
        }
        const double c = ccc(p);
        CHECK(std::abs(c) <= std::abs(pearson(p)) + 1e-12);
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);

        EffectPairs swapped = make_pairs(p.u_s, p.u_y);
        CHECK(ccc(swapped) == doctest::Approx(c).epsilon(1e-12));
    }
}

TEST_CASE("icc21 worked values") {
    CHECK(icc21(make_pairs({0.5, 0.7, 0.9}, {0.5, 0.7, 0.9})) == doctest::Approx(1.0));
    CHECK(icc21(make_pairs({0.5, 0.7}, {0.6, 0.8})) == doctest::Approx(0.8));
    CHECK_THROWS_AS(icc21(make_pairs({0.5, 0.5}, {0.5, 0.5})), NumericalError);
}

TEST_CASE("r2_trial_wls") {
    // exact linear relation
    CHECK(r2_trial_wls(make_pairs({0.2, 0.4, 0.8}, {0.1, 0.2, 0.4})) == doctest::Approx(1.0));

    // weights scale-invariant
    auto base = make_pairs({0.1, 0.5, 0.4, 0.9}, {0.2, 0.4, 0.3, 0.7}, {10, 20, 30, 40});
    auto scaled = make_pairs({0.1, 0.5, 0.4, 0.9}, {0.2, 0.4, 0.3, 0.7}, {1, 2, 3, 4});
    CHECK(r2_trial_wls(base) == doctest::Approx(r2_trial_wls(scaled)).epsilon(1e-12));
    CHECK(r2_trial_wls(base) >= 0.0);
    CHECK(r2_trial_wls(base) <= 1.0);

    // independent noise: average R^2 stays small
    auto rng = substream(19, "r2");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double total = 0.0;
    const int trials = 60;
    for (int trial = 0; trial < trials; ++trial) {
        EffectPairs p = make_pairs({}, {});
        for (int i = 0; i < 50; ++i) {
            p.u_y.push_back(unif(rng));
            p.u_s.push_back(unif(rng));
            p.n_per_study.push_back(1.0);
        }
        total += r2_trial_wls(p);
    }
    CHECK(total / trials < 0.2);

    // constant predictor is undefined, constant response fits exactly
    CHECK_THROWS_AS(r2_trial_wls(make_pairs({0.1, 0.9, 0.5}, {0.5, 0.5, 0.5})), DataError);
    CHECK(r2_trial_wls(make_pairs({0.5, 0.5, 0.5}, {0.1, 0.9, 0.4})) == doctest::Approx(1.0));
}

TEST_CASE("bca bootstrap") {
    auto rng = substream(37, "bca");
    std::normal_distribution<double> norm;
    EffectPairs p = make_pairs({}, {});
    for (int i = 0; i < 15; ++i) {
        const double z = norm(rng);
        p.u_y.push_back(0.5 + 0.1 * z + 0.05 * norm(rng));
        p.u_s.push_back(0.5 + 0.1 * z + 0.05 * norm(rng));
        p.n_per_study.push_back(25.0);
    }
    auto stat = [](const EffectPairs& x) { return ccc(x); };
    auto ci = bca_bootstrap_ci(stat, p, 500, 0.95, 101);
    CHECK(ci.low < ci.high);
    CHECK(ci.low >= -1.0);
    CHECK(ci.high <= 1.0);
    const double point = ccc(p);
    CHECK(ci.low < point);
    CHECK(ci.high > point);

    auto again = bca_bootstrap_ci(stat, p, 500, 0.95, 101);
    CHECK(again.low == ci.low);
    CHECK(again.high == ci.high);

    auto narrower = bca_bootstrap_ci(stat, p, 500, 0.80, 101);
    CHECK(narrower.low >= ci.low);
    CHECK(narrower.high <= ci.high);

    // degenerate statistic: identical replicates give a zero-width interval
    EffectPairs ident = make_pairs({0.4, 0.4, 0.4}, {0.4, 0.4, 0.4});
    auto flat = bca_bootstrap_ci(stat, ident, 200, 0.95, 7);
    CHECK(flat.degenerate);
    CHECK(flat.low == flat.high);

    // statistic failing on every replicate
    auto bad = [](const EffectPairs&) -> double { throw NumericalError("undefined"); };
    CHECK_THROWS_AS(bca_bootstrap_ci(bad, p, 200, 0.95, 1), NumericalError);
}
