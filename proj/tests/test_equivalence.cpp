#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "surrmeta/dist.hpp"
#include "surrmeta/equivalence.hpp"
#include "surrmeta/errors.hpp"
#include "surrmeta/rng.hpp"

using namespace surrmeta;
using namespace surrmeta::dist;

namespace {

// Naive quadratic BH oracle: p*_k = min over j with p_j >= p_k (by rank) of
// n * p_(j) / j, computed directly from the definition.
std::vector<double> bh_oracle(const std::vector<double>& p) {
    const std::size_t n = p.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> adj(n);
    for (std::size_t rank = 0; rank < n; ++rank) {
        double best = 1.0;
        for (std::size_t j = rank; j < n; ++j)
            best = std::min(best, std::min(1.0, p[order[j]] * n / (j + 1)));
        adj[order[rank]] = best;
    }
    return adj;
}

EquivalenceResult make_result(std::string id, double p_adj) {
    EquivalenceResult r;
    r.marker_id = std::move(id);
    r.p_adjusted = p_adj;
    return r;
}

} // namespace

TEST_CASE("tost_p worked values") {
    // (mu + eps)/se = 4, (mu - eps)/se = -8/3
    auto t4 = tost_p(0.02, 0.03, 4, 0.1);
    CHECK(t4.p_lower == doctest::Approx(1.0 - t_cdf(4.0, 4)).epsilon(1e-12));
    CHECK(t4.p_upper == doctest::Approx(t_cdf(-8.0 / 3.0, 4)).epsilon(1e-12));
    CHECK(t4.p_tost == doctest::Approx(std::max(t4.p_lower, t4.p_upper)));

    // df = 0 selects the normal reference
    auto z = tost_p(0.0, 0.05, 0, 0.1);
    CHECK(z.p_lower == doctest::Approx(1.0 - norm_cdf(2.0)).epsilon(1e-12));
    CHECK(z.p_upper == doctest::Approx(norm_cdf(-2.0)).epsilon(1e-12));

    // boundary: mu = eps gives p_upper = 0.5
    CHECK(tost_p(0.1, 0.05, 10, 0.1).p_upper == doctest::Approx(0.5));
    CHECK(tost_p(-0.1, 0.05, 10, 0.1).p_lower == doctest::Approx(0.5));
}

TEST_CASE("tost_p point-mass cases") {
    CHECK(tost_p(0.05, 0.0, 3, 0.1).p_tost == 0.0);
    CHECK(tost_p(0.1, 0.0, 3, 0.1).p_tost == 0.5);
    CHECK(tost_p(-0.1, 0.0, 3, 0.1).p_tost == 0.5);
    CHECK(tost_p(0.3, 0.0, 3, 0.1).p_tost == 1.0);
}

TEST_CASE("tost_p is monotone in epsilon and symmetric in mu") {
    auto rng = substream(3, "tost");
    std::uniform_real_distribution<double> mu_d(-0.3, 0.3), se_d(0.01, 0.1);
    for (int trial = 0; trial < 100; ++trial) {
        const double mu = mu_d(rng), se = se_d(rng);
        double prev = 1.5;
        for (double eps : {0.05, 0.1, 0.2, 0.4}) {
            const double p = tost_p(mu, se, 5, eps).p_tost;
            CHECK(p <= prev);
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
            prev = p;
            CHECK(tost_p(-mu, se, 5, eps).p_tost == doctest::Approx(p).epsilon(1e-12));
        }
    }
}

TEST_CASE("TOST rejects exactly when the 1-2alpha CI sits inside (-eps, eps)") {
    auto rng = substream(5, "duality");
    std::uniform_real_distribution<double> mu_d(-0.3, 0.3), se_d(0.005, 0.15), eps_d(0.02, 0.3);
    std::uniform_int_distribution<std::size_t> df_d(1, 30);
    const double alpha = 0.05;
    for (int trial = 0; trial < 500; ++trial) {
        const double mu = mu_d(rng), se = se_d(rng), eps = eps_d(rng);
        const std::size_t df = trial % 3 == 0 ? 0 : df_d(rng);
        const double crit = t_quantile(1.0 - alpha, df);
        const bool ci_inside = (mu - crit * se > -eps) && (mu + crit * se < eps);
        const bool reject = tost_p(mu, se, df, eps).p_tost < alpha;
        CHECK(reject == ci_inside);
    }
}

TEST_CASE("bh_adjust worked examples") {
    auto adj = bh_adjust({0.025, 0.05});
    CHECK(adj[0] == doctest::Approx(0.05));
    CHECK(adj[1] == doctest::Approx(0.05));

    CHECK(bh_adjust({0.2}) == std::vector<double>{0.2});

    auto tied = bh_adjust({0.01, 0.01, 0.01});
    for (double v : tied) CHECK(v == doctest::Approx(0.01));

    auto mixed = bh_adjust({0.9, 0.001, 0.04, 0.3});
    auto oracle = bh_oracle({0.9, 0.001, 0.04, 0.3});
    for (std::size_t i = 0; i < mixed.size(); ++i)
        CHECK(mixed[i] == doctest::Approx(oracle[i]).epsilon(1e-14));
}

TEST_CASE("bh_adjust matches the quadratic oracle and respects permutations") {
    auto rng = substream(17, "bh");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> size(1, 40);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> p(size(rng));
        for (auto& x : p) x = trial % 4 == 0 ? std::round(unif(rng) * 10.0) / 10.0 : unif(rng);
        auto got = bh_adjust(p);
        auto want = bh_oracle(p);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
            CHECK(got[i] >= p[i] - 1e-15);
            CHECK(got[i] <= 1.0);
        }

        std::vector<std::size_t> perm(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> permuted(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) permuted[i] = p[perm[i]];
        auto got_perm = bh_adjust(permuted);
        for (std::size_t i = 0; i < p.size(); ++i)
            CHECK(got_perm[i] == doctest::Approx(got[perm[i]]).epsilon(1e-13));
    }
}

TEST_CASE("screen_markers uses a strict threshold and sorts by marker id") {
    std::vector<EquivalenceResult> results{make_result("m3", 0.01), make_result("m1", 0.05),
                                           make_result("m2", 0.002)};
    auto gamma = screen_markers(results, 0.05);
    REQUIRE(gamma.size() == 2);
    CHECK(results[gamma[0]].marker_id == "m2");
    CHECK(results[gamma[1]].marker_id == "m3");

    CHECK(screen_markers({make_result("a", 0.5)}, 0.05).empty());
    CHECK(screen_markers({make_result("a", 0.05)}, 0.05).empty()); // p == alpha excluded
}

TEST_CASE("lead_margin inverts tost_p") {
    auto rng = substream(29, "lead");
    std::uniform_real_distribution<double> mu_d(-0.2, 0.2), se_d(0.01, 0.1);
    for (int trial = 0; trial < 50; ++trial) {
        const double mu = mu_d(rng), se = se_d(rng);
        const std::size_t df = trial % 2 == 0 ? 8 : 0;
        const double eps = lead_margin(mu, se, df, 0.05);
        CHECK(eps > std::abs(mu));
        CHECK(tost_p(mu, se, df, eps).p_tost == doctest::Approx(0.05).epsilon(1e-6));
        // margins below the solution do not reject, margins above do
        CHECK(tost_p(mu, se, df, eps * 0.99).p_tost > 0.05);
        CHECK(tost_p(mu, se, df, eps * 1.01).p_tost < 0.05);
    }

    // closed form for the normal reference at mu = 0: eps = z_{1-alpha} * se
    CHECK(lead_margin(0.0, 0.1, 0, 0.05) ==
          doctest::Approx(norm_quantile(0.95) * 0.1).epsilon(1e-6));
}
