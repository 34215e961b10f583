#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "surrmeta/data.hpp"
#include "surrmeta/errors.hpp"
#include "surrmeta/rng.hpp"
#include "surrmeta/sim.hpp"

using namespace surrmeta;

namespace {

SimConfig base_config() {
    SimConfig c;
    c.n_markers = 400;
    c.n_studies = 5;
    c.n_per_study = {50};
    c.epsilon = 0.1;
    c.u_tau2_max = 0.001;
    c.u_nu_max = 1.0;
    c.seed = 99;
    return c;
}

StudyDataset paired_study(const std::string& id, std::size_t n, std::uint64_t seed) {
    StudyDataset ds;
    ds.study_id = id;
    ds.design = Design::paired;
    ds.marker_names = {"m0", "m1"};
    auto rng = substream(seed, id);
    std::normal_distribution<double> norm;
    for (std::size_t i = 0; i < n; ++i) {
        for (int a : {0, 1}) {
            SubjectRecord r;
            r.subject_id = "s" + std::to_string(i);
            r.arm_or_time = a;
            r.y = norm(rng) + 2.0 * a; // strong treatment effect on Y
            r.s = {norm(rng), norm(rng)};
            ds.records.push_back(std::move(r));
        }
    }
    return ds;
}

} // namespace

TEST_CASE("draw_marker regimes") {
    auto config = base_config();

    config.mu_regime = MuRegime::fixed;
    config.mu_fixed = 0.0;
    auto rng = substream(1, "draw");
    for (int i = 0; i < 20; ++i) {
        auto draw = draw_marker(config, rng);
        CHECK(draw.mu_true == 0.0);
        REQUIRE(draw.delta_hat.size() == config.n_studies);
        REQUIRE(draw.sigma2.size() == config.n_studies);
        for (double v : draw.sigma2) {
            CHECK(v >= 0.0);
            CHECK(v <= config.u_nu_max / 50.0);
        }
    }

    config.mu_regime = MuRegime::LFC;
    const int trials = 20000;
    int at_plus = 0;
    for (int i = 0; i < trials; ++i) {
        auto draw = draw_marker(config, rng);
        CHECK(std::abs(draw.mu_true) == config.epsilon);
        at_plus += draw.mu_true > 0.0 ? 1 : 0;
    }
    const double frac = static_cast<double>(at_plus) / trials;
    CHECK(std::abs(frac - 0.5) < 3.0 * std::sqrt(0.25 / trials));

    config.mu_regime = MuRegime::uniform_valid;
    for (int i = 0; i < 200; ++i) {
        auto draw = draw_marker(config, rng);
        CHECK(draw.mu_true > -config.epsilon);
        CHECK(draw.mu_true < config.epsilon);
    }

    // degenerate generator: no heterogeneity, tiny noise, mu = 0
    config.mu_regime = MuRegime::fixed;
    config.u_tau2_max = 0.0;
    config.u_nu_max = 1e-12;
    auto draw = draw_marker(config, rng);
    for (double d : draw.delta_hat) CHECK(std::abs(d) < 1e-4);
}

TEST_CASE("run_calibration basics") {
    auto config = base_config();
    const std::vector<double> grid{1e-12, 0.05, 0.5};
    auto summary = run_calibration(config, grid);
    REQUIRE(summary.rate.size() == grid.size());
    CHECK(summary.n_markers == config.n_markers);

    // rejection regions are nested in alpha
    CHECK(summary.rate[0] <= summary.rate[1]);
    CHECK(summary.rate[1] <= summary.rate[2]);
    CHECK(summary.rate[0] == doctest::Approx(0.0));
    // at the LFC boundary the FPR cannot blow far past alpha for HKSJ-RE
    CHECK(summary.rate[1] < 0.15);
    CHECK(summary.mc_se[1] == doctest::Approx(std::sqrt(summary.rate[1] * (1 - summary.rate[1]) /
                                                        config.n_markers)));

    CHECK_THROWS_AS(
        [&] {
            auto bad = config;
            bad.mu_regime = MuRegime::uniform_valid;
            return run_calibration(bad, grid);
        }(),
        DataError);
}

TEST_CASE("run_power detects valid surrogates in an easy setting") {
    auto config = base_config();
    config.mu_regime = MuRegime::fixed;
    config.mu_fixed = 0.0;
    config.u_tau2_max = 1e-6;
    config.u_nu_max = 0.05;
    config.n_per_study = {250};
    config.n_markers = 200;
    auto summary = run_power(config);
    CHECK(summary.rate[0] > 0.9);
}

TEST_CASE("simulation runs are thread-count invariant and seed-deterministic") {
    auto config = base_config();
    config.n_markers = 300;
    const std::vector<double> grid{0.05, 0.1};
    auto a = run_calibration(config, grid);
    config.threads = 3;
    auto b = run_calibration(config, grid);
    CHECK(a.rate == b.rate);

    config.threads = 1;
    auto c = run_calibration(config, grid);
    CHECK(a.rate == c.rate); // same seed reproduces exactly
}

TEST_CASE("permute_within_study preserves pairs and breaks association") {
    auto ds = paired_study("P", 30, 5);
    auto perm = permute_within_study(ds, 11);

    REQUIRE(perm.records.size() == ds.records.size());
    std::multiset<std::pair<double, double>> before, after;
    std::map<std::string, std::pair<double, double>> pre_post;
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        // surrogate values stay attached to their subjects
        CHECK(perm.records[i].s == ds.records[i].s);
        CHECK(perm.records[i].subject_id == ds.records[i].subject_id);
    }
    auto collect = [](const StudyDataset& d) {
        std::map<std::string, std::pair<double, double>> by_subject;
        for (const auto& r : d.records)
            (r.arm_or_time == 0 ? by_subject[r.subject_id].first
                                : by_subject[r.subject_id].second) = r.y;
        std::multiset<std::pair<double, double>> pairs;
        for (const auto& [id, p] : by_subject) pairs.insert(p);
        return pairs;
    };
    CHECK(collect(perm) == collect(ds)); // (pre, post) pairs travel together

    auto perm2 = permute_within_study(ds, 11);
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        CHECK(perm2.records[i].y == perm.records[i].y);

    // single subject: nothing to permute
    auto tiny = paired_study("T", 1, 6);
    auto tiny_perm = permute_within_study(tiny, 3);
    CHECK(tiny_perm.records[0].y == tiny.records[0].y);
    CHECK(tiny_perm.records[1].y == tiny.records[1].y);

    StudyDataset two_arm = ds;
    two_arm.design = Design::two_arm;
    CHECK_THROWS_AS(permute_within_study(two_arm, 1), DataError);
}

TEST_CASE("run_permutation_fpr is deterministic and bounded") {
    std::vector<StudyDataset> data;
    for (int m = 0; m < 3; ++m)
        data.push_back(paired_study("S" + std::to_string(m), 25, 40 + m));

    PermutationConfig config;
    config.n_reps = 5;
    config.alpha = 0.05;
    config.epsilon = 0.1;
    config.seed = 3;
    auto summary = run_permutation_fpr(data, config);
    REQUIRE(summary.fpr_per_rep.size() == 5);
    for (double f : summary.fpr_per_rep) {
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
    }
    CHECK(summary.max_fpr == *std::max_element(summary.fpr_per_rep.begin(),
                                               summary.fpr_per_rep.end()));

    auto again = run_permutation_fpr(data, config);
    CHECK(again.fpr_per_rep == summary.fpr_per_rep);

    config.subsample_n = 10;
    config.subsample_studies = 2;
    auto sub = run_permutation_fpr(data, config);
    CHECK(sub.fpr_per_rep.size() == 5);

    config.subsample_n = 100;
    CHECK_THROWS_AS(run_permutation_fpr(data, config), DataError);
    config.subsample_n = 0;
    config.subsample_studies = 9;
    CHECK_THROWS_AS(run_permutation_fpr(data, config), DataError);
}
