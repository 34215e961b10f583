#include "surrmeta/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include "surrmeta/equivalence.hpp"
#include "surrmeta/errors.hpp"
#include "surrmeta/pipeline.hpp"
#include "surrmeta/rng.hpp"

namespace surrmeta {

namespace {

double mc_se(double rate, std::size_t n) {
    return std::sqrt(rate * (1.0 - rate) / static_cast<double>(n));
}

// Rejection indicator per marker: pool, TOST, compare raw p to alpha.
std::vector<bool> reject_flags(const SimConfig& config, const MarkerDraw& draw,
                               const std::vector<double>& alpha_grid) {
    MetaInput input;
    input.deltas = draw.delta_hat;
    input.variances = draw.sigma2;
    const auto pooled = pool_effects(input, config.method, config.variance_method);
    const auto tp = tost_p(pooled.mu_hat, pooled.se_pooled, pooled.df, config.epsilon);
    std::vector<bool> flags(alpha_grid.size());
    for (std::size_t a = 0; a < alpha_grid.size(); ++a) flags[a] = tp.p_tost < alpha_grid[a];
    return flags;
}

SimSummary run_rejection_study(const SimConfig& config, const std::vector<double>& alpha_grid) {
    config.validate();
    const std::size_t n_markers = config.n_markers;
    std::vector<std::atomic<std::size_t>> rejections(alpha_grid.size());
    for (auto& r : rejections) r.store(0);

    auto worker = [&](std::size_t begin, std::size_t end) {
        std::vector<std::size_t> local(alpha_grid.size(), 0);
        for (std::size_t j = begin; j < end; ++j) {
            auto rng = substream(config.seed, "marker", j);
            const auto draw = draw_marker(config, rng);
            const auto flags = reject_flags(config, draw, alpha_grid);
            for (std::size_t a = 0; a < flags.size(); ++a) local[a] += flags[a] ? 1 : 0;
        }
        for (std::size_t a = 0; a < local.size(); ++a) rejections[a].fetch_add(local[a]);
    };

    const unsigned threads = std::max(1u, config.threads);
    if (threads == 1) {
        worker(0, n_markers);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n_markers + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t begin = t * chunk;
            const std::size_t end = std::min(n_markers, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    SimSummary summary;
    summary.alpha_grid = alpha_grid;
    summary.n_markers = n_markers;
    for (std::size_t a = 0; a < alpha_grid.size(); ++a) {
        const double rate = static_cast<double>(rejections[a].load()) / static_cast<double>(n_markers);
        summary.rate.push_back(rate);
        summary.mc_se.push_back(mc_se(rate, n_markers));
    }
    return summary;
}

} // namespace

void SimConfig::validate() const {
    if (n_markers == 0 || n_studies < 2) throw DataError("sim config: need J >= 1 and M >= 2");
    if (n_per_study.empty()) throw DataError("sim config: per-study sizes unset");
    if (n_per_study.size() != 1 && n_per_study.size() != n_studies)
        throw DataError("sim config: n_per_study must be scalar or length M");
    if (!(epsilon > 0.0)) throw DataError("sim config: epsilon must be positive");
    if (u_tau2_max < 0.0 || u_nu_max < 0.0) throw DataError("sim config: negative heterogeneity bound");
}

MarkerDraw draw_marker(const SimConfig& config, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    MarkerDraw draw;
    switch (config.mu_regime) {
        case MuRegime::LFC:
            draw.mu_true = unit(rng) < 0.5 ? -config.epsilon : config.epsilon;
            break;
        case MuRegime::uniform_valid:
            draw.mu_true = -config.epsilon + 2.0 * config.epsilon * unit(rng);
            break;
        case MuRegime::fixed:
            draw.mu_true = config.mu_fixed;
            break;
    }
    const double tau2 = config.u_tau2_max * unit(rng);
    const double nu = config.u_nu_max * unit(rng);
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    draw.delta_hat.resize(config.n_studies);
    draw.sigma2.resize(config.n_studies);
    for (std::size_t m = 0; m < config.n_studies; ++m) {
        const double sigma2 = nu / static_cast<double>(config.study_size(m));
        const double delta = draw.mu_true + std::sqrt(tau2) * stdnorm(rng);
        draw.delta_hat[m] = delta + std::sqrt(sigma2) * stdnorm(rng);
        draw.sigma2[m] = sigma2;
    }
    return draw;
}

SimSummary run_calibration(const SimConfig& config, const std::vector<double>& alpha_grid) {
    if (config.mu_regime == MuRegime::uniform_valid)
        throw DataError("calibration run requires an invalid-surrogate regime");
    return run_rejection_study(config, alpha_grid);
}

SimSummary run_power(const SimConfig& config) {
    return run_rejection_study(config, {config.alpha});
}

StudyDataset permute_within_study(const StudyDataset& data, std::uint64_t seed) {
    if (data.design != Design::paired)
        throw DataError("permutation scheme is defined for paired data only");

    // Collect each subject's (pre, post) record indices.
    std::map<std::string, std::pair<std::size_t, std::size_t>> slots;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        auto& slot = slots[data.records[i].subject_id];
        (data.records[i].arm_or_time == 0 ? slot.first : slot.second) = i;
    }
    std::vector<std::pair<std::size_t, std::size_t>> subjects;
    subjects.reserve(slots.size());
    for (const auto& [id, slot] : slots) subjects.push_back(slot);

    std::vector<std::size_t> perm(subjects.size());
    std::iota(perm.begin(), perm.end(), 0);
    auto rng = substream(seed, data.study_id);
    std::shuffle(perm.begin(), perm.end(), rng);

    StudyDataset out = data;
    for (std::size_t k = 0; k < subjects.size(); ++k) {
        const auto& dst = subjects[k];
        const auto& src = subjects[perm[k]];
        out.records[dst.first].y = data.records[src.first].y;
        out.records[dst.second].y = data.records[src.second].y;
    }
    return out;
}

PermutationSummary run_permutation_fpr(const std::vector<StudyDataset>& data,
                                       const PermutationConfig& config) {
    if (data.size() < 2) throw InsufficientDataError("permutation study requires at least 2 studies");
    for (const auto& study : data)
        if (study.design != Design::paired)
            throw DataError("permutation study requires paired designs");
    if (config.subsample_studies > data.size())
        throw DataError("cannot subsample more studies than available");
    for (const auto& study : data)
        if (config.subsample_n > 0 && study.subject_ids().size() < config.subsample_n)
            throw DataError("study " + study.study_id + " smaller than the requested subsample");

    PermutationSummary summary;
    summary.fpr_per_rep.reserve(config.n_reps);
    for (std::size_t rep = 0; rep < config.n_reps; ++rep) {
        auto rng = substream(config.seed, "permrep", rep);

        std::vector<std::size_t> study_idx(data.size());
        std::iota(study_idx.begin(), study_idx.end(), 0);
        if (config.subsample_studies > 0 && config.subsample_studies < data.size()) {
            std::shuffle(study_idx.begin(), study_idx.end(), rng);
            study_idx.resize(config.subsample_studies);
            std::sort(study_idx.begin(), study_idx.end());
        }

        std::vector<StudyDataset> replicate;
        for (std::size_t si : study_idx) {
            StudyDataset study = data[si];
            if (config.subsample_n > 0 && config.subsample_n < study.subject_ids().size()) {
                auto ids = study.subject_ids();
                std::shuffle(ids.begin(), ids.end(), rng);
                ids.resize(config.subsample_n);
                std::set<std::string> keep(ids.begin(), ids.end());
                StudyDataset sub;
                sub.study_id = study.study_id;
                sub.design = study.design;
                sub.marker_names = study.marker_names;
                for (const auto& r : study.records)
                    if (keep.count(r.subject_id)) sub.records.push_back(r);
                study = std::move(sub);
            }
            std::uniform_int_distribution<std::uint64_t> any;
            replicate.push_back(permute_within_study(study, any(rng)));
        }

        ScreenConfig screen;
        screen.alpha = config.alpha;
        if (config.epsilon > 0.0) {
            screen.epsilon.fixed = config.epsilon;
        } else {
            screen.epsilon.alpha = config.power_alpha;
            screen.epsilon.power = config.power_target;
        }
        const auto out = run_screen(replicate, screen);

        std::size_t hits = 0;
        for (const auto& row : out.rows) hits += row.equivalence.p_tost < config.alpha ? 1 : 0;
        summary.fpr_per_rep.push_back(static_cast<double>(hits) /
                                      static_cast<double>(out.rows.size()));
    }
    summary.mean_fpr = std::accumulate(summary.fpr_per_rep.begin(), summary.fpr_per_rep.end(), 0.0) /
                       static_cast<double>(summary.fpr_per_rep.size());
    summary.max_fpr = *std::max_element(summary.fpr_per_rep.begin(), summary.fpr_per_rep.end());
    return summary;
}

} // namespace surrmeta
