#include "surrmeta/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <thread>

#include "surrmeta/errors.hpp"

namespace surrmeta {

namespace {

// Complete pairs for marker j in a paired study: both y records and both
// marker records present.
struct PairedVectors {
    std::vector<double> y0, y1, s0, s1;
};

PairedVectors paired_complete_cases(const StudyDataset& study, std::size_t j) {
    std::map<std::string, std::pair<const SubjectRecord*, const SubjectRecord*>> by_subject;
    for (const auto& r : study.records) {
        auto& slot = by_subject[r.subject_id];
        (r.arm_or_time == 0 ? slot.first : slot.second) = &r;
    }
    PairedVectors v;
    for (const auto& [id, slot] : by_subject) {
        const auto* pre = slot.first;
        const auto* post = slot.second;
        if (!pre || !post) continue;
        if (is_missing(pre->y) || is_missing(post->y)) continue;
        if (is_missing(pre->s[j]) || is_missing(post->s[j])) continue;
        v.y0.push_back(pre->y);
        v.y1.push_back(post->y);
        v.s0.push_back(pre->s[j]);
        v.s1.push_back(post->s[j]);
    }
    return v;
}

struct TwoArmVectors {
    std::vector<double> y_t, s_t, y_c, s_c;
};

TwoArmVectors two_arm_complete_cases(const StudyDataset& study, std::size_t j) {
    TwoArmVectors v;
    for (const auto& r : study.records) {
        if (is_missing(r.y) || is_missing(r.s[j])) continue;
        if (r.arm_or_time == 1) {
            v.y_t.push_back(r.y);
            v.s_t.push_back(r.s[j]);
        } else {
            v.y_c.push_back(r.y);
            v.s_c.push_back(r.s[j]);
        }
    }
    return v;
}

// All within-study variances zero (for example a perfect surrogate): every
// study reports delta exactly, so pool with equal weights.
PooledResult pool_equal_weight(const MetaInput& input, PoolMethod method,
                               VarianceMethod variance_method) {
    PooledResult pooled;
    pooled.marker_id = input.marker_id;
    pooled.method = method;
    pooled.variance_method = variance_method;
    const double m_count = static_cast<double>(input.deltas.size());
    double mean = 0.0;
    for (double d : input.deltas) mean += d;
    pooled.mu_hat = mean / m_count;
    if (variance_method == VarianceMethod::HKSJ) {
        double q = 0.0;
        for (double d : input.deltas) q += (d - pooled.mu_hat) * (d - pooled.mu_hat);
        pooled.q_scale = q / (m_count - 1.0);
        pooled.se_pooled = std::sqrt(pooled.q_scale / m_count);
        pooled.df = input.deltas.size() - 1;
    }
    pooled.degenerate_se = pooled.se_pooled == 0.0;
    return pooled;
}

bool all_zero_variances(const MetaInput& input) {
    return std::all_of(input.variances.begin(), input.variances.end(),
                       [](double v) { return v == 0.0; });
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const unsigned count = std::min<unsigned>(threads, static_cast<unsigned>(n));
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace

std::optional<WithinStudyEstimate> estimate_study_marker(const StudyDataset& study,
                                                         std::size_t marker_index) {
    if (marker_index >= study.n_markers()) throw DataError("marker index out of range");
    WithinStudyEstimate est;
    try {
        if (study.design == Design::paired) {
            const auto v = paired_complete_cases(study, marker_index);
            est = estimate_paired(v.y0, v.y1, v.s0, v.s1);
        } else {
            const auto v = two_arm_complete_cases(study, marker_index);
            est = estimate_two_arm(v.y_t, v.s_t, v.y_c, v.s_c);
        }
    } catch (const InsufficientDataError&) {
        return std::nullopt;
    }
    est.study_id = study.study_id;
    est.marker_id = study.marker_names[marker_index];
    return est;
}

ScreenOutput run_screen(const std::vector<StudyDataset>& data, const ScreenConfig& config) {
    if (data.size() < 2) throw InsufficientDataError("screening requires at least 2 studies");
    const auto& markers = data.front().marker_names;
    for (const auto& study : data)
        if (study.marker_names != markers)
            throw IntegrityError("screening: studies do not share a common marker list");

    ScreenOutput out;
    const std::size_t n_markers = markers.size();
    out.per_study.resize(n_markers);

    parallel_for(n_markers, config.threads, [&](std::size_t j) {
        auto& per_study = out.per_study[j];
        for (const auto& study : data)
            if (auto est = estimate_study_marker(study, j)) per_study.push_back(*est);
    });

    // Equivalence bound: fixed, or power-based from the Y effect per study
    // (identical across markers; the first analyzable marker supplies it).
    if (config.epsilon.is_fixed()) {
        out.epsilon_used = config.epsilon.fixed;
    } else {
        const std::vector<WithinStudyEstimate>* reference = nullptr;
        for (const auto& per_study : out.per_study)
            if (per_study.size() == data.size()) {
                reference = &per_study;
                break;
            }
        if (!reference)
            throw InsufficientDataError("epsilon selection: no marker estimable in every study");
        out.epsilon_used = select_epsilon_power(*reference, config.epsilon.alpha, config.epsilon.power);
    }

    std::vector<double> raw_p;
    std::vector<std::size_t> analyzable;
    for (std::size_t j = 0; j < n_markers; ++j) {
        const auto& per_study = out.per_study[j];
        if (per_study.size() < 2) continue;
        MetaInput input;
        input.marker_id = markers[j];
        for (const auto& est : per_study) {
            input.deltas.push_back(est.delta);
            input.variances.push_back(est.var_delta);
            input.study_ids.push_back(est.study_id);
            input.n_per_study.push_back(est.n_effective);
        }
        MarkerScreenRow row;
        row.marker_id = markers[j];
        row.n_studies = per_study.size();
        row.pooled = all_zero_variances(input)
                         ? pool_equal_weight(input, config.method, config.variance_method)
                         : pool_effects(input, config.method, config.variance_method);
        const auto ci = confidence_interval(row.pooled, 1.0 - 2.0 * config.alpha);
        row.pooled.ci_low = ci.first;
        row.pooled.ci_high = ci.second;
        if (config.method == PoolMethod::RE && config.variance_method == VarianceMethod::HKSJ) {
            const auto pi = prediction_interval(row.pooled, 0.95);
            row.pooled.pi_low = pi.first;
            row.pooled.pi_high = pi.second;
        }
        const auto tp = tost_p(row.pooled.mu_hat, row.pooled.se_pooled, row.pooled.df, out.epsilon_used);
        row.equivalence.marker_id = markers[j];
        row.equivalence.p_lower = tp.p_lower;
        row.equivalence.p_upper = tp.p_upper;
        row.equivalence.p_tost = tp.p_tost;
        row.equivalence.epsilon = out.epsilon_used;

        raw_p.push_back(tp.p_tost);
        analyzable.push_back(j);
        out.rows.push_back(std::move(row));
    }
    if (out.rows.empty()) throw InsufficientDataError("screening: no poolable markers");

    const auto adjusted = bh_adjust(raw_p);
    std::vector<EquivalenceResult> eq;
    for (std::size_t k = 0; k < out.rows.size(); ++k) {
        out.rows[k].equivalence.p_adjusted = adjusted[k];
        out.rows[k].equivalence.significant = adjusted[k] < config.alpha;
        eq.push_back(out.rows[k].equivalence);
    }
    out.gamma = screen_markers(eq, config.alpha);

    if (!out.gamma.empty()) {
        std::vector<std::string> ids;
        std::vector<double> mus, tau2s;
        std::vector<std::vector<double>> sigma2s;
        for (std::size_t k : out.gamma) {
            const std::size_t j = analyzable[k];
            ids.push_back(out.rows[k].marker_id);
            mus.push_back(out.rows[k].pooled.mu_hat);
            tau2s.push_back(out.rows[k].pooled.tau2_hat);
            std::vector<double> sigma2;
            for (const auto& est : out.per_study[j]) sigma2.push_back(est.var_delta);
            sigma2s.push_back(std::move(sigma2));
        }
        out.spec = signature_weights(ids, mus, out.epsilon_used, sigma2s, tau2s);
    }
    out.spec.epsilon_used = out.epsilon_used;
    return out;
}

EvaluationReport run_evaluate(const std::vector<StudyDataset>& holdout, SignatureSpec spec,
                              const EvaluateConfig& config) {
    if (spec.empty()) throw DataError("evaluate: empty signature");
    spec.standardization.clear(); // re-estimated on the holdout data

    EvaluationReport report;
    std::vector<WithinStudyEstimate> estimates;
    for (const auto& study : holdout) {
        if (study.complete_case_n() < config.min_n) {
            report.skipped_studies.push_back(study.study_id);
            continue;
        }
        const auto standardized = standardize_within_study(study, spec);
        const auto composed = compose_signature(standardized, spec);
        const std::size_t j = composed.n_markers() - 1; // "signature"
        if (auto est = estimate_study_marker(composed, j))
            estimates.push_back(*est);
        else
            report.skipped_studies.push_back(study.study_id);
    }
    if (estimates.size() < 2)
        throw InsufficientDataError("evaluate: fewer than 2 analyzable holdout studies");
    report.per_study = estimates;

    if (config.epsilon.is_fixed())
        report.epsilon_used = config.epsilon.fixed;
    else
        report.epsilon_used = select_epsilon_power(estimates, config.epsilon.alpha, config.epsilon.power);

    MetaInput input;
    input.marker_id = "signature";
    EffectPairs pairs;
    for (const auto& est : estimates) {
        input.deltas.push_back(est.delta);
        input.variances.push_back(est.var_delta);
        input.study_ids.push_back(est.study_id);
        input.n_per_study.push_back(est.n_effective);
        pairs.u_y.push_back(est.u_y);
        pairs.u_s.push_back(est.u_s);
        pairs.n_per_study.push_back(static_cast<double>(est.n_effective));
    }
    report.pooled = all_zero_variances(input)
                        ? pool_equal_weight(input, config.method, config.variance_method)
                        : pool_effects(input, config.method, config.variance_method);
    const auto ci = confidence_interval(report.pooled, 1.0 - 2.0 * config.alpha);
    report.pooled.ci_low = ci.first;
    report.pooled.ci_high = ci.second;
    if (config.method == PoolMethod::RE && config.variance_method == VarianceMethod::HKSJ) {
        const auto pi = prediction_interval(report.pooled, 0.95);
        report.pooled.pi_low = pi.first;
        report.pooled.pi_high = pi.second;
    }
    const auto tp =
        tost_p(report.pooled.mu_hat, report.pooled.se_pooled, report.pooled.df, report.epsilon_used);
    report.equivalence.marker_id = "signature";
    report.equivalence.p_lower = tp.p_lower;
    report.equivalence.p_upper = tp.p_upper;
    report.equivalence.p_tost = tp.p_tost;
    report.equivalence.p_adjusted = tp.p_tost; // single test
    report.equivalence.epsilon = report.epsilon_used;
    report.equivalence.significant = tp.p_tost < config.alpha;

    report.ccc_value = ccc(pairs);
    report.ccc_ci = bca_bootstrap_ci([](const EffectPairs& p) { return ccc(p); }, pairs,
                                     config.n_boot, 0.95, config.seed);
    try {
        report.icc_value = icc21(pairs);
        report.icc_ci = bca_bootstrap_ci([](const EffectPairs& p) { return icc21(p); }, pairs,
                                         config.n_boot, 0.95, config.seed + 1);
    } catch (const std::exception&) {
        report.icc_defined = false;
    }
    try {
        report.r2_value = r2_trial_wls(pairs);
        report.r2_ci = bca_bootstrap_ci([](const EffectPairs& p) { return r2_trial_wls(p); }, pairs,
                                        config.n_boot, 0.95, config.seed + 2);
    } catch (const std::exception&) {
        report.r2_defined = false;
    }
    return report;
}

} // namespace surrmeta
