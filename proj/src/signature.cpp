#include "surrmeta/signature.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "surrmeta/errors.hpp"

namespace surrmeta {

SignatureSpec signature_weights(const std::vector<std::string>& marker_ids,
                                const std::vector<double>& mu_hats, double epsilon,
                                const std::vector<std::vector<double>>& sigma2_by_marker,
                                const std::vector<double>& tau2_by_marker) {
    if (marker_ids.empty()) throw DataError("signature weights: no markers to compose");
    if (mu_hats.size() != marker_ids.size() || sigma2_by_marker.size() != marker_ids.size() ||
        tau2_by_marker.size() != marker_ids.size())
        throw DataError("signature weights: input length mismatch");
    if (!(epsilon > 0.0)) throw DataError("signature weights: epsilon must be positive");

    SignatureSpec spec;
    spec.epsilon_used = epsilon;
    double max_ab = 0.0;
    for (std::size_t j = 0; j < marker_ids.size(); ++j) {
        SignatureMember member;
        member.marker_id = marker_ids[j];
        member.mu_hat = mu_hats[j];
        member.a_component = (epsilon - std::abs(mu_hats[j])) / epsilon;
        if (member.a_component < 0.0)
            throw DataError("signature weights: |mu| exceeds epsilon for marker " + marker_ids[j]);
        double b = 0.0;
        for (double sigma2 : sigma2_by_marker[j]) {
            const double total = sigma2 + tau2_by_marker[j];
            if (total < 0.0)
                throw NumericalError("signature weights: negative total variance for marker " +
                                     marker_ids[j]);
            // a zero total variance marks a degenerate, effectively exact study
            b += 1.0 / std::max(total, 1e-12);
        }
        member.b_component = b;
        max_ab = std::max(max_ab, member.a_component * member.b_component);
        spec.members.push_back(std::move(member));
    }
    if (!(max_ab > 0.0))
        throw NumericalError("signature weights: all strength-precision products are zero");
    for (auto& member : spec.members)
        member.lambda = member.a_component * member.b_component / max_ab;
    return spec;
}

StudyDataset standardize_within_study(const StudyDataset& data, SignatureSpec& spec) {
    std::vector<std::size_t> member_idx;
    for (const auto& member : spec.members) {
        const int j = data.marker_index(member.marker_id);
        if (j < 0)
            throw DataError("standardize: marker '" + member.marker_id + "' absent from study " +
                            data.study_id);
        member_idx.push_back(static_cast<std::size_t>(j));
    }

    StudyDataset out = data;
    auto& params = spec.standardization[data.study_id];
    for (std::size_t k = 0; k < member_idx.size(); ++k) {
        const std::size_t j = member_idx[k];
        double sum = 0.0, sum2 = 0.0;
        std::size_t n = 0;
        for (const auto& r : data.records) {
            if (is_missing(r.s[j])) continue;
            sum += r.s[j];
            sum2 += r.s[j] * r.s[j];
            ++n;
        }
        if (n < 2)
            throw InsufficientDataError("standardize: fewer than 2 observations of marker '" +
                                        spec.members[k].marker_id + "' in study " + data.study_id);
        const double m = sum / static_cast<double>(n);
        const double var = (sum2 - sum * m) / static_cast<double>(n - 1);
        if (!(var > 0.0))
            throw NumericalError("standardize: constant marker '" + spec.members[k].marker_id +
                                 "' in study " + data.study_id);
        const double sd = std::sqrt(var);
        params[spec.members[k].marker_id] = {m, sd};
        for (auto& r : out.records)
            if (!is_missing(r.s[j])) r.s[j] = (r.s[j] - m) / sd;
    }
    return out;
}

StudyDataset compose_signature(const StudyDataset& standardized, const SignatureSpec& spec) {
    if (spec.empty()) throw DataError("compose: empty signature");
    std::vector<std::size_t> member_idx;
    for (const auto& member : spec.members) {
        const int j = standardized.marker_index(member.marker_id);
        if (j < 0)
            throw DataError("compose: marker '" + member.marker_id + "' absent from study " +
                            standardized.study_id);
        member_idx.push_back(static_cast<std::size_t>(j));
    }

    StudyDataset out = standardized;
    out.marker_names.push_back("signature");
    for (auto& r : out.records) {
        double value = 0.0;
        bool missing = false;
        for (std::size_t k = 0; k < member_idx.size(); ++k) {
            const double v = r.s[member_idx[k]];
            if (is_missing(v)) {
                missing = true;
                break;
            }
            value += spec.members[k].lambda * v;
        }
        r.s.push_back(missing ? missing_value() : value);
    }
    return out;
}

std::string SignatureSpec::to_json() const {
    nlohmann::json j;
    j["epsilon"] = epsilon_used;
    j["members"] = nlohmann::json::array();
    for (const auto& member : members) {
        j["members"].push_back({{"marker", member.marker_id},
                                {"lambda", member.lambda},
                                {"a", member.a_component},
                                {"b", member.b_component},
                                {"mu_hat", member.mu_hat}});
    }
    nlohmann::json std_json = nlohmann::json::object();
    for (const auto& [study, by_marker] : standardization) {
        nlohmann::json entry = nlohmann::json::object();
        for (const auto& [marker, ms] : by_marker)
            entry[marker] = {{"mean", ms.first}, {"sd", ms.second}};
        std_json[study] = std::move(entry);
    }
    j["standardization"] = std::move(std_json);
    return j.dump(2);
}

SignatureSpec SignatureSpec::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("signature JSON: ") + e.what());
    }
    SignatureSpec spec;
    spec.epsilon_used = j.at("epsilon").get<double>();
    for (const auto& entry : j.at("members")) {
        SignatureMember member;
        member.marker_id = entry.at("marker").get<std::string>();
        member.lambda = entry.at("lambda").get<double>();
        member.a_component = entry.at("a").get<double>();
        member.b_component = entry.at("b").get<double>();
        member.mu_hat = entry.value("mu_hat", 0.0);
        spec.members.push_back(std::move(member));
    }
    if (j.contains("standardization")) {
        for (const auto& [study, by_marker] : j.at("standardization").items())
            for (const auto& [marker, ms] : by_marker.items())
                spec.standardization[study][marker] = {ms.at("mean").get<double>(),
                                                       ms.at("sd").get<double>()};
    }
    return spec;
}

} // namespace surrmeta
