#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "surrmeta/data.hpp"

namespace surrmeta {

struct SignatureMember {
    std::string marker_id;
    double lambda = 1.0;      // normalized weight, max over members = 1
    double a_component = 0.0; // strength: (eps - |mu|) / eps
    double b_component = 0.0; // precision: sum of inverse total variances
    double mu_hat = 0.0;
};

struct SignatureSpec {
    std::vector<SignatureMember> members;
    // (study, marker) -> standardization parameters, re-estimated on the data
    // being composed.
    std::map<std::string, std::map<std::string, std::pair<double, double>>> standardization;
    double epsilon_used = 0.0;

    bool empty() const { return members.empty(); }

    std::string to_json() const;
    static SignatureSpec from_json(const std::string& text);
};

// Weights for the screened set: a_j = (eps - |mu_j|)/eps,
// b_j = sum_m 1/(sigma2_{m,j} + tau2_j), lambda_j = a_j b_j / max_k a_k b_k.
// sigma2_by_marker holds, per member (same order as marker_ids), the
// per-study within-study variances.
SignatureSpec signature_weights(const std::vector<std::string>& marker_ids,
                                const std::vector<double>& mu_hats, double epsilon,
                                const std::vector<std::vector<double>>& sigma2_by_marker,
                                const std::vector<double>& tau2_by_marker);

// Center/scale each member marker within the study, pooling all records, and
// store the parameters in the spec. Throws on zero within-study sd.
StudyDataset standardize_within_study(const StudyDataset& data, SignatureSpec& spec);

// Weighted sum of standardized members, appended as marker "signature".
StudyDataset compose_signature(const StudyDataset& standardized, const SignatureSpec& spec);

} // namespace surrmeta
