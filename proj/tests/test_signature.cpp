#include <doctest.h>

#include <cmath>

#include "surrmeta/data.hpp"
#include "surrmeta/errors.hpp"
#include "surrmeta/signature.hpp"

using namespace surrmeta;

namespace {

StudyDataset one_study(std::vector<std::string> markers,
                       std::vector<std::pair<double, std::vector<double>>> rows) {
    StudyDataset ds;
    ds.study_id = "A";
    ds.design = Design::paired;
    ds.marker_names = std::move(markers);
    int idx = 0;
    for (auto& [y, s] : rows) {
        SubjectRecord r;
        r.subject_id = "s" + std::to_string(idx / 2);
        r.arm_or_time = idx % 2;
        r.y = y;
        r.s = std::move(s);
        ds.records.push_back(std::move(r));
        ++idx;
    }
    return ds;
}

} // namespace

TEST_CASE("signature_weights") {
    // single marker, centered at zero: a = 1, lambda = 1
    auto spec = signature_weights({"m"}, {0.0}, 0.1, {{0.01, 0.02}}, {0.005});
    REQUIRE(spec.members.size() == 1);
    CHECK(spec.members[0].a_component == doctest::Approx(1.0));
    CHECK(spec.members[0].b_component == doctest::Approx(1.0 / 0.015 + 1.0 / 0.025));
    CHECK(spec.members[0].lambda == doctest::Approx(1.0));
    CHECK(spec.epsilon_used == 0.1);

    // ordering follows the strength-precision product
    auto multi = signature_weights({"strong", "weak"}, {0.0, 0.05}, 0.1,
                                   {{0.01}, {0.01}}, {0.0, 0.0});
    CHECK(multi.members[0].lambda == doctest::Approx(1.0));
    CHECK(multi.members[1].lambda == doctest::Approx(0.5)); // a = 0.5, same b

    // scaling every total variance by c scales b uniformly, lambdas unchanged
    auto scaled = signature_weights({"strong", "weak"}, {0.0, 0.05}, 0.1,
                                    {{0.04}, {0.04}}, {0.0, 0.0});
    CHECK(scaled.members[0].lambda == doctest::Approx(multi.members[0].lambda));
    CHECK(scaled.members[1].lambda == doctest::Approx(multi.members[1].lambda));

    CHECK_THROWS_AS(signature_weights({"m"}, {0.2}, 0.1, {{0.01}}, {0.0}), DataError);
    CHECK_THROWS_AS(signature_weights({}, {}, 0.1, {}, {}), DataError);
    CHECK_THROWS_AS(signature_weights({"m"}, {0.1}, 0.1, {{0.01}}, {0.0}), NumericalError);
}

TEST_CASE("standardize_within_study pools both records per subject") {
    auto ds = one_study({"m"}, {{0.0, {1.0}}, {1.0, {2.0}}, {0.0, {3.0}}, {1.0, {2.0}}});
    SignatureSpec spec;
    spec.members.push_back({"m", 1.0, 1.0, 1.0, 0.0});
    auto out = standardize_within_study(ds, spec);
    // values [1,2,3,2]: mean 2, sample sd sqrt(2/3)
    const double sd = std::sqrt(2.0 / 3.0);
    CHECK(out.records[0].s[0] == doctest::Approx(-1.0 / sd));
    CHECK(out.records[1].s[0] == doctest::Approx(0.0));
    CHECK(out.records[2].s[0] == doctest::Approx(1.0 / sd));
    auto [mean, stored_sd] = spec.standardization.at("A").at("m");
    CHECK(mean == doctest::Approx(2.0));
    CHECK(stored_sd == doctest::Approx(sd));

    auto constant = one_study({"m"}, {{0.0, {5.0}}, {1.0, {5.0}}});
    SignatureSpec spec2;
    spec2.members.push_back({"m", 1.0, 1.0, 1.0, 0.0});
    CHECK_THROWS_AS(standardize_within_study(constant, spec2), NumericalError);

    SignatureSpec absent;
    absent.members.push_back({"zz", 1.0, 1.0, 1.0, 0.0});
    CHECK_THROWS_AS(standardize_within_study(ds, absent), DataError);
}

TEST_CASE("compose_signature appends the weighted sum") {
    auto ds = one_study({"m1", "m2"}, {{0.0, {0.2, -0.4}}, {1.0, {1.0, 1.0}}});
    SignatureSpec spec;
    spec.members.push_back({"m1", 1.0, 1.0, 1.0, 0.0});
    spec.members.push_back({"m2", 0.5, 0.5, 1.0, 0.0});
    auto out = compose_signature(ds, spec);
    REQUIRE(out.marker_names.back() == "signature");
    CHECK(out.records[0].s.back() == doctest::Approx(0.2 + 0.5 * (-0.4)));
    CHECK(out.records[1].s.back() == doctest::Approx(1.5));

    // missing member masks the composite for that record
    auto with_na = one_study({"m1", "m2"}, {{0.0, {0.2, missing_value()}}, {1.0, {1.0, 1.0}}});
    auto out_na = compose_signature(with_na, spec);
    CHECK(is_missing(out_na.records[0].s.back()));
    CHECK(out_na.records[1].s.back() == doctest::Approx(1.5));

    // singleton identity: composite equals the member values
    SignatureSpec single;
    single.members.push_back({"m1", 1.0, 1.0, 1.0, 0.0});
    auto ident = compose_signature(ds, single);
    CHECK(ident.records[0].s.back() == ds.records[0].s[0]);
    CHECK(ident.records[1].s.back() == ds.records[1].s[0]);

    CHECK_THROWS_AS(compose_signature(ds, SignatureSpec{}), DataError);
}

TEST_CASE("signature spec JSON round trip") {
    auto spec = signature_weights({"m1", "m2"}, {0.02, -0.05}, 0.1,
                                  {{0.01, 0.03}, {0.02, 0.02}}, {0.001, 0.0});
    spec.standardization["A"]["m1"] = {1.5, 0.25};
    spec.standardization["B"]["m2"] = {-0.5, 2.0};

    auto again = SignatureSpec::from_json(spec.to_json());
    REQUIRE(again.members.size() == spec.members.size());
    CHECK(again.epsilon_used == spec.epsilon_used);
    for (std::size_t k = 0; k < spec.members.size(); ++k) {
        CHECK(again.members[k].marker_id == spec.members[k].marker_id);
        CHECK(again.members[k].lambda == spec.members[k].lambda);
        CHECK(again.members[k].a_component == spec.members[k].a_component);
        CHECK(again.members[k].b_component == spec.members[k].b_component);
        CHECK(again.members[k].mu_hat == spec.members[k].mu_hat);
    }
    CHECK(again.standardization == spec.standardization);

    CHECK_THROWS_AS(SignatureSpec::from_json("not json"), ParseError);
}
