#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace surrmeta {

enum class Design { paired, two_arm };

inline bool is_missing(double v) { return std::isnan(v); }
constexpr double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }

// One row of the long-format input: a subject measured at one arm/timepoint.
// Missing entries are stored as NaN.
struct SubjectRecord {
    std::string subject_id;
    int arm_or_time = 0; // 0 = control/pre, 1 = treated/post
    double y = missing_value();
    std::vector<double> s;
};

struct StudyDataset {
    std::string study_id;
    Design design = Design::paired;
    std::vector<std::string> marker_names;
    std::vector<SubjectRecord> records;

    std::size_t n_markers() const { return marker_names.size(); }
    int marker_index(const std::string& name) const;

    // Subjects with a non-missing primary endpoint at every required record
    // (both timepoints when paired, the single record otherwise).
    std::size_t complete_case_n() const;
    std::vector<std::string> subject_ids() const;

    void validate() const; // throws IntegrityError on structural violations
};

struct ColumnMapping {
    std::string study = "study";
    std::string subject = "subject";
    std::string arm = "arm";
    std::string y = "y";
    // Markers default to every remaining column, in header order.
    std::vector<std::string> markers;
};

struct GenesetCatalog {
    // geneset name -> member feature names, in catalog order
    std::vector<std::pair<std::string, std::vector<std::string>>> sets;
};

std::vector<StudyDataset> parse_study_csv(const std::string& path, const ColumnMapping& schema = {});
std::vector<StudyDataset> parse_study_csv(std::istream& in, const ColumnMapping& schema = {});

void write_study_csv(const std::vector<StudyDataset>& data, std::ostream& out);
void write_study_csv(const std::vector<StudyDataset>& data, const std::string& path);

GenesetCatalog parse_geneset_csv(const std::string& path);
GenesetCatalog parse_geneset_csv(std::istream& in);

struct FilterReport {
    std::vector<std::pair<std::string, std::size_t>> dropped; // (study, complete-case n)
};

std::vector<StudyDataset> filter_studies(const std::vector<StudyDataset>& data,
                                         std::size_t min_n,
                                         FilterReport* report = nullptr);

// Replaces the marker dimension with geneset means. Genesets with no member
// among the available markers are dropped and reported via `dropped`.
StudyDataset aggregate_genesets(const StudyDataset& data, const GenesetCatalog& catalog,
                                std::vector<std::string>* dropped = nullptr);

// Subject-level seeded split: first part gets floor(fraction * n) subjects.
std::pair<StudyDataset, StudyDataset> split_within_study(const StudyDataset& data,
                                                         double fraction,
                                                         std::uint64_t seed);

} // namespace surrmeta
