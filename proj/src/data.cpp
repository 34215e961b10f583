#include "surrmeta/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "surrmeta/errors.hpp"
#include "surrmeta/rng.hpp"

namespace surrmeta {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

bool is_na(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan";
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    if (is_na(cell)) return missing_value();
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw ParseError("non-numeric cell '" + cell + "' in column '" + column + "' at data row " +
                         std::to_string(row));
    return value;
}

} // namespace

int StudyDataset::marker_index(const std::string& name) const {
    auto it = std::find(marker_names.begin(), marker_names.end(), name);
    return it == marker_names.end() ? -1 : static_cast<int>(it - marker_names.begin());
}

std::vector<std::string> StudyDataset::subject_ids() const {
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& r : records)
        if (seen.insert(r.subject_id).second) ids.push_back(r.subject_id);
    return ids;
}

std::size_t StudyDataset::complete_case_n() const {
    std::map<std::string, std::pair<bool, bool>> seen; // subject -> y present at (0, 1)
    for (const auto& r : records) {
        auto& flags = seen[r.subject_id];
        if (r.arm_or_time == 0)
            flags.first = !is_missing(r.y);
        else
            flags.second = !is_missing(r.y);
    }
    std::size_t n = 0;
    for (const auto& [id, flags] : seen) {
        if (design == Design::paired)
            n += (flags.first && flags.second) ? 1 : 0;
        else
            n += (flags.first || flags.second) ? 1 : 0;
    }
    return n;
}

void StudyDataset::validate() const {
    std::map<std::string, std::vector<int>> arms_by_subject;
    for (const auto& r : records) {
        if (r.arm_or_time != 0 && r.arm_or_time != 1)
            throw IntegrityError("study " + study_id + ": arm/time outside {0,1} for subject " +
                                 r.subject_id);
        if (r.s.size() != marker_names.size())
            throw IntegrityError("study " + study_id + ": marker count mismatch for subject " +
                                 r.subject_id);
        if (!is_missing(r.y) && !std::isfinite(r.y))
            throw IntegrityError("study " + study_id + ": non-finite y for subject " + r.subject_id);
        for (double v : r.s)
            if (!is_missing(v) && !std::isfinite(v))
                throw IntegrityError("study " + study_id + ": non-finite marker value for subject " +
                                     r.subject_id);
        arms_by_subject[r.subject_id].push_back(r.arm_or_time);
    }
    std::size_t arm0 = 0, arm1 = 0;
    for (const auto& [id, arms] : arms_by_subject) {
        if (design == Design::paired) {
            if (arms.size() != 2 || std::min(arms[0], arms[1]) != 0 || std::max(arms[0], arms[1]) != 1)
                throw IntegrityError("study " + study_id + ": paired subject " + id +
                                     " lacks exactly one pre and one post record");
        } else {
            if (arms.size() != 1)
                throw IntegrityError("study " + study_id + ": two-arm subject " + id +
                                     " has multiple records");
            (arms[0] == 0 ? arm0 : arm1)++;
        }
    }
    if (design == Design::two_arm && (arm0 == 0 || arm1 == 0))
        throw IntegrityError("study " + study_id + ": two-arm design with an empty arm");
}

std::vector<StudyDataset> parse_study_csv(const std::string& path, const ColumnMapping& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    return parse_study_csv(in, schema);
}

std::vector<StudyDataset> parse_study_csv(std::istream& in, const ColumnMapping& schema) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty input: no header row");
    const auto header = split_csv_line(line);

    auto find_col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("missing required column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t col_study = find_col(schema.study);
    const std::size_t col_subject = find_col(schema.subject);
    const std::size_t col_arm = find_col(schema.arm);
    const std::size_t col_y = find_col(schema.y);

    std::vector<std::string> marker_names;
    std::vector<std::size_t> marker_cols;
    if (schema.markers.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c == col_study || c == col_subject || c == col_arm || c == col_y) continue;
            marker_names.push_back(header[c]);
            marker_cols.push_back(c);
        }
    } else {
        for (const auto& name : schema.markers) {
            marker_cols.push_back(find_col(name));
            marker_names.push_back(name);
        }
    }

    std::vector<std::string> study_order;
    std::map<std::string, StudyDataset> by_study;
    std::set<std::tuple<std::string, std::string, int>> keys;

    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                             " fields, header has " + std::to_string(header.size()));

        SubjectRecord rec;
        rec.subject_id = fields[col_subject];
        const double arm = parse_cell(fields[col_arm], row, schema.arm);
        if (arm != 0.0 && arm != 1.0)
            throw ParseError("row " + std::to_string(row) + ": arm/time must be 0 or 1");
        rec.arm_or_time = static_cast<int>(arm);
        rec.y = parse_cell(fields[col_y], row, schema.y);
        rec.s.reserve(marker_cols.size());
        for (std::size_t k = 0; k < marker_cols.size(); ++k)
            rec.s.push_back(parse_cell(fields[marker_cols[k]], row, marker_names[k]));

        const std::string& study = fields[col_study];
        if (!keys.insert({study, rec.subject_id, rec.arm_or_time}).second)
            throw IntegrityError("duplicate (study, subject, arm) key: (" + study + ", " +
                                 rec.subject_id + ", " + std::to_string(rec.arm_or_time) + ")");

        auto it = by_study.find(study);
        if (it == by_study.end()) {
            study_order.push_back(study);
            StudyDataset ds;
            ds.study_id = study;
            ds.marker_names = marker_names;
            it = by_study.emplace(study, std::move(ds)).first;
        }
        it->second.records.push_back(std::move(rec));
    }

    std::vector<StudyDataset> out;
    out.reserve(study_order.size());
    for (const auto& study : study_order) {
        StudyDataset& ds = by_study[study];
        // Paired when every subject contributes both timepoints.
        bool all_paired = true, all_single = true;
        std::map<std::string, int> counts;
        for (const auto& r : ds.records) counts[r.subject_id]++;
        for (const auto& [id, c] : counts) {
            if (c != 2) all_paired = false;
            if (c != 1) all_single = false;
        }
        if (all_paired)
            ds.design = Design::paired;
        else if (all_single)
            ds.design = Design::two_arm;
        else
            throw IntegrityError("study " + study + ": mixed record multiplicity, cannot infer design");
        ds.validate();
        out.push_back(std::move(ds));
    }
    return out;
}

void write_study_csv(const std::vector<StudyDataset>& data, std::ostream& out) {
    if (data.empty()) throw DataError("nothing to write");
    const auto& markers = data.front().marker_names;
    for (const auto& ds : data)
        if (ds.marker_names != markers)
            throw IntegrityError("studies do not share a common marker list");

    out << "study,subject,arm,y";
    for (const auto& m : markers) out << ',' << m;
    out << '\n';
    out.precision(17);
    auto emit = [&](double v) {
        if (is_missing(v))
            out << "NA";
        else
            out << v;
    };
    for (const auto& ds : data) {
        for (const auto& r : ds.records) {
            out << ds.study_id << ',' << r.subject_id << ',' << r.arm_or_time << ',';
            emit(r.y);
            for (double v : r.s) {
                out << ',';
                emit(v);
            }
            out << '\n';
        }
    }
}

void write_study_csv(const std::vector<StudyDataset>& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open file for writing: " + path);
    write_study_csv(data, out);
}

GenesetCatalog parse_geneset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    return parse_geneset_csv(in);
}

GenesetCatalog parse_geneset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty geneset catalog");
    const auto header = split_csv_line(line);
    if (header.size() != 2 || header[0] != "geneset" || header[1] != "member")
        throw SchemaError("geneset catalog must have header 'geneset,member'");

    GenesetCatalog catalog;
    std::map<std::string, std::size_t> index;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 2) throw ParseError("geneset catalog row with wrong field count");
        auto it = index.find(fields[0]);
        if (it == index.end()) {
            index.emplace(fields[0], catalog.sets.size());
            catalog.sets.push_back({fields[0], {fields[1]}});
        } else {
            catalog.sets[it->second].second.push_back(fields[1]);
        }
    }
    return catalog;
}

std::vector<StudyDataset> filter_studies(const std::vector<StudyDataset>& data, std::size_t min_n,
                                         FilterReport* report) {
    if (min_n < 1) throw DataError("min_n must be >= 1");
    std::vector<StudyDataset> kept;
    for (const auto& ds : data) {
        const std::size_t n = ds.complete_case_n();
        if (n >= min_n) {
            kept.push_back(ds);
        } else if (report) {
            report->dropped.push_back({ds.study_id, n});
        }
    }
    if (kept.empty()) throw DataError("no studies remain after filtering at min_n=" + std::to_string(min_n));
    return kept;
}

StudyDataset aggregate_genesets(const StudyDataset& data, const GenesetCatalog& catalog,
                                std::vector<std::string>* dropped) {
    std::vector<std::string> new_names;
    std::vector<std::vector<std::size_t>> member_idx;
    for (const auto& [name, members] : catalog.sets) {
        std::vector<std::size_t> idx;
        for (const auto& m : members) {
            const int j = data.marker_index(m);
            if (j >= 0) idx.push_back(static_cast<std::size_t>(j));
        }
        if (idx.empty()) {
            if (dropped) dropped->push_back(name);
            continue;
        }
        new_names.push_back(name);
        member_idx.push_back(std::move(idx));
    }
    if (new_names.empty()) throw DataError("all genesets empty after intersection with available markers");

    StudyDataset out;
    out.study_id = data.study_id;
    out.design = data.design;
    out.marker_names = new_names;
    out.records.reserve(data.records.size());
    for (const auto& r : data.records) {
        SubjectRecord nr;
        nr.subject_id = r.subject_id;
        nr.arm_or_time = r.arm_or_time;
        nr.y = r.y;
        nr.s.reserve(member_idx.size());
        for (const auto& idx : member_idx) {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t j : idx) {
                if (!is_missing(r.s[j])) {
                    sum += r.s[j];
                    ++count;
                }
            }
            nr.s.push_back(count ? sum / static_cast<double>(count) : missing_value());
        }
        out.records.push_back(std::move(nr));
    }
    return out;
}

std::pair<StudyDataset, StudyDataset> split_within_study(const StudyDataset& data, double fraction,
                                                         std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw DataError("split fraction must lie in (0,1)");
    auto ids = data.subject_ids();
    const std::size_t n = ids.size();
    const auto n_first = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (n_first < 2 || n - n_first < 2)
        throw DataError("study " + data.study_id + ": split " + std::to_string(n_first) + "/" +
                        std::to_string(n - n_first) +
                        " leaves a part with fewer than 2 subjects; choose a different fraction");

    auto rng = substream(seed, data.study_id);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::set<std::string> first_set(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_first));

    StudyDataset a, b;
    a.study_id = b.study_id = data.study_id;
    a.design = b.design = data.design;
    a.marker_names = b.marker_names = data.marker_names;
    for (const auto& r : data.records)
        (first_set.count(r.subject_id) ? a : b).records.push_back(r);
    return {std::move(a), std::move(b)};
}

} // namespace surrmeta
