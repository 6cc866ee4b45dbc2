#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omrc/common.hpp"

namespace omrc {

enum class Language { en, zh, other };

inline const char* language_key(Language l) {
    switch (l) {
        case Language::en: return "en";
        case Language::zh: return "zh";
        case Language::other: return "other";
    }
    return "other";
}

inline Language language_from_key(const std::string& key) {
    if (key == "en") return Language::en;
    if (key == "zh") return Language::zh;
    if (key == "other") return Language::other;
    throw std::invalid_argument("unknown language: " + key);
}

struct Section {
    std::string heading;
    std::string text;
    int index = 0;

    bool operator==(const Section&) const = default;
};

struct Caption {
    std::string ref_id;  // e.g. "Figure 2"
    std::string text;

    bool operator==(const Caption&) const = default;
};

struct Document {
    std::string id;
    std::string title;
    std::string abstract;
    std::vector<std::string> keywords;
    Language language = Language::en;
    std::vector<Section> sections;
    std::vector<Caption> figures;
    std::vector<Caption> tables;
    std::optional<std::string> cluster_label;
    std::optional<std::string> discipline;

    bool operator==(const Document&) const = default;
};

enum class SegmentKind { section, figure, table };

inline const char* segment_kind_key(SegmentKind k) {
    switch (k) {
        case SegmentKind::section: return "section";
        case SegmentKind::figure: return "figure";
        case SegmentKind::table: return "table";
    }
    return "?";
}

inline SegmentKind segment_kind_from_key(const std::string& key) {
    if (key == "section") return SegmentKind::section;
    if (key == "figure") return SegmentKind::figure;
    if (key == "table") return SegmentKind::table;
    throw std::invalid_argument("unknown segment kind: " + key);
}

// Pointer into a document segment grounding a generated answer.
// segment_ref is the section index rendered as a decimal string (or the
// pseudo-ref "abstract" for metadata-only documents) for sections, and the
// caption ref_id for figures/tables. char_span is [begin, end) into the
// segment text.
struct EvidenceAnchor {
    SegmentKind segment_kind = SegmentKind::section;
    std::string segment_ref;
    std::size_t span_begin = 0;
    std::size_t span_end = 0;
    bool inferred = false;  // set when the answer cited no known marker

    bool operator==(const EvidenceAnchor&) const = default;
};

struct RoleSummary {
    Role role = Role::Objective;
    std::string text;
    std::vector<EvidenceAnchor> anchors;
    std::vector<std::string> variant_answers;  // the K raw candidates pre-aggregation

    bool operator==(const RoleSummary&) const = default;
};

struct StructuredSummarySet {
    std::string doc_id;
    std::string meta_summary;
    std::map<Role, RoleSummary> role_summaries;
    bool metadata_only = false;
    std::vector<std::string> failed_roles;  // role keys whose generation failed

    bool complete() const {
        return failed_roles.empty() && (role_summaries.size() == 4 || (metadata_only && role_summaries.empty()));
    }

    bool operator==(const StructuredSummarySet&) const = default;
};

// A uniform read-only view over a document's evidence segments: sections in
// order, then figures, then tables. A document with no segments at all
// exposes its abstract as a single pseudo-section (metadata-only mode).
struct SegmentView {
    SegmentKind kind = SegmentKind::section;
    std::string ref;      // anchor segment_ref for this segment
    std::string marker;   // layout marker, e.g. "<Section: Method>"
    const std::string* text = nullptr;
};

inline std::string section_marker(const std::string& heading) { return "<Section: " + heading + ">"; }
inline std::string figure_marker(const std::string& ref_id) { return "<Figure: " + ref_id + ">"; }
inline std::string table_marker(const std::string& ref_id) { return "<Table: " + ref_id + ">"; }

inline bool is_metadata_only(const Document& doc) {
    return doc.sections.empty() && doc.figures.empty() && doc.tables.empty();
}

inline std::vector<SegmentView> document_segments(const Document& doc) {
    std::vector<SegmentView> out;
    if (is_metadata_only(doc)) {
        out.push_back({SegmentKind::section, "abstract", section_marker("Abstract"), &doc.abstract});
        return out;
    }
    for (const auto& s : doc.sections)
        out.push_back({SegmentKind::section, std::to_string(s.index), section_marker(s.heading), &s.text});
    for (const auto& f : doc.figures)
        out.push_back({SegmentKind::figure, f.ref_id, figure_marker(f.ref_id), &f.text});
    for (const auto& t : doc.tables)
        out.push_back({SegmentKind::table, t.ref_id, table_marker(t.ref_id), &t.text});
    return out;
}

// Resolves an anchor against its document; returns the segment text or
// nullptr when the reference (or span) is invalid.
inline const std::string* resolve_anchor(const Document& doc, const EvidenceAnchor& a) {
    const std::string* text = nullptr;
    switch (a.segment_kind) {
        case SegmentKind::section: {
            if (a.segment_ref == "abstract") {
                text = &doc.abstract;
                break;
            }
            for (const auto& s : doc.sections) {
                if (std::to_string(s.index) == a.segment_ref) {
                    text = &s.text;
                    break;
                }
            }
            break;
        }
        case SegmentKind::figure: {
            for (const auto& f : doc.figures)
                if (f.ref_id == a.segment_ref) {
                    text = &f.text;
                    break;
                }
            break;
        }
        case SegmentKind::table: {
            for (const auto& t : doc.tables)
                if (t.ref_id == a.segment_ref) {
                    text = &t.text;
                    break;
                }
            break;
        }
    }
    if (text == nullptr) return nullptr;
    if (a.span_begin >= a.span_end || a.span_end > text->size()) return nullptr;
    return text;
}

namespace detail {

inline std::string collapse_whitespace(const std::string& s) {
    std::string out;
    bool in_ws = true;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_ws) out.push_back(' ');
            in_ws = true;
        } else {
            out.push_back(c);
            in_ws = false;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

}  // namespace detail

// --- JSON serialization -----------------------------------------------------

using json = nlohmann::json;

inline json to_json(const Section& s) { return json{{"heading", s.heading}, {"text", s.text}, {"index", s.index}}; }
inline json to_json(const Caption& c) { return json{{"ref_id", c.ref_id}, {"text", c.text}}; }

inline json to_json(const Document& d) {
    json j{{"id", d.id},
           {"title", d.title},
           {"abstract", d.abstract},
           {"keywords", d.keywords},
           {"language", language_key(d.language)},
           {"sections", json::array()},
           {"figures", json::array()},
           {"tables", json::array()}};
    for (const auto& s : d.sections) j["sections"].push_back(to_json(s));
    for (const auto& f : d.figures) j["figures"].push_back(to_json(f));
    for (const auto& t : d.tables) j["tables"].push_back(to_json(t));
    if (d.cluster_label) j["cluster_label"] = *d.cluster_label;
    if (d.discipline) j["discipline"] = *d.discipline;
    return j;
}

inline json to_json(const EvidenceAnchor& a) {
    return json{{"segment_kind", segment_kind_key(a.segment_kind)},
                {"segment_ref", a.segment_ref},
                {"char_span", json::array({a.span_begin, a.span_end})},
                {"inferred", a.inferred}};
}

inline json to_json(const RoleSummary& r) {
    json anchors = json::array();
    for (const auto& a : r.anchors) anchors.push_back(to_json(a));
    return json{{"role", role_key(r.role)},
                {"text", r.text},
                {"anchors", anchors},
                {"variant_answers", r.variant_answers}};
}

inline json to_json(const StructuredSummarySet& s) {
    json roles = json::object();
    for (const auto& [role, rs] : s.role_summaries) roles[role_key(role)] = to_json(rs);
    return json{{"doc_id", s.doc_id},
                {"meta_summary", s.meta_summary},
                {"role_summaries", roles},
                {"metadata_only", s.metadata_only},
                {"failed_roles", s.failed_roles}};
}

// One issue found while ingesting a corpus or summary file.
struct LoadIssue {
    enum class Severity { warning, error };
    Severity severity = Severity::error;
    std::size_t line = 0;  // 1-based; 0 when not line-specific
    std::string message;
};

struct CorpusLoadResult {
    std::vector<Document> documents;
    std::vector<LoadIssue> issues;

    bool ok() const {
        return std::none_of(issues.begin(), issues.end(),
                            [](const LoadIssue& i) { return i.severity == LoadIssue::Severity::error; });
    }
};

namespace detail {

inline const std::set<std::string>& document_known_fields() {
    static const std::set<std::string> fields = {"id",       "title",    "abstract", "keywords", "language",
                                                 "sections", "figures",  "tables",   "cluster_label",
                                                 "discipline"};
    return fields;
}

inline Document document_from_json(const json& j, std::vector<std::string>& warnings) {
    if (!j.is_object()) throw DataError("record is not a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!document_known_fields().count(it.key())) warnings.push_back("unknown field ignored: " + it.key());
    }
    Document d;
    d.id = j.value("id", std::string{});
    d.title = j.value("title", std::string{});
    d.abstract = j.value("abstract", std::string{});
    if (j.contains("keywords")) d.keywords = j.at("keywords").get<std::vector<std::string>>();
    if (j.contains("language")) d.language = language_from_key(j.at("language").get<std::string>());
    if (j.contains("sections")) {
        int prev = -1;
        for (const auto& sj : j.at("sections")) {
            Section s;
            s.heading = sj.value("heading", std::string{});
            s.text = sj.value("text", std::string{});
            s.index = sj.at("index").get<int>();
            if (s.index <= prev) throw DataError("section indexes not strictly increasing");
            prev = s.index;
            d.sections.push_back(std::move(s));
        }
    }
    auto read_captions = [](const json& arr) {
        std::vector<Caption> out;
        for (const auto& cj : arr) {
            Caption c;
            c.ref_id = cj.value("ref_id", std::string{});
            c.text = cj.value("text", std::string{});
            if (c.ref_id.empty()) throw DataError("caption with empty ref_id");
            out.push_back(std::move(c));
        }
        return out;
    };
    if (j.contains("figures")) d.figures = read_captions(j.at("figures"));
    if (j.contains("tables")) d.tables = read_captions(j.at("tables"));
    if (j.contains("cluster_label") && !j.at("cluster_label").is_null())
        d.cluster_label = j.at("cluster_label").get<std::string>();
    if (j.contains("discipline") && !j.at("discipline").is_null())
        d.discipline = j.at("discipline").get<std::string>();

    if (d.id.empty()) throw DataError("document id is empty");
    if (collapse_whitespace(d.title).empty()) throw DataError("document title is empty");
    if (collapse_whitespace(d.abstract).empty()) throw DataError("document abstract is empty");
    return d;
}

inline EvidenceAnchor anchor_from_json(const json& j) {
    EvidenceAnchor a;
    a.segment_kind = segment_kind_from_key(j.at("segment_kind").get<std::string>());
    a.segment_ref = j.at("segment_ref").get<std::string>();
    const auto& span = j.at("char_span");
    a.span_begin = span.at(0).get<std::size_t>();
    a.span_end = span.at(1).get<std::size_t>();
    a.inferred = j.value("inferred", false);
    if (a.span_begin >= a.span_end) throw DataError("anchor char_span is empty or inverted");
    return a;
}

inline RoleSummary role_summary_from_json(const json& j) {
    RoleSummary r;
    r.role = role_from_key(j.at("role").get<std::string>());
    r.text = j.at("text").get<std::string>();
    for (const auto& aj : j.at("anchors")) r.anchors.push_back(anchor_from_json(aj));
    r.variant_answers = j.at("variant_answers").get<std::vector<std::string>>();
    if (r.text.empty()) throw DataError("role summary text is empty");
    return r;
}

inline StructuredSummarySet summary_set_from_json(const json& j) {
    StructuredSummarySet s;
    s.doc_id = j.at("doc_id").get<std::string>();
    s.meta_summary = j.at("meta_summary").get<std::string>();
    s.metadata_only = j.value("metadata_only", false);
    if (j.contains("failed_roles")) s.failed_roles = j.at("failed_roles").get<std::vector<std::string>>();
    for (auto it = j.at("role_summaries").begin(); it != j.at("role_summaries").end(); ++it) {
        RoleSummary rs = role_summary_from_json(it.value());
        if (role_key(rs.role) != it.key()) throw DataError("role_summaries key does not match role field");
        s.role_summaries[rs.role] = std::move(rs);
    }
    return s;
}

}  // namespace detail

// --- Operations --------------------------------------------------------------

// Reads a JSONL corpus file. Invalid records are reported with their line
// number and skipped; valid records are returned in file order.
inline CorpusLoadResult load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read corpus file: " + path);

    CorpusLoadResult result;
    std::map<std::string, std::size_t> seen_ids;  // id -> first line
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            std::vector<std::string> warnings;
            Document d = detail::document_from_json(j, warnings);
            for (const auto& w : warnings)
                result.issues.push_back({LoadIssue::Severity::warning, line_no, w});
            auto [it, inserted] = seen_ids.emplace(d.id, line_no);
            if (!inserted) {
                result.issues.push_back({LoadIssue::Severity::error, line_no,
                                         "duplicate document id \"" + d.id + "\" (first seen on line " +
                                             std::to_string(it->second) + ")"});
                continue;
            }
            result.documents.push_back(std::move(d));
        } catch (const json::exception& e) {
            result.issues.push_back({LoadIssue::Severity::error, line_no, std::string("malformed JSON: ") + e.what()});
        } catch (const std::exception& e) {
            result.issues.push_back({LoadIssue::Severity::error, line_no, e.what()});
        }
    }
    return result;
}

// Deterministic metadata summary: "Title: ...\nAbstract: ...[\nKeywords: a; b]".
inline std::string build_meta_summary(const Document& doc) {
    std::string out = "Title: " + doc.title + "\nAbstract: " + doc.abstract;
    if (!doc.keywords.empty()) {
        out += "\nKeywords: ";
        for (std::size_t i = 0; i < doc.keywords.size(); ++i) {
            if (i > 0) out += "; ";
            out += doc.keywords[i];
        }
    }
    return out;
}

inline constexpr int kSummarySchemaVersion = 1;

// Writes summaries as JSONL with a {"schema_version": 1} header line.
inline std::size_t save_summaries(const std::vector<StructuredSummarySet>& sets, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write summary file: " + path);
    out << json{{"schema_version", kSummarySchemaVersion}}.dump() << "\n";
    for (const auto& s : sets) out << to_json(s).dump() << "\n";
    if (!out) throw DataError("I/O failure while writing summary file: " + path);
    return sets.size();
}

inline std::vector<StructuredSummarySet> load_summaries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read summary file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("summary file is empty (missing schema header): " + path);
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw DataError(std::string("summary file header is not valid JSON: ") + e.what());
    }
    if (!header.contains("schema_version")) throw DataError("summary file header lacks schema_version");
    const int version = header.at("schema_version").get<int>();
    if (version != kSummarySchemaVersion)
        throw DataError("unsupported summary schema_version " + std::to_string(version) + " (expected " +
                        std::to_string(kSummarySchemaVersion) + ")");

    std::vector<StructuredSummarySet> sets;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            sets.push_back(detail::summary_set_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw DataError("summary file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return sets;
}

// Checks that every anchor in every summary resolves against its document.
// Returns human-readable violations; empty means the corpus is consistent.
inline std::vector<std::string> check_anchor_integrity(const std::vector<Document>& docs,
                                                       const std::vector<StructuredSummarySet>& sets) {
    std::map<std::string, const Document*> by_id;
    for (const auto& d : docs) by_id[d.id] = &d;
    std::vector<std::string> violations;
    for (const auto& s : sets) {
        auto it = by_id.find(s.doc_id);
        if (it == by_id.end()) {
            violations.push_back("summary for unknown document " + s.doc_id);
            continue;
        }
        for (const auto& [role, rs] : s.role_summaries) {
            for (const auto& a : rs.anchors) {
                if (resolve_anchor(*it->second, a) == nullptr)
                    violations.push_back("doc " + s.doc_id + " role " + role_key(role) +
                                         ": anchor does not resolve (kind=" + segment_kind_key(a.segment_kind) +
                                         ", ref=" + a.segment_ref + ", span=[" + std::to_string(a.span_begin) + "," +
                                         std::to_string(a.span_end) + "))");
            }
        }
    }
    return violations;
}

}  // namespace omrc
