#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "omrc/corpus.hpp"

#include "test_util.hpp"

using namespace omrc;

namespace {

std::string record(const std::string& id, const std::string& title = "T", const std::string& abs = "A") {
    json j{{"id", id}, {"title", title}, {"abstract", abs}};
    return j.dump();
}

Document sample_doc() {
    Document d;
    d.id = "d1";
    d.title = "A study of things";
    d.abstract = "We study things in depth.";
    d.keywords = {"things", "study"};
    d.sections = {{"Introduction", "Things are interesting. They matter.", 0},
                  {"Method", "We count things carefully. Twice.", 1}};
    d.figures = {{"Figure 1", "Counts of things."}};
    d.tables = {{"Table 1", "Things by category."}};
    return d;
}

StructuredSummarySet sample_set(const std::string& doc_id) {
    StructuredSummarySet s;
    s.doc_id = doc_id;
    s.meta_summary = "Title: A study of things\nAbstract: We study things in depth.";
    for (Role role : kAllRoles) {
        RoleSummary rs;
        rs.role = role;
        rs.text = std::string("Summary for ") + role_name(role) + ". <Section: Method>";
        rs.anchors = {{SegmentKind::section, "1", 0, 10, false}};
        rs.variant_answers = {rs.text, rs.text + " alt"};
        s.role_summaries[role] = rs;
    }
    return s;
}

}  // namespace

TEST_CASE("load_corpus keeps valid records in file order") {
    testutil::TempDir tmp("corpus");
    testutil::write_file(tmp.file("c.jsonl"), record("a") + "\n" + record("b") + "\n" + record("c") + "\n");
    const auto result = load_corpus(tmp.file("c.jsonl"));
    REQUIRE(result.ok());
    REQUIRE(result.documents.size() == 3);
    CHECK(result.documents[0].id == "a");
    CHECK(result.documents[1].id == "b");
    CHECK(result.documents[2].id == "c");
}

TEST_CASE("load_corpus reports a duplicate id with its line number") {
    testutil::TempDir tmp("corpus");
    testutil::write_file(tmp.file("c.jsonl"),
                         record("d1") + "\n" + record("x") + "\n" + record("y") + "\n" + record("d1") + "\n");
    const auto result = load_corpus(tmp.file("c.jsonl"));
    REQUIRE(result.documents.size() == 3);
    REQUIRE(result.issues.size() == 1);
    CHECK(result.issues[0].severity == LoadIssue::Severity::error);
    CHECK(result.issues[0].line == 4);
    CHECK(result.issues[0].message.find("d1") != std::string::npos);
}

TEST_CASE("load_corpus on an empty file yields an empty corpus with zero issues") {
    testutil::TempDir tmp("corpus");
    testutil::write_file(tmp.file("c.jsonl"), "");
    const auto result = load_corpus(tmp.file("c.jsonl"));
    CHECK(result.documents.empty());
    CHECK(result.issues.empty());
}

TEST_CASE("load_corpus reports malformed records and keeps going") {
    testutil::TempDir tmp("corpus");
    testutil::write_file(tmp.file("c.jsonl"), record("a") + "\n{not json\n" + record("b") + "\n");
    const auto result = load_corpus(tmp.file("c.jsonl"));
    CHECK(result.documents.size() == 2);
    REQUIRE(result.issues.size() == 1);
    CHECK(result.issues[0].line == 2);
}

TEST_CASE("load_corpus warns on unknown fields and rejects bad invariants") {
    testutil::TempDir tmp("corpus");
    json with_extra{{"id", "a"}, {"title", "T"}, {"abstract", "A"}, {"venue", "X"}};
    json blank_title{{"id", "b"}, {"title", "   "}, {"abstract", "A"}};
    json bad_sections{{"id", "c"},
                      {"title", "T"},
                      {"abstract", "A"},
                      {"sections", json::array({{{"heading", "H"}, {"text", "t"}, {"index", 1}},
                                                {{"heading", "H2"}, {"text", "t"}, {"index", 0}}})}};
    testutil::write_file(tmp.file("c.jsonl"),
                         with_extra.dump() + "\n" + blank_title.dump() + "\n" + bad_sections.dump() + "\n");
    const auto result = load_corpus(tmp.file("c.jsonl"));
    CHECK(result.documents.size() == 1);
    REQUIRE(result.issues.size() == 3);
    CHECK(result.issues[0].severity == LoadIssue::Severity::warning);
    CHECK(result.issues[0].message.find("venue") != std::string::npos);
    CHECK(result.issues[1].line == 2);
    CHECK(result.issues[2].message.find("strictly increasing") != std::string::npos);
}

TEST_CASE("unreadable corpus file throws") {
    CHECK_THROWS_AS(load_corpus("/nonexistent/path/corpus.jsonl"), DataError);
}

TEST_CASE("ingestion is idempotent") {
    testutil::TempDir tmp("corpus");
    testutil::write_file(tmp.file("c.jsonl"), record("a") + "\n" + record("b") + "\n");
    const auto first = load_corpus(tmp.file("c.jsonl"));
    const auto second = load_corpus(tmp.file("c.jsonl"));
    CHECK(first.documents == second.documents);
}

TEST_CASE("build_meta_summary template") {
    Document d;
    d.id = "x";
    d.title = "A";
    d.abstract = "B";
    CHECK(build_meta_summary(d) == "Title: A\nAbstract: B");
    d.keywords = {"x", "y"};
    CHECK(build_meta_summary(d) == "Title: A\nAbstract: B\nKeywords: x; y");
    CHECK(build_meta_summary(d) == build_meta_summary(d));
}

TEST_CASE("summary persistence round-trips losslessly") {
    testutil::TempDir tmp("summaries");
    std::vector<StructuredSummarySet> sets;
    for (int i = 0; i < 5; ++i) sets.push_back(sample_set("doc" + std::to_string(i)));
    sets[2].metadata_only = true;
    sets[3].failed_roles = {"M"};
    sets[3].role_summaries.erase(Role::Method);

    const auto path = tmp.file("s.jsonl");
    CHECK(save_summaries(sets, path) == 5);
    const auto loaded = load_summaries(path);
    REQUIRE(loaded.size() == 5);
    CHECK(loaded == sets);
}

TEST_CASE("summary loader rejects newer schema versions") {
    testutil::TempDir tmp("summaries");
    const auto path = tmp.file("s.jsonl");
    testutil::write_file(path, "{\"schema_version\": 2}\n");
    CHECK_THROWS_WITH_AS(load_summaries(path), doctest::Contains("schema_version"), DataError);
}

TEST_CASE("empty summary list saves a header-only file that loads back empty") {
    testutil::TempDir tmp("summaries");
    const auto path = tmp.file("s.jsonl");
    CHECK(save_summaries({}, path) == 0);
    const std::string bytes = testutil::read_file(path);
    CHECK(bytes == "{\"schema_version\":1}\n");
    CHECK(load_summaries(path).empty());
}

TEST_CASE("document segments and markers") {
    const Document d = sample_doc();
    const auto segments = document_segments(d);
    REQUIRE(segments.size() == 4);
    CHECK(segments[0].marker == "<Section: Introduction>");
    CHECK(segments[1].marker == "<Section: Method>");
    CHECK(segments[2].marker == "<Figure: Figure 1>");
    CHECK(segments[3].marker == "<Table: Table 1>");
    CHECK(segments[1].ref == "1");
}

TEST_CASE("metadata-only documents expose the abstract as the sole segment") {
    Document d;
    d.id = "m";
    d.title = "T";
    d.abstract = "Only the abstract.";
    REQUIRE(is_metadata_only(d));
    const auto segments = document_segments(d);
    REQUIRE(segments.size() == 1);
    CHECK(segments[0].ref == "abstract");
    CHECK(segments[0].marker == "<Section: Abstract>");
    CHECK(*segments[0].text == d.abstract);
}

TEST_CASE("anchor resolution enforces referential integrity") {
    const Document d = sample_doc();
    EvidenceAnchor good{SegmentKind::section, "1", 0, 5, false};
    EvidenceAnchor bad_ref{SegmentKind::section, "7", 0, 5, false};
    EvidenceAnchor bad_span{SegmentKind::section, "1", 0, 10000, false};
    EvidenceAnchor fig{SegmentKind::figure, "Figure 1", 0, 6, false};
    CHECK(resolve_anchor(d, good) != nullptr);
    CHECK(resolve_anchor(d, bad_ref) == nullptr);
    CHECK(resolve_anchor(d, bad_span) == nullptr);
    CHECK(resolve_anchor(d, fig) != nullptr);

    auto set = sample_set(d.id);
    CHECK(check_anchor_integrity({d}, {set}).empty());
    set.role_summaries[Role::Objective].anchors[0].segment_ref = "9";
    CHECK(check_anchor_integrity({d}, {set}).size() == 1);
}
