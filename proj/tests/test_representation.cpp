#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "omrc/representation.hpp"

#include "test_util.hpp"

using namespace omrc;

namespace {

StructuredSummarySet minimal_set(const std::string& id) {
    StructuredSummarySet s;
    s.doc_id = id;
    s.meta_summary = "Title: A\nAbstract: B";
    for (Role role : kAllRoles) {
        RoleSummary rs;
        rs.role = role;
        rs.text = std::string(role_name(role)) + " summary text";
        rs.anchors = {{SegmentKind::section, "abstract", 0, 1, false}};
        rs.variant_answers = {rs.text};
        s.role_summaries[role] = rs;
    }
    return s;
}

ProjectionHead identity_head(std::size_t dim) {
    ProjectionHead h{Role::Objective, dim, dim, std::vector<double>(dim * dim, 0.0), std::vector<double>(dim, 0.0)};
    for (std::size_t i = 0; i < dim; ++i) h.weight[i * dim + i] = 1.0;
    return h;
}

}  // namespace

TEST_CASE("init_heads is deterministic per seed and differs per role") {
    const HeadSet a = init_heads(7, 768, 256);
    const HeadSet b = init_heads(7, 768, 256);
    const HeadSet c = init_heads(8, 768, 256);
    CHECK(a[0].weight == b[0].weight);
    CHECK(a[0].weight.size() == 256 * 768);
    CHECK(a[0].bias == std::vector<double>(256, 0.0));
    CHECK(a[0].weight != a[1].weight);  // role index mixed into the stream
    CHECK(a[0].weight != c[0].weight);
    const double scale = 1.0 / std::sqrt(768.0);
    for (double w : a[2].weight) CHECK(std::abs(w) <= scale + 1e-12);
}

TEST_CASE("project with an identity head returns the unit base vector") {
    const auto head = identity_head(4);
    const std::vector<double> base = {0.0, 1.0, 0.0, 0.0};
    const auto out = project(head, base);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(base[i]).epsilon(1e-12));
}

TEST_CASE("projected vectors are unit-norm") {
    const HeadSet heads = init_heads(3, 16, 8);
    detail::SplitMix64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> base(16);
        for (auto& x : base) x = rng.next_gaussian();
        const auto out = project(heads[trial % 4], base);
        CHECK(std::abs(detail::norm(std::span<const double>(out)) - 1.0) < 1e-9);
    }
}

TEST_CASE("project matches an independent matrix-vector oracle") {
    ProjectionHead head{Role::Method, 3, 2, {1.0, -2.0, 0.5, 0.0, 3.0, -1.0}, {0.25, -0.5}};
    const std::vector<double> base = {2.0, 1.0, 4.0};
    // rows: [1, -2, 0.5], [0, 3, -1]
    const double y0 = 1.0 * 2.0 + (-2.0) * 1.0 + 0.5 * 4.0 + 0.25;  // 2.25
    const double y1 = 0.0 * 2.0 + 3.0 * 1.0 + (-1.0) * 4.0 - 0.5;   // -1.5
    const double n = std::sqrt(y0 * y0 + y1 * y1);
    const auto out = project(head, base);
    CHECK(out[0] == doctest::Approx(y0 / n).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(y1 / n).epsilon(1e-12));
}

TEST_CASE("degenerate projections are rejected") {
    ProjectionHead zero{Role::Method, 3, 2, std::vector<double>(6, 0.0), std::vector<double>(2, 0.0)};
    CHECK_THROWS_AS(project(zero, std::vector<double>{1.0, 2.0, 3.0}), std::domain_error);
    const auto head = identity_head(3);
    CHECK_THROWS_AS(project(head, std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("project is scale-invariant at zero bias") {
    HeadSet heads = init_heads(5, 12, 6);
    detail::SplitMix64 rng(21);
    std::vector<double> base(12);
    for (auto& x : base) x = rng.next_gaussian();
    std::vector<double> scaled = base;
    for (auto& x : scaled) x *= 37.5;
    const auto a = project(heads[1], base);
    const auto b = project(heads[1], scaled);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("encode_set emits five unit vectors; meta bypasses the heads") {
    MockEmbeddingProvider provider;
    const HeadSet heads = init_heads(1, provider.dim(), provider.dim());
    const auto set = encode_set(provider, heads, minimal_set("d1"));
    CHECK(set.doc_id == "d1");
    CHECK(std::abs(detail::norm(std::span<const float>(set.meta)) - 1.0) < 1e-6);
    for (Role r : kAllRoles) CHECK(std::abs(detail::norm(std::span<const float>(set.role(r))) - 1.0) < 1e-6);
    // meta equals the raw provider embedding (normalized), untouched by heads
    const auto meta_direct = provider.embed_one("Title: A\nAbstract: B");
    for (std::size_t i = 0; i < set.meta.size(); ++i)
        CHECK(set.meta[i] == doctest::Approx(meta_direct.values[i]).epsilon(1e-5));
}

TEST_CASE("metadata-only sets reuse the meta vector for every role") {
    MockEmbeddingProvider provider;
    const HeadSet heads = init_heads(1, provider.dim(), provider.dim());
    StructuredSummarySet s;
    s.doc_id = "m1";
    s.meta_summary = "Title: A\nAbstract: B";
    s.metadata_only = true;
    const auto set = encode_set(provider, heads, s);
    CHECK(set.metadata_only);
    for (Role r : kAllRoles) CHECK(set.role(r) == set.meta);
}

TEST_CASE("encode_set rejects incomplete sets") {
    MockEmbeddingProvider provider;
    const HeadSet heads = init_heads(1, provider.dim(), provider.dim());
    auto incomplete = minimal_set("d1");
    incomplete.role_summaries.erase(Role::Method);
    CHECK_THROWS_AS(encode_set(provider, heads, incomplete), DataError);
    auto failed = minimal_set("d2");
    failed.failed_roles = {"M"};
    CHECK_THROWS_AS(encode_set(provider, heads, failed), DataError);
}

TEST_CASE("encode_set is a pure function of its inputs") {
    MockEmbeddingProvider provider;
    const HeadSet heads = init_heads(1, provider.dim(), provider.dim());
    const auto a = encode_set(provider, heads, minimal_set("same"));
    const auto b = encode_set(provider, heads, minimal_set("same"));
    CHECK(a.meta == b.meta);
    for (Role r : kAllRoles) CHECK(a.role(r) == b.role(r));
}

TEST_CASE("head checkpoints round-trip at f32 precision") {
    testutil::TempDir tmp("heads");
    const std::string path = tmp.file("heads.bin");
    const HeadSet heads = init_heads(99, 24, 12);
    save_heads(heads, path);
    const HeadSet loaded = load_heads(path);
    for (Role role : kAllRoles) {
        const auto& a = heads[role_index(role)];
        const auto& b = loaded[role_index(role)];
        CHECK(b.in_dim == 24);
        CHECK(b.out_dim == 12);
        for (std::size_t i = 0; i < a.weight.size(); ++i)
            CHECK(b.weight[i] == doctest::Approx(a.weight[i]).epsilon(1e-6));
    }
    // byte-determinism of the checkpoint itself
    save_heads(loaded, tmp.file("heads2.bin"));
    save_heads(loaded, tmp.file("heads3.bin"));
    CHECK(testutil::read_file(tmp.file("heads2.bin")) == testutil::read_file(tmp.file("heads3.bin")));
}

TEST_CASE("checkpoint loader rejects foreign files") {
    testutil::TempDir tmp("heads");
    testutil::write_file(tmp.file("bad.bin"), "NOTAHEAD????????");
    CHECK_THROWS_AS(load_heads(tmp.file("bad.bin")), std::exception);
    CHECK_THROWS_AS(load_heads(tmp.file("missing.bin")), DataError);
}
