#pragma once

#include <array>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "omrc/common.hpp"
#include "omrc/corpus.hpp"
#include "omrc/detail/binary_io.hpp"
#include "omrc/detail/rng.hpp"
#include "omrc/detail/vecmath.hpp"
#include "omrc/providers.hpp"

namespace omrc {

// Trainable affine map specializing the shared encoder embedding for one
// rhetorical role. Parameters are kept in double for training; the
// checkpoint format stores f32.
struct ProjectionHead {
    Role role = Role::Objective;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weight;  // row-major, out_dim x in_dim
    std::vector<double> bias;    // out_dim
};

using HeadSet = std::array<ProjectionHead, 4>;

// Seeded uniform init scaled by 1/sqrt(in_dim); bias zero. The role index is
// mixed into the stream so heads differ per role under one seed.
inline HeadSet init_heads(std::uint64_t seed, std::size_t in_dim, std::size_t out_dim) {
    if (in_dim == 0 || out_dim == 0) throw std::invalid_argument("init_heads: dims must be positive");
    HeadSet heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (Role role : kAllRoles) {
        detail::SplitMix64 rng(detail::mix_seed(seed, 0x48454144ULL + role_index(role)));
        ProjectionHead h{role, in_dim, out_dim, std::vector<double>(out_dim * in_dim), std::vector<double>(out_dim, 0.0)};
        for (auto& w : h.weight) w = (2.0 * rng.next_unit() - 1.0) * scale;
        heads[role_index(role)] = std::move(h);
    }
    return heads;
}

// h = normalize(W x + b). Throws when the pre-normalization output is
// degenerate (norm < 1e-12), which signals a pathological head.
inline std::vector<double> project(const ProjectionHead& head, std::span<const double> base) {
    if (base.size() != head.in_dim) throw std::invalid_argument("project: base dim does not match head in_dim");
    std::vector<double> y(head.out_dim);
    for (std::size_t r = 0; r < head.out_dim; ++r) {
        double acc = head.bias[r];
        const double* row = head.weight.data() + r * head.in_dim;
        for (std::size_t c = 0; c < head.in_dim; ++c) acc += row[c] * base[c];
        y[r] = acc;
    }
    return detail::normalized(std::move(y));
}

inline std::vector<double> project(const ProjectionHead& head, const std::vector<double>& base) {
    return project(head, std::span<const double>(base));
}

// Structured embedding set for one document: the metadata vector lives in
// encoder space (no head is applied), role vectors live in head output
// space. metadata_only marks sets whose role vectors were copied from meta.
struct EmbeddingSet {
    std::string doc_id;
    std::vector<float> meta;
    std::array<std::vector<float>, 4> roles;
    bool metadata_only = false;

    const std::vector<float>& role(Role r) const { return roles[role_index(r)]; }
};

inline EmbeddingSet encode_set(EmbeddingProvider& provider, const HeadSet& heads,
                               const StructuredSummarySet& set) {
    EmbeddingSet out;
    out.doc_id = set.doc_id;
    if (!set.failed_roles.empty())
        throw DataError("encode_set: summary set for " + set.doc_id + " is incomplete");
    const auto meta = detail::normalized(detail::to_double(provider.embed_one(set.meta_summary).values));
    out.meta = detail::to_float(meta);
    if (set.role_summaries.empty()) {
        if (!set.metadata_only)
            throw DataError("encode_set: summary set for " + set.doc_id + " lacks role summaries");
        if (heads[0].out_dim != meta.size())
            throw DataError("encode_set: metadata-only fallback requires out_dim == encoder dim");
        for (Role r : kAllRoles) out.roles[role_index(r)] = out.meta;
        out.metadata_only = true;
        return out;
    }
    if (set.role_summaries.size() != 4)
        throw DataError("encode_set: summary set for " + set.doc_id + " lacks role summaries");
    for (Role r : kAllRoles) {
        const auto base = detail::to_double(provider.embed_one(set.role_summaries.at(r).text).values);
        out.roles[role_index(r)] = detail::to_float(project(heads[role_index(r)], base));
    }
    return out;
}

inline std::vector<EmbeddingSet> encode_corpus(EmbeddingProvider& provider, const HeadSet& heads,
                                               const std::vector<StructuredSummarySet>& sets) {
    std::vector<EmbeddingSet> out;
    out.reserve(sets.size());
    for (const auto& s : sets) out.push_back(encode_set(provider, heads, s));
    return out;
}

// --- Head checkpoint format ---------------------------------------------------
// magic "OMRCHEAD", version u32, in_dim u32, out_dim u32, then four role
// blocks (O, M, R, C) of row-major f32 weights followed by the f32 bias.

inline constexpr std::uint32_t kHeadCheckpointVersion = 1;

inline void save_heads(const HeadSet& heads, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    detail::write_magic(out, "OMRCHEAD");
    detail::write_u32(out, kHeadCheckpointVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(heads[0].in_dim));
    detail::write_u32(out, static_cast<std::uint32_t>(heads[0].out_dim));
    for (Role role : kAllRoles) {
        const auto& h = heads[role_index(role)];
        if (h.in_dim != heads[0].in_dim || h.out_dim != heads[0].out_dim)
            throw DataError("save_heads: heads disagree on dimensions");
        for (double w : h.weight) detail::write_f32(out, static_cast<float>(w));
        for (double b : h.bias) detail::write_f32(out, static_cast<float>(b));
    }
    if (!out) throw DataError("I/O failure while writing checkpoint: " + path);
}

inline HeadSet load_heads(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint: " + path);
    detail::expect_magic(in, "OMRCHEAD", "head checkpoint");
    const std::uint32_t version = detail::read_u32(in);
    if (version != kHeadCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    const std::size_t in_dim = detail::read_u32(in);
    const std::size_t out_dim = detail::read_u32(in);
    HeadSet heads;
    for (Role role : kAllRoles) {
        ProjectionHead h{role, in_dim, out_dim, std::vector<double>(out_dim * in_dim), std::vector<double>(out_dim)};
        for (auto& w : h.weight) w = detail::read_f32(in);
        for (auto& b : h.bias) b = detail::read_f32(in);
        heads[role_index(role)] = std::move(h);
    }
    return heads;
}

}  // namespace omrc
