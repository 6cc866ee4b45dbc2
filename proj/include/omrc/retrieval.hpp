#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "omrc/common.hpp"
#include "omrc/detail/binary_io.hpp"
#include "omrc/detail/vecmath.hpp"
#include "omrc/representation.hpp"

namespace omrc {

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
};

// Exact flat index over the structured embedding sets: the meta vectors
// drive coarse retrieval, the role vectors are kept alongside for
// re-ranking. Entries are stored sorted by doc_id; immutable after build.
class VectorIndex {
public:
    static VectorIndex build(std::vector<EmbeddingSet> sets) {
        VectorIndex index;
        if (sets.empty()) return index;
        index.dim_ = sets[0].meta.size();
        std::sort(sets.begin(), sets.end(),
                  [](const EmbeddingSet& a, const EmbeddingSet& b) { return a.doc_id < b.doc_id; });
        for (std::size_t i = 0; i < sets.size(); ++i) {
            const auto& s = sets[i];
            if (i > 0 && s.doc_id == sets[i - 1].doc_id)
                throw DataError("build_index: duplicate doc_id \"" + s.doc_id + "\"");
            check_unit(s.meta, index.dim_, s.doc_id);
            for (Role r : kAllRoles) check_unit(s.role(r), index.dim_, s.doc_id);
        }
        index.entries_ = std::move(sets);
        return index;
    }

    std::size_t size() const { return entries_.size(); }
    std::size_t dim() const { return dim_; }
    const std::vector<EmbeddingSet>& entries() const { return entries_; }

    const EmbeddingSet* find(const std::string& doc_id) const {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), doc_id,
                                   [](const EmbeddingSet& e, const std::string& id) { return e.doc_id < id; });
        if (it == entries_.end() || it->doc_id != doc_id) return nullptr;
        return &*it;
    }

    // File layout: magic "OMRCIDX1", dim u32 LE, count u64 LE, then per
    // record {doc_id length-prefixed UTF-8, meta/O/M/R/C vectors as f32 LE}.
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write index: " + path);
        detail::write_magic(out, "OMRCIDX1");
        detail::write_u32(out, static_cast<std::uint32_t>(dim_));
        detail::write_u64(out, entries_.size());
        for (const auto& e : entries_) {
            detail::write_string(out, e.doc_id);
            detail::write_f32_vec(out, e.meta);
            for (Role r : kAllRoles) detail::write_f32_vec(out, e.role(r));
        }
        if (!out) throw DataError("I/O failure while writing index: " + path);
    }

    static VectorIndex load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot read index: " + path);
        detail::expect_magic(in, "OMRCIDX1", "vector index");
        const std::size_t dim = detail::read_u32(in);
        const std::uint64_t count = detail::read_u64(in);
        std::vector<EmbeddingSet> sets;
        sets.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            EmbeddingSet s;
            s.doc_id = detail::read_string(in);
            s.meta = detail::read_f32_vec(in, dim);
            for (Role r : kAllRoles) s.roles[role_index(r)] = detail::read_f32_vec(in, dim);
            sets.push_back(std::move(s));
        }
        return build(std::move(sets));
    }

private:
    static void check_unit(const std::vector<float>& v, std::size_t dim, const std::string& id) {
        if (v.size() != dim)
            throw DataError("build_index: dim mismatch for doc \"" + id + "\" (got " + std::to_string(v.size()) +
                            ", expected " + std::to_string(dim) + ")");
        const double n = detail::norm(std::span<const float>(v));
        if (std::abs(n - 1.0) > 1e-3)
            throw DataError("build_index: vector for doc \"" + id + "\" is not unit-norm (|v| = " +
                            std::to_string(n) + ")");
    }

    std::size_t dim_ = 0;
    std::vector<EmbeddingSet> entries_;
};

// Exact top-k by meta cosine, excluding the query document. Full order with
// ties broken by ascending doc_id; returns the whole corpus when it is
// smaller than k_depth.
inline std::vector<ScoredDoc> coarse_retrieve(const VectorIndex& index, std::span<const float> query_meta,
                                              std::size_t k_depth, const std::string& exclude_doc_id = {}) {
    if (k_depth < 1) throw std::invalid_argument("coarse_retrieve: k_depth must be >= 1");
    std::vector<ScoredDoc> scored;
    scored.reserve(index.size());
    for (const auto& e : index.entries()) {
        if (e.doc_id == exclude_doc_id) continue;
        scored.push_back({e.doc_id, detail::cosine(query_meta, std::span<const float>(e.meta))});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (scored.size() > k_depth) scored.resize(k_depth);
    return scored;
}

// Composite score: lambda * cos(meta) + omega * sum_r cos(role_r) with
// omega = (1 - lambda) / 4, so the weights are convex and the score stays
// in [-1, 1].
inline double composite_score(const EmbeddingSet& query, const EmbeddingSet& candidate, double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("composite_score: lambda must be in [0, 1]");
    const double omega = (1.0 - lambda) / 4.0;
    double score = lambda * detail::cosine(query.meta, candidate.meta);
    for (Role r : kAllRoles) score += omega * detail::cosine(query.role(r), candidate.role(r));
    return score;
}

struct RankedParams {
    std::size_t k_depth = 600;
    std::size_t n_pool = 100;
    double lambda = 0.6;
};

struct RankedList {
    std::string query_id;
    std::vector<ScoredDoc> items;  // scores non-increasing, ties by doc_id
    RankedParams params;
};

// Re-scores the top-n_pool coarse candidates with the composite score and
// sorts descending. The full re-ranked pool is returned; evaluation slices
// @k downstream.
inline RankedList rerank(const VectorIndex& index, const EmbeddingSet& query,
                         const std::vector<ScoredDoc>& coarse, double lambda, std::size_t n_pool,
                         std::size_t k_depth = 0) {
    RankedList out;
    out.query_id = query.doc_id;
    out.params = {k_depth, n_pool, lambda};
    const std::size_t take = std::min(n_pool, coarse.size());
    out.items.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        if (coarse[i].doc_id == query.doc_id) continue;
        const EmbeddingSet* candidate = index.find(coarse[i].doc_id);
        if (candidate == nullptr) throw DataError("rerank: candidate \"" + coarse[i].doc_id + "\" not in index");
        out.items.push_back({coarse[i].doc_id, composite_score(query, *candidate, lambda)});
    }
    std::sort(out.items.begin(), out.items.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    return out;
}

// Two-stage retrieval for one query document already in the index.
inline RankedList retrieve(const VectorIndex& index, const EmbeddingSet& query, const RankedParams& params) {
    const auto coarse =
        coarse_retrieve(index, std::span<const float>(query.meta), params.k_depth, query.doc_id);
    return rerank(index, query, coarse, params.lambda, params.n_pool, params.k_depth);
}

// --- TREC run files -------------------------------------------------------------

// One line per item: "qid Q0 docid rank score run_tag".
inline void write_run_file(const std::vector<RankedList>& runs, const std::string& path, const std::string& tag) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write run file: " + path);
    char score_buf[48];
    for (const auto& run : runs) {
        for (std::size_t i = 0; i < run.items.size(); ++i) {
            std::snprintf(score_buf, sizeof(score_buf), "%.6f", run.items[i].score);
            out << run.query_id << " Q0 " << run.items[i].doc_id << ' ' << (i + 1) << ' ' << score_buf << ' ' << tag
                << '\n';
        }
    }
    if (!out) throw DataError("I/O failure while writing run file: " + path);
}

// qid -> items ordered by rank.
inline std::map<std::string, std::vector<ScoredDoc>> load_run_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read run file: " + path);
    std::map<std::string, std::vector<std::pair<int, ScoredDoc>>> staged;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string qid, q0, docid, tag;
        int rank = 0;
        double score = 0.0;
        if (!(is >> qid >> q0 >> docid >> rank >> score >> tag))
            throw DataError("run file line " + std::to_string(line_no) + ": malformed entry");
        staged[qid].push_back({rank, {docid, score}});
    }
    std::map<std::string, std::vector<ScoredDoc>> out;
    for (auto& [qid, items] : staged) {
        std::stable_sort(items.begin(), items.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        auto& dst = out[qid];
        dst.reserve(items.size());
        for (auto& [rank, doc] : items) dst.push_back(std::move(doc));
    }
    return out;
}

}  // namespace omrc
