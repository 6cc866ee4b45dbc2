#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "omrc/corpus.hpp"
#include "omrc/detail/rng.hpp"
#include "omrc/detail/vecmath.hpp"
#include "omrc/evaluation.hpp"
#include "omrc/providers.hpp"
#include "omrc/representation.hpp"
#include "omrc/training.hpp"

namespace omrc {

// Planted-structure corpus: orthogonal cluster centroids drive the meta
// vectors; role vectors blend the cluster centroid (weight role_signal) with
// a per-(cluster, sub-cluster, role) centroid that is invisible to the meta
// view. The sub-cluster structure is what makes re-ranking with lambda < 1
// beneficial, since qrels are same-cluster sets.
struct SyntheticSpec {
    std::size_t n_docs = 200;
    std::size_t n_clusters = 4;
    std::size_t dim = 64;
    double noise_sigma = 2.0;  // noise norm relative to the unit centroid
    double role_signal = 0.5;  // fraction of role signal carried by cluster identity
    std::uint64_t seed = 42;
    std::size_t subclusters = 2;  // sub-clusters per cluster
};

inline void validate(const SyntheticSpec& spec) {
    if (spec.n_clusters < 2 || spec.n_docs < spec.n_clusters)
        throw std::invalid_argument("synthetic: need n_docs >= n_clusters >= 2");
    if (spec.dim < 8) throw std::invalid_argument("synthetic: dim must be >= 8");
    if (spec.noise_sigma < 0.0) throw std::invalid_argument("synthetic: noise_sigma must be >= 0");
    if (spec.role_signal < 0.0 || spec.role_signal > 1.0)
        throw std::invalid_argument("synthetic: role_signal must be in [0, 1]");
    if (spec.subclusters < 1) throw std::invalid_argument("synthetic: subclusters must be >= 1");
}

struct SyntheticBundle {
    std::vector<Document> documents;
    std::vector<StructuredSummarySet> summaries;  // stub texts, anchored to sections
    std::vector<EmbeddingSet> sets;               // planted vectors
    Qrels qrels;
};

namespace detail {

// Orthonormal centroids via Gram-Schmidt when dim >= n_clusters; plain
// random unit vectors otherwise.
inline std::vector<std::vector<double>> cluster_centroids(std::size_t n, std::size_t dim, SplitMix64& rng) {
    std::vector<std::vector<double>> centroids;
    while (centroids.size() < n) {
        std::vector<double> v(dim);
        for (auto& x : v) x = rng.next_gaussian();
        if (dim >= n) {
            for (const auto& c : centroids) {
                const double proj = dot(v, c);
                for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * c[i];
            }
        }
        const double nv = norm(std::span<const double>(v));
        if (nv < 1e-9) continue;  // redraw a degenerate direction
        for (auto& x : v) x /= nv;
        centroids.push_back(std::move(v));
    }
    return centroids;
}

inline std::string padded_id(std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "synth-%05zu", i);
    return buf;
}

inline std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) out += ' ';
        out += words[i];
    }
    return out;
}

}  // namespace detail

inline SyntheticBundle generate(const SyntheticSpec& spec) {
    validate(spec);
    SyntheticBundle bundle;
    detail::SplitMix64 rng(detail::mix_seed(spec.seed, 0x5F17));

    const auto centroids = detail::cluster_centroids(spec.n_clusters, spec.dim, rng);

    // Per-(cluster, sub, role) centroids, unit random directions.
    std::vector<std::vector<std::array<std::vector<double>, 4>>> sub_centroids(spec.n_clusters);
    for (std::size_t k = 0; k < spec.n_clusters; ++k) {
        sub_centroids[k].resize(spec.subclusters);
        for (std::size_t t = 0; t < spec.subclusters; ++t)
            for (std::size_t r = 0; r < 4; ++r) {
                std::vector<double> v(spec.dim);
                for (auto& x : v) x = rng.next_gaussian();
                sub_centroids[k][t][r] = detail::normalized(std::move(v));
            }
    }

    // Cluster and sub-cluster vocabularies for the stub texts; the mock
    // embedding provider turns shared vocabulary into high cosine.
    auto cluster_word = [](std::size_t k, std::size_t j) {
        return "c" + std::to_string(k) + "topic" + std::to_string(j);
    };
    auto sub_word = [](std::size_t k, std::size_t t, std::size_t r, std::size_t j) {
        return "c" + std::to_string(k) + "s" + std::to_string(t) + "r" + std::to_string(r) + "w" + std::to_string(j);
    };
    static const char* kHeadings[4] = {"Objective", "Method", "Results", "Conclusion"};

    for (std::size_t i = 0; i < spec.n_docs; ++i) {
        const std::size_t k = i % spec.n_clusters;
        const std::size_t t = (i / spec.n_clusters) % spec.subclusters;
        const std::string id = detail::padded_id(i);
        const std::string label = "cluster" + std::to_string(k);

        detail::SplitMix64 word_rng(detail::mix_seed(spec.seed, 0xD0C + i));
        auto pick_cluster_words = [&](std::size_t count) {
            std::vector<std::string> words;
            for (std::size_t j = 0; j < count; ++j) words.push_back(cluster_word(k, word_rng.next_below(12)));
            return words;
        };

        Document doc;
        doc.id = id;
        doc.cluster_label = label;
        doc.title = "Synthetic study " + std::to_string(i) + " on " + detail::join_words(pick_cluster_words(2));
        doc.abstract = "This synthetic record covers " + detail::join_words(pick_cluster_words(6)) + ".";
        doc.keywords = pick_cluster_words(2);
        for (std::size_t r = 0; r < 4; ++r) {
            std::vector<std::string> words = pick_cluster_words(4);
            for (std::size_t j = 0; j < 4; ++j) words.push_back(sub_word(k, t, r, word_rng.next_below(8)));
            Section s;
            s.heading = kHeadings[r];
            s.index = static_cast<int>(r);
            s.text = std::string(kHeadings[r]) + " covers " + detail::join_words(words) +
                     ". Further detail is omitted in this synthetic record.";
            doc.sections.push_back(std::move(s));
        }

        // Stub summary: first sentence of the matching section plus its
        // marker, mirroring what the mock QA pipeline produces.
        StructuredSummarySet summary;
        summary.doc_id = id;
        summary.meta_summary = build_meta_summary(doc);
        for (Role role : kAllRoles) {
            const std::size_t r = role_index(role);
            const auto& sec = doc.sections[r];
            const std::string sentence = detail::first_sentence(sec.text);
            RoleSummary rs;
            rs.role = role;
            rs.text = sentence + " " + section_marker(sec.heading);
            rs.anchors.push_back({SegmentKind::section, std::to_string(sec.index), 0, sentence.size(), false});
            rs.variant_answers = {rs.text};
            summary.role_summaries[role] = std::move(rs);
        }

        // Planted vectors. noise_sigma is the expected noise NORM relative
        // to the unit centroid, so the per-coordinate scale is sigma/sqrt(dim).
        detail::SplitMix64 vec_rng(detail::mix_seed(spec.seed, 0x7EC + i));
        const double coord_noise = spec.noise_sigma / std::sqrt(static_cast<double>(spec.dim));
        EmbeddingSet set;
        set.doc_id = id;
        {
            std::vector<double> v(spec.dim);
            for (std::size_t d = 0; d < spec.dim; ++d)
                v[d] = centroids[k][d] + coord_noise * vec_rng.next_gaussian();
            set.meta = detail::to_float(detail::normalized(std::move(v)));
        }
        for (std::size_t r = 0; r < 4; ++r) {
            std::vector<double> v(spec.dim);
            for (std::size_t d = 0; d < spec.dim; ++d)
                v[d] = spec.role_signal * centroids[k][d] + (1.0 - spec.role_signal) * sub_centroids[k][t][r][d] +
                       coord_noise * vec_rng.next_gaussian();
            set.roles[r] = detail::to_float(detail::normalized(std::move(v)));
        }

        bundle.documents.push_back(std::move(doc));
        bundle.summaries.push_back(std::move(summary));
        bundle.sets.push_back(std::move(set));
    }

    // Qrels: relevant = same-cluster documents, query excluded.
    std::vector<std::vector<std::string>> members(spec.n_clusters);
    for (std::size_t i = 0; i < spec.n_docs; ++i) members[i % spec.n_clusters].push_back(detail::padded_id(i));
    for (std::size_t k = 0; k < spec.n_clusters; ++k) {
        for (const auto& qid : members[k]) {
            auto& rel = bundle.qrels.relevant[qid];
            for (const auto& did : members[k])
                if (did != qid) rel.insert(did);
        }
    }
    return bundle;
}

// Training view of planted embedding sets: meta as-is, role vectors as the
// encoder-space role inputs, labels from the documents.
inline std::vector<EncodedDoc> to_encoded(const std::vector<EmbeddingSet>& sets,
                                          const std::vector<Document>& documents) {
    std::map<std::string, std::string> labels;
    for (const auto& d : documents)
        if (d.cluster_label) labels[d.id] = *d.cluster_label;
    std::vector<EncodedDoc> out;
    out.reserve(sets.size());
    for (const auto& s : sets) {
        EncodedDoc e;
        e.doc_id = s.doc_id;
        e.meta = detail::to_double(s.meta);
        for (std::size_t r = 0; r < 4; ++r) e.role_base[r] = detail::to_double(s.roles[r]);
        auto it = labels.find(s.doc_id);
        if (it != labels.end()) e.cluster_label = it->second;
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace omrc
