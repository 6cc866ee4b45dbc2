#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "omrc/common.hpp"
#include "omrc/detail/rng.hpp"
#include "omrc/detail/vecmath.hpp"
#include "omrc/representation.hpp"

namespace omrc {

// Encoder-space inputs for one document: the (unit) metadata embedding and
// the four raw role embeddings the heads project. The encoder is frozen, so
// these are fixed during training; only head parameters move.
struct EncodedDoc {
    std::string doc_id;
    std::vector<double> meta;
    std::array<std::vector<double>, 4> role_base;
    std::string cluster_label;
};

struct TrainingBatch {
    std::vector<const EncodedDoc*> items;

    std::size_t size() const { return items.size(); }
};

// A batch must contain positives and negatives: >= 2 distinct labels and
// >= 1 label occurring at least twice.
inline bool batch_valid(const TrainingBatch& batch) {
    std::map<std::string, int> counts;
    for (const auto* d : batch.items) {
        if (d->cluster_label.empty()) return false;
        ++counts[d->cluster_label];
    }
    if (counts.size() < 2) return false;
    return std::any_of(counts.begin(), counts.end(), [](const auto& kv) { return kv.second >= 2; });
}

struct LossConfig {
    double alpha = 0.4;
    double beta = 0.6;
    double tau_doc = 0.07;
    double tau_role = 0.07;
};

inline void validate(const LossConfig& cfg) {
    if (cfg.alpha < 0.0 || cfg.beta < 0.0) throw std::invalid_argument("loss config: alpha and beta must be >= 0");
    if (cfg.alpha + cfg.beta <= 0.0) throw std::invalid_argument("loss config: alpha + beta must be > 0");
    if (cfg.tau_doc <= 0.0 || cfg.tau_role <= 0.0) throw std::invalid_argument("loss config: temperatures must be > 0");
}

// One positive per anchor per step, drawn from the anchor's same-label
// peers by a seeded stream that is independent of the model parameters
// (required for finite-difference checks to see a smooth function).
// Returns -1 for anchors without any positive.
inline std::vector<int> draw_positives(const std::vector<std::string>& labels, std::uint64_t seed) {
    std::vector<int> out(labels.size(), -1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::vector<int> peers;
        for (std::size_t j = 0; j < labels.size(); ++j)
            if (j != i && labels[j] == labels[i]) peers.push_back(static_cast<int>(j));
        if (peers.empty()) continue;
        detail::SplitMix64 rng(detail::mix_seed(seed, 0xA11C0 + i));
        out[i] = peers[rng.next_below(peers.size())];
    }
    return out;
}

struct LevelLoss {
    double value = 0.0;
    std::vector<std::vector<double>> input_grads;
    std::size_t anchors = 0;  // anchors that had a positive
};

namespace detail {

enum class DenomPolicy {
    all_others,                 // document level: every j != i
    positive_and_other_cluster  // role level: chosen positive + different-cluster items
};

// InfoNCE over unit vectors: L_i = -s(i,p)/tau + logsumexp_{j in D(i)} s(i,j)/tau,
// averaged over anchors with a positive. Similarities are dot products (the
// inputs are unit-norm). Gradients are returned w.r.t. the input vectors,
// accumulating both the anchor and the context side of every pair.
inline LevelLoss info_nce(const std::vector<std::vector<double>>& vecs, const std::vector<std::string>& labels,
                          double tau, const std::vector<int>& positives, DenomPolicy policy) {
    const std::size_t n = vecs.size();
    LevelLoss out;
    out.input_grads.assign(n, std::vector<double>(vecs.empty() ? 0 : vecs[0].size(), 0.0));

    double loss_sum = 0.0;
    std::size_t anchors = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int p = positives[i];
        if (p < 0) continue;
        ++anchors;

        std::vector<std::size_t> denom;
        denom.reserve(n);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const bool other_cluster = labels[j] != labels[i];
            if (policy == DenomPolicy::all_others || other_cluster || j == static_cast<std::size_t>(p))
                denom.push_back(j);
        }

        std::vector<double> logits(denom.size());
        double a_ip = 0.0;
        for (std::size_t k = 0; k < denom.size(); ++k) {
            logits[k] = dot(vecs[i], vecs[denom[k]]) / tau;
            if (denom[k] == static_cast<std::size_t>(p)) a_ip = logits[k];
        }
        const double m = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double a : logits) z += std::exp(a - m);
        const double lse = m + std::log(z);
        loss_sum += lse - a_ip;

        for (std::size_t k = 0; k < denom.size(); ++k) {
            const std::size_t j = denom[k];
            double coeff = std::exp(logits[k] - lse) / tau;  // dL_i/ds_ij
            if (j == static_cast<std::size_t>(p)) coeff -= 1.0 / tau;
            for (std::size_t c = 0; c < vecs[i].size(); ++c) {
                out.input_grads[i][c] += coeff * vecs[j][c];
                out.input_grads[j][c] += coeff * vecs[i][c];
            }
        }
    }
    if (anchors == 0) throw DataError("info_nce: no anchor in the batch has a positive");
    out.value = loss_sum / static_cast<double>(anchors);
    const double inv = 1.0 / static_cast<double>(anchors);
    for (auto& g : out.input_grads)
        for (auto& x : g) x *= inv;
    out.anchors = anchors;
    return out;
}

inline std::vector<std::string> batch_labels(const TrainingBatch& batch) {
    std::vector<std::string> labels;
    labels.reserve(batch.size());
    for (const auto* d : batch.items) labels.push_back(d->cluster_label);
    return labels;
}

struct Projection {
    std::vector<double> unit;
    double inv_norm = 0.0;
};

inline Projection project_full(const ProjectionHead& head, const std::vector<double>& base) {
    std::vector<double> y(head.out_dim);
    for (std::size_t r = 0; r < head.out_dim; ++r) {
        double acc = head.bias[r];
        const double* row = head.weight.data() + r * head.in_dim;
        for (std::size_t c = 0; c < head.in_dim; ++c) acc += row[c] * base[c];
        y[r] = acc;
    }
    const double n = norm(std::span<const double>(y));
    if (n < 1e-12) throw std::domain_error("project: vector norm below 1e-12");
    for (auto& v : y) v /= n;
    return {std::move(y), 1.0 / n};
}

}  // namespace detail

// Document-level contrastive loss over the metadata embeddings (Gradients
// are w.r.t. the inputs; the encoder is frozen so they drive no update).
inline LevelLoss doc_loss(const TrainingBatch& batch, double tau_doc, std::uint64_t draw_seed) {
    if (!batch_valid(batch)) throw DataError("doc_loss: invalid batch (needs >=2 labels and >=1 repeated label)");
    if (tau_doc <= 0.0) throw std::invalid_argument("doc_loss: tau must be > 0");
    std::vector<std::vector<double>> vecs;
    vecs.reserve(batch.size());
    for (const auto* d : batch.items) vecs.push_back(d->meta);
    const auto labels = detail::batch_labels(batch);
    return detail::info_nce(vecs, labels, tau_doc, draw_positives(labels, draw_seed),
                            detail::DenomPolicy::all_others);
}

// Role-level contrastive loss for one role. Same formula over the projected
// role vectors; the denominator holds the chosen positive plus same-role
// embeddings of different-cluster documents. Gradients are w.r.t. the
// projected unit vectors.
inline LevelLoss role_loss(const TrainingBatch& batch, const HeadSet& heads, Role role, double tau_role,
                           std::uint64_t draw_seed) {
    if (!batch_valid(batch)) throw DataError("role_loss: invalid batch (needs >=2 labels and >=1 repeated label)");
    if (tau_role <= 0.0) throw std::invalid_argument("role_loss: tau must be > 0");
    const auto& head = heads[role_index(role)];
    std::vector<std::vector<double>> vecs;
    vecs.reserve(batch.size());
    for (const auto* d : batch.items) vecs.push_back(detail::project_full(head, d->role_base[role_index(role)]).unit);
    const auto labels = detail::batch_labels(batch);
    return detail::info_nce(vecs, labels, tau_role, draw_positives(labels, draw_seed),
                            detail::DenomPolicy::positive_and_other_cluster);
}

struct HeadGrads {
    std::vector<double> weight;
    std::vector<double> bias;
};

struct TotalLossResult {
    double total = 0.0;
    double doc_component = 0.0;
    std::array<double, 4> role_components{};
    std::array<HeadGrads, 4> head_grads;
    std::vector<std::vector<double>> doc_input_grads;  // d(total)/d(h_meta)
};

// Joint objective: alpha * L_doc + beta * sum_r L_role^(r), with analytic
// gradients w.r.t. every head parameter (chained through the affine map and
// the normalization Jacobian). One positive draw per anchor is shared by all
// five components of a step.
inline TotalLossResult total_loss(const TrainingBatch& batch, const HeadSet& heads, const LossConfig& cfg,
                                  std::uint64_t draw_seed) {
    validate(cfg);
    if (!batch_valid(batch)) throw DataError("total_loss: invalid batch (needs >=2 labels and >=1 repeated label)");
    const auto labels = detail::batch_labels(batch);
    const auto positives = draw_positives(labels, draw_seed);

    TotalLossResult result;

    {
        std::vector<std::vector<double>> metas;
        metas.reserve(batch.size());
        for (const auto* d : batch.items) metas.push_back(d->meta);
        auto doc = detail::info_nce(metas, labels, cfg.tau_doc, positives, detail::DenomPolicy::all_others);
        result.doc_component = doc.value;
        result.doc_input_grads = std::move(doc.input_grads);
        for (auto& g : result.doc_input_grads)
            for (auto& x : g) x *= cfg.alpha;
    }

    for (Role role : kAllRoles) {
        const std::size_t r = role_index(role);
        const auto& head = heads[r];
        std::vector<detail::Projection> projections;
        projections.reserve(batch.size());
        std::vector<std::vector<double>> units;
        units.reserve(batch.size());
        for (const auto* d : batch.items) {
            projections.push_back(detail::project_full(head, d->role_base[r]));
            units.push_back(projections.back().unit);
        }
        const auto level =
            detail::info_nce(units, labels, cfg.tau_role, positives, detail::DenomPolicy::positive_and_other_cluster);
        result.role_components[r] = level.value;

        HeadGrads grads{std::vector<double>(head.weight.size(), 0.0), std::vector<double>(head.bias.size(), 0.0)};
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto& g = level.input_grads[i];       // dL/du
            const auto& u = projections[i].unit;        // u = y/|y|
            const double gu = detail::dot(g, u);
            const auto& x = batch.items[i]->role_base[r];
            for (std::size_t row = 0; row < head.out_dim; ++row) {
                const double gy = (g[row] - gu * u[row]) * projections[i].inv_norm * cfg.beta;
                if (gy == 0.0) continue;
                double* wrow = grads.weight.data() + row * head.in_dim;
                for (std::size_t col = 0; col < head.in_dim; ++col) wrow[col] += gy * x[col];
                grads.bias[row] += gy;
            }
        }
        result.head_grads[r] = std::move(grads);
    }

    result.total = cfg.alpha * result.doc_component;
    for (double v : result.role_components) result.total += cfg.beta * v;
    return result;
}

// --- Training loop -------------------------------------------------------------

struct TrainOptions {
    int epochs = 20;
    std::size_t batch_size = 16;
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 42;
    int max_batch_attempts = 100;
};

struct EpochStats {
    int epoch = 0;
    double mean_total = 0.0;
    double mean_doc = 0.0;
    std::array<double, 4> mean_role{};
};

struct TrainResult {
    HeadSet heads;
    std::vector<EpochStats> trace;
};

namespace detail {

struct AdamState {
    std::vector<double> m_w, v_w, m_b, v_b;
};

inline void adam_step(ProjectionHead& head, const HeadGrads& grads, AdamState& state, const TrainOptions& opt,
                      long long t) {
    if (state.m_w.empty()) {
        state.m_w.assign(head.weight.size(), 0.0);
        state.v_w.assign(head.weight.size(), 0.0);
        state.m_b.assign(head.bias.size(), 0.0);
        state.v_b.assign(head.bias.size(), 0.0);
    }
    const double bc1 = 1.0 - std::pow(opt.adam_beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(opt.adam_beta2, static_cast<double>(t));
    auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = opt.adam_beta1 * m[k] + (1.0 - opt.adam_beta1) * g[k];
            v[k] = opt.adam_beta2 * v[k] + (1.0 - opt.adam_beta2) * g[k] * g[k];
            p[k] -= opt.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + opt.adam_eps);
        }
    };
    update(head.weight, grads.weight, state.m_w, state.v_w);
    update(head.bias, grads.bias, state.m_b, state.v_b);
}

}  // namespace detail

// Seeded epoch shuffling into fixed-size batches (leftover items are
// dropped); invalid draws are resampled up to max_batch_attempts. Adam
// updates head parameters only. Fully deterministic per seed.
inline TrainResult train(const std::vector<EncodedDoc>& docs, HeadSet heads, const LossConfig& cfg,
                         const TrainOptions& opt) {
    validate(cfg);
    if (opt.batch_size < 4) throw std::invalid_argument("train: batch_size must be >= 4");
    if (opt.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");

    std::vector<const EncodedDoc*> labeled;
    for (const auto& d : docs)
        if (!d.cluster_label.empty()) labeled.push_back(&d);
    if (labeled.size() < opt.batch_size)
        throw DataError("train: only " + std::to_string(labeled.size()) + " labeled documents for batch_size " +
                        std::to_string(opt.batch_size));
    {
        TrainingBatch whole{labeled};
        if (!batch_valid(whole))
            throw DataError("train: corpus cannot form a valid batch (needs >=2 clusters and >=1 repeated label)");
    }

    TrainResult result;
    result.heads = std::move(heads);
    std::array<detail::AdamState, 4> adam{};
    long long t = 0;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        detail::SplitMix64 rng(detail::mix_seed(opt.seed, 0xE90C + static_cast<std::uint64_t>(epoch)));
        std::vector<const EncodedDoc*> pool = labeled;
        const std::size_t n_batches = pool.size() / opt.batch_size;

        EpochStats stats;
        stats.epoch = epoch;
        std::size_t batches_done = 0;
        for (std::size_t b = 0; b < n_batches; ++b) {
            TrainingBatch batch;
            bool ok = false;
            for (int attempt = 0; attempt < opt.max_batch_attempts; ++attempt) {
                detail::shuffle(pool, rng);
                batch.items.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(opt.batch_size));
                if (batch_valid(batch)) {
                    ok = true;
                    break;
                }
            }
            if (!ok)
                throw DataError("train: could not draw a valid batch after " +
                                std::to_string(opt.max_batch_attempts) + " attempts");
            pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(opt.batch_size));

            const std::uint64_t step_seed =
                detail::mix_seed(opt.seed, 0x57E9ULL + static_cast<std::uint64_t>(epoch) * 1000003ULL + b);
            const auto loss = total_loss(batch, result.heads, cfg, step_seed);
            ++t;
            for (Role role : kAllRoles) {
                const std::size_t r = role_index(role);
                detail::adam_step(result.heads[r], loss.head_grads[r], adam[r], opt, t);
            }
            stats.mean_total += loss.total;
            stats.mean_doc += loss.doc_component;
            for (std::size_t r = 0; r < 4; ++r) stats.mean_role[r] += loss.role_components[r];
            ++batches_done;
        }
        if (batches_done > 0) {
            const double inv = 1.0 / static_cast<double>(batches_done);
            stats.mean_total *= inv;
            stats.mean_doc *= inv;
            for (auto& v : stats.mean_role) v *= inv;
        }
        result.trace.push_back(stats);
    }
    return result;
}

// Central-difference verification of the analytic gradients on a small
// batch; returns max |analytic - numeric| / (|numeric| + 1e-8).
inline double finite_difference_check(const TrainingBatch& batch, HeadSet heads, const LossConfig& cfg,
                                      double epsilon, std::uint64_t draw_seed) {
    if (epsilon < 1e-6 || epsilon > 1e-3)
        throw std::invalid_argument("finite_difference_check: epsilon must be in [1e-6, 1e-3]");
    const auto analytic = total_loss(batch, heads, cfg, draw_seed);
    double max_rel = 0.0;
    auto probe = [&](double& param, double analytic_grad) {
        const double saved = param;
        param = saved + epsilon;
        const double up = total_loss(batch, heads, cfg, draw_seed).total;
        param = saved - epsilon;
        const double down = total_loss(batch, heads, cfg, draw_seed).total;
        param = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double rel = std::abs(analytic_grad - numeric) / (std::abs(numeric) + 1e-8);
        max_rel = std::max(max_rel, rel);
    };
    for (Role role : kAllRoles) {
        const std::size_t r = role_index(role);
        auto& head = heads[r];
        for (std::size_t k = 0; k < head.weight.size(); ++k) probe(head.weight[k], analytic.head_grads[r].weight[k]);
        for (std::size_t k = 0; k < head.bias.size(); ++k) probe(head.bias[k], analytic.head_grads[r].bias[k]);
    }
    return max_rel;
}

// Mean intra- vs inter-cluster cosine of the projected role vectors;
// the margin is the quantity the contrastive objective should widen.
struct SeparationStats {
    std::array<double, 4> intra{};
    std::array<double, 4> inter{};
};

inline SeparationStats role_separation(const std::vector<EncodedDoc>& docs, const HeadSet& heads) {
    SeparationStats stats;
    for (Role role : kAllRoles) {
        const std::size_t r = role_index(role);
        std::vector<std::vector<double>> units;
        units.reserve(docs.size());
        for (const auto& d : docs) units.push_back(detail::project_full(heads[r], d.role_base[r]).unit);
        double intra = 0.0, inter = 0.0;
        std::size_t n_intra = 0, n_inter = 0;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            for (std::size_t j = i + 1; j < docs.size(); ++j) {
                const double c = detail::dot(units[i], units[j]);
                if (docs[i].cluster_label == docs[j].cluster_label) {
                    intra += c;
                    ++n_intra;
                } else {
                    inter += c;
                    ++n_inter;
                }
            }
        }
        stats.intra[r] = n_intra ? intra / static_cast<double>(n_intra) : 0.0;
        stats.inter[r] = n_inter ? inter / static_cast<double>(n_inter) : 0.0;
    }
    return stats;
}

// Loss trace CSV: epoch, mean_total, mean_doc, mean_role_O..C.
inline void write_loss_trace(const std::vector<EpochStats>& trace, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write loss trace: " + path);
    out << "epoch,mean_total,mean_doc,mean_role_O,mean_role_M,mean_role_R,mean_role_C\n";
    char buf[64];
    for (const auto& row : trace) {
        out << row.epoch;
        auto emit = [&](double v) {
            std::snprintf(buf, sizeof(buf), "%.10g", v);
            out << ',' << buf;
        };
        emit(row.mean_total);
        emit(row.mean_doc);
        for (double v : row.mean_role) emit(v);
        out << '\n';
    }
}

}  // namespace omrc
