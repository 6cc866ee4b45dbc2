// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 7, 9 and 10 drive the installed CLI binary end to end;
// the rest exercise the library against independent oracles.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omrc/pipeline.hpp"

using namespace omrc;

namespace {

std::string g_cli_path;
std::filesystem::path g_work;
int g_spawn_counter = 0;

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the CLI, captures output to a log file, returns the exit code.
int run_cli(const std::string& args) {
    const std::string log = (g_work / ("cli-" + std::to_string(g_spawn_counter++) + ".log")).string();
    const std::string cmd = g_cli_path + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

struct Criterion {
    int number;
    std::string name;
    bool passed;
    std::string detail;
};

std::vector<Criterion> g_results;

void report(int number, const std::string& name, bool passed, const std::string& detail) {
    g_results.push_back({number, name, passed, detail});
    std::cout << (passed ? "PASS" : "FAIL") << ": " << number << ". " << name << " (" << detail << ")\n"
              << std::flush;
}

// ---- shared batch generator -------------------------------------------------

std::vector<EncodedDoc> random_docs(std::uint64_t seed, std::size_t n, std::size_t in_dim, std::size_t clusters) {
    detail::SplitMix64 rng(seed);
    std::vector<EncodedDoc> docs;
    for (std::size_t i = 0; i < n; ++i) {
        EncodedDoc d;
        d.doc_id = "d" + std::to_string(i);
        d.cluster_label = "c" + std::to_string(i % clusters);
        std::vector<double> meta(in_dim);
        for (auto& x : meta) x = rng.next_gaussian();
        d.meta = detail::normalized(std::move(meta));
        for (auto& rb : d.role_base) {
            rb.resize(in_dim);
            for (auto& x : rb) x = rng.next_gaussian();
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

TrainingBatch as_batch(const std::vector<EncodedDoc>& docs) {
    TrainingBatch b;
    for (const auto& d : docs) b.items.push_back(&d);
    return b;
}

// ---- criterion 1: gradient correctness ---------------------------------------

void criterion_gradients() {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto docs = random_docs(9000 + seed, 8, 12, 3);
        const HeadSet heads = init_heads(seed * 31 + 5, 12, 12);
        const double err = finite_difference_check(as_batch(docs), heads, {0.4, 0.6, 0.07, 0.07}, 1e-5, seed);
        worst = std::max(worst, err);
    }
    const double elapsed = seconds_since(start);
    char detail[128];
    std::snprintf(detail, sizeof(detail), "max relative error %.3g over 20 batches, %.1f s", worst, elapsed);
    report(1, "gradient correctness vs central differences", worst < 1e-4 && elapsed < 60.0, detail);
}

// ---- criterion 2: loss decomposition -----------------------------------------

void criterion_decomposition() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto docs = random_docs(7000 + seed, 5 + seed % 5, 10, 2 + seed % 3);
        const HeadSet heads = init_heads(seed, 10, 8);
        const LossConfig cfg{0.4, 0.6, 0.07, 0.07};
        const auto total = total_loss(as_batch(docs), heads, cfg, seed);
        double recombined = cfg.alpha * doc_loss(as_batch(docs), cfg.tau_doc, seed).value;
        for (Role role : kAllRoles)
            recombined += cfg.beta * role_loss(as_batch(docs), heads, role, cfg.tau_role, seed).value;
        worst = std::max(worst, std::abs(total.total - recombined));
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "max |total - (a*doc + b*sum role)| = %.3g over 100 batches", worst);
    report(2, "joint loss decomposition exactness", worst < 1e-12, detail);
}

// ---- criterion 3: closed-form InfoNCE values ----------------------------------

void criterion_closed_form() {
    auto axis = [](std::size_t d, std::size_t i) {
        std::vector<double> v(d, 0.0);
        v[i] = 1.0;
        return v;
    };
    auto doc = [&](const char* id, const char* label, std::vector<double> meta) {
        EncodedDoc e;
        e.doc_id = id;
        e.cluster_label = label;
        e.meta = meta;
        for (auto& rb : e.role_base) rb = meta;
        return e;
    };
    std::vector<EncodedDoc> case1 = {doc("a", "x", axis(4, 0)), doc("b", "x", axis(4, 0)), doc("c", "y", axis(4, 1))};
    const double got1 = doc_loss(as_batch(case1), 1.0, 3).value;
    const double want1 = std::log1p(std::exp(-1.0));

    std::vector<EncodedDoc> case2 = {doc("a", "x", axis(4, 0)), doc("b", "x", axis(4, 0)), doc("c", "y", axis(4, 0)),
                                     doc("d", "z", axis(4, 0)), doc("e", "w", axis(4, 0))};
    const double got2 = doc_loss(as_batch(case2), 1.0, 3).value;
    const double want2 = std::log(4.0);

    char detail[128];
    std::snprintf(detail, sizeof(detail), "|L - ln(1+e^-1)| = %.3g, |L - ln 4| = %.3g", std::abs(got1 - want1),
                  std::abs(got2 - want2));
    report(3, "closed-form InfoNCE values", std::abs(got1 - want1) < 1e-9 && std::abs(got2 - want2) < 1e-9, detail);
}

// ---- criterion 4: retrieval oracle equivalence ---------------------------------

void criterion_retrieval_oracle() {
    const auto start = std::chrono::steady_clock::now();
    detail::SplitMix64 rng(8080);
    std::vector<EmbeddingSet> sets;
    char buf[16];
    for (std::size_t i = 0; i < 500; ++i) {
        std::snprintf(buf, sizeof(buf), "doc%04zu", i);
        EmbeddingSet s;
        s.doc_id = buf;
        auto unit = [&] {
            std::vector<double> v(32);
            for (auto& x : v) x = rng.next_gaussian();
            return detail::to_float(detail::normalized(std::move(v)));
        };
        s.meta = unit();
        for (auto& r : s.roles) r = unit();
        sets.push_back(std::move(s));
    }
    const auto index = VectorIndex::build(sets);

    auto oracle_full = [&](const EmbeddingSet& query, std::size_t k_depth, std::size_t n_pool, double lambda) {
        std::vector<ScoredDoc> coarse;
        for (const auto& s : sets) {
            if (s.doc_id == query.doc_id) continue;
            coarse.push_back({s.doc_id, detail::cosine(query.meta, s.meta)});
        }
        std::sort(coarse.begin(), coarse.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
            return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
        });
        if (coarse.size() > k_depth) coarse.resize(k_depth);
        std::vector<ScoredDoc> reranked;
        const double omega = (1.0 - lambda) / 4.0;
        for (std::size_t i = 0; i < coarse.size() && i < n_pool; ++i) {
            const auto it = std::find_if(sets.begin(), sets.end(),
                                         [&](const EmbeddingSet& s) { return s.doc_id == coarse[i].doc_id; });
            double score = lambda * detail::cosine(query.meta, it->meta);
            for (std::size_t r = 0; r < 4; ++r) score += omega * detail::cosine(query.roles[r], it->roles[r]);
            reranked.push_back({coarse[i].doc_id, score});
        }
        std::sort(reranked.begin(), reranked.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
            return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
        });
        return std::pair{coarse, reranked};
    };

    bool exact = true;
    for (int q = 0; q < 50 && exact; ++q) {
        const auto& query = sets[rng.next_below(sets.size())];
        const auto coarse = coarse_retrieve(index, std::span<const float>(query.meta), 300, query.doc_id);
        const auto ranked = rerank(index, query, coarse, 0.6, 100);
        const auto [want_coarse, want_rerank] = oracle_full(query, 300, 100, 0.6);
        if (coarse.size() != want_coarse.size() || ranked.items.size() != want_rerank.size()) {
            exact = false;
            break;
        }
        for (std::size_t i = 0; i < coarse.size(); ++i)
            if (coarse[i].doc_id != want_coarse[i].doc_id || coarse[i].score != want_coarse[i].score) exact = false;
        for (std::size_t i = 0; i < ranked.items.size(); ++i)
            if (ranked.items[i].doc_id != want_rerank[i].doc_id || ranked.items[i].score != want_rerank[i].score)
                exact = false;
    }
    const double elapsed = seconds_since(start);
    char detail[96];
    std::snprintf(detail, sizeof(detail), "%s over 50 queries x 500 docs, %.1f s", exact ? "exact match" : "MISMATCH",
                  elapsed);
    report(4, "retrieval oracle equivalence", exact && elapsed < 30.0, detail);
}

// ---- criterion 5: metric oracle equivalence -------------------------------------

namespace metric_oracle {

double precision(const std::vector<std::string>& ranked, const std::set<std::string>& rel, std::size_t k) {
    int hits = 0;
    for (std::size_t i = 0; i < k && i < ranked.size(); ++i) hits += rel.count(ranked[i]) ? 1 : 0;
    return double(hits) / double(k);
}
double recall(const std::vector<std::string>& ranked, const std::set<std::string>& rel, std::size_t k) {
    int hits = 0;
    for (std::size_t i = 0; i < k && i < ranked.size(); ++i) hits += rel.count(ranked[i]) ? 1 : 0;
    return rel.empty() ? 0.0 : double(hits) / double(rel.size());
}
double ndcg(const std::vector<std::string>& ranked, const std::set<std::string>& rel, std::size_t k) {
    double dcg = 0.0;
    for (std::size_t i = 0; i < k && i < ranked.size(); ++i)
        if (rel.count(ranked[i])) dcg += 1.0 / std::log2(i + 2.0);
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, rel.size()); ++i) idcg += 1.0 / std::log2(i + 2.0);
    return idcg == 0.0 ? 0.0 : dcg / idcg;
}
double mrr(const std::vector<std::string>& ranked, const std::set<std::string>& rel) {
    for (std::size_t i = 0; i < ranked.size(); ++i)
        if (rel.count(ranked[i])) return 1.0 / double(i + 1);
    return 0.0;
}
double ap(const std::vector<std::string>& ranked, const std::set<std::string>& rel) {
    int hits = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (rel.count(ranked[i])) {
            ++hits;
            sum += double(hits) / double(i + 1);
        }
    }
    return rel.empty() ? 0.0 : sum / double(rel.size());
}
RougeScore rouge1(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    std::map<std::string, int> rc, used;
    for (const auto& t : ref) rc[t]++;
    int overlap = 0;
    for (const auto& t : cand)
        if (rc.count(t) && used[t]++ < rc[t]) ++overlap;
    RougeScore s;
    if (!cand.empty()) s.precision = double(overlap) / cand.size();
    if (!ref.empty()) s.recall = double(overlap) / ref.size();
    if (s.precision + s.recall > 0) s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}
std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<std::size_t>> dp(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1 : std::max(dp[i - 1][j], dp[i][j - 1]);
    return dp[a.size()][b.size()];
}

}  // namespace metric_oracle

void criterion_metric_oracle() {
    detail::SplitMix64 rng(515);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 5 + rng.next_below(40);
        std::vector<std::string> ranked;
        for (std::size_t i = 0; i < n; ++i) ranked.push_back("d" + std::to_string(i));
        detail::shuffle(ranked, rng);
        std::set<std::string> rel;
        for (std::size_t i = 0, m = 1 + rng.next_below(n); i < m; ++i)
            rel.insert("d" + std::to_string(rng.next_below(n + 3)));
        const std::size_t k = 1 + rng.next_below(12);
        worst = std::max(worst, std::abs(precision_at_k(ranked, rel, k) - metric_oracle::precision(ranked, rel, k)));
        worst = std::max(worst, std::abs(recall_at_k(ranked, rel, k) - metric_oracle::recall(ranked, rel, k)));
        worst = std::max(worst, std::abs(ndcg_at_k(ranked, rel, k) - metric_oracle::ndcg(ranked, rel, k)));
        worst = std::max(worst, std::abs(mrr(ranked, rel) - metric_oracle::mrr(ranked, rel)));
        worst = std::max(worst, std::abs(map_metric(ranked, rel) - metric_oracle::ap(ranked, rel)));

        // random ROUGE instance
        const std::vector<std::string> vocab = {"ax", "by", "cz", "dw", "ev", "fu"};
        std::vector<std::string> ct, rt;
        std::string cs, rs;
        for (std::size_t i = 0, m = 1 + rng.next_below(9); i < m; ++i) {
            ct.push_back(vocab[rng.next_below(vocab.size())]);
            cs += ct.back() + " ";
        }
        for (std::size_t i = 0, m = 1 + rng.next_below(9); i < m; ++i) {
            rt.push_back(vocab[rng.next_below(vocab.size())]);
            rs += rt.back() + " ";
        }
        worst = std::max(worst, std::abs(rouge_n(cs, rs, 1).f1 - metric_oracle::rouge1(ct, rt).f1));
        const double l = double(metric_oracle::lcs(ct, rt));
        const double p = l / ct.size(), r = l / rt.size();
        const double f = (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
        worst = std::max(worst, std::abs(rouge_l(cs, rs).f1 - f));
    }
    // hand-computed cases
    const double ndcg_hand = ndcg_at_k({"a", "b", "c"}, {"a", "c"}, 3);
    const double rouge_hand = rouge_n("a b c", "a b d", 1).f1;
    const bool hand_ok =
        std::abs(ndcg_hand - 0.9197207891481876) < 1e-9 && std::abs(rouge_hand - 2.0 / 3.0) < 1e-9;
    char detail[128];
    std::snprintf(detail, sizeof(detail), "max oracle deviation %.3g; NDCG=%.5f ROUGE-1=%.5f", worst, ndcg_hand,
                  rouge_hand);
    report(5, "metric oracle equivalence", worst < 1e-9 && hand_ok, detail);
}

// ---- criterion 6: re-ranking benefit trend --------------------------------------

void criterion_lambda_trend() {
    const auto start = std::chrono::steady_clock::now();
    SyntheticSpec spec;  // 200 docs, 4 clusters, role_signal 0.5, seed 42
    const auto bundle = generate(spec);
    const auto index = VectorIndex::build(bundle.sets);
    const std::vector<double> grid = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> p10;
    for (double lambda : grid) {
        const auto runs = run_all_queries(index, bundle.qrels, {600, 100, lambda});
        p10.push_back(macro_metrics(runs, bundle.qrels).at("P@10"));
    }
    const double at00 = p10[0], at06 = p10[3], at10 = p10[5];
    int violations = 0;
    const std::size_t peak = std::max_element(p10.begin(), p10.end()) - p10.begin();
    for (std::size_t i = 0; i + 1 < p10.size(); ++i) {
        if (i < peak && p10[i + 1] < p10[i]) ++violations;
        if (i >= peak && p10[i + 1] > p10[i]) ++violations;
    }
    const double elapsed = seconds_since(start);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "P@10: l0=%.3f l0.6=%.3f l1=%.3f, %d unimodality violation(s), %.1f s", at00, at06, at10,
                  violations, elapsed);
    report(6, "re-ranking benefit trend over lambda", at06 > at10 && at06 > at00 && violations <= 1 && elapsed < 300.0,
           detail);
}

// ---- criterion 7: training separation via the CLI --------------------------------

void criterion_training_separation() {
    const auto start = std::chrono::steady_clock::now();
    const std::string dir = (g_work / "c7").string();
    std::filesystem::create_directories(dir);
    bool ok = true;
    std::string why;
    if (run_cli("synth --out-dir " + dir + "/synth --seed 42") != 0) {
        ok = false;
        why = "synth failed";
    }
    if (ok && run_cli("summarize --mock-providers --corpus " + dir + "/synth/corpus.jsonl --out " + dir +
                      "/summaries.jsonl --out-dir " + dir + "/sum") != 0) {
        ok = false;
        why = "summarize failed";
    }
    if (ok && run_cli("train --mock-providers --summaries " + dir + "/summaries.jsonl --corpus " + dir +
                      "/synth/corpus.jsonl --checkpoint-out " + dir + "/heads.bin --out-dir " + dir + "/train") != 0) {
        ok = false;
        why = "train failed";
    }
    double min_gap = 0.0, first = 0.0, last = 0.0;
    if (ok) {
        const auto summary = nlohmann::json::parse(read_file(dir + "/train/train_summary.json"));
        first = summary.at("first_epoch_loss").get<double>();
        last = summary.at("final_epoch_loss").get<double>();
        min_gap = 1e9;
        for (const char* role : {"O", "M", "R", "C"}) {
            const double intra = summary.at("separation").at(role).at("intra").get<double>();
            const double inter = summary.at("separation").at(role).at("inter").get<double>();
            min_gap = std::min(min_gap, intra - inter);
        }
        ok = min_gap >= 0.1 && last < first;
    }
    const double elapsed = seconds_since(start);
    char detail[160];
    if (why.empty())
        std::snprintf(detail, sizeof(detail), "min role gap %.3f (need >= 0.1), loss %.3f -> %.3f, %.1f s", min_gap,
                      first, last, elapsed);
    else
        std::snprintf(detail, sizeof(detail), "%s", why.c_str());
    report(7, "training separation after cmd_train", ok && elapsed < 300.0, detail);
}

// ---- criterion 8: summarizer contracts with mock providers ------------------------

void criterion_summarizer_contracts() {
    Config cfg;
    cfg.providers.embedding_dim = 128;
    SyntheticSpec spec;
    spec.n_docs = 100;
    spec.seed = 7;
    const auto bundle = generate(spec);
    auto providers = make_mock_providers(cfg);
    SummarizerOptions opts;

    bool filter_sound = true;
    const auto pools = build_query_pools(*providers.completion, *providers.embedding, default_base_templates(), opts);
    for (const auto& [role, pool] : pools) {
        const auto base_vec = providers.embedding->embed_one(pool.base_template);
        if (static_cast<int>(pool.variants.size()) != opts.k_target) filter_sound = false;
        for (const auto& v : pool.variants)
            if (detail::cosine(providers.embedding->embed_one(v).values, base_vec.values) < opts.delta)
                filter_sound = false;
    }

    const auto first_run = summarize_corpus(*providers.completion, *providers.embedding, bundle.documents, pools, opts);
    const auto second_run = summarize_corpus(*providers.completion, *providers.embedding, bundle.documents, pools, opts);

    bool medoid_ok = true;
    std::vector<StructuredSummarySet> sets;
    for (const auto& outcome : first_run) {
        sets.push_back(outcome.set);
        for (const auto& [role, rs] : outcome.set.role_summaries) {
            // brute-force medoid over the K candidates
            const auto vecs = embed_all(*providers.embedding, rs.variant_answers);
            std::size_t best = 0;
            double best_mean = -2.0;
            for (std::size_t i = 0; i < vecs.size(); ++i) {
                double total = 0.0;
                for (std::size_t j = 0; j < vecs.size(); ++j)
                    if (i != j) total += detail::cosine(vecs[i].values, vecs[j].values);
                const double mean = vecs.size() > 1 ? total / double(vecs.size() - 1) : 1.0;
                if (mean > best_mean) {
                    best_mean = mean;
                    best = i;
                }
            }
            if (rs.text != rs.variant_answers[best]) medoid_ok = false;
        }
    }

    const auto violations = check_anchor_integrity(bundle.documents, sets);

    bool deterministic = first_run.size() == second_run.size();
    if (deterministic)
        for (std::size_t i = 0; i < first_run.size(); ++i)
            if (to_json(first_run[i].set).dump() != to_json(second_run[i].set).dump()) deterministic = false;

    char detail[192];
    std::snprintf(detail, sizeof(detail),
                  "delta filter %s, medoid-vs-brute-force %s, %zu anchor violations, determinism %s",
                  filter_sound ? "sound" : "VIOLATED", medoid_ok ? "agrees" : "DISAGREES", violations.size(),
                  deterministic ? "holds" : "BROKEN");
    report(8, "summarizer contracts on a 100-doc mock run",
           filter_sound && medoid_ok && violations.empty() && deterministic, detail);
}

// ---- criterion 9: end-to-end determinism via the CLI --------------------------------

bool run_full_pipeline(const std::string& dir, std::string& why) {
    std::filesystem::create_directories(dir);
    if (run_cli("synth --out-dir " + dir + "/synth --seed 42") != 0) return why = "synth failed", false;
    if (run_cli("summarize --mock-providers --corpus " + dir + "/synth/corpus.jsonl --out " + dir +
                "/summaries.jsonl --out-dir " + dir + "/sum") != 0)
        return why = "summarize failed", false;
    if (run_cli("train --mock-providers --summaries " + dir + "/summaries.jsonl --corpus " + dir +
                "/synth/corpus.jsonl --checkpoint-out " + dir + "/heads.bin --out-dir " + dir + "/train") != 0)
        return why = "train failed", false;
    if (run_cli("index --mock-providers --summaries " + dir + "/summaries.jsonl --checkpoint " + dir +
                "/heads.bin --index-out " + dir + "/index.bin --out-dir " + dir + "/idx") != 0)
        return why = "index failed", false;
    if (run_cli("query --index " + dir + "/index.bin --all-docs --out-dir " + dir + "/query") != 0)
        return why = "query failed", false;
    if (run_cli("evaluate --run " + dir + "/query/run.txt --qrels " + dir + "/synth/qrels.txt --out-dir " + dir +
                "/eval") != 0)
        return why = "evaluate failed", false;
    return true;
}

void criterion_end_to_end_determinism() {
    const auto start = std::chrono::steady_clock::now();
    std::string why;
    bool ok = run_full_pipeline((g_work / "e2e-a").string(), why) && run_full_pipeline((g_work / "e2e-b").string(), why);
    std::string mismatch;
    if (ok) {
        const std::vector<std::string> artifacts = {"summaries.jsonl", "heads.bin",      "index.bin",
                                                    "train/loss_trace.csv", "query/run.txt", "eval/eval_report.json"};
        for (const auto& name : artifacts) {
            if (read_file((g_work / "e2e-a" / name).string()) != read_file((g_work / "e2e-b" / name).string())) {
                ok = false;
                mismatch = name;
                break;
            }
        }
    }
    const double elapsed = seconds_since(start);
    char detail[160];
    if (!why.empty())
        std::snprintf(detail, sizeof(detail), "%s", why.c_str());
    else if (!mismatch.empty())
        std::snprintf(detail, sizeof(detail), "artifact differs between runs: %s", mismatch.c_str());
    else
        std::snprintf(detail, sizeof(detail), "6 artifacts byte-identical across two full runs, %.1f s", elapsed);
    report(9, "end-to-end determinism (synth->summarize->train->index->query->evaluate)", ok, detail);
}

// ---- criterion 10: K/N sensitivity harness --------------------------------------------

void criterion_kn_sweep() {
    const std::string dir = (g_work / "c10").string();
    std::filesystem::create_directories(dir);
    bool ok = true;
    std::string why;
    if (run_cli("synth --out-dir " + dir + "/synth --seed 42") != 0) {
        ok = false;
        why = "synth failed";
    }
    if (ok && run_cli("sweep --param k_n --data " + dir + "/synth --grid 200,400,600,800,1200 --grid-n 20,50,100,150 "
                      "--out-dir " + dir + "/sweep") != 0) {
        ok = false;
        why = "sweep failed";
    }
    std::size_t rows = 0;
    bool has_target = false, ndcg_ok = true;
    if (ok) {
        std::ifstream csv(dir + "/sweep/sweep.csv");
        std::string header;
        std::getline(csv, header);
        if (header.find("k_depth") == std::string::npos || header.find("NDCG@10") == std::string::npos) ok = false;
        // locate the NDCG@10 column
        std::vector<std::string> cols;
        std::istringstream hs(header);
        std::string col;
        while (std::getline(hs, col, ',')) cols.push_back(col);
        const auto ndcg_at = std::find(cols.begin(), cols.end(), "NDCG@10") - cols.begin();
        std::string line;
        while (std::getline(csv, line)) {
            if (line.empty()) continue;
            ++rows;
            std::vector<double> values;
            std::istringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) values.push_back(std::stod(cell));
            if (values[0] == 600.0 && values[1] == 100.0) has_target = true;
            const double ndcg = values[static_cast<std::size_t>(ndcg_at)];
            if (!(ndcg >= 0.0 && ndcg <= 1.0)) ndcg_ok = false;
        }
        if (rows != 20 || !has_target || !ndcg_ok) ok = false;
    }
    char detail[160];
    if (why.empty())
        std::snprintf(detail, sizeof(detail), "%zu grid rows, (600,100) %s, NDCG@10 values %s", rows,
                      has_target ? "present" : "MISSING", ndcg_ok ? "in [0,1]" : "OUT OF RANGE");
    else
        std::snprintf(detail, sizeof(detail), "%s", why.c_str());
    report(10, "K/N sensitivity sweep via cmd_sweep", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; i += 2) {
        if (std::string(argv[i]) == "--cli") g_cli_path = argv[i + 1];
    }
    if (g_cli_path.empty()) {
        std::cerr << "usage: omrc_acceptance --cli <path-to-omrc-binary>\n";
        return 2;
    }
    g_work = std::filesystem::temp_directory_path() /
             ("omrc-acceptance-" + std::to_string(::getpid()));
    std::filesystem::create_directories(g_work);

    criterion_gradients();
    criterion_decomposition();
    criterion_closed_form();
    criterion_retrieval_oracle();
    criterion_metric_oracle();
    criterion_lambda_trend();
    criterion_training_separation();
    criterion_summarizer_contracts();
    criterion_end_to_end_determinism();
    criterion_kn_sweep();

    int failures = 0;
    for (const auto& c : g_results)
        if (!c.passed) ++failures;
    std::cout << (failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(failures)) << "\n";

    std::error_code ec;
    std::filesystem::remove_all(g_work, ec);
    return failures;
}
