#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "omrc/config.hpp"
#include "omrc/corpus.hpp"
#include "omrc/evaluation.hpp"
#include "omrc/providers.hpp"
#include "omrc/representation.hpp"
#include "omrc/retrieval.hpp"
#include "omrc/summarizer.hpp"
#include "omrc/synthetic.hpp"
#include "omrc/training.hpp"

namespace omrc {

struct ProviderBundle {
    std::shared_ptr<CompletionProvider> completion;
    std::shared_ptr<EmbeddingProvider> embedding;
};

// Providers are the only components that touch the network; everything else
// receives them by reference. force_mock lets any command run offline.
// Declared here, defined in pipeline_http.hpp (HTTP) or resolved inline for
// mocks via make_mock_providers.
inline ProviderBundle make_mock_providers(const Config& cfg) {
    ProviderBundle bundle;
    const auto seed = static_cast<std::uint64_t>(cfg.training.seed);
    bundle.completion = std::make_shared<MockCompletionProvider>(detail::mix_seed(seed, 0xC0117));
    MockProviderOptions opts;
    opts.dim = static_cast<std::size_t>(cfg.providers.embedding_dim);
    opts.seed = detail::mix_seed(seed, 0xE3BED);
    opts.tag_noise = cfg.providers.mock_tag_noise;
    opts.batch_limit = static_cast<std::size_t>(cfg.providers.batch_limit);
    bundle.embedding = std::make_shared<MockEmbeddingProvider>(opts);
    if (!cfg.providers.cache_path.empty())
        bundle.embedding = std::make_shared<CachedEmbeddingProvider>(bundle.embedding, cfg.providers.cache_path);
    return bundle;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
}

// Every command materializes its run directory with the effective config
// echoed into it.
inline void prepare_out_dir(const std::string& dir, const Config& cfg) {
    std::filesystem::create_directories(dir);
    write_text_file(dir + "/config_echo.toml", cfg.to_toml());
}

inline std::string join_path(const std::string& dir, const std::string& name) { return dir + "/" + name; }

// --- ingest -------------------------------------------------------------------

struct IngestOutcome {
    std::size_t documents = 0;
    std::size_t errors = 0;
    std::size_t warnings = 0;
};

inline IngestOutcome cmd_ingest(const Config& cfg, const std::string& corpus_path, const std::string& out_dir,
                                std::ostream& log) {
    prepare_out_dir(out_dir, cfg);
    const CorpusLoadResult result = load_corpus(corpus_path);
    nlohmann::json report{{"corpus", corpus_path},
                          {"documents", result.documents.size()},
                          {"errors", nlohmann::json::array()},
                          {"warnings", nlohmann::json::array()}};
    IngestOutcome outcome;
    outcome.documents = result.documents.size();
    for (const auto& issue : result.issues) {
        nlohmann::json entry{{"line", issue.line}, {"message", issue.message}};
        if (issue.severity == LoadIssue::Severity::error) {
            report["errors"].push_back(entry);
            ++outcome.errors;
            log << "error: line " << issue.line << ": " << issue.message << "\n";
        } else {
            report["warnings"].push_back(entry);
            ++outcome.warnings;
            log << "warning: line " << issue.line << ": " << issue.message << "\n";
        }
    }
    write_text_file(join_path(out_dir, "ingest_report.json"), report.dump(2) + "\n");
    log << "ingested " << outcome.documents << " documents (" << outcome.errors << " errors, " << outcome.warnings
        << " warnings)\n";
    return outcome;
}

// --- synth --------------------------------------------------------------------

inline void cmd_synth(const Config& cfg, const SyntheticSpec& spec, const std::string& out_dir, std::ostream& log) {
    prepare_out_dir(out_dir, cfg);
    const SyntheticBundle bundle = generate(spec);
    {
        std::ofstream out(join_path(out_dir, "corpus.jsonl"), std::ios::trunc);
        if (!out) throw DataError("cannot write corpus.jsonl");
        for (const auto& d : bundle.documents) out << to_json(d).dump() << "\n";
    }
    save_summaries(bundle.summaries, join_path(out_dir, "summaries.jsonl"));
    VectorIndex::build(bundle.sets).save(join_path(out_dir, "sets.idx"));
    save_qrels(bundle.qrels, join_path(out_dir, "qrels.txt"));
    log << "synthetic bundle: " << bundle.documents.size() << " docs, " << spec.n_clusters << " clusters, dim "
        << spec.dim << " -> " << out_dir << "\n";
}

// --- summarize ------------------------------------------------------------------

struct SummarizeOutcome {
    std::size_t documents = 0;
    std::size_t incomplete = 0;
    std::size_t failures = 0;
    std::size_t warnings = 0;
};

inline SummarizeOutcome cmd_summarize(const Config& cfg, ProviderBundle& providers, const std::string& corpus_path,
                                      const std::string& out_path, const std::string& out_dir, std::ostream& log) {
    prepare_out_dir(out_dir, cfg);
    const CorpusLoadResult corpus = load_corpus(corpus_path);
    if (!corpus.ok()) throw DataError("corpus has errors; run ingest for the report: " + corpus_path);

    SummarizerOptions opts;
    opts.delta = cfg.summarizer.delta;
    opts.k_target = static_cast<int>(cfg.summarizer.k_target);
    opts.evidence_m = static_cast<int>(cfg.summarizer.evidence_m);
    opts.max_rounds = static_cast<int>(cfg.summarizer.max_rounds);
    opts.concurrency = static_cast<std::size_t>(cfg.providers.concurrency);

    const auto pools = build_query_pools(*providers.completion, *providers.embedding,
                                         cfg.summarizer.templates(), opts);
    const auto outcomes = summarize_corpus(*providers.completion, *providers.embedding, corpus.documents, pools, opts);

    std::vector<StructuredSummarySet> sets;
    sets.reserve(outcomes.size());
    nlohmann::json report{{"failures", nlohmann::json::array()}, {"warnings", nlohmann::json::array()}};
    SummarizeOutcome result;
    result.documents = outcomes.size();
    for (const auto& o : outcomes) {
        sets.push_back(o.set);
        if (!o.set.complete()) ++result.incomplete;
        for (const auto& f : o.failures) {
            report["failures"].push_back(f);
            ++result.failures;
        }
        for (const auto& w : o.warnings) {
            report["warnings"].push_back(w);
            ++result.warnings;
        }
    }
    save_summaries(sets, out_path);
    write_text_file(join_path(out_dir, "summarize_report.json"), report.dump(2) + "\n");
    log << "summarized " << result.documents << " documents -> " << out_path << " (" << result.incomplete
        << " incomplete, " << result.warnings << " warnings)\n";
    return result;
}

// --- train ----------------------------------------------------------------------

// Builds encoder-space training inputs from persisted summaries; labels come
// from the corpus cluster_label field. Incomplete or unlabeled entries are
// skipped with a warning.
inline std::vector<EncodedDoc> encode_training_inputs(EmbeddingProvider& embedding,
                                                      const std::vector<Document>& docs,
                                                      const std::vector<StructuredSummarySet>& sets,
                                                      std::vector<std::string>* warnings = nullptr) {
    std::map<std::string, const Document*> by_id;
    for (const auto& d : docs) by_id[d.id] = &d;
    std::vector<EncodedDoc> out;
    for (const auto& s : sets) {
        auto it = by_id.find(s.doc_id);
        if (it == by_id.end() || !it->second->cluster_label) {
            if (warnings) warnings->push_back("doc " + s.doc_id + ": no cluster label; excluded from training");
            continue;
        }
        if (!s.complete() || s.role_summaries.size() != 4) {
            if (warnings) warnings->push_back("doc " + s.doc_id + ": incomplete summary set; excluded from training");
            continue;
        }
        EncodedDoc e;
        e.doc_id = s.doc_id;
        e.cluster_label = *it->second->cluster_label;
        e.meta = detail::normalized(detail::to_double(embedding.embed_one(s.meta_summary).values));
        for (Role r : kAllRoles)
            e.role_base[role_index(r)] = detail::to_double(embedding.embed_one(s.role_summaries.at(r).text).values);
        out.push_back(std::move(e));
    }
    return out;
}

struct TrainOutcome {
    double first_epoch_loss = 0.0;
    double final_epoch_loss = 0.0;
    SeparationStats separation;
    std::size_t documents = 0;
};

inline TrainOutcome cmd_train(const Config& cfg, ProviderBundle& providers, const std::string& summaries_path,
                              const std::string& corpus_path, const std::string& checkpoint_out,
                              const std::string& out_dir, std::ostream& log) {
    prepare_out_dir(out_dir, cfg);
    const auto corpus = load_corpus(corpus_path);
    if (!corpus.ok()) throw DataError("corpus has errors: " + corpus_path);
    const auto sets = load_summaries(summaries_path);

    std::vector<std::string> warnings;
    const auto encoded = encode_training_inputs(*providers.embedding, corpus.documents, sets, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << "\n";

    const auto in_dim = providers.embedding->dim();
    HeadSet heads = init_heads(static_cast<std::uint64_t>(cfg.training.seed), in_dim,
                               static_cast<std::size_t>(cfg.training.out_dim));
    LossConfig loss_cfg{cfg.training.alpha, cfg.training.beta, cfg.training.tau_doc, cfg.training.tau_role};
    TrainOptions opt;
    opt.epochs = static_cast<int>(cfg.training.epochs);
    opt.batch_size = static_cast<std::size_t>(cfg.training.batch_size);
    opt.lr = cfg.training.lr;
    opt.seed = static_cast<std::uint64_t>(cfg.training.seed);

    TrainResult result = train(encoded, std::move(heads), loss_cfg, opt);
    save_heads(result.heads, checkpoint_out);
    write_loss_trace(result.trace, join_path(out_dir, "loss_trace.csv"));

    TrainOutcome outcome;
    outcome.documents = encoded.size();
    outcome.first_epoch_loss = result.trace.front().mean_total;
    outcome.final_epoch_loss = result.trace.back().mean_total;
    outcome.separation = role_separation(encoded, result.heads);

    nlohmann::json sep = nlohmann::json::object();
    for (Role r : kAllRoles)
        sep[role_key(r)] = {{"intra", outcome.separation.intra[role_index(r)]},
                            {"inter", outcome.separation.inter[role_index(r)]}};
    nlohmann::json summary{{"documents", outcome.documents},
                           {"first_epoch_loss", outcome.first_epoch_loss},
                           {"final_epoch_loss", outcome.final_epoch_loss},
                           {"separation", sep}};
    write_text_file(join_path(out_dir, "train_summary.json"), summary.dump(2) + "\n");
    log << "trained heads on " << outcome.documents << " documents; loss " << outcome.first_epoch_loss << " -> "
        << outcome.final_epoch_loss << "; checkpoint " << checkpoint_out << "\n";
    return outcome;
}

// --- index ----------------------------------------------------------------------

inline std::size_t cmd_index(const Config& cfg, ProviderBundle& providers, const std::string& summaries_path,
                             const std::string& checkpoint_path, const std::string& index_out,
                             const std::string& out_dir, std::ostream& log) {
    prepare_out_dir(out_dir, cfg);
    const auto sets = load_summaries(summaries_path);
    const HeadSet heads = load_heads(checkpoint_path);
    std::vector<StructuredSummarySet> usable;
    for (const auto& s : sets) {
        if (s.complete())
            usable.push_back(s);
        else
            log << "warning: doc " << s.doc_id << ": incomplete summary set; excluded from index\n";
    }
    const auto encoded = encode_corpus(*providers.embedding, heads, usable);
    VectorIndex::build(encoded).save(index_out);
    log << "indexed " << encoded.size() << " documents -> " << index_out << "\n";
    return encoded.size();
}

// --- query ----------------------------------------------------------------------

struct QuerySpec {
    std::string doc_id;    // query by document already in the index
    std::string text;      // or free text (embedded on the fly)
    std::size_t print_k = 10;
};

inline RankedList run_query(const Config& cfg, ProviderBundle& providers, const VectorIndex& index,
                            const QuerySpec& query, const std::string& checkpoint_path) {
    RankedParams params{static_cast<std::size_t>(cfg.retrieval.k_depth),
                        static_cast<std::size_t>(cfg.retrieval.n_pool), cfg.retrieval.lambda};
    if (!query.doc_id.empty()) {
        const EmbeddingSet* set = index.find(query.doc_id);
        if (set == nullptr) throw DataError("query document \"" + query.doc_id + "\" is not in the index");
        return retrieve(index, *set, params);
    }
    if (query.text.empty()) throw UsageError("query: provide a document id or query text");
    EmbeddingSet q;
    q.doc_id = "query";
    const auto base = detail::to_double(providers.embedding->embed_one(query.text).values);
    q.meta = detail::to_float(detail::normalized(base));
    if (!checkpoint_path.empty()) {
        const HeadSet heads = load_heads(checkpoint_path);
        for (Role r : kAllRoles) q.roles[role_index(r)] = detail::to_float(project(heads[role_index(r)], base));
    } else {
        // No heads available: reuse the meta vector for the role slots.
        for (Role r : kAllRoles) q.roles[role_index(r)] = q.meta;
    }
    const auto coarse = coarse_retrieve(index, std::span<const float>(q.meta), params.k_depth, q.doc_id);
    return rerank(index, q, coarse, params.lambda, params.n_pool, params.k_depth);
}

inline RankedList cmd_query(const Config& cfg, ProviderBundle& providers, const std::string& index_path,
                            const QuerySpec& query, const std::string& checkpoint_path, const std::string& out_dir,
                            std::ostream& log) {
    prepare_out_dir(out_dir, cfg);
    const VectorIndex index = VectorIndex::load(index_path);
    RankedList ranked = run_query(cfg, providers, index, query, checkpoint_path);
    write_run_file({ranked}, join_path(out_dir, "run.txt"), "omrc");
    char buf[48];
    for (std::size_t i = 0; i < ranked.items.size() && i < query.print_k; ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f", ranked.items[i].score);
        log << (i + 1) << "\t" << ranked.items[i].doc_id << "\t" << buf << "\n";
    }
    return ranked;
}

// Queries every document in the index against the rest and writes one
// combined TREC run file.
inline std::size_t cmd_query_all(const Config& cfg, const std::string& index_path, const std::string& out_dir,
                                 std::ostream& log) {
    prepare_out_dir(out_dir, cfg);
    const VectorIndex index = VectorIndex::load(index_path);
    RankedParams params{static_cast<std::size_t>(cfg.retrieval.k_depth),
                        static_cast<std::size_t>(cfg.retrieval.n_pool), cfg.retrieval.lambda};
    std::vector<RankedList> runs;
    runs.reserve(index.size());
    for (const auto& entry : index.entries()) runs.push_back(retrieve(index, entry, params));
    write_run_file(runs, join_path(out_dir, "run.txt"), "omrc");
    log << "queried " << runs.size() << " documents -> " << join_path(out_dir, "run.txt") << "\n";
    return runs.size();
}

// Batch variant used by sweeps and end-to-end runs: one ranked list per
// query id found in both the qrels and the index.
inline std::vector<RankedList> run_all_queries(const VectorIndex& index, const Qrels& qrels,
                                               const RankedParams& params) {
    std::vector<RankedList> runs;
    for (const auto& [qid, rel] : qrels.relevant) {
        if (rel.empty()) continue;
        const EmbeddingSet* set = index.find(qid);
        if (set == nullptr) continue;
        runs.push_back(retrieve(index, *set, params));
    }
    return runs;
}

inline std::map<std::string, double> macro_metrics(const std::vector<RankedList>& runs, const Qrels& qrels,
                                                   const std::vector<std::size_t>& ks = {10}) {
    std::map<std::string, double> macro;
    std::size_t evaluated = 0;
    for (const auto& run : runs) {
        auto it = qrels.relevant.find(run.query_id);
        if (it == qrels.relevant.end() || it->second.empty()) continue;
        std::vector<std::string> ids;
        ids.reserve(run.items.size());
        for (const auto& s : run.items) ids.push_back(s.doc_id);
        for (const auto& [name, value] : query_metrics(ids, it->second, ks)) macro[name] += value;
        ++evaluated;
    }
    if (evaluated > 0)
        for (auto& [name, value] : macro) value /= static_cast<double>(evaluated);
    return macro;
}

// --- evaluate -------------------------------------------------------------------

inline EvalReport cmd_evaluate(const Config& cfg, const std::string& run_path, const std::string& qrels_path,
                               const std::vector<std::size_t>& ks, const std::string& out_dir, std::ostream& log) {
    prepare_out_dir(out_dir, cfg);
    const EvalReport report = evaluate_run(run_path, qrels_path, ks);
    write_text_file(join_path(out_dir, "eval_report.json"), to_json(report).dump(2) + "\n");
    log << format_report_table(report);
    return report;
}

// --- sweep ----------------------------------------------------------------------

struct SweepRow {
    std::map<std::string, double> params;
    std::map<std::string, double> metrics;
};

struct SweepResult {
    std::vector<std::string> param_names;
    std::vector<SweepRow> rows;
};

inline std::vector<double> parse_grid(const std::string& grid) {
    std::vector<double> values;
    if (grid.find(':') != std::string::npos) {
        double start = 0, stop = 0, step = 0;
        if (std::sscanf(grid.c_str(), "%lf:%lf:%lf", &start, &stop, &step) != 3 || step <= 0)
            throw UsageError("sweep: grid must be start:stop:step or comma-separated values");
        for (double v = start; v <= stop + 1e-9; v += step) values.push_back(v);
        return values;
    }
    std::istringstream is(grid);
    std::string item;
    while (std::getline(is, item, ',')) {
        if (item.empty()) continue;
        values.push_back(std::stod(item));
    }
    if (values.empty()) throw UsageError("sweep: empty grid");
    return values;
}

namespace detail {

inline void write_sweep_csv(const SweepResult& sweep, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write sweep table: " + path);
    std::vector<std::string> metric_names;
    if (!sweep.rows.empty())
        for (const auto& [name, _] : sweep.rows.front().metrics) metric_names.push_back(name);
    for (std::size_t i = 0; i < sweep.param_names.size(); ++i) out << (i ? "," : "") << sweep.param_names[i];
    for (const auto& m : metric_names) out << ',' << m;
    out << '\n';
    char buf[48];
    for (const auto& row : sweep.rows) {
        bool first = true;
        for (const auto& p : sweep.param_names) {
            std::snprintf(buf, sizeof(buf), "%.10g", row.params.at(p));
            out << (first ? "" : ",") << buf;
            first = false;
        }
        for (const auto& m : metric_names) {
            std::snprintf(buf, sizeof(buf), "%.10g", row.metrics.at(m));
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace detail

// lambda sweep over the planted embedding sets: retrieval metrics as a
// function of the re-ranking weight.
inline SweepResult sweep_lambda(const Config& cfg, const std::string& sets_index_path,
                                const std::string& qrels_path, const std::vector<double>& grid) {
    const VectorIndex index = VectorIndex::load(sets_index_path);
    const Qrels qrels = load_qrels(qrels_path);
    SweepResult sweep;
    sweep.param_names = {"lambda"};
    for (double lambda : grid) {
        RankedParams params{static_cast<std::size_t>(cfg.retrieval.k_depth),
                            static_cast<std::size_t>(cfg.retrieval.n_pool), lambda};
        const auto runs = run_all_queries(index, qrels, params);
        SweepRow row;
        row.params["lambda"] = lambda;
        row.metrics = macro_metrics(runs, qrels);
        sweep.rows.push_back(std::move(row));
    }
    return sweep;
}

// (k_depth, n_pool) surface at the configured lambda: ranking quality
// over retrieval depth and candidate pool size.
inline SweepResult sweep_k_n(const Config& cfg, const std::string& sets_index_path, const std::string& qrels_path,
                             const std::vector<double>& k_grid, const std::vector<double>& n_grid) {
    const VectorIndex index = VectorIndex::load(sets_index_path);
    const Qrels qrels = load_qrels(qrels_path);
    SweepResult sweep;
    sweep.param_names = {"k_depth", "n_pool"};
    for (double k : k_grid) {
        for (double n : n_grid) {
            RankedParams params{static_cast<std::size_t>(k), static_cast<std::size_t>(n), cfg.retrieval.lambda};
            if (params.k_depth < 1 || params.n_pool < 1) throw UsageError("sweep: k and n must be >= 1");
            const auto runs = run_all_queries(index, qrels, params);
            SweepRow row;
            row.params["k_depth"] = k;
            row.params["n_pool"] = n;
            row.metrics = macro_metrics(runs, qrels);
            sweep.rows.push_back(std::move(row));
        }
    }
    return sweep;
}

// (alpha, beta) sweep with beta = 1 - alpha: retrains the heads per grid
// point on the bundle's summaries and measures retrieval quality.
inline SweepResult sweep_alpha_beta(const Config& cfg, ProviderBundle& providers, const std::string& corpus_path,
                                    const std::string& summaries_path, const std::string& qrels_path,
                                    const std::vector<double>& grid) {
    const auto corpus = load_corpus(corpus_path);
    if (!corpus.ok()) throw DataError("corpus has errors: " + corpus_path);
    const auto sets = load_summaries(summaries_path);
    const Qrels qrels = load_qrels(qrels_path);
    const auto encoded = encode_training_inputs(*providers.embedding, corpus.documents, sets);

    SweepResult sweep;
    sweep.param_names = {"alpha", "beta"};
    for (double alpha : grid) {
        if (alpha < 0.0 || alpha > 1.0) throw UsageError("sweep: alpha grid values must be in [0, 1]");
        const double beta = 1.0 - alpha;
        LossConfig loss_cfg{alpha, beta, cfg.training.tau_doc, cfg.training.tau_role};
        if (alpha + beta <= 0.0) continue;
        TrainOptions opt;
        opt.epochs = static_cast<int>(cfg.training.epochs);
        opt.batch_size = static_cast<std::size_t>(cfg.training.batch_size);
        opt.lr = cfg.training.lr;
        opt.seed = static_cast<std::uint64_t>(cfg.training.seed);
        HeadSet heads = init_heads(opt.seed, providers.embedding->dim(),
                                   static_cast<std::size_t>(cfg.training.out_dim));
        TrainResult trained = train(encoded, std::move(heads), loss_cfg, opt);

        std::vector<StructuredSummarySet> usable;
        for (const auto& s : sets)
            if (s.complete()) usable.push_back(s);
        const auto embedded = encode_corpus(*providers.embedding, trained.heads, usable);
        const VectorIndex index = VectorIndex::build(embedded);
        RankedParams params{static_cast<std::size_t>(cfg.retrieval.k_depth),
                            static_cast<std::size_t>(cfg.retrieval.n_pool), cfg.retrieval.lambda};
        const auto runs = run_all_queries(index, qrels, params);
        SweepRow row;
        row.params["alpha"] = alpha;
        row.params["beta"] = beta;
        row.metrics = macro_metrics(runs, qrels);
        sweep.rows.push_back(std::move(row));
    }
    return sweep;
}

inline void emit_sweep(const SweepResult& sweep, const std::string& out_dir, std::ostream& log) {
    detail::write_sweep_csv(sweep, join_path(out_dir, "sweep.csv"));
    std::ifstream in(join_path(out_dir, "sweep.csv"));
    log << in.rdbuf();
}

}  // namespace omrc
