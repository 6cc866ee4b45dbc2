#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <optional>
#include <string>

#include "omrc/pipeline.hpp"
#include "omrc/providers_http.hpp"

namespace {

using namespace omrc;

std::string timestamp_tag() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
    return buf;
}

std::string default_out_dir(const Config& cfg, const std::string& command) {
    return cfg.paths.out_root + "/" + command + "-" + timestamp_tag() + "-s" + std::to_string(cfg.training.seed);
}

ProviderBundle make_providers(const Config& cfg, bool force_mock) {
    if (force_mock || cfg.providers.mode == "mock") return make_mock_providers(cfg);

    HttpProviderConfig hc;
    hc.completion_model = cfg.providers.completion_model;
    hc.embedding_model = cfg.providers.embedding_model;
    hc.embedding_dim = static_cast<std::size_t>(cfg.providers.embedding_dim);
    hc.batch_limit = static_cast<std::size_t>(cfg.providers.batch_limit);
    hc.max_retries = static_cast<int>(cfg.providers.max_retries);
    hc.retry_backoff_ms = static_cast<int>(cfg.providers.retry_backoff_ms);
    if (const char* key = std::getenv("OMRC_LLM_API_KEY")) hc.api_key = key;
    const char* env_endpoint = std::getenv("OMRC_LLM_ENDPOINT");

    ProviderBundle bundle;
    {
        HttpProviderConfig cc = hc;
        cc.endpoint = env_endpoint ? env_endpoint : cfg.providers.completion_endpoint;
        bundle.completion = std::make_shared<HttpCompletionProvider>(cc);
    }
    {
        HttpProviderConfig ec = hc;
        ec.endpoint = env_endpoint ? env_endpoint : cfg.providers.embedding_endpoint;
        bundle.embedding = std::make_shared<HttpEmbeddingProvider>(ec);
    }
    if (!cfg.providers.cache_path.empty())
        bundle.embedding = std::make_shared<CachedEmbeddingProvider>(bundle.embedding, cfg.providers.cache_path);
    return bundle;
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    bool mock_providers = false;
    std::optional<std::int64_t> seed;
    std::optional<double> lambda;
    std::optional<std::int64_t> k_depth;
    std::optional<std::int64_t> n_pool;
    std::optional<std::int64_t> epochs;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "TOML config file (defaults apply when omitted)");
        app->add_option("--out-dir", out_dir, "run directory (default: <out_root>/<cmd>-<timestamp>-s<seed>)");
        app->add_flag("--mock-providers", mock_providers, "force deterministic offline providers");
        app->add_option("--seed", seed, "override config seed");
        app->add_option("--lambda", lambda, "override retrieval.lambda");
        app->add_option("--k-depth", k_depth, "override retrieval.k_depth");
        app->add_option("--n-pool", n_pool, "override retrieval.n_pool");
        app->add_option("--epochs", epochs, "override training.epochs");
    }

    Config resolve(const std::string& command) {
        Config cfg = config_path.empty() ? Config{} : Config::load(config_path);
        if (seed) cfg.training.seed = *seed;
        if (lambda) cfg.retrieval.lambda = *lambda;
        if (k_depth) cfg.retrieval.k_depth = *k_depth;
        if (n_pool) cfg.retrieval.n_pool = *n_pool;
        if (epochs) cfg.training.epochs = *epochs;
        cfg.validate();
        if (out_dir.empty()) out_dir = default_out_dir(cfg, command);
        return cfg;
    }
};

std::vector<std::size_t> parse_ks(const std::string& spec) {
    std::vector<std::size_t> ks;
    std::istringstream is(spec);
    std::string item;
    while (std::getline(is, item, ','))
        if (!item.empty()) ks.push_back(static_cast<std::size_t>(std::stoul(item)));
    if (ks.empty()) throw UsageError("--ks: no cutoffs given");
    return ks;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"omrc: discourse-aware scholarly paper recommendation"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate a corpus file");
    CommonArgs ingest_args;
    std::string ingest_corpus;
    ingest_args.attach(ingest);
    ingest->add_option("corpus", ingest_corpus, "JSONL corpus file")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "generate a planted-structure synthetic bundle");
    CommonArgs synth_args;
    SyntheticSpec synth_spec;
    synth_args.attach(synth);
    synth->add_option("--n-docs", synth_spec.n_docs, "number of documents");
    synth->add_option("--n-clusters", synth_spec.n_clusters, "number of clusters");
    synth->add_option("--dim", synth_spec.dim, "embedding dimension");
    synth->add_option("--noise-sigma", synth_spec.noise_sigma, "per-vector gaussian noise");
    synth->add_option("--role-signal", synth_spec.role_signal, "cluster share of role signal, in [0,1]");
    synth->add_option("--subclusters", synth_spec.subclusters, "sub-clusters per cluster");

    // summarize
    auto* summarize = app.add_subcommand("summarize", "build structured summaries for a corpus");
    CommonArgs summarize_args;
    std::string summarize_corpus, summarize_out;
    summarize_args.attach(summarize);
    summarize->add_option("--corpus", summarize_corpus, "JSONL corpus file")->required();
    summarize->add_option("--out", summarize_out, "output summaries file")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train role projection heads");
    CommonArgs train_args;
    std::string train_summaries, train_corpus, train_ckpt;
    train_args.attach(train_cmd);
    train_cmd->add_option("--summaries", train_summaries, "summaries file")->required();
    train_cmd->add_option("--corpus", train_corpus, "corpus file (cluster labels)")->required();
    train_cmd->add_option("--checkpoint-out", train_ckpt, "output head checkpoint")->required();

    // index
    auto* index_cmd = app.add_subcommand("index", "encode summaries and build the vector index");
    CommonArgs index_args;
    std::string index_summaries, index_ckpt, index_out;
    index_args.attach(index_cmd);
    index_cmd->add_option("--summaries", index_summaries, "summaries file")->required();
    index_cmd->add_option("--checkpoint", index_ckpt, "head checkpoint")->required();
    index_cmd->add_option("--index-out", index_out, "output index file")->required();

    // query
    auto* query_cmd = app.add_subcommand("query", "two-stage retrieval for one query");
    CommonArgs query_args;
    std::string query_index, query_doc, query_text, query_ckpt;
    std::size_t query_k = 10;
    bool query_all = false;
    query_args.attach(query_cmd);
    query_cmd->add_option("--index", query_index, "index file")->required();
    query_cmd->add_option("--doc-id", query_doc, "query by document id in the index");
    query_cmd->add_option("--text", query_text, "query by free text");
    query_cmd->add_option("--checkpoint", query_ckpt, "head checkpoint (for text queries)");
    query_cmd->add_option("--k", query_k, "ranks printed to stdout");
    query_cmd->add_flag("--all-docs", query_all, "query every indexed document, one run file for all");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "score a run file against qrels");
    CommonArgs eval_args;
    std::string eval_run, eval_qrels, eval_ks = "10";
    eval_args.attach(eval_cmd);
    eval_cmd->add_option("--run", eval_run, "TREC run file")->required();
    eval_cmd->add_option("--qrels", eval_qrels, "qrels file")->required();
    eval_cmd->add_option("--ks", eval_ks, "comma-separated cutoffs (default 10)");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweep over a synthetic bundle");
    CommonArgs sweep_args;
    std::string sweep_param, sweep_data, sweep_grid, sweep_grid_n;
    sweep_args.attach(sweep_cmd);
    sweep_cmd->add_option("--param", sweep_param, "lambda | alpha_beta | k_n")->required();
    sweep_cmd->add_option("--data", sweep_data, "bundle directory from `omrc synth`")->required();
    sweep_cmd->add_option("--grid", sweep_grid, "start:stop:step or comma list");
    sweep_cmd->add_option("--grid-n", sweep_grid_n, "n_pool grid for k_n sweeps");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*ingest) {
            const Config cfg = ingest_args.resolve("ingest");
            const auto outcome = cmd_ingest(cfg, ingest_corpus, ingest_args.out_dir, std::cout);
            return outcome.errors == 0 ? 0 : 2;
        }
        if (*synth) {
            Config cfg = synth_args.resolve("synth");
            if (synth_args.seed) synth_spec.seed = static_cast<std::uint64_t>(*synth_args.seed);
            else synth_spec.seed = static_cast<std::uint64_t>(cfg.training.seed);
            cmd_synth(cfg, synth_spec, synth_args.out_dir, std::cout);
            return 0;
        }
        if (*summarize) {
            const Config cfg = summarize_args.resolve("summarize");
            auto providers = make_providers(cfg, summarize_args.mock_providers);
            const auto outcome =
                cmd_summarize(cfg, providers, summarize_corpus, summarize_out, summarize_args.out_dir, std::cout);
            return outcome.failures == 0 ? 0 : 3;
        }
        if (*train_cmd) {
            const Config cfg = train_args.resolve("train");
            auto providers = make_providers(cfg, train_args.mock_providers);
            cmd_train(cfg, providers, train_summaries, train_corpus, train_ckpt, train_args.out_dir, std::cout);
            return 0;
        }
        if (*index_cmd) {
            const Config cfg = index_args.resolve("index");
            auto providers = make_providers(cfg, index_args.mock_providers);
            cmd_index(cfg, providers, index_summaries, index_ckpt, index_out, index_args.out_dir, std::cout);
            return 0;
        }
        if (*query_cmd) {
            const Config cfg = query_args.resolve("query");
            if (query_all) {
                cmd_query_all(cfg, query_index, query_args.out_dir, std::cout);
                return 0;
            }
            auto providers = make_providers(cfg, query_args.mock_providers);
            QuerySpec spec{query_doc, query_text, query_k};
            cmd_query(cfg, providers, query_index, spec, query_ckpt, query_args.out_dir, std::cout);
            return 0;
        }
        if (*eval_cmd) {
            const Config cfg = eval_args.resolve("evaluate");
            const auto report = cmd_evaluate(cfg, eval_run, eval_qrels, parse_ks(eval_ks), eval_args.out_dir, std::cout);
            return report.queries_evaluated > 0 ? 0 : 2;
        }
        if (*sweep_cmd) {
            const Config cfg = sweep_args.resolve("sweep");
            SweepResult result;
            if (sweep_param == "lambda") {
                const auto grid = parse_grid(sweep_grid.empty() ? "0.0:1.0:0.2" : sweep_grid);
                result = sweep_lambda(cfg, sweep_data + "/sets.idx", sweep_data + "/qrels.txt", grid);
            } else if (sweep_param == "k_n") {
                const auto k_grid = parse_grid(sweep_grid.empty() ? "200,400,600,800,1200" : sweep_grid);
                const auto n_grid = parse_grid(sweep_grid_n.empty() ? "20,50,100,150" : sweep_grid_n);
                result = sweep_k_n(cfg, sweep_data + "/sets.idx", sweep_data + "/qrels.txt", k_grid, n_grid);
            } else if (sweep_param == "alpha_beta") {
                const auto grid = parse_grid(sweep_grid.empty() ? "0.0:1.0:0.2" : sweep_grid);
                auto providers = make_providers(cfg, sweep_args.mock_providers);
                result = sweep_alpha_beta(cfg, providers, sweep_data + "/corpus.jsonl",
                                          sweep_data + "/summaries.jsonl", sweep_data + "/qrels.txt", grid);
            } else {
                throw UsageError("sweep: --param must be lambda, alpha_beta or k_n");
            }
            prepare_out_dir(sweep_args.out_dir, cfg);
            emit_sweep(result, sweep_args.out_dir, std::cout);
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ProviderError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
