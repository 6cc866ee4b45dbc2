#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>

#include "omrc/common.hpp"
#include "omrc/summarizer.hpp"

namespace omrc {

namespace toml {

// Minimal TOML subset: [sections], key = value with string / integer /
// float / boolean values, '#' comments. Enough for the run configuration;
// anything else is rejected with a line number.
using Value = std::variant<std::string, std::int64_t, double, bool>;
using Section = std::map<std::string, Value>;
using Table = std::map<std::string, Section>;

namespace detail_toml {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (c == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

inline bool valid_key(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

inline Value parse_value(const std::string& raw, std::size_t line_no) {
    if (raw.empty()) throw UsageError("config line " + std::to_string(line_no) + ": missing value");
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"')
            throw UsageError("config line " + std::to_string(line_no) + ": unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
            char c = raw[i];
            if (c == '\\') {
                if (i + 2 >= raw.size() + 1) break;
                const char esc = raw[++i];
                switch (esc) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default:
                        throw UsageError("config line " + std::to_string(line_no) + ": unknown escape \\" +
                                         std::string(1, esc));
                }
            }
            out.push_back(c);
        }
        return out;
    }
    if (raw == "true") return true;
    if (raw == "false") return false;
    if (raw.front() == '[')
        throw UsageError("config line " + std::to_string(line_no) + ": arrays are not supported");
    // integer?
    {
        std::size_t i = (raw[0] == '-' || raw[0] == '+') ? 1 : 0;
        bool all_digits = i < raw.size();
        for (; i < raw.size(); ++i)
            if (!std::isdigit(static_cast<unsigned char>(raw[i]))) {
                all_digits = false;
                break;
            }
        if (all_digits) return static_cast<std::int64_t>(std::stoll(raw));
    }
    // float
    {
        char* end = nullptr;
        const double v = std::strtod(raw.c_str(), &end);
        if (end != nullptr && *end == '\0') return v;
    }
    throw UsageError("config line " + std::to_string(line_no) + ": cannot parse value: " + raw);
}

}  // namespace detail_toml

inline Table parse(const std::string& text) {
    Table table;
    std::string current;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = detail_toml::trim(detail_toml::strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw UsageError("config line " + std::to_string(line_no) + ": malformed section header");
            current = detail_toml::trim(line.substr(1, line.size() - 2));
            if (!detail_toml::valid_key(current))
                throw UsageError("config line " + std::to_string(line_no) + ": invalid section name");
            table[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail_toml::trim(line.substr(0, eq));
        if (!detail_toml::valid_key(key))
            throw UsageError("config line " + std::to_string(line_no) + ": invalid key \"" + key + "\"");
        if (current.empty())
            throw UsageError("config line " + std::to_string(line_no) + ": key outside any [section]");
        if (table[current].count(key))
            throw UsageError("config line " + std::to_string(line_no) + ": duplicate key \"" + key + "\"");
        table[current][key] = detail_toml::parse_value(detail_toml::trim(line.substr(eq + 1)), line_no);
    }
    return table;
}

}  // namespace toml

// --- Run configuration -----------------------------------------------------------

struct ProviderSettings {
    std::string mode = "mock";  // "mock" or "http"
    std::int64_t embedding_dim = 256;
    std::int64_t batch_limit = 64;
    std::int64_t concurrency = 4;
    std::string completion_endpoint;
    std::string embedding_endpoint;
    std::string completion_model = "qwen3-max";
    std::string embedding_model = "mbert";
    std::int64_t max_retries = 3;
    std::int64_t retry_backoff_ms = 100;
    double temperature = 0.2;
    std::int64_t max_tokens = 512;
    double mock_tag_noise = 0.15;
    std::string cache_path;
};

struct SummarizerSettings {
    double delta = 0.85;
    std::int64_t k_target = 6;
    std::int64_t evidence_m = 4;
    std::int64_t max_rounds = 3;
    std::string template_objective = "What problem or objective does this paper address?";
    std::string template_method = "What method or approach does the paper propose?";
    std::string template_result = "What are the main experimental results or findings?";
    std::string template_conclusion = "What conclusions and implications does the paper draw?";

    std::map<Role, std::string> templates() const {
        return {{Role::Objective, template_objective},
                {Role::Method, template_method},
                {Role::Result, template_result},
                {Role::Conclusion, template_conclusion}};
    }
};

struct TrainingSettings {
    double alpha = 0.4;
    double beta = 0.6;
    double tau_doc = 0.07;
    double tau_role = 0.07;
    double lr = 1e-3;
    std::int64_t epochs = 20;
    std::int64_t batch_size = 16;
    std::int64_t seed = 42;
    std::int64_t out_dim = 256;
};

struct RetrievalSettings {
    std::int64_t k_depth = 600;
    std::int64_t n_pool = 100;
    double lambda = 0.6;
};

struct PathSettings {
    std::string out_root = "runs";
};

struct Config {
    ProviderSettings providers;
    SummarizerSettings summarizer;
    TrainingSettings training;
    RetrievalSettings retrieval;
    PathSettings paths;

    static Config from_toml_text(const std::string& text);
    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw UsageError("cannot read config file: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return from_toml_text(ss.str());
    }

    std::string to_toml() const;
    void validate() const;
};

namespace detail_config {

struct Binder {
    const toml::Section* section = nullptr;
    std::string section_name;
    std::set<std::string> seen;

    template <typename T>
    void bind(const char* key, T& target) {
        seen.insert(key);
        if (!section) return;
        auto it = section->find(key);
        if (it == section->end()) return;
        if constexpr (std::is_same_v<T, std::string>) {
            if (!std::holds_alternative<std::string>(it->second))
                throw UsageError("config: " + section_name + "." + key + " must be a string");
            target = std::get<std::string>(it->second);
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
            if (!std::holds_alternative<std::int64_t>(it->second))
                throw UsageError("config: " + section_name + "." + key + " must be an integer");
            target = std::get<std::int64_t>(it->second);
        } else if constexpr (std::is_same_v<T, double>) {
            if (std::holds_alternative<std::int64_t>(it->second))
                target = static_cast<double>(std::get<std::int64_t>(it->second));
            else if (std::holds_alternative<double>(it->second))
                target = std::get<double>(it->second);
            else
                throw UsageError("config: " + section_name + "." + key + " must be a number");
        } else {
            static_assert(sizeof(T) == 0, "unsupported config field type");
        }
    }

    void finish() const {
        if (!section) return;
        for (const auto& [key, value] : *section)
            if (!seen.count(key)) throw UsageError("config: unknown key " + section_name + "." + key);
    }
};

inline std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

inline std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // Ensure the value re-parses as a float, not an integer.
    std::string s = buf;
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

}  // namespace detail_config

inline Config Config::from_toml_text(const std::string& text) {
    const toml::Table table = toml::parse(text);
    static const std::set<std::string> known_sections = {"providers", "summarizer", "training", "retrieval",
                                                         "paths"};
    for (const auto& [name, _] : table)
        if (!known_sections.count(name)) throw UsageError("config: unknown section [" + name + "]");

    Config cfg;
    auto section = [&](const char* name) -> const toml::Section* {
        auto it = table.find(name);
        return it == table.end() ? nullptr : &it->second;
    };

    {
        detail_config::Binder b{section("providers"), "providers", {}};
        b.bind("mode", cfg.providers.mode);
        b.bind("embedding_dim", cfg.providers.embedding_dim);
        b.bind("batch_limit", cfg.providers.batch_limit);
        b.bind("concurrency", cfg.providers.concurrency);
        b.bind("completion_endpoint", cfg.providers.completion_endpoint);
        b.bind("embedding_endpoint", cfg.providers.embedding_endpoint);
        b.bind("completion_model", cfg.providers.completion_model);
        b.bind("embedding_model", cfg.providers.embedding_model);
        b.bind("max_retries", cfg.providers.max_retries);
        b.bind("retry_backoff_ms", cfg.providers.retry_backoff_ms);
        b.bind("temperature", cfg.providers.temperature);
        b.bind("max_tokens", cfg.providers.max_tokens);
        b.bind("mock_tag_noise", cfg.providers.mock_tag_noise);
        b.bind("cache_path", cfg.providers.cache_path);
        b.finish();
    }
    {
        detail_config::Binder b{section("summarizer"), "summarizer", {}};
        b.bind("delta", cfg.summarizer.delta);
        b.bind("k_target", cfg.summarizer.k_target);
        b.bind("evidence_m", cfg.summarizer.evidence_m);
        b.bind("max_rounds", cfg.summarizer.max_rounds);
        b.bind("template_objective", cfg.summarizer.template_objective);
        b.bind("template_method", cfg.summarizer.template_method);
        b.bind("template_result", cfg.summarizer.template_result);
        b.bind("template_conclusion", cfg.summarizer.template_conclusion);
        b.finish();
    }
    {
        detail_config::Binder b{section("training"), "training", {}};
        b.bind("alpha", cfg.training.alpha);
        b.bind("beta", cfg.training.beta);
        b.bind("tau_doc", cfg.training.tau_doc);
        b.bind("tau_role", cfg.training.tau_role);
        b.bind("lr", cfg.training.lr);
        b.bind("epochs", cfg.training.epochs);
        b.bind("batch_size", cfg.training.batch_size);
        b.bind("seed", cfg.training.seed);
        b.bind("out_dim", cfg.training.out_dim);
        b.finish();
    }
    {
        detail_config::Binder b{section("retrieval"), "retrieval", {}};
        b.bind("k_depth", cfg.retrieval.k_depth);
        b.bind("n_pool", cfg.retrieval.n_pool);
        b.bind("lambda", cfg.retrieval.lambda);
        b.finish();
    }
    {
        detail_config::Binder b{section("paths"), "paths", {}};
        b.bind("out_root", cfg.paths.out_root);
        b.finish();
    }
    cfg.validate();
    return cfg;
}

inline void Config::validate() const {
    if (providers.mode != "mock" && providers.mode != "http")
        throw UsageError("config: providers.mode must be \"mock\" or \"http\"");
    if (providers.embedding_dim < 1) throw UsageError("config: providers.embedding_dim must be >= 1");
    if (providers.batch_limit < 1) throw UsageError("config: providers.batch_limit must be >= 1");
    if (providers.concurrency < 1) throw UsageError("config: providers.concurrency must be >= 1");
    if (providers.max_retries < 0) throw UsageError("config: providers.max_retries must be >= 0");
    if (providers.temperature < 0.0) throw UsageError("config: providers.temperature must be >= 0");
    if (providers.max_tokens < 1) throw UsageError("config: providers.max_tokens must be >= 1");
    if (providers.mock_tag_noise < 0.0 || providers.mock_tag_noise > 1.0)
        throw UsageError("config: providers.mock_tag_noise must be in [0, 1]");
    if (summarizer.delta <= 0.0 || summarizer.delta > 1.0)
        throw UsageError("config: summarizer.delta must be in (0, 1]");
    if (summarizer.k_target < 5 || summarizer.k_target > 8)
        throw UsageError("config: summarizer.k_target must be in [5, 8]");
    if (summarizer.evidence_m < 1) throw UsageError("config: summarizer.evidence_m must be >= 1");
    if (summarizer.max_rounds < 1) throw UsageError("config: summarizer.max_rounds must be >= 1");
    if (training.alpha < 0.0 || training.beta < 0.0)
        throw UsageError("config: training.alpha and training.beta must be >= 0");
    if (training.alpha + training.beta <= 0.0) throw UsageError("config: training.alpha + training.beta must be > 0");
    if (training.tau_doc <= 0.0 || training.tau_role <= 0.0)
        throw UsageError("config: training temperatures must be > 0");
    if (training.lr <= 0.0) throw UsageError("config: training.lr must be > 0");
    if (training.epochs < 1) throw UsageError("config: training.epochs must be >= 1");
    if (training.batch_size < 4) throw UsageError("config: training.batch_size must be >= 4");
    if (training.out_dim < 1) throw UsageError("config: training.out_dim must be >= 1");
    if (retrieval.k_depth < 1) throw UsageError("config: retrieval.k_depth must be >= 1");
    if (retrieval.n_pool < 1) throw UsageError("config: retrieval.n_pool must be >= 1");
    if (retrieval.lambda < 0.0 || retrieval.lambda > 1.0)
        throw UsageError("config: retrieval.lambda must be in [0, 1]");
}

inline std::string Config::to_toml() const {
    std::ostringstream os;
    using detail_config::fmt_double;
    using detail_config::quote;
    os << "[providers]\n";
    os << "mode = " << quote(providers.mode) << "\n";
    os << "embedding_dim = " << providers.embedding_dim << "\n";
    os << "batch_limit = " << providers.batch_limit << "\n";
    os << "concurrency = " << providers.concurrency << "\n";
    os << "completion_endpoint = " << quote(providers.completion_endpoint) << "\n";
    os << "embedding_endpoint = " << quote(providers.embedding_endpoint) << "\n";
    os << "completion_model = " << quote(providers.completion_model) << "\n";
    os << "embedding_model = " << quote(providers.embedding_model) << "\n";
    os << "max_retries = " << providers.max_retries << "\n";
    os << "retry_backoff_ms = " << providers.retry_backoff_ms << "\n";
    os << "temperature = " << fmt_double(providers.temperature) << "\n";
    os << "max_tokens = " << providers.max_tokens << "\n";
    os << "mock_tag_noise = " << fmt_double(providers.mock_tag_noise) << "\n";
    os << "cache_path = " << quote(providers.cache_path) << "\n";
    os << "\n[summarizer]\n";
    os << "delta = " << fmt_double(summarizer.delta) << "\n";
    os << "k_target = " << summarizer.k_target << "\n";
    os << "evidence_m = " << summarizer.evidence_m << "\n";
    os << "max_rounds = " << summarizer.max_rounds << "\n";
    os << "template_objective = " << quote(summarizer.template_objective) << "\n";
    os << "template_method = " << quote(summarizer.template_method) << "\n";
    os << "template_result = " << quote(summarizer.template_result) << "\n";
    os << "template_conclusion = " << quote(summarizer.template_conclusion) << "\n";
    os << "\n[training]\n";
    os << "alpha = " << fmt_double(training.alpha) << "\n";
    os << "beta = " << fmt_double(training.beta) << "\n";
    os << "tau_doc = " << fmt_double(training.tau_doc) << "\n";
    os << "tau_role = " << fmt_double(training.tau_role) << "\n";
    os << "lr = " << fmt_double(training.lr) << "\n";
    os << "epochs = " << training.epochs << "\n";
    os << "batch_size = " << training.batch_size << "\n";
    os << "seed = " << training.seed << "\n";
    os << "out_dim = " << training.out_dim << "\n";
    os << "\n[retrieval]\n";
    os << "k_depth = " << retrieval.k_depth << "\n";
    os << "n_pool = " << retrieval.n_pool << "\n";
    os << "lambda = " << fmt_double(retrieval.lambda) << "\n";
    os << "\n[paths]\n";
    os << "out_root = " << quote(paths.out_root) << "\n";
    return os.str();
}

}  // namespace omrc
