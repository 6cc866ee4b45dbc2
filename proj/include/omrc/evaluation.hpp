#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "omrc/common.hpp"
#include "omrc/retrieval.hpp"

namespace omrc {

// Binary relevance judgments. Queries judged but with zero relevant
// documents are kept so the evaluator can report and skip them.
struct Qrels {
    std::map<std::string, std::set<std::string>> relevant;

    std::vector<std::string> queries_without_relevant() const {
        std::vector<std::string> out;
        for (const auto& [qid, rel] : relevant)
            if (rel.empty()) out.push_back(qid);
        return out;
    }
};

// Format: "qid 0 docid rel" with rel in {0, 1}.
inline Qrels load_qrels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read qrels file: " + path);
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string qid, iter, docid;
        int rel = -1;
        if (!(is >> qid >> iter >> docid >> rel) || (rel != 0 && rel != 1))
            throw DataError("qrels line " + std::to_string(line_no) + ": malformed entry");
        auto& set = qrels.relevant[qid];
        if (rel == 1) set.insert(docid);
    }
    return qrels;
}

inline void save_qrels(const Qrels& qrels, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write qrels file: " + path);
    for (const auto& [qid, rel] : qrels.relevant)
        for (const auto& docid : rel) out << qid << " 0 " << docid << " 1\n";
}

// --- Ranking metrics (binary relevance) ----------------------------------------

inline double precision_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& relevant,
                             std::size_t k) {
    if (k < 1) throw std::invalid_argument("precision_at_k: k must be >= 1");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i)
        if (relevant.count(ranked[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(k);
}

inline double recall_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& relevant,
                          std::size_t k) {
    if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
    if (relevant.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i)
        if (relevant.count(ranked[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

// Binary-gain DCG with discount 1/log2(rank + 1), normalized by the ideal
// DCG of min(k, |relevant|) relevant items in front.
inline double ndcg_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& relevant,
                        std::size_t k) {
    if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
    if (relevant.empty()) return 0.0;
    double dcg = 0.0;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i)
        if (relevant.count(ranked[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    double idcg = 0.0;
    const std::size_t ideal = std::min(k, relevant.size());
    for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

// Reciprocal rank of the first relevant item over the full list; 0 if none.
inline double mrr(const std::vector<std::string>& ranked, const std::set<std::string>& relevant) {
    for (std::size_t i = 0; i < ranked.size(); ++i)
        if (relevant.count(ranked[i])) return 1.0 / static_cast<double>(i + 1);
    return 0.0;
}

// Binary average precision: mean of precision@rank over relevant hits,
// divided by |relevant|.
inline double map_metric(const std::vector<std::string>& ranked, const std::set<std::string>& relevant) {
    if (relevant.empty()) return 0.0;
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (relevant.count(ranked[i])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(relevant.size());
}

// --- ROUGE -----------------------------------------------------------------------

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

namespace detail {

// ROUGE tokenization, pinned bit-exactly: lowercase, split on runs of
// non-alphanumeric ASCII; bytes >= 0x80 are treated as word characters so
// UTF-8 text forms tokens instead of disappearing. No stemming.
inline std::vector<std::string> rouge_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if ((std::isalnum(c) && c < 0x80) || c >= 0x80) {
            cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

inline RougeScore rouge_from_counts(double overlap, double cand_total, double ref_total) {
    RougeScore s;
    if (cand_total > 0.0) s.precision = overlap / cand_total;
    if (ref_total > 0.0) s.recall = overlap / ref_total;
    if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

}  // namespace detail

// Clipped n-gram overlap, n in {1, 2}.
inline RougeScore rouge_n(const std::string& candidate, const std::string& reference, int n) {
    if (n != 1 && n != 2) throw std::invalid_argument("rouge_n: n must be 1 or 2");
    const auto cand = detail::rouge_tokens(candidate);
    const auto ref = detail::rouge_tokens(reference);
    if (cand.size() < static_cast<std::size_t>(n) || ref.size() < static_cast<std::size_t>(n)) return {};
    auto ngrams = [n](const std::vector<std::string>& toks) {
        std::map<std::string, std::size_t> counts;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
            std::string g = toks[i];
            for (int j = 1; j < n; ++j) g += '\x1f' + toks[i + static_cast<std::size_t>(j)];
            ++counts[g];
        }
        return counts;
    };
    const auto cg = ngrams(cand);
    const auto rg = ngrams(ref);
    std::size_t overlap = 0, cand_total = 0, ref_total = 0;
    for (const auto& [g, c] : cg) {
        cand_total += c;
        auto it = rg.find(g);
        if (it != rg.end()) overlap += std::min(c, it->second);
    }
    for (const auto& [g, c] : rg) ref_total += c;
    return detail::rouge_from_counts(static_cast<double>(overlap), static_cast<double>(cand_total),
                                     static_cast<double>(ref_total));
}

// Longest common subsequence variant.
inline RougeScore rouge_l(const std::string& candidate, const std::string& reference) {
    const auto cand = detail::rouge_tokens(candidate);
    const auto ref = detail::rouge_tokens(reference);
    if (cand.empty() || ref.empty()) return {};
    std::vector<std::size_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= cand.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            if (cand[i - 1] == ref[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    const auto lcs = static_cast<double>(prev[ref.size()]);
    return detail::rouge_from_counts(lcs, static_cast<double>(cand.size()), static_cast<double>(ref.size()));
}

// --- Run evaluation ----------------------------------------------------------------

struct EvalReport {
    std::size_t queries_evaluated = 0;
    std::map<std::string, std::map<std::string, double>> per_query;
    std::map<std::string, double> macro;
    std::vector<std::string> warnings;
};

inline std::map<std::string, double> query_metrics(const std::vector<std::string>& ranked,
                                                   const std::set<std::string>& relevant,
                                                   const std::vector<std::size_t>& ks) {
    std::map<std::string, double> m;
    for (std::size_t k : ks) {
        const std::string suffix = "@" + std::to_string(k);
        m["P" + suffix] = precision_at_k(ranked, relevant, k);
        m["R" + suffix] = recall_at_k(ranked, relevant, k);
        m["NDCG" + suffix] = ndcg_at_k(ranked, relevant, k);
    }
    m["MRR"] = mrr(ranked, relevant);
    m["MAP"] = map_metric(ranked, relevant);
    return m;
}

// Per-query metrics plus macro averages over every run query that has at
// least one relevant judgment. Unknown and unjudged queries are reported,
// never silently dropped.
inline EvalReport evaluate_run(const std::string& run_path, const std::string& qrels_path,
                               const std::vector<std::size_t>& ks = {10}) {
    const auto run = load_run_file(run_path);
    const auto qrels = load_qrels(qrels_path);

    EvalReport report;
    for (const auto& qid : qrels.queries_without_relevant())
        report.warnings.push_back("query " + qid + " has no relevant documents; skipped");
    for (const auto& [qid, rel] : qrels.relevant)
        if (!rel.empty() && !run.count(qid)) report.warnings.push_back("qrels query " + qid + " missing from run");

    for (const auto& [qid, items] : run) {
        auto it = qrels.relevant.find(qid);
        if (it == qrels.relevant.end()) {
            report.warnings.push_back("run query " + qid + " not present in qrels; skipped");
            continue;
        }
        if (it->second.empty()) continue;  // already reported above
        std::vector<std::string> ranked;
        ranked.reserve(items.size());
        for (const auto& s : items) ranked.push_back(s.doc_id);
        report.per_query[qid] = query_metrics(ranked, it->second, ks);
    }
    report.queries_evaluated = report.per_query.size();
    if (report.queries_evaluated > 0) {
        for (const auto& [qid, metrics] : report.per_query)
            for (const auto& [name, value] : metrics) report.macro[name] += value;
        for (auto& [name, value] : report.macro) value /= static_cast<double>(report.queries_evaluated);
    }
    return report;
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j{{"queries_evaluated", r.queries_evaluated},
                     {"macro", r.macro},
                     {"per_query", r.per_query},
                     {"warnings", r.warnings}};
    return j;
}

// Aligned text table of the macro metrics.
inline std::string format_report_table(const EvalReport& r) {
    std::ostringstream os;
    os << "queries evaluated: " << r.queries_evaluated << "\n";
    os << "metric        value\n";
    char buf[48];
    for (const auto& [name, value] : r.macro) {
        std::snprintf(buf, sizeof(buf), "%-12s %8.4f", name.c_str(), value);
        os << buf << "\n";
    }
    for (const auto& w : r.warnings) os << "warning: " << w << "\n";
    return os.str();
}

}  // namespace omrc
