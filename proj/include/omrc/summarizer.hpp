#pragma once

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "omrc/corpus.hpp"
#include "omrc/providers.hpp"

namespace omrc {

// Role-specific query pool: the base question template plus its
// similarity-filtered paraphrase variants.
struct QueryPool {
    Role role = Role::Objective;
    std::string base_template;
    std::vector<std::string> variants;
    double delta = 0.85;
    int k_variants = 6;
};

struct QAInstance {
    std::string doc_id;
    Role role = Role::Objective;
    std::string query;
    std::string answer;  // raw model output, markers included
    std::vector<EvidenceAnchor> anchors;
};

struct SummarizerOptions {
    double delta = 0.85;
    int k_target = 6;      // variants kept per role, in [5, 8]
    int evidence_m = 4;    // evidence segments per prompt
    int max_rounds = 3;    // paraphrase regeneration rounds
    std::size_t concurrency = 4;
};

inline std::map<Role, std::string> default_base_templates() {
    return {{Role::Objective, "What problem or objective does this paper address?"},
            {Role::Method, "What method or approach does the paper propose?"},
            {Role::Result, "What are the main experimental results or findings?"},
            {Role::Conclusion, "What conclusions and implications does the paper draw?"}};
}

namespace detail {

// Accepts "3. text", "3) text", "- text" or bare lines.
inline std::string strip_list_prefix(const std::string& line) {
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) ++i;
    if (i == 0 && i < line.size() && line[i] == '-') ++i;
    while (i < line.size() && line[i] == ' ') ++i;
    return line.substr(i);
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    if (n == 0) return;
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

// Generates paraphrase variants of a base template and keeps those whose
// embedding stays within cosine >= delta of the base. Regenerates up to
// max_rounds before giving up; never pads.
inline QueryPool augment_templates(CompletionProvider& completion, EmbeddingProvider& embedding, Role role,
                                   const std::string& base_template, int k_target, double delta,
                                   int max_rounds = 3) {
    if (k_target < 5 || k_target > 8) throw std::invalid_argument("augment_templates: k_target must be in [5, 8]");
    if (delta <= 0.0 || delta > 1.0) throw std::invalid_argument("augment_templates: delta must be in (0, 1]");

    const auto base_vec = embedding.embed_one(base_template);
    QueryPool pool{role, base_template, {}, delta, k_target};
    int generated_total = 0;
    for (int round = 0; round < max_rounds && static_cast<int>(pool.variants.size()) < k_target; ++round) {
        const int want = k_target + 2;
        std::string prompt = std::string(prompts::kParaphraseHeader) + " " + std::to_string(want) +
                             " distinct variants that preserve its meaning.\n"
                             "Return one variant per line, numbered.\n" +
                             prompts::kStartField + std::to_string(generated_total + 1) + "\n" +
                             prompts::kQuestionField + base_template + "\n";
        const std::string reply = completion.complete({prompt, 512, 0.2, std::nullopt});

        std::vector<std::string> candidates;
        std::istringstream lines(reply);
        std::string line;
        while (std::getline(lines, line)) {
            const std::string text = detail::trim(detail::strip_list_prefix(detail::trim(line)));
            if (!text.empty()) candidates.push_back(text);
        }
        generated_total += static_cast<int>(candidates.size());

        // Dedup against already accepted variants (a variant equal to the
        // base itself is legitimate: cosine 1 passes the filter).
        std::vector<std::string> fresh;
        for (const auto& c : candidates) {
            if (std::find(pool.variants.begin(), pool.variants.end(), c) != pool.variants.end()) continue;
            if (std::find(fresh.begin(), fresh.end(), c) != fresh.end()) continue;
            fresh.push_back(c);
        }
        if (fresh.empty()) continue;
        const auto vecs = embed_all(embedding, fresh);
        for (std::size_t i = 0; i < fresh.size() && static_cast<int>(pool.variants.size()) < k_target; ++i) {
            if (detail::cosine(vecs[i].values, base_vec.values) >= delta) pool.variants.push_back(fresh[i]);
        }
    }
    if (static_cast<int>(pool.variants.size()) < 5)
        throw DataError("augment_templates: only " + std::to_string(pool.variants.size()) +
                        " variants passed the delta filter for role " + role_name(role) + " after " +
                        std::to_string(max_rounds) + " rounds");
    return pool;
}

// Returns the m segments most similar to the query, ties broken by segment
// order. Metadata-only documents expose the abstract as the only segment.
inline std::vector<SegmentView> select_evidence(EmbeddingProvider& embedding, const Document& doc,
                                                const std::string& query, int m) {
    if (m < 1) throw std::invalid_argument("select_evidence: m must be >= 1");
    auto segments = document_segments(doc);
    if (segments.size() == 1) return segments;

    // The marker (kind + heading/ref) is appended to the segment body so
    // heading semantics participate in the match; any topic-tag prefix on
    // the body is left in first position.
    std::vector<std::string> texts;
    texts.reserve(segments.size() + 1);
    texts.push_back(query);
    for (const auto& s : segments) texts.push_back(s.text->empty() ? s.marker : *s.text + "\n" + s.marker);
    const auto vecs = embed_all(embedding, texts);

    std::vector<std::size_t> order(segments.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> score(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i)
        score[i] = detail::cosine(vecs[0].values, vecs[i + 1].values);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

    std::vector<SegmentView> out;
    for (std::size_t i = 0; i < order.size() && i < static_cast<std::size_t>(m); ++i)
        out.push_back(segments[order[i]]);
    return out;
}

// Byte-deterministic QA prompt: role instruction, query, marker-prefixed
// evidence segments in relevance order, citation instruction.
inline std::string build_prompt(const Document& doc, Role role, const std::string& query,
                                const std::vector<SegmentView>& evidence) {
    if (evidence.empty()) throw std::invalid_argument("build_prompt: evidence must be non-empty");
    std::string p = "You are summarizing the scientific paper \"" + doc.title + "\" for the " +
                    std::string(role_name(role)) + " role.\n";
    p += std::string(prompts::kQuestionField) + query + "\n";
    p += std::string(prompts::kEvidenceHeader) + "\n";
    for (const auto& seg : evidence) {
        p += seg.marker + "\n";
        p += *seg.text + "\n";
    }
    p += std::string(prompts::kInstructionsHeader) +
         " Answer the question using only the evidence above. Cite the marker of every segment you used, verbatim.\n";
    return p;
}

struct GenerateReport {
    std::vector<QAInstance> instances;
    std::vector<std::string> failures;  // per-variant provider failures
    std::vector<std::string> warnings;  // unknown markers, inferred anchors
};

namespace detail {

// Best-effort span for a cited segment: the answer's first sentence located
// verbatim inside the segment, else the whole segment.
inline EvidenceAnchor make_anchor(const SegmentView& seg, const std::string& answer, bool inferred) {
    EvidenceAnchor a;
    a.segment_kind = seg.kind;
    a.segment_ref = seg.ref;
    a.inferred = inferred;
    a.span_begin = 0;
    a.span_end = seg.text->size();
    const std::string sentence = trim(first_sentence(answer));
    if (!sentence.empty()) {
        const auto pos = seg.text->find(sentence);
        if (pos != std::string::npos) {
            a.span_begin = pos;
            a.span_end = pos + sentence.size();
        }
    }
    return a;
}

// Scans for any "<Kind: ...>" pattern so unknown citations can be reported.
inline std::vector<std::string> marker_like_tokens(const std::string& answer) {
    std::vector<std::string> found;
    for (const char* prefix : {"<Section: ", "<Figure: ", "<Table: "}) {
        std::size_t pos = 0;
        while ((pos = answer.find(prefix, pos)) != std::string::npos) {
            const auto close = answer.find('>', pos);
            if (close == std::string::npos) break;
            found.push_back(answer.substr(pos, close - pos + 1));
            pos = close + 1;
        }
    }
    return found;
}

}  // namespace detail

// Runs the evidence-constrained QA step for every variant in the pool.
// Answers citing no known marker are anchored to the top evidence segment
// and flagged inferred.
inline GenerateReport generate_answers(CompletionProvider& completion, EmbeddingProvider& embedding,
                                       const Document& doc, const QueryPool& pool, int evidence_m) {
    GenerateReport report;
    const auto segments = document_segments(doc);
    for (const auto& query : pool.variants) {
        std::vector<SegmentView> evidence;
        std::string answer;
        try {
            evidence = select_evidence(embedding, doc, query, evidence_m);
            answer = completion.complete({build_prompt(doc, pool.role, query, evidence), 512, 0.2, std::nullopt});
        } catch (const std::exception& e) {
            report.failures.push_back("doc " + doc.id + " role " + role_key(pool.role) + ": " + e.what());
            continue;
        }
        QAInstance inst{doc.id, pool.role, query, answer, {}};

        std::vector<std::string> cited = detail::marker_like_tokens(answer);
        for (const auto& token : cited) {
            const auto seg = std::find_if(segments.begin(), segments.end(),
                                          [&](const SegmentView& s) { return s.marker == token; });
            if (seg == segments.end()) {
                report.warnings.push_back("doc " + doc.id + ": answer cites unknown marker " + token);
            } else if (!seg->text->empty()) {
                inst.anchors.push_back(detail::make_anchor(*seg, answer, false));
            }
        }
        if (inst.anchors.empty()) {
            for (const auto& seg : evidence) {
                if (seg.text->empty()) continue;
                inst.anchors.push_back(detail::make_anchor(seg, answer, true));
                report.warnings.push_back("doc " + doc.id + " role " + role_key(pool.role) +
                                          ": no known marker cited; anchor inferred from top evidence segment");
                break;
            }
        }
        report.instances.push_back(std::move(inst));
    }
    return report;
}

struct AggregateResult {
    std::string summary;
    std::size_t medoid_index = 0;
};

// Medoid selection over the K candidate answers: the candidate with the
// highest mean cosine to all others, ties broken by lowest index.
inline AggregateResult aggregate_answers(EmbeddingProvider& embedding, const std::vector<std::string>& candidates) {
    if (candidates.empty()) throw std::invalid_argument("aggregate_answers: candidates must be non-empty");
    if (candidates.size() == 1) return {candidates[0], 0};
    const auto vecs = embed_all(embedding, candidates);
    std::size_t best = 0;
    double best_mean = -2.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            if (j == i) continue;
            sum += detail::cosine(vecs[i].values, vecs[j].values);
        }
        const double mean = sum / static_cast<double>(candidates.size() - 1);
        if (mean > best_mean) {
            best_mean = mean;
            best = i;
        }
    }
    return {candidates[best], best};
}

struct SummaryOutcome {
    StructuredSummarySet set;
    std::vector<std::string> failures;
    std::vector<std::string> warnings;
};

// Full per-document pipeline: evidence selection, QA generation and medoid
// aggregation for each role, metadata summary from the document fields.
// Roles whose generation fails entirely are recorded in failed_roles and the
// set is considered incomplete.
inline SummaryOutcome summarize_document(CompletionProvider& completion, EmbeddingProvider& embedding,
                                         const Document& doc, const std::map<Role, QueryPool>& pools,
                                         const SummarizerOptions& opts) {
    if (pools.size() != 4) throw std::invalid_argument("summarize_document: pools must contain all four roles");
    SummaryOutcome outcome;
    outcome.set.doc_id = doc.id;
    outcome.set.meta_summary = build_meta_summary(doc);
    outcome.set.metadata_only = is_metadata_only(doc);
    for (Role role : kAllRoles) {
        const QueryPool& pool = pools.at(role);
        GenerateReport gen = generate_answers(completion, embedding, doc, pool, opts.evidence_m);
        outcome.failures.insert(outcome.failures.end(), gen.failures.begin(), gen.failures.end());
        outcome.warnings.insert(outcome.warnings.end(), gen.warnings.begin(), gen.warnings.end());
        if (gen.instances.empty()) {
            outcome.set.failed_roles.push_back(role_key(role));
            continue;
        }
        std::vector<std::string> answers;
        answers.reserve(gen.instances.size());
        for (const auto& inst : gen.instances) answers.push_back(inst.answer);
        const AggregateResult agg = aggregate_answers(embedding, answers);
        const QAInstance& medoid = gen.instances[agg.medoid_index];
        outcome.set.role_summaries[role] = RoleSummary{role, medoid.answer, medoid.anchors, answers};
    }
    return outcome;
}

// Corpus driver: documents are processed in parallel (bounded by
// opts.concurrency) and results keep corpus order.
inline std::vector<SummaryOutcome> summarize_corpus(CompletionProvider& completion, EmbeddingProvider& embedding,
                                                    const std::vector<Document>& docs,
                                                    const std::map<Role, QueryPool>& pools,
                                                    const SummarizerOptions& opts) {
    std::vector<SummaryOutcome> out(docs.size());
    detail::parallel_for(docs.size(), opts.concurrency,
                         [&](std::size_t i) { out[i] = summarize_document(completion, embedding, docs[i], pools, opts); });
    return out;
}

// Builds all four role pools from the configured base templates.
inline std::map<Role, QueryPool> build_query_pools(CompletionProvider& completion, EmbeddingProvider& embedding,
                                                   const std::map<Role, std::string>& base_templates,
                                                   const SummarizerOptions& opts) {
    std::map<Role, QueryPool> pools;
    for (Role role : kAllRoles)
        pools[role] = augment_templates(completion, embedding, role, base_templates.at(role), opts.k_target,
                                        opts.delta, opts.max_rounds);
    return pools;
}

}  // namespace omrc
