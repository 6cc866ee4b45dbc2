#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "omrc/common.hpp"
#include "omrc/detail/binary_io.hpp"
#include "omrc/detail/rng.hpp"
#include "omrc/detail/sha256.hpp"
#include "omrc/detail/vecmath.hpp"

namespace omrc {

struct CompletionRequest {
    std::string prompt;
    int max_tokens = 512;
    double temperature = 0.2;
    std::optional<std::uint64_t> seed;
};

struct EmbeddingVector {
    std::vector<float> values;

    std::size_t dim() const { return values.size(); }
};

// Text-completion contract (the summarization model). Implementations must
// be safe for concurrent calls.
class CompletionProvider {
public:
    virtual ~CompletionProvider() = default;
    virtual std::string complete(const CompletionRequest& req) = 0;
    virtual std::string id() const = 0;

protected:
    static void check_request(const CompletionRequest& req) {
        if (req.prompt.empty()) throw std::invalid_argument("completion: prompt is empty");
        if (req.max_tokens < 1) throw std::invalid_argument("completion: max_tokens must be >= 1");
        if (req.temperature < 0.0) throw std::invalid_argument("completion: temperature must be >= 0");
    }
};

// Text-embedding contract (the frozen encoder). Output order matches input
// order; all vectors share dim().
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
    virtual std::size_t dim() const = 0;
    virtual std::size_t batch_limit() const { return 64; }
    virtual std::string id() const = 0;

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) {
        return embed(std::span<const std::string>(texts));
    }
    EmbeddingVector embed_one(const std::string& text) {
        const std::string arr[1] = {text};
        return embed(std::span<const std::string>(arr, 1)).front();
    }

protected:
    void check_batch(std::span<const std::string> texts) const {
        if (texts.size() > batch_limit())
            throw std::invalid_argument("embed: batch of " + std::to_string(texts.size()) +
                                        " exceeds provider limit " + std::to_string(batch_limit()));
        for (const auto& t : texts)
            if (t.empty()) throw std::invalid_argument("embed: empty text in batch");
    }
};

// Splits an arbitrarily long list into provider-sized batches.
inline std::vector<EmbeddingVector> embed_all(EmbeddingProvider& provider, const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    const std::size_t limit = provider.batch_limit();
    for (std::size_t i = 0; i < texts.size(); i += limit) {
        const std::size_t n = std::min(limit, texts.size() - i);
        auto part = provider.embed(std::span<const std::string>(texts.data() + i, n));
        for (auto& v : part) out.push_back(std::move(v));
    }
    return out;
}

// --- Mock providers ----------------------------------------------------------

struct MockProviderOptions {
    std::size_t dim = 256;
    std::uint64_t seed = 42;
    double tag_noise = 0.15;  // weight of the per-text component for topic-tagged texts
    std::size_t batch_limit = 64;
};

namespace detail {

// Mock tokenizer: lowercase runs of [a-z0-9] or non-ASCII bytes; a trailing
// 's' on tokens longer than 3 chars is stripped so that "Results" matches
// "result".
inline std::vector<std::string> mock_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        if (cur.size() > 3 && cur.back() == 's') cur.pop_back();
        tokens.push_back(cur);
        cur.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) && c < 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (c >= 0x80) {
            cur.push_back(static_cast<char>(c));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

inline std::vector<double> seeded_gaussian_vec(std::uint64_t seed, std::size_t dim) {
    SplitMix64 rng(seed);
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.next_gaussian();
    return v;
}

// Extracts a "[topic:X]" prefix; returns the tag and strips it from rest.
inline std::optional<std::string> topic_tag_prefix(const std::string& text, std::string& rest) {
    static const std::string kPrefix = "[topic:";
    if (text.rfind(kPrefix, 0) != 0) return std::nullopt;
    const auto close = text.find(']', kPrefix.size());
    if (close == std::string::npos) return std::nullopt;
    rest = text.substr(close + 1);
    return text.substr(kPrefix.size(), close - kPrefix.size());
}

}  // namespace detail

// Deterministic offline embedding provider. Each token contributes a
// pseudo-random direction seeded by its hash, so texts sharing vocabulary get
// high cosine and unrelated texts are near-orthogonal. Texts carrying a
// "[topic:X]" prefix share a common base direction (weight 1 - tag_noise),
// which lets tests plant exact similarity structure.
class MockEmbeddingProvider : public EmbeddingProvider {
public:
    explicit MockEmbeddingProvider(MockProviderOptions opts = {}) : opts_(opts) {}

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        check_batch(texts);
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(EmbeddingVector{detail::to_float(embed_text(t))});
        return out;
    }

    std::size_t dim() const override { return opts_.dim; }
    std::size_t batch_limit() const override { return opts_.batch_limit; }
    std::string id() const override {
        return "mock-emb/" + std::to_string(opts_.seed) + "/" + std::to_string(opts_.dim);
    }

    // Exposed so tests can recompute the construction independently.
    std::vector<double> embed_text(const std::string& text) const {
        std::string rest = text;
        auto tag = detail::topic_tag_prefix(text, rest);
        std::vector<double> acc(opts_.dim, 0.0);
        bool any_token = false;
        for (const auto& tok : detail::mock_tokens(rest)) {
            const auto tv = detail::seeded_gaussian_vec(opts_.seed ^ detail::fnv1a(tok.data(), tok.size()),
                                                        opts_.dim);
            for (std::size_t i = 0; i < opts_.dim; ++i) acc[i] += tv[i];
            any_token = true;
        }
        if (tag) {
            const std::string tag_key = "#tag#" + *tag;
            auto base = detail::normalized(
                detail::seeded_gaussian_vec(opts_.seed ^ detail::fnv1a(tag_key.data(), tag_key.size()), opts_.dim));
            if (any_token) {
                const auto words = detail::normalized(std::move(acc));
                acc.assign(opts_.dim, 0.0);
                for (std::size_t i = 0; i < opts_.dim; ++i)
                    acc[i] = (1.0 - opts_.tag_noise) * base[i] + opts_.tag_noise * words[i];
            } else {
                acc = base;
            }
        } else if (!any_token) {
            // Degenerate text (no tokens at all): derive from raw bytes.
            acc = detail::seeded_gaussian_vec(opts_.seed ^ detail::fnv1a(text.data(), text.size()), opts_.dim);
        }
        return detail::normalized(std::move(acc));
    }

private:
    MockProviderOptions opts_;
};

// Prompt protocol strings shared between the summarizer and the mock
// completion provider.
namespace prompts {
inline constexpr const char* kParaphraseHeader = "Paraphrase the question below into";
inline constexpr const char* kQuestionField = "Question: ";
inline constexpr const char* kStartField = "Start numbering at ";
inline constexpr const char* kEvidenceHeader = "Evidence:";
inline constexpr const char* kInstructionsHeader = "Instructions:";
}  // namespace prompts

namespace detail {

inline std::string first_sentence(const std::string& text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '.' || c == '!' || c == '?') return text.substr(0, i + 1);
    }
    return text;
}

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace detail

// Deterministic offline completion provider. Understands the two prompt
// shapes the summarizer emits:
//   - paraphrase requests: returns numbered variants of the quoted question;
//   - evidence-grounded QA: returns the first sentence of the top evidence
//     segment followed by that segment's layout marker.
// Anything else gets a stable hash-derived reply.
class MockCompletionProvider : public CompletionProvider {
public:
    explicit MockCompletionProvider(std::uint64_t seed = 42) : seed_(seed) {}

    std::string complete(const CompletionRequest& req) override {
        check_request(req);
        if (req.prompt.rfind(prompts::kParaphraseHeader, 0) == 0) return paraphrase_reply(req.prompt);
        if (req.prompt.find(prompts::kEvidenceHeader) != std::string::npos) return qa_reply(req.prompt);
        const auto h = detail::sha256(std::to_string(seed_) + "|" + req.prompt);
        return "mock-reply-" + detail::to_hex(h).substr(0, 12);
    }

    std::string id() const override { return "mock-llm/" + std::to_string(seed_); }

private:
    static std::string field_value(const std::string& prompt, const std::string& field) {
        const auto pos = prompt.find(field);
        if (pos == std::string::npos) return {};
        const auto end = prompt.find('\n', pos);
        return prompt.substr(pos + field.size(), end == std::string::npos ? std::string::npos : end - pos - field.size());
    }

    std::string paraphrase_reply(const std::string& prompt) const {
        const std::string base = detail::trim(field_value(prompt, prompts::kQuestionField));
        int start = 1;
        const std::string start_str = detail::trim(field_value(prompt, prompts::kStartField));
        if (!start_str.empty()) start = std::stoi(start_str);
        int count = 6;
        {
            // "... below into {n} distinct ..."
            std::istringstream is(prompt.substr(std::string(prompts::kParaphraseHeader).size()));
            is >> count;
            if (count <= 0) count = 6;
        }
        std::string core = base;
        bool question_mark = false;
        if (!core.empty() && core.back() == '?') {
            core.pop_back();
            question_mark = true;
        }
        std::string out;
        for (int k = start; k < start + count; ++k) {
            out += std::to_string(k) + ". " + core + " (" + std::to_string(k) + ")";
            if (question_mark) out += "?";
            out += "\n";
        }
        return out;
    }

    std::string qa_reply(const std::string& prompt) const {
        // Locate the first marker line after "Evidence:" and gather its text
        // up to the next marker or the instructions footer.
        std::istringstream is(prompt);
        std::string line;
        bool in_evidence = false;
        std::string marker;
        std::string body;
        while (std::getline(is, line)) {
            if (!in_evidence) {
                if (line == prompts::kEvidenceHeader) in_evidence = true;
                continue;
            }
            const bool is_marker = !line.empty() && line.front() == '<' && line.find('>') != std::string::npos;
            if (marker.empty()) {
                if (is_marker) marker = line;
                continue;
            }
            if (is_marker || line.rfind(prompts::kInstructionsHeader, 0) == 0) break;
            if (!body.empty()) body += "\n";
            body += line;
        }
        if (marker.empty()) {
            const auto h = detail::sha256(std::to_string(seed_) + "|" + prompt);
            return "mock-reply-" + detail::to_hex(h).substr(0, 12);
        }
        const std::string sentence = detail::trim(detail::first_sentence(body));
        if (sentence.empty()) return marker;
        return sentence + " " + marker;
    }

    std::uint64_t seed_;
};

// --- Embedding cache ----------------------------------------------------------

// On-disk cache keyed by sha256(provider id + '\0' + text). File layout:
// magic "OMRCEMB1", dim u32 LE, count u64 LE, then count records of
// {32-byte key, dim x f32 LE}. Records are written sorted by key so the file
// bytes are reproducible.
class EmbeddingCache {
public:
    EmbeddingCache(std::string path, std::size_t dim) : path_(std::move(path)), dim_(dim) {
        if (std::filesystem::exists(path_)) load();
    }

    std::optional<std::vector<float>> get(const detail::Sha256Digest& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void put(const detail::Sha256Digest& key, std::vector<float> values) {
        if (values.size() != dim_) throw DataError("embedding cache: dim mismatch on insert");
        entries_[key] = std::move(values);
        dirty_ = true;
    }

    std::size_t size() const { return entries_.size(); }
    std::size_t dim() const { return dim_; }

    void flush() {
        if (!dirty_) return;
        std::ofstream out(path_, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write embedding cache: " + path_);
        detail::write_magic(out, "OMRCEMB1");
        detail::write_u32(out, static_cast<std::uint32_t>(dim_));
        detail::write_u64(out, entries_.size());
        for (const auto& [key, values] : entries_) {
            out.write(reinterpret_cast<const char*>(key.data()), static_cast<std::streamsize>(key.size()));
            detail::write_f32_vec(out, values);
        }
        if (!out) throw DataError("I/O failure while writing embedding cache: " + path_);
        dirty_ = false;
    }

private:
    void load() {
        std::ifstream in(path_, std::ios::binary);
        if (!in) throw DataError("cannot read embedding cache: " + path_);
        detail::expect_magic(in, "OMRCEMB1", "embedding cache");
        const std::uint32_t file_dim = detail::read_u32(in);
        if (file_dim != dim_)
            throw DataError("embedding cache dim " + std::to_string(file_dim) + " does not match provider dim " +
                            std::to_string(dim_));
        const std::uint64_t count = detail::read_u64(in);
        for (std::uint64_t i = 0; i < count; ++i) {
            detail::Sha256Digest key{};
            if (!in.read(reinterpret_cast<char*>(key.data()), static_cast<std::streamsize>(key.size())))
                throw DataError("embedding cache: truncated record");
            entries_[key] = detail::read_f32_vec(in, dim_);
        }
    }

    std::string path_;
    std::size_t dim_;
    std::map<detail::Sha256Digest, std::vector<float>> entries_;
    bool dirty_ = false;
};

// Transparent caching wrapper. Identity is the inner provider's so cache
// keys stay stable across runs.
class CachedEmbeddingProvider : public EmbeddingProvider {
public:
    CachedEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner, std::string cache_path)
        : inner_(std::move(inner)), cache_(std::move(cache_path), inner_->dim()) {}

    ~CachedEmbeddingProvider() override {
        try {
            cache_.flush();
        } catch (...) {
        }
    }

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        std::lock_guard<std::mutex> lock(mutex_);
        std::vector<EmbeddingVector> out(texts.size());
        std::vector<std::size_t> miss_pos;
        std::vector<std::string> miss_texts;
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (auto hit = cache_.get(key_for(texts[i]))) {
                out[i].values = std::move(*hit);
            } else {
                miss_pos.push_back(i);
                miss_texts.push_back(texts[i]);
            }
        }
        if (!miss_texts.empty()) {
            auto fresh = embed_all(*inner_, miss_texts);
            for (std::size_t k = 0; k < miss_pos.size(); ++k) {
                cache_.put(key_for(miss_texts[k]), fresh[k].values);
                out[miss_pos[k]] = std::move(fresh[k]);
            }
        }
        return out;
    }

    std::size_t dim() const override { return inner_->dim(); }
    std::size_t batch_limit() const override { return inner_->batch_limit(); }
    std::string id() const override { return inner_->id(); }

    void flush() {
        std::lock_guard<std::mutex> lock(mutex_);
        cache_.flush();
    }
    std::size_t cache_size() const { return cache_.size(); }

private:
    detail::Sha256Digest key_for(const std::string& text) const {
        return detail::sha256(inner_->id() + '\0' + text);
    }

    std::shared_ptr<EmbeddingProvider> inner_;
    EmbeddingCache cache_;
    std::mutex mutex_;
};

}  // namespace omrc
