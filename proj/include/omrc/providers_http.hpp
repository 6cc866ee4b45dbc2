#pragma once

#include <atomic>
#include <chrono>
#include <string>
#include <thread>
#include <vector>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "omrc/providers.hpp"

namespace omrc {

struct HttpProviderConfig {
    std::string endpoint;  // base URL, e.g. "http://127.0.0.1:8080"
    std::string completion_path = "/v1/chat/completions";
    std::string embedding_path = "/v1/embeddings";
    std::string completion_model = "qwen3-max";
    std::string embedding_model = "mbert";
    std::string api_key;
    std::size_t embedding_dim = 768;
    std::size_t batch_limit = 64;
    int max_retries = 3;
    int retry_backoff_ms = 100;
    int timeout_seconds = 60;
};

namespace detail {

struct TransientHttpError : ProviderError {
    using ProviderError::ProviderError;
};

// Shared request path: retries transient failures (connect errors, 429, 5xx)
// with exponential backoff; authentication failures are never retried and
// other 4xx responses are surfaced verbatim.
class HttpJsonClient {
public:
    explicit HttpJsonClient(const HttpProviderConfig& cfg) : cfg_(cfg) {}

    nlohmann::json post(const std::string& path, const nlohmann::json& body) {
        int attempt = 0;
        for (;;) {
            try {
                return post_once(path, body);
            } catch (const TransientHttpError& e) {
                if (attempt >= cfg_.max_retries)
                    throw ProviderError(std::string(e.what()) + " (after " + std::to_string(attempt) + " retries)");
                const auto delay = std::chrono::milliseconds(
                    static_cast<long long>(cfg_.retry_backoff_ms) * (1LL << attempt));
                std::this_thread::sleep_for(delay);
                ++attempt;
                retry_count_.fetch_add(1, std::memory_order_relaxed);
            }
        }
    }

    // Total transient retries performed over the client lifetime.
    int retry_count() const { return retry_count_.load(std::memory_order_relaxed); }

private:
    nlohmann::json post_once(const std::string& path, const nlohmann::json& body) {
        httplib::Client cli(cfg_.endpoint);
        cli.set_connection_timeout(cfg_.timeout_seconds, 0);
        cli.set_read_timeout(cfg_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        auto res = cli.Post(path, headers, body.dump(), "application/json");
        if (!res) throw TransientHttpError("provider unreachable: " + cfg_.endpoint + path);
        if (res->status == 401 || res->status == 403)
            throw ProviderAuthError("provider authentication failed (HTTP " + std::to_string(res->status) + ")");
        if (res->status == 429 || res->status >= 500)
            throw TransientHttpError("provider transient failure (HTTP " + std::to_string(res->status) + ")");
        if (res->status != 200)
            throw ProviderError("provider refused request (HTTP " + std::to_string(res->status) + "): " + res->body);
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("provider returned invalid JSON: ") + e.what());
        }
    }

    HttpProviderConfig cfg_;
    std::atomic<int> retry_count_{0};
};

}  // namespace detail

class HttpCompletionProvider : public CompletionProvider {
public:
    explicit HttpCompletionProvider(HttpProviderConfig cfg) : cfg_(std::move(cfg)), client_(cfg_) {
        if (cfg_.endpoint.empty()) throw ProviderError("completion provider: no endpoint configured");
    }

    std::string complete(const CompletionRequest& req) override {
        check_request(req);
        nlohmann::json body{{"model", cfg_.completion_model},
                            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
                            {"max_tokens", req.max_tokens},
                            {"temperature", req.temperature}};
        if (req.seed) body["seed"] = *req.seed;
        const auto reply = client_.post(cfg_.completion_path, body);
        try {
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("unexpected completion response shape: ") + e.what());
        }
    }

    std::string id() const override { return cfg_.endpoint + "|" + cfg_.completion_model; }
    int retry_count() const { return client_.retry_count(); }

private:
    HttpProviderConfig cfg_;
    detail::HttpJsonClient client_;
};

class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(HttpProviderConfig cfg) : cfg_(std::move(cfg)), client_(cfg_) {
        if (cfg_.endpoint.empty()) throw ProviderError("embedding provider: no endpoint configured");
    }

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override {
        check_batch(texts);
        if (texts.empty()) return {};
        nlohmann::json input = nlohmann::json::array();
        for (const auto& t : texts) input.push_back(t);
        const auto reply =
            client_.post(cfg_.embedding_path, nlohmann::json{{"model", cfg_.embedding_model}, {"input", input}});
        std::vector<EmbeddingVector> out(texts.size());
        try {
            const auto& data = reply.at("data");
            if (data.size() != texts.size())
                throw ProviderError("embedding response count mismatch: got " + std::to_string(data.size()) +
                                    ", expected " + std::to_string(texts.size()));
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto& item = data.at(i);
                const std::size_t pos = item.contains("index") ? item.at("index").get<std::size_t>() : i;
                if (pos >= out.size()) throw ProviderError("embedding response index out of range");
                out[pos].values = item.at("embedding").get<std::vector<float>>();
                if (out[pos].values.size() != cfg_.embedding_dim)
                    throw ProviderError("embedding dim " + std::to_string(out[pos].values.size()) +
                                        " does not match configured dim " + std::to_string(cfg_.embedding_dim));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("unexpected embedding response shape: ") + e.what());
        }
        return out;
    }

    std::size_t dim() const override { return cfg_.embedding_dim; }
    std::size_t batch_limit() const override { return cfg_.batch_limit; }
    std::string id() const override { return cfg_.endpoint + "|" + cfg_.embedding_model; }
    int retry_count() const { return client_.retry_count(); }

private:
    HttpProviderConfig cfg_;
    detail::HttpJsonClient client_;
};

}  // namespace omrc
