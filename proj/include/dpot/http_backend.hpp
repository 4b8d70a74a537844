#pragma once

// OpenAI-compatible chat-completions backend.
//
//   POST {base_url}/chat/completions
//   {"model", "messages": [{"role", "content": str | parts}], "max_tokens", "temperature"}
//
// Reads choices[0].message.content and usage.{prompt,completion}_tokens.
// The bearer token comes from DPOT_API_KEY.

#include <cstdlib>
#include <string>

#include "dpot/gateway.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dpot {

inline nlohmann::json build_chat_request(const PromptBundle& bundle, const DecodingConfig& cfg, bool multimodal) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : bundle.messages) {
        nlohmann::json msg;
        msg["role"] = std::string(role_name(m.role));
        if (multimodal && m.image_ref) {
            msg["content"] = nlohmann::json::array({
                {{"type", "text"}, {"text", m.text}},
                {{"type", "image_url"}, {"image_url", {{"url", *m.image_ref}}}},
            });
        } else {
            msg["content"] = m.text;
        }
        messages.push_back(std::move(msg));
    }
    return {{"model", cfg.model_name},
            {"messages", std::move(messages)},
            {"max_tokens", cfg.max_tokens},
            {"temperature", cfg.temperature}};
}

/// Decodes a successful response body. Throws GatewayError on a malformed body.
inline RawCompletion parse_chat_response(const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw GatewayError(std::string("malformed completion body: ") + e.what());
    }
    RawCompletion out;
    try {
        const auto& content = j.at("choices").at(0).at("message").at("content");
        out.text = content.is_string() ? content.get<std::string>() : content.dump();
    } catch (const nlohmann::json::exception& e) {
        throw GatewayError(std::string("completion body lacks choices[0].message.content: ") + e.what());
    }
    if (auto it = j.find("usage"); it != j.end() && it->is_object()) {
        const auto p = it->find("prompt_tokens");
        const auto c = it->find("completion_tokens");
        if (p != it->end() && c != it->end() && p->is_number_integer() && c->is_number_integer())
            out.usage = std::make_pair(p->get<std::int64_t>(), c->get<std::int64_t>());
    }
    return out;
}

class HttpBackend final : public ChatBackend {
public:
    /// `base_url` like "https://api.openai.com/v1" or "http://127.0.0.1:8080".
    HttpBackend(std::string base_url, std::optional<std::string> api_key, bool multimodal = false,
                std::chrono::seconds timeout = std::chrono::seconds(120))
        : api_key_(std::move(api_key)), multimodal_(multimodal), timeout_(timeout) {
        const auto scheme_end = base_url.find("://");
        if (scheme_end == std::string::npos) throw Error("base url needs a scheme: " + base_url);
        const auto path_start = base_url.find('/', scheme_end + 3);
        origin_ = base_url.substr(0, path_start);
        prefix_ = path_start == std::string::npos ? "" : base_url.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        identity_ = "http:" + base_url;
    }

    static std::optional<std::string> api_key_from_env() {
        if (const char* key = std::getenv("DPOT_API_KEY"); key && *key) return std::string(key);
        return std::nullopt;
    }

    RawCompletion send(const PromptBundle& bundle, const DecodingConfig& cfg) override {
        httplib::Client client(origin_);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        httplib::Headers headers;
        if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);
        const std::string body = build_chat_request(bundle, cfg, multimodal_).dump();
        auto res = client.Post(prefix_ + "/chat/completions", headers, body, "application/json");
        if (!res) throw TransientError("transport failure: " + httplib::to_string(res.error()));
        if (res->status == 401 || res->status == 403)
            throw AuthError("authentication failed (HTTP " + std::to_string(res->status) + ")");
        if (res->status == 429 || res->status >= 500)
            throw TransientError("HTTP " + std::to_string(res->status));
        if (res->status != 200)
            throw GatewayError("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
        return parse_chat_response(res->body);
    }

    std::string identity() const override { return identity_; }
    bool multimodal() const override { return multimodal_; }

private:
    std::string origin_;
    std::string prefix_;
    std::string identity_;
    std::optional<std::string> api_key_;
    bool multimodal_;
    std::chrono::seconds timeout_;
};

}  // namespace dpot
