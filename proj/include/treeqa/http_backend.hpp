#pragma once

#include "treeqa/backend.hpp"

#include <string>

namespace treeqa {

struct HttpBackendOptions {
    std::string endpoint;        // e.g. http://host:port
    std::string path = "/v1/completions";
    std::string model;
    std::string auth_token;      // empty: no Authorization header
    int max_concurrency = 4;
    int max_attempts = 3;        // transport retries with exponential backoff
    int timeout_seconds = 120;
};

// Client for the de-facto hosted-LLM completions wire format: prompt in,
// choices with text, token strings, token logprobs and text offsets out.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendOptions opts);
    ~HttpBackend() override;

    Completion generate(const std::string& prompt, const GenerationParams& params) override;
    std::string id() const override { return "http:" + opts_.endpoint; }
    std::string model() const override { return opts_.model; }

private:
    HttpBackendOptions opts_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Parses one completions response body into a Completion. Exposed for tests.
Completion parse_completions_response(const std::string& body, bool want_logprobs);

} // namespace treeqa
