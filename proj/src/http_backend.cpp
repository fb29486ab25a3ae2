#include "treeqa/http_backend.hpp"

#include "treeqa/errors.hpp"

#include <chrono>
#include <mutex>
#include <condition_variable>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace treeqa {

namespace {

// Bounded counting semaphore; caps in-flight live calls.
class Gate {
public:
    explicit Gate(int slots) : slots_(slots) {}
    void acquire() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return slots_ > 0; });
        --slots_;
    }
    void release() {
        std::lock_guard lk(mu_);
        ++slots_;
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int slots_;
};

struct GateGuard {
    Gate& gate;
    explicit GateGuard(Gate& g) : gate(g) { gate.acquire(); }
    ~GateGuard() { gate.release(); }
};

} // namespace

struct HttpBackend::Impl {
    explicit Impl(int slots) : gate(slots) {}
    Gate gate;
};

HttpBackend::HttpBackend(HttpBackendOptions opts)
    : opts_(std::move(opts)), impl_(std::make_unique<Impl>(opts_.max_concurrency)) {}

HttpBackend::~HttpBackend() = default;

Completion parse_completions_response(const std::string& body, bool want_logprobs) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedResponse(std::string("unparseable completions response: ") + e.what());
    }
    if (!j.contains("choices") || j["choices"].empty())
        throw MalformedResponse("completions response has no choices");
    const auto& choice = j["choices"][0];
    Completion c;
    c.text = choice.value("text", "");
    std::string finish = choice.value("finish_reason", "stop");
    c.finish_reason = finish == "stop"     ? FinishReason::stop
                      : finish == "length" ? FinishReason::length
                                           : FinishReason::other;
    if (want_logprobs) {
        if (!choice.contains("logprobs") || choice["logprobs"].is_null())
            throw MalformedResponse("logprobs requested but missing from response");
        const auto& lp = choice["logprobs"];
        const auto& toks = lp.at("tokens");
        const auto& probs = lp.at("token_logprobs");
        const auto& offs = lp.at("text_offset");
        if (toks.size() != probs.size() || toks.size() != offs.size())
            throw MalformedResponse("logprob arrays have mismatched lengths");
        // offsets may be absolute (prompt included); rebase on the first token
        long base = offs.empty() ? 0 : offs[0].get<long>();
        for (size_t i = 0; i < toks.size(); ++i) {
            TokenSpan t;
            t.text = toks[i].get<std::string>();
            t.logprob = probs[i].is_null() ? 0.0 : probs[i].get<double>();
            t.char_start = static_cast<size_t>(offs[i].get<long>() - base);
            t.char_end = t.char_start + t.text.size();
            c.tokens.push_back(std::move(t));
        }
        c.check_spans();
    }
    return c;
}

Completion HttpBackend::generate(const std::string& prompt, const GenerationParams& params) {
    if (prompt.empty()) throw Error("empty prompt");

    nlohmann::json req = {
        {"model", opts_.model},
        {"prompt", prompt},
        {"max_tokens", params.max_tokens},
        {"temperature", params.temperature},
    };
    if (params.want_logprobs) req["logprobs"] = 1;
    if (!params.stop_sequences.empty()) req["stop"] = params.stop_sequences;
    if (params.sample_seed) req["seed"] = *params.sample_seed;
    const std::string body = req.dump();

    GateGuard guard(impl_->gate);
    httplib::Client client(opts_.endpoint);
    client.set_connection_timeout(opts_.timeout_seconds, 0);
    client.set_read_timeout(opts_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!opts_.auth_token.empty())
        headers.emplace("Authorization", "Bearer " + opts_.auth_token);

    std::string last_error;
    for (int attempt = 0; attempt < opts_.max_attempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(250 << (attempt - 1)));
        auto res = client.Post(opts_.path, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) return parse_completions_response(res->body, params.want_logprobs);
        if (res->status == 400 && res->body.find("context") != std::string::npos)
            throw ContextOverflow("backend rejected prompt: " + res->body);
        if (res->status >= 400 && res->status < 500 && res->status != 429)
            throw MalformedResponse("backend returned " + std::to_string(res->status) + ": " + res->body);
        last_error = "status " + std::to_string(res->status);
    }
    throw BackendUnavailable("transport failed after " + std::to_string(opts_.max_attempts) +
                             " attempts: " + last_error);
}

} // namespace treeqa
