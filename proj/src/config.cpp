#include "treeqa/config.hpp"

#include "treeqa/errors.hpp"
#include "treeqa/http_backend.hpp"
#include "treeqa/replay.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace treeqa {

namespace {

SelectionPolicy parse_selection(const std::string& s) {
    if (s == "argmax") return SelectionPolicy::argmax;
    if (s == "random_choice") return SelectionPolicy::random_choice;
    if (s == "self_consistency") return SelectionPolicy::self_consistency;
    throw ConfigError("unknown selection policy: " + s);
}

ConfidenceEstimator parse_estimator(const std::string& s) {
    if (s == "explanation") return ConfidenceEstimator::explanation;
    if (s == "explanation_plus_answer") return ConfidenceEstimator::explanation_plus_answer;
    if (s == "answer_only") return ConfidenceEstimator::answer_only;
    throw ConfigError("unknown confidence estimator: " + s);
}

void require_exists(const std::string& path, const std::string& what) {
    if (!path.empty() && !fs::exists(path))
        throw ConfigError(what + " does not exist: " + path);
}

} // namespace

AppConfig AppConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }

    AppConfig c;
    try {
        if (j.contains("backend")) {
            const auto& b = j["backend"];
            c.backend_type = b.value("type", c.backend_type);
            c.replay_script = b.value("script", c.replay_script);
            c.endpoint = b.value("endpoint", c.endpoint);
            c.http_path = b.value("path", c.http_path);
            c.model = b.value("model", c.model);
            c.auth_env = b.value("auth_env", c.auth_env);
            c.concurrency = b.value("concurrency", c.concurrency);
            c.max_attempts = b.value("max_attempts", c.max_attempts);
        }
        if (j.contains("retrieval")) {
            const auto& r = j["retrieval"];
            c.corpus_path = r.value("corpus", c.corpus_path);
            c.index_path = r.value("index", c.index_path);
            c.engine.retrieval.K = r.value("k", c.engine.retrieval.K);
            c.bm25.k1 = r.value("k1", c.bm25.k1);
            c.bm25.b = r.value("b", c.bm25.b);
        }
        if (j.contains("engine")) {
            const auto& e = j["engine"];
            c.engine.enable_cb = e.value("enable_cb", c.engine.enable_cb);
            c.engine.enable_ob = e.value("enable_ob", c.engine.enable_ob);
            c.engine.enable_ca = e.value("enable_ca", c.engine.enable_ca);
            if (e.contains("selection"))
                c.engine.selection = parse_selection(e["selection"].get<std::string>());
            c.engine.sc_n = e.value("sc_n", c.engine.sc_n);
            c.engine.seed = e.value("seed", c.engine.seed);
            c.engine.use_ds = e.value("use_ds", c.engine.use_ds);
            c.engine.include_descendants =
                e.value("include_descendants", c.engine.include_descendants);
            if (e.contains("confidence_estimator"))
                c.engine.confidence_estimator =
                    parse_estimator(e["confidence_estimator"].get<std::string>());
            c.engine.prompt_budget_chars =
                e.value("prompt_budget_chars", c.engine.prompt_budget_chars);
            c.engine.max_tokens = e.value("max_tokens", c.engine.max_tokens);
        }
        if (j.contains("prompts")) c.prompts_dir = j["prompts"].value("dir", c.prompts_dir);
        if (j.contains("cache")) {
            c.cache_dir = j["cache"].value("dir", c.cache_dir);
            c.cache_enabled = j["cache"].value("enabled", c.cache_enabled);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }

    if (c.backend_type == "replay") require_exists(c.replay_script, "replay script");
    require_exists(c.prompts_dir, "prompt template directory");
    if (!c.index_path.empty() && !fs::exists(c.index_path))
        require_exists(c.corpus_path, "corpus file");
    return c;
}

std::shared_ptr<Backend> AppConfig::make_backend() const {
    std::shared_ptr<Backend> inner;
    if (backend_type == "replay") {
        if (replay_script.empty()) throw ConfigError("replay backend needs backend.script");
        inner = std::make_shared<ReplayBackend>(load_replay_script(replay_script));
    } else if (backend_type == "http") {
        if (endpoint.empty()) throw ConfigError("http backend needs backend.endpoint");
        HttpBackendOptions opts;
        opts.endpoint = endpoint;
        opts.path = http_path;
        opts.model = model;
        opts.max_concurrency = concurrency;
        opts.max_attempts = max_attempts;
        if (const char* tok = std::getenv(auth_env.c_str())) opts.auth_token = tok;
        inner = std::make_shared<HttpBackend>(std::move(opts));
    } else {
        throw ConfigError("unknown backend type: " + backend_type);
    }
    if (!cache_enabled) return inner;
    auto cache = std::make_shared<CompletionCache>(cache_dir);
    return std::make_shared<CachingBackend>(std::move(inner), std::move(cache));
}

Index AppConfig::load_index() const {
    if (!index_path.empty() && fs::exists(index_path)) return Index::load(index_path);
    if (!corpus_path.empty()) return Index::build(corpus_path, bm25);
    throw ConfigError("no retrieval.index or retrieval.corpus configured");
}

PromptSet AppConfig::load_prompts() const {
    if (prompts_dir.empty()) return PromptSet::minimal();
    return PromptSet::load(prompts_dir);
}

} // namespace treeqa
