#pragma once

#include "treeqa/backend.hpp"
#include "treeqa/cache.hpp"
#include "treeqa/prompts.hpp"
#include "treeqa/reasoning.hpp"
#include "treeqa/retrieval.hpp"

#include <memory>
#include <optional>
#include <string>

namespace treeqa {

// Everything the CLI needs, loaded from one JSON config file. Every field has
// a default so a minimal config is tiny; referenced paths are checked at load
// time.
struct AppConfig {
    // backend
    std::string backend_type = "replay"; // "replay" or "http"
    std::string replay_script;
    std::string endpoint;
    std::string http_path = "/v1/completions";
    std::string model;
    std::string auth_env = "TREEQA_API_TOKEN";
    int concurrency = 4;
    int max_attempts = 3;

    // retrieval
    std::string corpus_path;
    std::string index_path;
    Bm25Params bm25;

    // engine
    EngineConfig engine;

    // prompts
    std::string prompts_dir;

    // cache
    std::string cache_dir = ".treeqa-cache";
    bool cache_enabled = true;

    static AppConfig load(const std::string& path);

    std::shared_ptr<Backend> make_backend() const;
    Index load_index() const; // loads index_path, or builds from corpus_path
    PromptSet load_prompts() const;
};

} // namespace treeqa
