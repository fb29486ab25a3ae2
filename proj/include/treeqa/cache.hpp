#pragma once

#include "treeqa/backend.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace treeqa {

// One file per key under `dir`, named by the hex digest. Writes go through a
// temporary file and an atomic rename; entries failing their checksum are
// quarantined and treated as misses.
class CompletionCache {
public:
    explicit CompletionCache(std::filesystem::path dir);

    std::optional<Completion> get(const CacheKey& key) const;
    void put(const CacheKey& key, const Completion& value, const std::string& wire = "") const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

// Wraps a backend with the cache; identical (prompt, params) pairs are served
// from disk without touching the inner backend.
class CachingBackend : public Backend {
public:
    CachingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<CompletionCache> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}

    Completion generate(const std::string& prompt, const GenerationParams& params) override;
    std::vector<TokenSpan> score_continuation(const std::string& prompt,
                                              const std::string& continuation) override;
    bool supports_scoring() const override { return inner_->supports_scoring(); }
    std::string id() const override { return inner_->id(); }
    std::string model() const override { return inner_->model(); }

    size_t calls() const { return calls_; }
    size_t cache_hits() const { return hits_; }

private:
    std::shared_ptr<Backend> inner_;
    std::shared_ptr<CompletionCache> cache_;
    mutable std::atomic<size_t> calls_{0};
    mutable std::atomic<size_t> hits_{0};
};

} // namespace treeqa
