#include "treeqa/cache.hpp"

#include "treeqa/errors.hpp"
#include "treeqa/text.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace fs = std::filesystem;

namespace treeqa {

namespace {

std::string finish_to_string(FinishReason f) {
    switch (f) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        default: return "other";
    }
}

FinishReason finish_from_string(const std::string& s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    return FinishReason::other;
}

nlohmann::json completion_payload(const Completion& c) {
    nlohmann::json toks = nlohmann::json::array();
    for (const auto& t : c.tokens)
        toks.push_back({t.text, t.logprob, t.char_start, t.char_end});
    return {{"text", c.text}, {"tokens", toks}, {"finish_reason", finish_to_string(c.finish_reason)}};
}

} // namespace

CompletionCache::CompletionCache(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

std::optional<Completion> CompletionCache::get(const CacheKey& key) const {
    fs::path file = dir_ / key.digest;
    std::ifstream in(file);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
        in >> j;
        const nlohmann::json& payload = j.at("completion");
        if (text::sha256_hex(payload.dump()) != j.at("checksum").get<std::string>())
            throw Error("checksum mismatch");
        Completion c;
        c.text = payload.at("text").get<std::string>();
        for (const auto& t : payload.at("tokens"))
            c.tokens.push_back(TokenSpan{t.at(0).get<std::string>(), t.at(1).get<double>(),
                                         t.at(2).get<size_t>(), t.at(3).get<size_t>()});
        c.finish_reason = finish_from_string(payload.at("finish_reason").get<std::string>());
        return c;
    } catch (const std::exception&) {
        // corrupt entry: quarantine and report a miss
        std::error_code ec;
        fs::rename(file, fs::path(file.string() + ".corrupt"), ec);
        return std::nullopt;
    }
}

void CompletionCache::put(const CacheKey& key, const Completion& value,
                          const std::string& wire) const {
    static std::atomic<unsigned> counter{0};
    nlohmann::json payload = completion_payload(value);
    nlohmann::json entry = {
        {"completion", payload},
        {"checksum", text::sha256_hex(payload.dump())},
    };
    if (!wire.empty()) entry["wire"] = wire;

    fs::path final_path = dir_ / key.digest;
    fs::path tmp = dir_ / (key.digest + ".tmp" + std::to_string(counter.fetch_add(1)) + "." +
                           std::to_string(static_cast<unsigned long long>(
                               std::hash<std::thread::id>{}(std::this_thread::get_id()))));
    {
        std::ofstream out(tmp);
        out << entry.dump(2) << '\n';
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error("cache write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, final_path, ec);
    if (ec) fs::remove(tmp, ec);
}

Completion CachingBackend::generate(const std::string& prompt, const GenerationParams& params) {
    ++calls_;
    CacheKey key = CacheKey::make(inner_->id(), inner_->model(), params, prompt);
    if (auto hit = cache_->get(key)) {
        ++hits_;
        return *hit;
    }
    Completion c = inner_->generate(prompt, params);
    cache_->put(key, c);
    return c;
}

std::vector<TokenSpan> CachingBackend::score_continuation(const std::string& prompt,
                                                          const std::string& continuation) {
    return inner_->score_continuation(prompt, continuation);
}

} // namespace treeqa
