#pragma once

#include "treeqa/backend.hpp"

#include <optional>
#include <string>
#include <vector>

namespace treeqa {

// One scripted response. Exact entries match the full prompt; pattern entries
// match any prompt containing `contains` and apply only when no exact entry
// matches. Optional temperature/seed constraints narrow a match further.
struct ReplayEntry {
    enum class Match { exact, pattern };
    Match match = Match::exact;
    std::string prompt;   // exact entries
    std::string contains; // pattern entries
    std::optional<double> temperature;
    std::optional<std::int64_t> seed;
    Completion completion;
};

struct ReplayScoringEntry {
    std::string prompt;
    std::string continuation;
    std::vector<TokenSpan> tokens;
};

// Deterministic backend that answers from a script. Unscripted prompts raise
// ReplayMiss carrying the prompt digest.
class ReplayBackend : public Backend {
public:
    ReplayBackend() = default;
    explicit ReplayBackend(std::vector<ReplayEntry> entries) : entries_(std::move(entries)) {}

    void add(ReplayEntry entry) { entries_.push_back(std::move(entry)); }
    void add_scoring(ReplayScoringEntry entry) { scoring_.push_back(std::move(entry)); }

    Completion generate(const std::string& prompt, const GenerationParams& params) override;
    std::vector<TokenSpan> score_continuation(const std::string& prompt,
                                              const std::string& continuation) override;
    bool supports_scoring() const override { return true; }
    std::string id() const override { return "replay"; }
    std::string model() const override { return model_; }
    void set_model(std::string m) { model_ = std::move(m); }

private:
    std::vector<ReplayEntry> entries_;
    std::vector<ReplayScoringEntry> scoring_;
    std::string model_ = "replay";
};

// Parses the documented replay-script schema (JSON). Throws ScriptParseFailure.
ReplayBackend load_replay_script(const std::string& path);

// Builds a completion whose tokens tile `text`. Either explicit (text,
// logprob) pairs, or a uniform logprob tiled over token_texts; when
// token_texts is empty the text splits at whitespace boundaries, each token
// keeping its leading whitespace.
Completion make_completion(const std::string& text,
                           const std::vector<std::pair<std::string, double>>& tokens);
Completion make_uniform_completion(const std::string& text, double logprob,
                                   std::vector<std::string> token_texts = {});

} // namespace treeqa
