#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace treeqa {

// One generated token with its natural-log probability and half-open
// character offsets into the owning completion text.
struct TokenSpan {
    std::string text;
    double logprob = 0.0;
    size_t char_start = 0;
    size_t char_end = 0;
};

enum class FinishReason { stop, length, other };

struct Completion {
    std::string text;
    std::vector<TokenSpan> tokens; // tile text exactly; empty iff logprobs not requested
    FinishReason finish_reason = FinishReason::stop;

    // Mean logprob over all tokens; nullopt when there are no tokens.
    std::optional<double> mean_logprob() const;

    // Enforces the tiling invariant: spans ordered, non-overlapping,
    // concatenating to text. Throws MalformedResponse otherwise.
    void check_spans() const;
};

struct GenerationParams {
    double temperature = 0.0;
    int max_tokens = 512;
    std::vector<std::string> stop_sequences;
    bool want_logprobs = true;
    std::optional<std::int64_t> sample_seed;
};

struct CacheKey {
    std::string digest; // hex sha-256

    static CacheKey make(const std::string& backend_id, const std::string& model,
                         const GenerationParams& params, const std::string& prompt);
    bool operator==(const CacheKey&) const = default;
};

class Backend {
public:
    virtual ~Backend() = default;

    virtual Completion generate(const std::string& prompt, const GenerationParams& params) = 0;

    // Teacher-forced logprobs of continuation given prompt; spans offset into
    // continuation. Default: not supported.
    virtual std::vector<TokenSpan> score_continuation(const std::string& prompt,
                                                      const std::string& continuation);
    virtual bool supports_scoring() const { return false; }

    // Stable identifier folded into cache keys.
    virtual std::string id() const = 0;
    virtual std::string model() const { return ""; }
};

} // namespace treeqa
