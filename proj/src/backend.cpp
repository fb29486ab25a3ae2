#include "treeqa/backend.hpp"

#include "treeqa/errors.hpp"
#include "treeqa/text.hpp"

#include <sstream>

namespace treeqa {

std::optional<double> Completion::mean_logprob() const {
    if (tokens.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& t : tokens) sum += t.logprob;
    return sum / static_cast<double>(tokens.size());
}

void Completion::check_spans() const {
    size_t pos = 0;
    for (const auto& t : tokens) {
        if (t.char_start != pos || t.char_end < t.char_start || t.char_end > text.size())
            throw MalformedResponse("token spans do not tile completion text");
        if (text.compare(t.char_start, t.char_end - t.char_start, t.text) != 0)
            throw MalformedResponse("token span text mismatch at offset " + std::to_string(pos));
        pos = t.char_end;
    }
    if (!tokens.empty() && pos != text.size())
        throw MalformedResponse("token spans stop short of completion end");
}

CacheKey CacheKey::make(const std::string& backend_id, const std::string& model,
                        const GenerationParams& params, const std::string& prompt) {
    std::ostringstream os;
    os << "backend=" << backend_id << '\n'
       << "model=" << model << '\n'
       << "temperature=" << params.temperature << '\n'
       << "max_tokens=" << params.max_tokens << '\n'
       << "want_logprobs=" << (params.want_logprobs ? 1 : 0) << '\n'
       << "seed=" << (params.sample_seed ? std::to_string(*params.sample_seed) : "none") << '\n'
       << "stops=";
    for (const auto& s : params.stop_sequences) os << s.size() << ':' << s << ';';
    os << '\n' << "prompt:" << prompt;
    return CacheKey{text::sha256_hex(os.str())};
}

std::vector<TokenSpan> Backend::score_continuation(const std::string&, const std::string&) {
    throw CapabilityUnsupported("backend '" + id() + "' cannot score continuations");
}

} // namespace treeqa
