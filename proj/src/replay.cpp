#include "treeqa/replay.hpp"

#include "treeqa/errors.hpp"
#include "treeqa/text.hpp"

#include <cctype>
#include <fstream>

#include <json.hpp>

namespace treeqa {

namespace {

bool params_match(const ReplayEntry& e, const GenerationParams& p) {
    if (e.temperature && *e.temperature != p.temperature) return false;
    if (e.seed && (!p.sample_seed || *e.seed != *p.sample_seed)) return false;
    return true;
}

// Entries with explicit constraints are more specific; prefer them.
int specificity(const ReplayEntry& e) {
    return (e.temperature ? 1 : 0) + (e.seed ? 1 : 0);
}

FinishReason parse_finish(const std::string& s) {
    if (s == "length") return FinishReason::length;
    if (s == "stop" || s.empty()) return FinishReason::stop;
    return FinishReason::other;
}

} // namespace

Completion make_completion(const std::string& text,
                           const std::vector<std::pair<std::string, double>>& tokens) {
    Completion c;
    c.text = text;
    size_t pos = 0;
    for (const auto& [tok, lp] : tokens) {
        c.tokens.push_back(TokenSpan{tok, lp, pos, pos + tok.size()});
        pos += tok.size();
    }
    c.check_spans();
    return c;
}

Completion make_uniform_completion(const std::string& text, double logprob,
                                   std::vector<std::string> token_texts) {
    if (token_texts.empty()) {
        // split at whitespace boundaries, each chunk keeping its leading whitespace
        std::string cur;
        auto flush = [&] {
            if (!cur.empty()) token_texts.push_back(std::move(cur)), cur.clear();
        };
        for (size_t i = 0; i < text.size(); ++i) {
            bool ws = std::isspace(static_cast<unsigned char>(text[i])) != 0;
            bool prev_ws = i > 0 && std::isspace(static_cast<unsigned char>(text[i - 1])) != 0;
            if (ws && !prev_ws) flush();
            cur.push_back(text[i]);
        }
        flush();
    }
    std::vector<std::pair<std::string, double>> toks;
    toks.reserve(token_texts.size());
    for (auto& t : token_texts) toks.emplace_back(std::move(t), logprob);
    return make_completion(text, toks);
}

Completion ReplayBackend::generate(const std::string& prompt, const GenerationParams& params) {
    const ReplayEntry* best = nullptr;
    for (const auto& e : entries_) {
        if (e.match != ReplayEntry::Match::exact) continue;
        if (e.prompt != prompt || !params_match(e, params)) continue;
        if (!best || specificity(e) > specificity(*best)) best = &e;
    }
    if (!best) {
        for (const auto& e : entries_) {
            if (e.match != ReplayEntry::Match::pattern) continue;
            if (prompt.find(e.contains) == std::string::npos || !params_match(e, params)) continue;
            best = &e;
            break; // first declared pattern wins
        }
    }
    if (!best)
        throw ReplayMiss("no replay entry for prompt", text::sha256_hex(prompt));
    Completion c = best->completion;
    if (!params.want_logprobs) c.tokens.clear();
    return c;
}

std::vector<TokenSpan> ReplayBackend::score_continuation(const std::string& prompt,
                                                         const std::string& continuation) {
    if (continuation.empty()) return {};
    for (const auto& e : scoring_)
        if (e.prompt == prompt && e.continuation == continuation) return e.tokens;
    throw ReplayMiss("no replay scoring entry", text::sha256_hex(prompt + "\x1f" + continuation));
}

ReplayBackend load_replay_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScriptParseFailure("cannot open replay script: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ScriptParseFailure("replay script " + path + ": " + e.what());
    }

    ReplayBackend backend;
    if (j.contains("model")) backend.set_model(j.at("model").get<std::string>());
    try {
        for (const auto& je : j.value("entries", nlohmann::json::array())) {
            ReplayEntry e;
            std::string match = je.value("match", "exact");
            if (match == "exact") {
                e.match = ReplayEntry::Match::exact;
                e.prompt = je.at("prompt").get<std::string>();
            } else if (match == "pattern") {
                e.match = ReplayEntry::Match::pattern;
                e.contains = je.at("contains").get<std::string>();
            } else {
                throw ScriptParseFailure("unknown match kind '" + match + "' in " + path);
            }
            if (je.contains("temperature")) e.temperature = je.at("temperature").get<double>();
            if (je.contains("seed")) e.seed = je.at("seed").get<std::int64_t>();

            const std::string completion = je.at("completion").get<std::string>();
            if (je.contains("tokens")) {
                std::vector<std::pair<std::string, double>> toks;
                for (const auto& t : je.at("tokens"))
                    toks.emplace_back(t.at(0).get<std::string>(), t.at(1).get<double>());
                e.completion = make_completion(completion, toks);
            } else if (je.contains("uniform_logprob")) {
                std::vector<std::string> token_texts;
                for (const auto& t : je.value("token_texts", nlohmann::json::array()))
                    token_texts.push_back(t.get<std::string>());
                e.completion = make_uniform_completion(
                    completion, je.at("uniform_logprob").get<double>(), std::move(token_texts));
            } else {
                throw ScriptParseFailure("entry needs 'tokens' or 'uniform_logprob' in " + path);
            }
            e.completion.finish_reason = parse_finish(je.value("finish_reason", "stop"));
            backend.add(std::move(e));
        }
        for (const auto& js : j.value("scoring", nlohmann::json::array())) {
            ReplayScoringEntry s;
            s.prompt = js.at("prompt").get<std::string>();
            s.continuation = js.at("continuation").get<std::string>();
            std::vector<std::pair<std::string, double>> toks;
            for (const auto& t : js.at("tokens"))
                toks.emplace_back(t.at(0).get<std::string>(), t.at(1).get<double>());
            s.tokens = make_completion(s.continuation, toks).tokens;
            backend.add_scoring(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ScriptParseFailure("replay script " + path + ": " + e.what());
    } catch (const MalformedResponse& e) {
        throw ScriptParseFailure("replay script " + path + ": " + e.what());
    }
    return backend;
}

} // namespace treeqa
