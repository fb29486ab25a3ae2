#include "treeqa/reasoning.hpp"

#include "treeqa/errors.hpp"
#include "treeqa/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include <json.hpp>

namespace treeqa {

namespace {

constexpr const char* kAnswerMarker = "So the answer is:";

int module_rank(QAModule m) {
    switch (m) {
        case QAModule::CA: return 2;
        case QAModule::OB: return 1;
        default: return 0;
    }
}

std::string finish_to_string(FinishReason f) {
    switch (f) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        default: return "other";
    }
}

// Explanation text: everything before the last marker occurrence.
std::string explanation_text(const std::string& completion_text) {
    size_t pos = completion_text.rfind(kAnswerMarker);
    if (pos == std::string::npos) return text::trim(completion_text);
    return text::trim(completion_text.substr(0, pos));
}

std::uint64_t derive_seed(std::uint64_t base, size_t node_index, int module_i, int sample_i) {
    std::uint64_t h = base;
    auto mix = [&h](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    };
    mix(node_index);
    mix(static_cast<std::uint64_t>(module_i));
    mix(static_cast<std::uint64_t>(sample_i));
    return h;
}

} // namespace

const char* qa_module_name(QAModule m) {
    switch (m) {
        case QAModule::CB: return "CB";
        case QAModule::OB: return "OB";
        default: return "CA";
    }
}

std::string extract_answer(const std::string& completion_text) {
    std::string candidate;
    size_t pos = completion_text.rfind(kAnswerMarker);
    if (pos == std::string::npos) {
        candidate = text::trim(completion_text);
    } else {
        candidate = text::trim(completion_text.substr(pos + std::strlen(kAnswerMarker)));
    }
    if (!candidate.empty() && candidate.back() == '.') candidate.pop_back();
    candidate = text::trim(candidate);
    return candidate.empty() ? "Unknown" : candidate;
}

double explanation_confidence(const Completion& completion, ConfidenceEstimator estimator) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    if (completion.tokens.empty()) return kNegInf;

    size_t region_start = 0;
    size_t region_end = completion.text.size();
    size_t marker = completion.text.rfind(kAnswerMarker);
    if (marker != std::string::npos && estimator != ConfidenceEstimator::explanation_plus_answer) {
        if (estimator == ConfidenceEstimator::explanation) {
            region_end = marker;
        } else { // answer_only
            region_start = marker + std::strlen(kAnswerMarker);
        }
    }
    if (region_end <= region_start) return kNegInf;

    double sum = 0.0;
    size_t n = 0;
    for (const auto& t : completion.tokens) {
        if (t.char_start < region_end && t.char_end > region_start) {
            sum += t.logprob;
            ++n;
        }
    }
    if (n == 0) return kNegInf;
    return sum / static_cast<double>(n);
}

double ca_aggregate(double ds, const std::vector<double>& child_scores, double s_tilde,
                    bool use_ds) {
    double sum = s_tilde;
    for (double s : child_scores) sum += s;
    double n = static_cast<double>(child_scores.size());
    if (use_ds) return (ds + sum) / (n + 2.0);
    return sum / (n + 1.0);
}

std::string config_snapshot_json(const EngineConfig& config) {
    nlohmann::ordered_json j;
    j["enable_cb"] = config.enable_cb;
    j["enable_ob"] = config.enable_ob;
    j["enable_ca"] = config.enable_ca;
    j["selection"] = config.selection == SelectionPolicy::argmax          ? "argmax"
                     : config.selection == SelectionPolicy::random_choice ? "random_choice"
                                                                          : "self_consistency";
    j["sc_n"] = config.sc_n;
    j["seed"] = config.seed;
    j["use_ds"] = config.use_ds;
    j["include_descendants"] = config.include_descendants;
    j["confidence_estimator"] =
        config.confidence_estimator == ConfidenceEstimator::explanation ? "explanation"
        : config.confidence_estimator == ConfidenceEstimator::explanation_plus_answer
            ? "explanation_plus_answer"
            : "answer_only";
    j["retrieval_k"] = config.retrieval.K;
    j["prompt_budget_chars"] = config.prompt_budget_chars;
    j["max_tokens"] = config.max_tokens;
    return j.dump();
}

Engine::Engine(const Index* index, std::shared_ptr<Backend> backend, PromptSet prompts,
               EngineConfig config)
    : index_(index),
      backend_(std::move(backend)),
      prompts_(std::move(prompts)),
      config_(config),
      rng_(config.seed) {
    if (!config_.enable_cb && !config_.enable_ob && !config_.enable_ca)
        throw ConfigError("at least one QA module must be enabled");
    if (config_.enable_ob && !index_)
        throw ConfigError("open-book QA requires a retrieval index");
}

Completion Engine::generate_checked(const std::string& prompt, double temperature,
                                    std::optional<std::int64_t> sample_seed) {
    GenerationParams params;
    params.temperature = temperature;
    params.max_tokens = config_.max_tokens;
    params.want_logprobs = true;
    params.sample_seed = sample_seed;
    ++backend_calls_;
    Completion c = backend_->generate(prompt, params);
    c.check_spans();
    return c;
}

QAOutcome Engine::make_outcome(QAModule module, const std::string& prompt,
                               const Completion& completion, double temperature,
                               std::optional<std::int64_t> sample_seed) const {
    QAOutcome out;
    out.module = module;
    out.answer = extract_answer(completion.text);
    out.explanation = explanation_text(completion.text);
    out.raw_confidence = explanation_confidence(completion, config_.confidence_estimator);
    out.agg_confidence = out.raw_confidence;
    GenerationParams params;
    params.temperature = temperature;
    params.max_tokens = config_.max_tokens;
    params.sample_seed = sample_seed;
    out.prompt_digest = CacheKey::make(backend_->id(), backend_->model(), params, prompt);
    return out;
}

std::optional<QAOutcome> Engine::closed_book(const std::string& question, double temperature,
                                             std::optional<std::int64_t> sample_seed,
                                             std::vector<std::string>* warnings) {
    const std::string prompt = build_cb_prompt(prompts_, question);
    try {
        Completion c = generate_checked(prompt, temperature, sample_seed);
        return make_outcome(QAModule::CB, prompt, c, temperature, sample_seed);
    } catch (const Error& e) {
        if (warnings) warnings->push_back(std::string("CB skipped: ") + e.what());
        return std::nullopt;
    }
}

std::optional<QAOutcome> Engine::open_book(const std::string& question,
                                           std::vector<ScoredParagraph> paragraphs, bool leaf,
                                           double temperature,
                                           std::optional<std::int64_t> sample_seed,
                                           std::vector<std::string>* warnings) {
    if (paragraphs.empty() && warnings)
        warnings->push_back("OB proceeding with empty context for: " + question);

    std::string prompt = build_ob_prompt(prompts_, question, paragraphs, leaf);
    // drop lowest-scored paragraphs until the prompt fits the budget
    while (prompt.size() > config_.prompt_budget_chars && !paragraphs.empty()) {
        auto lowest = std::min_element(
            paragraphs.begin(), paragraphs.end(),
            [](const ScoredParagraph& a, const ScoredParagraph& b) { return a.score < b.score; });
        if (warnings)
            warnings->push_back("OB dropped paragraph '" + lowest->para.id +
                                "' to fit the prompt budget");
        paragraphs.erase(lowest);
        prompt = build_ob_prompt(prompts_, question, paragraphs, leaf);
    }

    try {
        Completion c = generate_checked(prompt, temperature, sample_seed);
        QAOutcome out = make_outcome(QAModule::OB, prompt, c, temperature, sample_seed);
        for (const auto& sp : paragraphs) out.paragraphs_used.push_back(sp.para.id);
        return out;
    } catch (const Error& e) {
        if (warnings) warnings->push_back(std::string("OB skipped: ") + e.what());
        return std::nullopt;
    }
}

std::optional<QAOutcome> Engine::child_aggregating(
    const std::string& question, const std::vector<std::pair<std::string, std::string>>& child_pairs,
    double ds, const std::vector<double>& child_scores, double temperature,
    std::optional<std::int64_t> sample_seed, std::vector<std::string>* warnings) {
    const std::string prompt = build_ca_prompt(prompts_, question, child_pairs);
    try {
        Completion c = generate_checked(prompt, temperature, sample_seed);
        QAOutcome out = make_outcome(QAModule::CA, prompt, c, temperature, sample_seed);
        out.agg_confidence = ca_aggregate(ds, child_scores, out.raw_confidence, config_.use_ds);
        return out;
    } catch (const Error& e) {
        if (warnings) warnings->push_back(std::string("CA skipped: ") + e.what());
        return std::nullopt;
    }
}

QueryTree Engine::understand(const std::string& question) {
    const std::string prompt = build_decompose_prompt(prompts_, question);
    Completion completion = generate_checked(prompt, 0.0, std::nullopt);
    QueryTree tree;
    try {
        tree = parse_tree_json(completion.text, question);
    } catch (const DecompositionCycle& e) {
        tree.root_question = question;
        tree.nodes = {QueryNode{0, question, std::nullopt, {}, std::nullopt}};
        tree.warnings.push_back(std::string("decomposition degraded to atomic question: ") +
                                e.what());
        return tree;
    }
    align_ds_scores(completion, tree);
    return tree;
}

NodeSolution Engine::select_argmax(NodeSolution partial) const {
    const QAOutcome* best = nullptr;
    for (const auto& o : partial.outcomes) {
        if (!best || o.agg_confidence > best->agg_confidence ||
            (o.agg_confidence == best->agg_confidence &&
             module_rank(o.module) > module_rank(best->module)))
            best = &o;
    }
    partial.chosen = best->module;
    partial.answer = best->answer;
    partial.score = best->agg_confidence;
    return partial;
}

NodeSolution Engine::select_random(NodeSolution partial) {
    std::uniform_int_distribution<size_t> pick(0, partial.outcomes.size() - 1);
    const QAOutcome& o = partial.outcomes[pick(rng_)];
    partial.chosen = o.module;
    partial.answer = o.answer;
    partial.score = o.agg_confidence;
    return partial;
}

NodeSolution Engine::self_consistency_select(
    const QueryNode& node, const QueryTree& tree, NodeSolution partial,
    const std::vector<std::pair<std::string, std::string>>& child_pairs,
    const std::vector<double>& child_scores, double ds) {
    (void)tree;
    const int n = std::max(1, config_.sc_n);
    std::vector<QAOutcome> samples;

    auto run_module = [&](QAModule m, int module_i) {
        for (int s = 0; s < n; ++s) {
            double temperature = s == 0 ? 0.0 : 0.7;
            std::optional<std::int64_t> seed;
            if (s > 0)
                seed = static_cast<std::int64_t>(
                    derive_seed(config_.seed, node.index, module_i, s));
            std::optional<QAOutcome> o;
            switch (m) {
                case QAModule::CB:
                    o = closed_book(partial.resolved_question, temperature, seed,
                                    &partial.warnings);
                    break;
                case QAModule::OB:
                    o = open_book(partial.resolved_question, partial.scored_para, node.is_leaf(),
                                  temperature, seed, &partial.warnings);
                    break;
                case QAModule::CA:
                    o = child_aggregating(partial.resolved_question, child_pairs, ds, child_scores,
                                          temperature, seed, &partial.warnings);
                    break;
            }
            if (o) samples.push_back(std::move(*o));
        }
    };

    if (config_.enable_cb) run_module(QAModule::CB, 0);
    if (config_.enable_ob) run_module(QAModule::OB, 1);
    if (config_.enable_ca && !node.is_leaf()) run_module(QAModule::CA, 2);

    if (samples.empty())
        throw AllModulesFailed("no QA module produced an outcome for node " +
                               std::to_string(node.index));

    // most frequent answer string; ties picked uniformly by the seeded rng
    std::vector<std::pair<std::string, size_t>> counts; // first-seen order
    for (const auto& o : samples) {
        auto it = std::find_if(counts.begin(), counts.end(),
                               [&](const auto& c) { return c.first == o.answer; });
        if (it == counts.end()) counts.emplace_back(o.answer, 1);
        else ++it->second;
    }
    size_t max_count = 0;
    for (const auto& [a, c] : counts) max_count = std::max(max_count, c);
    std::vector<const std::string*> tied;
    for (const auto& [a, c] : counts)
        if (c == max_count) tied.push_back(&a);
    const std::string* winner = tied.front();
    if (tied.size() > 1) {
        std::uniform_int_distribution<size_t> pick(0, tied.size() - 1);
        winner = tied[pick(rng_)];
    }

    const QAOutcome* best = nullptr;
    for (const auto& o : samples)
        if (o.answer == *winner && (!best || o.agg_confidence > best->agg_confidence)) best = &o;

    partial.outcomes = std::move(samples);
    partial.chosen = best->module;
    partial.answer = best->answer;
    partial.score = best->agg_confidence;
    return partial;
}

NodeSolution Engine::solve_node(const QueryNode& node, const QueryTree& tree,
                                const std::map<size_t, NodeSolution>& solved) {
    NodeSolution sol;
    sol.node_index = node.index;
    sol.is_leaf = node.is_leaf();

    // sibling answers available for reference substitution
    std::map<int, std::string> sibling_answers;
    if (node.parent) {
        const auto& siblings = tree.nodes[*node.parent].children;
        for (size_t j = 0; j < siblings.size(); ++j) {
            auto it = solved.find(siblings[j]);
            if (it != solved.end()) sibling_answers[static_cast<int>(j + 1)] = it->second.answer;
        }
    }
    auto [resolved, sub_warnings] = substitute_references(node.question, sibling_answers);
    sol.resolved_question = resolved;
    sol.warnings = std::move(sub_warnings);

    // q^i.para: own retrieval plus (optionally) descendants' paragraphs
    std::vector<std::pair<std::string, std::string>> child_pairs;
    std::vector<double> child_scores;
    std::vector<std::vector<ScoredParagraph>> children_para;
    for (size_t child : node.children) {
        const NodeSolution& cs = solved.at(child);
        child_pairs.emplace_back(cs.resolved_question, cs.answer);
        child_scores.push_back(cs.score);
        children_para.push_back(cs.scored_para);
    }
    if (config_.enable_ob) {
        auto own = index_->retrieve(resolved, config_.retrieval.K);
        sol.scored_para = config_.include_descendants ? union_paragraphs(own, children_para) : own;
        for (const auto& sp : sol.scored_para) sol.para.push_back(sp.para.id);
    }

    const double ds = node.ds.value_or(0.0);

    if (config_.selection == SelectionPolicy::self_consistency)
        return self_consistency_select(node, tree, std::move(sol), child_pairs, child_scores, ds);

    if (config_.enable_cb) {
        if (auto o = closed_book(resolved, 0.0, std::nullopt, &sol.warnings))
            sol.outcomes.push_back(std::move(*o));
    }
    if (config_.enable_ob) {
        if (auto o = open_book(resolved, sol.scored_para, node.is_leaf(), 0.0, std::nullopt,
                               &sol.warnings))
            sol.outcomes.push_back(std::move(*o));
    }
    if (config_.enable_ca && !node.is_leaf()) {
        if (auto o = child_aggregating(resolved, child_pairs, ds, child_scores, 0.0, std::nullopt,
                                       &sol.warnings))
            sol.outcomes.push_back(std::move(*o));
    }

    if (sol.outcomes.empty()) {
        std::string detail;
        for (const auto& w : sol.warnings) detail += "\n  " + w;
        throw AllModulesFailed("no QA module produced an outcome for node " +
                               std::to_string(node.index) + detail);
    }

    if (config_.selection == SelectionPolicy::random_choice) return select_random(std::move(sol));
    return select_argmax(std::move(sol));
}

std::pair<std::string, ReasoningTrace> Engine::solve_tree(const std::string& question) {
    QueryTree tree = understand(question);

    ReasoningTrace trace;
    trace.root_question = question;
    trace.kind = "tree";
    trace.serialized_tree = serialize_bfs(tree).text;
    trace.tree_warnings = tree.warnings;
    for (const auto& n : tree.nodes)
        if (n.ds) trace.ds[n.index] = *n.ds;

    std::map<size_t, NodeSolution> solved;
    for (size_t idx : tree.post_order()) {
        NodeSolution sol = solve_node(tree.nodes[idx], tree, solved);
        trace.solutions.push_back(sol);
        solved.emplace(idx, std::move(sol));
    }

    trace.final_answer = solved.at(0).answer;
    trace.config_json = config_snapshot_json(config_);
    trace.backend_calls = backend_calls_;
    return {trace.final_answer, std::move(trace)};
}

std::vector<std::string> Engine::sequential_decompose(const std::string& question) {
    const std::string prompt = build_sd_prompt(prompts_, question);
    Completion completion = generate_checked(prompt, 0.0, std::nullopt);

    const std::string& raw = completion.text;
    for (size_t open = raw.find('['); open != std::string::npos; open = raw.find('[', open + 1)) {
        // rely on the json parser to find the balanced array
        for (size_t close = raw.rfind(']'); close != std::string::npos && close > open;
             close = close == 0 ? std::string::npos : raw.rfind(']', close - 1)) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(raw.substr(open, close - open + 1));
            } catch (const nlohmann::json::exception&) {
                continue;
            }
            if (!j.is_array() || j.empty()) continue;
            std::vector<std::string> steps;
            bool ok = true;
            for (const auto& s : j) {
                if (!s.is_string()) { ok = false; break; }
                steps.push_back(s.get<std::string>());
            }
            if (ok) return steps;
        }
    }
    return {question}; // degraded single step
}

std::pair<std::string, ReasoningTrace> Engine::solve_sequence(const std::vector<std::string>& steps,
                                                              const std::string& root_question) {
    ReasoningTrace trace;
    trace.root_question = root_question;
    trace.kind = "sequence";
    {
        nlohmann::ordered_json j = nlohmann::ordered_json::array();
        for (const auto& s : steps) j.push_back(s);
        trace.serialized_tree = j.dump();
    }

    std::map<int, std::string> answers; // 1-based step position -> answer
    for (size_t i = 0; i < steps.size(); ++i) {
        NodeSolution sol;
        sol.node_index = i;
        sol.is_leaf = true;
        auto [resolved, warnings] = substitute_references(steps[i], answers);
        sol.resolved_question = resolved;
        sol.warnings = std::move(warnings);

        if (config_.enable_ob) {
            sol.scored_para = index_->retrieve(resolved, config_.retrieval.K);
            for (const auto& sp : sol.scored_para) sol.para.push_back(sp.para.id);
        }
        if (config_.enable_cb) {
            if (auto o = closed_book(resolved, 0.0, std::nullopt, &sol.warnings))
                sol.outcomes.push_back(std::move(*o));
        }
        if (config_.enable_ob) {
            if (auto o = open_book(resolved, sol.scored_para, true, 0.0, std::nullopt,
                                   &sol.warnings))
                sol.outcomes.push_back(std::move(*o));
        }
        if (sol.outcomes.empty())
            throw AllModulesFailed("no QA module produced an outcome for step " +
                                   std::to_string(i + 1));
        sol = select_argmax(std::move(sol));
        answers[static_cast<int>(i + 1)] = sol.answer;
        trace.solutions.push_back(std::move(sol));
    }

    trace.final_answer = answers.at(static_cast<int>(steps.size()));
    trace.config_json = config_snapshot_json(config_);
    trace.backend_calls = backend_calls_;
    return {trace.final_answer, std::move(trace)};
}

std::pair<std::string, ReasoningTrace> Engine::solve_sequential(const std::string& question) {
    auto steps = sequential_decompose(question);
    return solve_sequence(steps, question);
}

std::string ReasoningTrace::to_json() const {
    nlohmann::ordered_json j;
    j["root_question"] = root_question;
    j["kind"] = kind;
    j["tree"] = serialized_tree;
    nlohmann::ordered_json dsj = nlohmann::ordered_json::object();
    for (const auto& [idx, v] : ds) dsj[std::to_string(idx)] = v;
    j["ds"] = dsj;
    j["tree_warnings"] = tree_warnings;
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& sol : solutions) {
        nlohmann::ordered_json n;
        n["node"] = sol.node_index;
        n["leaf"] = sol.is_leaf;
        n["resolved_question"] = sol.resolved_question;
        nlohmann::ordered_json outs = nlohmann::ordered_json::array();
        for (const auto& o : sol.outcomes) {
            nlohmann::ordered_json oj;
            oj["module"] = qa_module_name(o.module);
            oj["answer"] = o.answer;
            oj["explanation"] = o.explanation;
            oj["raw_confidence"] = std::isfinite(o.raw_confidence)
                                       ? nlohmann::ordered_json(o.raw_confidence)
                                       : nlohmann::ordered_json("-inf");
            oj["agg_confidence"] = std::isfinite(o.agg_confidence)
                                       ? nlohmann::ordered_json(o.agg_confidence)
                                       : nlohmann::ordered_json("-inf");
            oj["prompt_digest"] = o.prompt_digest.digest;
            if (!o.paragraphs_used.empty()) oj["paragraphs_used"] = o.paragraphs_used;
            outs.push_back(std::move(oj));
        }
        n["outcomes"] = outs;
        n["chosen"] = qa_module_name(sol.chosen);
        n["answer"] = sol.answer;
        n["score"] = std::isfinite(sol.score) ? nlohmann::ordered_json(sol.score)
                                              : nlohmann::ordered_json("-inf");
        if (!sol.para.empty()) n["para"] = sol.para;
        if (!sol.warnings.empty()) n["warnings"] = sol.warnings;
        nodes.push_back(std::move(n));
    }
    j["nodes"] = nodes;
    j["final_answer"] = final_answer;
    j["config"] = nlohmann::ordered_json::parse(config_json.empty() ? "{}" : config_json);
    j["backend_calls"] = backend_calls;
    return j.dump(2) + "\n";
}

} // namespace treeqa
