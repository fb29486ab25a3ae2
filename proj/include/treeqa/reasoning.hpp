#pragma once

#include "treeqa/backend.hpp"
#include "treeqa/prompts.hpp"
#include "treeqa/retrieval.hpp"
#include "treeqa/tree.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace treeqa {

enum class QAModule { CB, OB, CA };
const char* qa_module_name(QAModule m);

enum class SelectionPolicy { argmax, random_choice, self_consistency };
enum class ConfidenceEstimator { explanation, explanation_plus_answer, answer_only };

struct EngineConfig {
    bool enable_cb = true;
    bool enable_ob = true;
    bool enable_ca = true;
    SelectionPolicy selection = SelectionPolicy::argmax;
    int sc_n = 3;            // samples per module under self_consistency
    std::uint64_t seed = 0;  // drives random_choice and self-consistency ties
    bool use_ds = true;
    bool include_descendants = true;
    ConfidenceEstimator confidence_estimator = ConfidenceEstimator::explanation;
    RetrievalConfig retrieval;
    size_t prompt_budget_chars = 24000;
    int max_tokens = 512;
};

// One strategy's result at one node.
struct QAOutcome {
    QAModule module = QAModule::CB;
    std::string answer;
    std::string explanation;
    double raw_confidence = 0.0; // mean explanation logprob
    double agg_confidence = 0.0; // equals raw for CB/OB; child-score aggregate for CA
    CacheKey prompt_digest;
    std::vector<std::string> paragraphs_used; // OB only
};

struct NodeSolution {
    size_t node_index = 0;
    std::string resolved_question;
    std::vector<QAOutcome> outcomes;
    QAModule chosen = QAModule::CB;
    std::string answer;
    double score = 0.0;
    std::vector<std::string> para; // accumulated paragraph ids for this node
    std::vector<std::string> warnings;
    bool is_leaf = true;

    // scored paragraphs kept for parent-side union and budget trimming
    std::vector<ScoredParagraph> scored_para;
};

struct ReasoningTrace {
    std::string root_question;
    std::string kind = "tree"; // "tree" or "sequence"
    std::string serialized_tree;
    std::map<size_t, double> ds;
    std::vector<std::string> tree_warnings;
    std::vector<NodeSolution> solutions; // trace order = solving order
    std::string final_answer;
    std::string config_json;
    size_t backend_calls = 0;

    std::string to_json() const; // deterministic rendering
};

// Text after the last "So the answer is:" marker, trimmed of whitespace and
// one trailing period; whole completion when the marker is absent; "Unknown"
// when empty.
std::string extract_answer(const std::string& completion_text);

// Mean token logprob over the estimator's character region. The explanation
// region ends where the last marker starts; the answer region starts where it
// ends. Without a marker every estimator scores the whole completion. An
// empty region yields -infinity.
double explanation_confidence(const Completion& completion, ConfidenceEstimator estimator);

// (ds + sum(child_scores) + s_tilde) / (n + 2), or without ds over (n + 1).
double ca_aggregate(double ds, const std::vector<double>& child_scores, double s_tilde,
                    bool use_ds);

// Deterministic JSON rendering of a config, embedded in traces and reports.
std::string config_snapshot_json(const EngineConfig& config);

class Engine {
public:
    Engine(const Index* index, std::shared_ptr<Backend> backend, PromptSet prompts,
           EngineConfig config);

    // Understanding phase: one decomposition call, parse, ds alignment.
    QueryTree understand(const std::string& question);

    // Full pipeline: understand + post-order solving.
    std::pair<std::string, ReasoningTrace> solve_tree(const std::string& question);

    // Chain-shaped ablation.
    std::vector<std::string> sequential_decompose(const std::string& question);
    std::pair<std::string, ReasoningTrace> solve_sequence(const std::vector<std::string>& steps,
                                                          const std::string& root_question);
    std::pair<std::string, ReasoningTrace> solve_sequential(const std::string& question);

    const EngineConfig& config() const { return config_; }
    size_t backend_calls() const { return backend_calls_; }

    // Exposed for targeted tests.
    std::optional<QAOutcome> closed_book(const std::string& question, double temperature = 0.0,
                                         std::optional<std::int64_t> sample_seed = {},
                                         std::vector<std::string>* warnings = nullptr);
    std::optional<QAOutcome> open_book(const std::string& question,
                                       std::vector<ScoredParagraph> paragraphs, bool leaf,
                                       double temperature = 0.0,
                                       std::optional<std::int64_t> sample_seed = {},
                                       std::vector<std::string>* warnings = nullptr);
    std::optional<QAOutcome> child_aggregating(
        const std::string& question,
        const std::vector<std::pair<std::string, std::string>>& child_pairs, double ds,
        const std::vector<double>& child_scores, double temperature = 0.0,
        std::optional<std::int64_t> sample_seed = {}, std::vector<std::string>* warnings = nullptr);

private:
    NodeSolution solve_node(const QueryNode& node, const QueryTree& tree,
                            const std::map<size_t, NodeSolution>& solved);
    NodeSolution select_argmax(NodeSolution partial) const;
    NodeSolution select_random(NodeSolution partial);
    NodeSolution self_consistency_select(const QueryNode& node, const QueryTree& tree,
                                         NodeSolution partial,
                                         const std::vector<std::pair<std::string, std::string>>& child_pairs,
                                         const std::vector<double>& child_scores, double ds);

    Completion generate_checked(const std::string& prompt, double temperature,
                                std::optional<std::int64_t> sample_seed);
    QAOutcome make_outcome(QAModule module, const std::string& prompt, const Completion& completion,
                           double temperature, std::optional<std::int64_t> sample_seed) const;

    const Index* index_;
    std::shared_ptr<Backend> backend_;
    PromptSet prompts_;
    EngineConfig config_;
    std::mt19937_64 rng_;
    size_t backend_calls_ = 0;
};

} // namespace treeqa
