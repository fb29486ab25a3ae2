#pragma once

#include "treeqa/backend.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace treeqa {

// Occurrence of a reference token "#k" in a question; span is the half-open
// character range of the token.
struct Reference {
    int k = 0; // 1-based sibling position
    size_t char_start = 0;
    size_t char_end = 0;
};

struct QueryNode {
    size_t index = 0; // BFS order; 0 is the root
    std::string question;
    std::optional<size_t> parent;
    std::vector<size_t> children; // in source decomposition order
    std::optional<double> ds;     // decomposition score; present iff non-leaf (after alignment)

    bool is_leaf() const { return children.empty(); }
};

struct QueryTree {
    std::vector<QueryNode> nodes; // indexed by position
    std::string root_question;
    std::vector<std::string> warnings;

    const QueryNode& root() const { return nodes.front(); }
    size_t size() const { return nodes.size(); }

    // Children before parents, siblings left-to-right, root last.
    std::vector<size_t> post_order() const;

    // Depth of a node (root = 0).
    size_t depth(size_t index) const;
};

// Maximum expansion depth before a DecompositionCycle is raised.
inline constexpr size_t kMaxTreeDepth = 8;

// Extracts the question->children map from the backend's raw decomposition
// output (tolerating surrounding prose and a trailing period) and walks it
// from root_question, assigning BFS indices. Malformed output or a missing
// root degrades to a single-leaf tree with a warning.
QueryTree parse_tree_json(const std::string& decomposition_text, const std::string& root_question);

// All maximal "#<digits>" matches in textual order.
std::vector<Reference> find_references(const std::string& question);

// Replaces each reference whose k is present in answers; absent keys warn and
// leave the token untouched. Substitution is right-to-left; inserted answers
// are never re-scanned.
std::pair<std::string, std::vector<std::string>> substitute_references(
    const std::string& question, const std::map<int, std::string>& answers);

struct SerializedTree {
    std::string text;
    // node index -> half-open char range of its serialized child-list value
    std::map<size_t, std::pair<size_t, size_t>> value_spans;
};

// Canonical single-line JSON form: keys in BFS order, one key per distinct
// non-leaf question. Round-trips through parse_tree_json.
SerializedTree serialize_bfs(const QueryTree& tree);

// Locates each non-leaf node's child-list value in completion.text and sets
// ds to the mean logprob over tokens intersecting that range. Nodes whose
// value cannot be located fall back to the whole-completion mean, with a
// warning appended to the tree.
std::map<size_t, double> align_ds_scores(const Completion& completion, QueryTree& tree);

} // namespace treeqa
