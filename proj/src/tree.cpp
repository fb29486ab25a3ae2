#include "treeqa/tree.hpp"

#include "treeqa/errors.hpp"
#include "treeqa/text.hpp"

#include <algorithm>
#include <deque>

#include <json.hpp>

namespace treeqa {

namespace {

std::string quote_json(const std::string& s) { return nlohmann::json(s).dump(); }

// Finds the balanced {...} starting at `open` (which must point at '{'),
// honoring strings and escapes. Returns one past the closing brace, or npos.
size_t balanced_object_end(const std::string& s, size_t open) {
    int depth = 0;
    bool in_string = false;
    for (size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string::npos;
}

// Finds the balanced [...] starting at `open` (pointing at '['). Returns one
// past the closing bracket, or npos.
size_t balanced_array_end(const std::string& s, size_t open) {
    int depth = 0;
    bool in_string = false;
    for (size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '[') {
            ++depth;
        } else if (c == ']') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string::npos;
}

using DecompMap = std::vector<std::pair<std::string, std::vector<std::string>>>;

// Extracts the first well-formed {question: [children...]} object embedded in
// raw output. Returns nullopt when none can be parsed.
std::optional<DecompMap> extract_map(const std::string& raw) {
    for (size_t open = raw.find('{'); open != std::string::npos; open = raw.find('{', open + 1)) {
        size_t end = balanced_object_end(raw, open);
        if (end == std::string::npos) continue;
        nlohmann::ordered_json j;
        try {
            j = nlohmann::ordered_json::parse(raw.substr(open, end - open));
        } catch (const nlohmann::json::exception&) {
            continue;
        }
        if (!j.is_object()) continue;
        DecompMap m;
        bool ok = true;
        for (auto& [key, val] : j.items()) {
            if (!val.is_array()) { ok = false; break; }
            std::vector<std::string> children;
            for (auto& c : val) {
                if (!c.is_string()) { ok = false; break; }
                children.push_back(c.get<std::string>());
            }
            if (!ok) break;
            m.emplace_back(key, std::move(children));
        }
        if (ok) return m;
    }
    return std::nullopt;
}

const std::vector<std::string>* lookup(const DecompMap& m, const std::string& normalized_q) {
    for (const auto& [k, v] : m)
        if (text::normalize_ws(k) == normalized_q) return &v;
    return nullptr;
}

} // namespace

std::vector<size_t> QueryTree::post_order() const {
    std::vector<size_t> out;
    out.reserve(nodes.size());
    // explicit stack with child cursor
    std::vector<std::pair<size_t, size_t>> stack;
    if (nodes.empty()) return out;
    stack.emplace_back(0, 0);
    while (!stack.empty()) {
        auto& [idx, cursor] = stack.back();
        if (cursor < nodes[idx].children.size()) {
            size_t child = nodes[idx].children[cursor++];
            stack.emplace_back(child, 0);
        } else {
            out.push_back(idx);
            stack.pop_back();
        }
    }
    return out;
}

size_t QueryTree::depth(size_t index) const {
    size_t d = 0;
    while (nodes[index].parent) {
        index = *nodes[index].parent;
        ++d;
    }
    return d;
}

QueryTree parse_tree_json(const std::string& decomposition_text, const std::string& root_question) {
    if (root_question.empty()) throw ParseFailure("root question is empty");

    QueryTree tree;
    tree.root_question = root_question;
    tree.nodes.push_back(QueryNode{0, root_question, std::nullopt, {}, std::nullopt});

    auto map = extract_map(decomposition_text);
    if (!map) {
        tree.warnings.push_back("decomposition output is not a well-formed map; treating question as atomic");
        return tree;
    }
    if (map->empty()) return tree; // atomic question

    const std::string norm_root = text::normalize_ws(root_question);
    if (!lookup(*map, norm_root)) {
        tree.warnings.push_back("root question not found among decomposition keys; treating question as atomic");
        return tree;
    }

    std::vector<bool> key_used(map->size(), false);
    std::deque<size_t> queue{0};
    while (!queue.empty()) {
        size_t idx = queue.front();
        queue.pop_front();
        const std::string norm_q = text::normalize_ws(tree.nodes[idx].question);
        const std::vector<std::string>* children = nullptr;
        for (size_t ki = 0; ki < map->size(); ++ki) {
            if (text::normalize_ws((*map)[ki].first) == norm_q) {
                children = &(*map)[ki].second;
                key_used[ki] = true;
                break;
            }
        }
        if (!children || children->empty()) continue;

        if (tree.depth(idx) + 1 > kMaxTreeDepth)
            throw DecompositionCycle("decomposition exceeds maximum depth " +
                                     std::to_string(kMaxTreeDepth));
        if (children->size() > 3)
            tree.warnings.push_back("node " + std::to_string(idx) + " has " +
                                    std::to_string(children->size()) + " children (> 3)");

        for (const auto& child_q : *children) {
            // ancestor-text repetition is a cycle
            const std::string norm_child = text::normalize_ws(child_q);
            for (std::optional<size_t> a = idx; a; a = tree.nodes[*a].parent) {
                if (text::normalize_ws(tree.nodes[*a].question) == norm_child)
                    throw DecompositionCycle("question recurs on its ancestor path: " + child_q);
                if (*a == 0) break;
            }
            size_t child_idx = tree.nodes.size();
            tree.nodes.push_back(QueryNode{child_idx, child_q, idx, {}, std::nullopt});
            tree.nodes[idx].children.push_back(child_idx);
            queue.push_back(child_idx);
        }
    }

    for (size_t ki = 0; ki < map->size(); ++ki)
        if (!key_used[ki])
            tree.warnings.push_back("decomposition key unreachable from root, dropped: " +
                                    (*map)[ki].first);
    return tree;
}

std::vector<Reference> find_references(const std::string& question) {
    std::vector<Reference> refs;
    for (size_t i = 0; i < question.size(); ++i) {
        if (question[i] != '#') continue;
        size_t j = i + 1;
        while (j < question.size() && std::isdigit(static_cast<unsigned char>(question[j]))) ++j;
        if (j == i + 1) continue; // bare '#'
        int k = 0;
        try {
            k = std::stoi(question.substr(i + 1, j - i - 1));
        } catch (const std::out_of_range&) {
            k = 0;
        }
        if (k >= 1) refs.push_back(Reference{k, i, j});
        i = j - 1;
    }
    return refs;
}

std::pair<std::string, std::vector<std::string>> substitute_references(
    const std::string& question, const std::map<int, std::string>& answers) {
    std::string out = question;
    std::vector<std::string> warnings;
    auto refs = find_references(question);
    for (auto it = refs.rbegin(); it != refs.rend(); ++it) {
        auto found = answers.find(it->k);
        if (found == answers.end()) {
            warnings.push_back("unresolved reference #" + std::to_string(it->k) + " in: " + question);
            continue;
        }
        out.replace(it->char_start, it->char_end - it->char_start, found->second);
    }
    // refs were collected in textual order; restore report order
    std::reverse(warnings.begin(), warnings.end());
    return {out, warnings};
}

SerializedTree serialize_bfs(const QueryTree& tree) {
    SerializedTree out;
    out.text = "{";
    bool first = true;
    // distinct question text -> value span, so repeated non-leaf questions share one key
    std::map<std::string, std::pair<size_t, size_t>> emitted;
    for (const auto& node : tree.nodes) {
        if (node.is_leaf()) continue;
        auto found = emitted.find(node.question);
        if (found != emitted.end()) {
            out.value_spans[node.index] = found->second;
            continue;
        }
        if (!first) out.text += ", ";
        first = false;
        out.text += quote_json(node.question);
        out.text += ": ";
        size_t vstart = out.text.size();
        out.text += "[";
        for (size_t ci = 0; ci < node.children.size(); ++ci) {
            if (ci > 0) out.text += ", ";
            out.text += quote_json(tree.nodes[node.children[ci]].question);
        }
        out.text += "]";
        auto span = std::make_pair(vstart, out.text.size());
        emitted[node.question] = span;
        out.value_spans[node.index] = span;
    }
    out.text += "}";
    return out;
}

std::map<size_t, double> align_ds_scores(const Completion& completion, QueryTree& tree) {
    std::map<size_t, double> out;
    const double fallback = completion.mean_logprob().value_or(0.0);
    for (auto& node : tree.nodes) {
        if (node.is_leaf()) continue;
        size_t key_pos = completion.text.find(quote_json(node.question));
        size_t vstart = std::string::npos, vend = std::string::npos;
        if (key_pos != std::string::npos) {
            size_t open = completion.text.find('[', key_pos);
            if (open != std::string::npos) {
                size_t end = balanced_array_end(completion.text, open);
                if (end != std::string::npos) {
                    vstart = open;
                    vend = end;
                }
            }
        }
        double ds;
        if (vstart == std::string::npos) {
            tree.warnings.push_back("could not align decomposition score for node " +
                                    std::to_string(node.index) + "; using whole-completion mean");
            ds = fallback;
        } else {
            double sum = 0.0;
            size_t n = 0;
            for (const auto& t : completion.tokens) {
                if (t.char_start < vend && t.char_end > vstart) {
                    sum += t.logprob;
                    ++n;
                }
            }
            if (n == 0) {
                tree.warnings.push_back("no tokens intersect child-list value of node " +
                                        std::to_string(node.index) + "; using whole-completion mean");
                ds = fallback;
            } else {
                ds = sum / static_cast<double>(n);
            }
        }
        node.ds = ds;
        out[node.index] = ds;
    }
    return out;
}

} // namespace treeqa
