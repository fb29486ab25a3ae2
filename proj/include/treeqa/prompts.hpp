#pragma once

#include "treeqa/retrieval.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace treeqa {

// Plain-text templates with {question}, {context} and {exemplars} placeholders.
struct PromptSet {
    std::string decompose;
    std::string cb;
    std::string ob_leaf;
    std::string ob_nonleaf;
    std::string ca;
    std::string sd;

    // Loads <name>.txt for each template from dir.
    static PromptSet load(const std::string& dir);
    // Compact built-in templates; used by tests and as a fallback.
    static PromptSet minimal();
};

std::string render_template(const std::string& tpl,
                            const std::map<std::string, std::string>& vars);

// "#n Wikipedia Title: {title}\nText: {text}" per paragraph, 1-based n.
std::string render_context_block(const std::vector<ScoredParagraph>& paragraphs);

// Child question-answer lines in child order.
std::string render_child_context(
    const std::vector<std::pair<std::string, std::string>>& child_pairs);

std::string build_decompose_prompt(const PromptSet& p, const std::string& question);
std::string build_cb_prompt(const PromptSet& p, const std::string& question);
std::string build_ob_prompt(const PromptSet& p, const std::string& question,
                            const std::vector<ScoredParagraph>& paragraphs, bool leaf);
std::string build_ca_prompt(const PromptSet& p, const std::string& question,
                            const std::vector<std::pair<std::string, std::string>>& child_pairs);
std::string build_sd_prompt(const PromptSet& p, const std::string& question);

} // namespace treeqa
