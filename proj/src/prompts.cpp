#include "treeqa/prompts.hpp"

#include "treeqa/errors.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace treeqa {

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read prompt template: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

std::string render_template(const std::string& tpl,
                            const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tpl.size());
    size_t pos = 0;
    while (pos < tpl.size()) {
        size_t open = tpl.find('{', pos);
        if (open == std::string::npos) {
            out.append(tpl, pos, std::string::npos);
            break;
        }
        size_t close = tpl.find('}', open);
        if (close == std::string::npos) {
            out.append(tpl, pos, std::string::npos);
            break;
        }
        std::string name = tpl.substr(open + 1, close - open - 1);
        auto it = vars.find(name);
        if (it == vars.end()) {
            out.append(tpl, pos, close + 1 - pos); // unknown placeholder stays verbatim
        } else {
            out.append(tpl, pos, open - pos);
            out.append(it->second);
        }
        pos = close + 1;
    }
    return out;
}

std::string render_context_block(const std::vector<ScoredParagraph>& paragraphs) {
    std::string out;
    for (size_t i = 0; i < paragraphs.size(); ++i) {
        out += "#" + std::to_string(i + 1) + " Wikipedia Title: " + paragraphs[i].para.title +
               "\nText: " + paragraphs[i].para.text + "\n";
    }
    return out;
}

std::string render_child_context(
    const std::vector<std::pair<std::string, std::string>>& child_pairs) {
    std::string out;
    for (const auto& [q, a] : child_pairs) out += q + " " + a + "\n";
    return out;
}

std::string build_decompose_prompt(const PromptSet& p, const std::string& question) {
    return render_template(p.decompose, {{"question", question}});
}

std::string build_cb_prompt(const PromptSet& p, const std::string& question) {
    return render_template(p.cb, {{"question", question}});
}

std::string build_ob_prompt(const PromptSet& p, const std::string& question,
                            const std::vector<ScoredParagraph>& paragraphs, bool leaf) {
    return render_template(leaf ? p.ob_leaf : p.ob_nonleaf,
                           {{"question", question}, {"context", render_context_block(paragraphs)}});
}

std::string build_ca_prompt(const PromptSet& p, const std::string& question,
                            const std::vector<std::pair<std::string, std::string>>& child_pairs) {
    return render_template(p.ca,
                           {{"question", question}, {"context", render_child_context(child_pairs)}});
}

std::string build_sd_prompt(const PromptSet& p, const std::string& question) {
    return render_template(p.sd, {{"question", question}});
}

PromptSet PromptSet::load(const std::string& dir) {
    PromptSet p;
    p.decompose = read_file(fs::path(dir) / "decompose.txt");
    p.cb = read_file(fs::path(dir) / "cb.txt");
    p.ob_leaf = read_file(fs::path(dir) / "ob_leaf.txt");
    p.ob_nonleaf = read_file(fs::path(dir) / "ob_nonleaf.txt");
    p.ca = read_file(fs::path(dir) / "ca.txt");
    p.sd = read_file(fs::path(dir) / "sd.txt");
    return p;
}

PromptSet PromptSet::minimal() {
    PromptSet p;
    p.decompose =
        "Please generate a hierarchical question decomposition tree with json format for a given "
        "question.\nQ: {question}\nA: ";
    p.cb = "Please answer the question by thinking step-by-step.\nQ: {question}\nA: ";
    p.ob_leaf =
        "Given a question and the relevant Wikipedia text, answer the question and explain why. "
        "If you are unsure, answer Unknown.\n{context}Q: {question}\nA: ";
    p.ob_nonleaf = p.ob_leaf;
    p.ca =
        "Given a question and a context, answer the question and explain why.\n#\nContext:\n"
        "{context}\nQuestion:\n{question}\n\nAnswer:\n";
    p.sd = "Please decompose the question into sub-questions.\nQ: {question}\nA: ";
    return p;
}

} // namespace treeqa
