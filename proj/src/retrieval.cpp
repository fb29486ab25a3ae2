#include "treeqa/retrieval.hpp"

#include "treeqa/errors.hpp"
#include "treeqa/text.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace fs = std::filesystem;

namespace treeqa {

namespace {
constexpr int kIndexVersion = 1;
constexpr const char* kTokenizerVersion = "lower-alnum-v1";
} // namespace

Index Index::build_from(std::vector<Paragraph> paragraphs, Bm25Params params) {
    Index idx;
    idx.params_ = params;
    idx.paragraphs_ = std::move(paragraphs);
    idx.doc_lengths_.reserve(idx.paragraphs_.size());
    for (size_t ord = 0; ord < idx.paragraphs_.size(); ++ord) {
        const auto& p = idx.paragraphs_[ord];
        auto toks = text::tokenize(p.title + " " + p.text);
        idx.doc_lengths_.push_back(toks.size());
        std::unordered_map<std::string, size_t> tf;
        for (auto& t : toks) ++tf[t];
        for (auto& [term, count] : tf) idx.postings_[term].emplace_back(ord, count);
    }
    // ordinals were appended in order, so postings are already sorted
    size_t total = 0;
    for (size_t len : idx.doc_lengths_) total += len;
    idx.avg_doc_length_ =
        idx.doc_lengths_.empty() ? 0.0 : static_cast<double>(total) / idx.doc_lengths_.size();
    return idx;
}

Index Index::build(const std::string& corpus_path, Bm25Params params) {
    std::ifstream in(corpus_path);
    if (!in) throw CorpusParseFailure("cannot open corpus: " + corpus_path, 0);
    std::vector<Paragraph> paragraphs;
    std::unordered_set<std::string> seen;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw CorpusParseFailure("corpus line " + std::to_string(line_no) + ": " + e.what(),
                                     line_no);
        }
        Paragraph p;
        try {
            p.id = j.at("id").get<std::string>();
            p.title = j.at("title").get<std::string>();
            p.text = j.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw CorpusParseFailure("corpus line " + std::to_string(line_no) + ": " + e.what(),
                                     line_no);
        }
        if (p.id.empty() || p.title.empty() || p.text.empty())
            throw CorpusParseFailure(
                "corpus line " + std::to_string(line_no) + ": id, title, text must be non-empty",
                line_no);
        if (!seen.insert(p.id).second)
            throw DuplicateId("duplicate paragraph id '" + p.id + "' at line " +
                                  std::to_string(line_no),
                              line_no);
        paragraphs.push_back(std::move(p));
    }
    return build_from(std::move(paragraphs), params);
}

double Index::idf(const std::string& term) const {
    auto it = postings_.find(term);
    double n_t = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
    double n = static_cast<double>(doc_count());
    return std::log((n - n_t + 0.5) / (n_t + 0.5) + 1.0);
}

double Index::bm25_score(const std::vector<std::string>& query_terms, size_t ordinal) const {
    double score = 0.0;
    double len = static_cast<double>(doc_lengths_[ordinal]);
    double norm = params_.k1 * (1.0 - params_.b + params_.b * len / avg_doc_length_);
    for (const auto& term : query_terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        auto p = std::lower_bound(it->second.begin(), it->second.end(),
                                  std::make_pair(ordinal, size_t{0}));
        if (p == it->second.end() || p->first != ordinal) continue;
        double tf = static_cast<double>(p->second);
        score += idf(term) * tf * (params_.k1 + 1.0) / (tf + norm);
    }
    return score;
}

std::vector<ScoredParagraph> Index::retrieve(const std::string& query, int K) const {
    auto terms = text::tokenize(query);
    std::set<size_t> candidates;
    for (const auto& term : terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        for (const auto& [ord, tf] : it->second) candidates.insert(ord);
    }
    std::vector<ScoredParagraph> scored;
    for (size_t ord : candidates) {
        double s = bm25_score(terms, ord);
        if (s > 0.0) scored.push_back(ScoredParagraph{paragraphs_[ord], s});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredParagraph& a, const ScoredParagraph& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.para.id < b.para.id;
    });
    if (K >= 0 && scored.size() > static_cast<size_t>(K)) scored.resize(K);
    return scored;
}

std::string Index::manifest_json() const {
    nlohmann::ordered_json m = {
        {"version", kIndexVersion},
        {"tokenizer", kTokenizerVersion},
        {"k1", params_.k1},
        {"b", params_.b},
        {"doc_count", doc_count()},
        {"avg_doc_length", avg_doc_length_},
    };
    return m.dump(2);
}

void Index::save(const std::string& dir) const {
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "manifest.json");
        out << manifest_json() << '\n';
    }
    std::ofstream out(fs::path(dir) / "paragraphs.jsonl");
    for (const auto& p : paragraphs_) {
        nlohmann::ordered_json j = {{"id", p.id}, {"title", p.title}, {"text", p.text}};
        out << j.dump() << '\n';
    }
    if (!out) throw Error("failed to write index to " + dir);
}

Index Index::load(const std::string& dir) {
    std::ifstream min(fs::path(dir) / "manifest.json");
    if (!min) throw IndexVersionMismatch("missing index manifest in " + dir);
    nlohmann::json m;
    try {
        min >> m;
    } catch (const nlohmann::json::exception& e) {
        throw IndexVersionMismatch("unreadable index manifest: " + std::string(e.what()));
    }
    if (m.value("version", -1) != kIndexVersion || m.value("tokenizer", "") != kTokenizerVersion)
        throw IndexVersionMismatch("index at " + dir + " was built with an incompatible version");
    Bm25Params params{m.at("k1").get<double>(), m.at("b").get<double>()};
    Index idx = build((fs::path(dir) / "paragraphs.jsonl").string(), params);
    if (idx.doc_count() != m.at("doc_count").get<size_t>())
        throw IndexVersionMismatch("index manifest doc_count disagrees with paragraph file");
    return idx;
}

std::vector<ScoredParagraph> union_paragraphs(
    const std::vector<ScoredParagraph>& own,
    const std::vector<std::vector<ScoredParagraph>>& children_para) {
    std::vector<ScoredParagraph> out;
    std::unordered_set<std::string> seen;
    auto add = [&](const ScoredParagraph& sp) {
        if (seen.insert(sp.para.id).second) out.push_back(sp);
    };
    for (const auto& sp : own) add(sp);
    for (const auto& child : children_para)
        for (const auto& sp : child) add(sp);
    return out;
}

} // namespace treeqa
