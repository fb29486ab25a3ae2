#pragma once

#include <map>
#include <string>
#include <vector>

namespace treeqa {

struct Paragraph {
    std::string id;
    std::string title;
    std::string text;
};

struct ScoredParagraph {
    Paragraph para;
    double score = 0.0;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct RetrievalConfig {
    int K = 5; // selectable from {3, 5, 7}
    bool include_descendants = true;
};

// Okapi BM25 inverted index. Tokenization: lowercase, split on non-alphanumeric
// runs, drop empties; title tokens are indexed with body tokens. Immutable
// after build.
class Index {
public:
    // Line-delimited records {id, title, text}, one per line.
    static Index build(const std::string& corpus_path, Bm25Params params = {});
    static Index build_from(std::vector<Paragraph> paragraphs, Bm25Params params = {});

    // IDF(t) = ln((N - n_t + 0.5) / (n_t + 0.5) + 1).
    double idf(const std::string& term) const;
    // Sum over query terms (with multiplicity) of
    // idf * tf*(k1+1) / (tf + k1*(1 - b + b*len/avg_len)).
    double bm25_score(const std::vector<std::string>& query_terms, size_t ordinal) const;

    // Top-K by descending score, ties by ascending id; zero scores excluded.
    std::vector<ScoredParagraph> retrieve(const std::string& query, int K) const;

    size_t doc_count() const { return paragraphs_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    size_t doc_length(size_t ordinal) const { return doc_lengths_[ordinal]; }
    const Paragraph& paragraph(size_t ordinal) const { return paragraphs_[ordinal]; }
    const Bm25Params& params() const { return params_; }

    // Versioned directory: manifest + paragraph records. Loading a mismatched
    // version throws IndexVersionMismatch.
    void save(const std::string& dir) const;
    static Index load(const std::string& dir);
    std::string manifest_json() const;

private:
    std::vector<Paragraph> paragraphs_;
    std::vector<size_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
    // term -> (ordinal, term frequency), sorted by ordinal
    std::map<std::string, std::vector<std::pair<size_t, size_t>>> postings_;
    Bm25Params params_;
};

// Own paragraphs first, then each child's list in child order; duplicate ids
// keep the first occurrence. Retrieval scores ride along for budget trimming.
std::vector<ScoredParagraph> union_paragraphs(
    const std::vector<ScoredParagraph>& own,
    const std::vector<std::vector<ScoredParagraph>>& children_para);

} // namespace treeqa
