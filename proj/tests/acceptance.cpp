// Acceptance checks: one pass/fail line per criterion, nonzero exit on any
// failure. argv[1] must be the path to the CLI binary (used by criterion 6).

#include "treeqa/errors.hpp"
#include "treeqa/eval.hpp"
#include "treeqa/reasoning.hpp"
#include "treeqa/replay.hpp"
#include "treeqa/retrieval.hpp"
#include "treeqa/tree.hpp"

#include "scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>
#include <unistd.h>

using namespace treeqa;
namespace fs = std::filesystem;

namespace {

struct Checker {
    std::vector<std::string> failures;

    void require(bool condition, const std::string& what) {
        if (!condition) failures.push_back(what);
    }
    void require_close(double got, double want, double tol, const std::string& what) {
        if (!(std::abs(got - want) <= tol)) {
            std::ostringstream os;
            os << what << ": got " << got << ", want " << want << " (tol " << tol << ")";
            failures.push_back(os.str());
        }
    }
};

fs::path scratch_dir(const std::string& tag) {
    fs::path dir =
        fs::temp_directory_path() / ("treeqa-accept-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// ---------------------------------------------------------------------------
// Criterion 1: scoring formulas against brute-force oracles, randomized.
// ---------------------------------------------------------------------------

// Independent mean-over-region oracle: a token counts when its character range
// overlaps the region by at least one character.
double region_mean(const Completion& c, size_t begin, size_t end) {
    double sum = 0.0;
    size_t n = 0;
    size_t off = 0;
    for (const auto& t : c.tokens) {
        size_t t_begin = off, t_end = off + t.text.size();
        off = t_end;
        if (t_begin < end && t_end > begin && t_begin < t_end) {
            sum += t.logprob;
            ++n;
        }
    }
    if (n == 0) return -std::numeric_limits<double>::infinity();
    return sum / static_cast<double>(n);
}

// Splits text into random-length tokens with random logprobs.
Completion random_tiling(const std::string& text, std::mt19937& rng) {
    std::uniform_int_distribution<size_t> len(1, 7);
    std::uniform_real_distribution<double> lp(-4.0, -0.01);
    std::vector<std::pair<std::string, double>> tokens;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t n = std::min(len(rng), text.size() - pos);
        tokens.emplace_back(text.substr(pos, n), lp(rng));
        pos += n;
    }
    return make_completion(text, tokens);
}

void criterion_formulas(Checker& ck) {
    auto start = std::chrono::steady_clock::now();
    std::mt19937 rng(20260823);
    std::uniform_real_distribution<double> score(-6.0, 0.0);
    std::uniform_int_distribution<int> child_count(0, 6);
    const std::string marker = "So the answer is:";

    for (int iter = 0; iter < 1000; ++iter) {
        // child aggregation
        double ds = score(rng), s_tilde = score(rng);
        std::vector<double> children(static_cast<size_t>(child_count(rng)));
        for (auto& c : children) c = score(rng);
        double sum = 0.0;
        for (double c : children) sum += c;
        double want_with = (ds + sum + s_tilde) / (static_cast<double>(children.size()) + 2.0);
        double want_without = (sum + s_tilde) / (static_cast<double>(children.size()) + 1.0);
        ck.require_close(ca_aggregate(ds, children, s_tilde, true), want_with, 1e-12,
                         "aggregate with decomposition score");
        ck.require_close(ca_aggregate(ds, children, s_tilde, false), want_without, 1e-12,
                         "aggregate without decomposition score");

        // monotonicity: raising any input raises the aggregate
        std::uniform_real_distribution<double> bump_d(0.01, 1.0);
        double bump = bump_d(rng);
        ck.require(ca_aggregate(ds + bump, children, s_tilde, true) > want_with,
                   "aggregate rises with the decomposition score");
        ck.require(ca_aggregate(ds, children, s_tilde + bump, true) > want_with,
                   "aggregate rises with the own-explanation score");
        if (!children.empty()) {
            auto raised = children;
            raised[rng() % raised.size()] += bump;
            ck.require(ca_aggregate(ds, raised, s_tilde, true) > want_with,
                       "aggregate rises with any child score");
        }
        // translation invariance: shifting every input by c shifts the aggregate by c
        auto shifted = children;
        for (auto& c : shifted) c += bump;
        ck.require_close(ca_aggregate(ds + bump, shifted, s_tilde + bump, true), want_with + bump,
                         1e-12, "aggregate translates with its inputs");

        // confidence estimators over a random marker-bearing completion
        std::uniform_int_distribution<int> words(1, 6);
        auto make_words = [&](int n) {
            std::string s;
            for (int i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(rng() % 10);
            return s;
        };
        std::string explanation = make_words(words(rng));
        std::string answer = make_words(words(rng));
        std::string text = explanation + " " + marker + " " + answer + ".";
        Completion c = random_tiling(text, rng);
        size_t marker_at = text.rfind(marker);
        ck.require_close(explanation_confidence(c, ConfidenceEstimator::explanation),
                         region_mean(c, 0, marker_at), 1e-12, "explanation region mean");
        ck.require_close(explanation_confidence(c, ConfidenceEstimator::answer_only),
                         region_mean(c, marker_at + marker.size(), text.size()), 1e-12,
                         "answer region mean");
        ck.require_close(explanation_confidence(c, ConfidenceEstimator::explanation_plus_answer),
                         region_mean(c, 0, text.size()), 1e-12, "whole completion mean");
        Completion lifted = c;
        for (auto& t : lifted.tokens) t.logprob += bump;
        ck.require_close(explanation_confidence(lifted, ConfidenceEstimator::explanation),
                         explanation_confidence(c, ConfidenceEstimator::explanation) + bump, 1e-12,
                         "confidence translates with token logprobs");

        // decomposition-score alignment on a fresh two-leaf tree
        std::string root = "Root question " + std::to_string(iter) + "?";
        std::string tree_json = "{\"" + root + "\": [\"Left " + std::to_string(iter) +
                                "?\", \"Right " + std::to_string(iter) + "?\"]}";
        QueryTree tree = parse_tree_json(tree_json, root);
        Completion d = random_tiling(tree_json, rng);
        auto spans = serialize_bfs(tree).value_spans;
        auto got = align_ds_scores(d, tree);
        ck.require(tree.warnings.empty(), "alignment warnings on a canonical tree");
        ck.require_close(got.at(0), region_mean(d, spans.at(0).first, spans.at(0).second), 1e-12,
                         "aligned decomposition score");
        if (!ck.failures.empty()) return; // one detailed report per run is enough
    }
    auto elapsed = std::chrono::steady_clock::now() - start;
    ck.require(elapsed < std::chrono::seconds(5), "formula suite finished under 5 seconds");
}

// ---------------------------------------------------------------------------
// Criterion 2: canned multi-hop scenarios with exact answers and confidences.
// ---------------------------------------------------------------------------

const NodeSolution* find_node(const ReasoningTrace& trace, size_t index) {
    for (const auto& s : trace.solutions)
        if (s.node_index == index) return &s;
    return nullptr;
}

const QAOutcome* find_outcome(const NodeSolution& sol, QAModule m) {
    for (const auto& o : sol.outcomes)
        if (o.module == m) return &o;
    return nullptr;
}

void criterion_scenarios(Checker& ck) {
    {
        auto s = testsupport::scenario_father_in_law();
        Index index = Index::build_from(s.corpus);
        Engine engine(&index, s.script.backend(), s.script.prompts(), {});
        auto [answer, trace] = engine.solve_tree(s.question);
        ck.require(answer == "Louis X of France",
                   "father-in-law scenario answered '" + answer + "'");
        const NodeSolution* root = find_node(trace, 0);
        ck.require(root != nullptr, "father-in-law root solution present");
        if (root) {
            ck.require(root->chosen == QAModule::CA, "father-in-law root chose aggregation");
            const QAOutcome* ca = find_outcome(*root, QAModule::CA);
            const QAOutcome* ob = find_outcome(*root, QAModule::OB);
            ck.require(ca && ob, "father-in-law root has CA and OB outcomes");
            if (ca) ck.require_close(ca->agg_confidence, -0.033, 1e-9, "aggregated confidence");
            if (ob) {
                ck.require(ob->answer == "King Charles III of Navarre",
                           "retrieval-led answer at the root");
                ck.require_close(ob->agg_confidence, -0.101, 1e-9, "open-book confidence");
            }
        }
    }
    {
        auto s = testsupport::scenario_rock_band();
        Index index = Index::build_from(s.corpus);
        Engine tree_engine(&index, s.script.backend(), s.script.prompts(), {});
        auto [tree_answer, tree_trace] = tree_engine.solve_tree(s.question);
        auto [sd_answer, sd_trace] = tree_engine.solve_sequential(s.question);
        ck.require(sd_answer == "Neil Peart",
                   "flat-chain scenario answered '" + sd_answer + "'");
        ck.require(tree_answer == "Rush", "tree scenario answered '" + tree_answer + "'");
        ck.require(sd_trace.kind == "sequence" && tree_trace.kind == "tree",
                   "trace kinds distinguish the two pipelines");
    }
    {
        auto s = testsupport::scenario_colony_date();
        Index index = Index::build_from(s.corpus);
        Engine engine(&index, s.script.backend(), s.script.prompts(), {});
        auto [answer, trace] = engine.solve_tree(s.question);
        ck.require(answer == "1630", "colony scenario answered '" + answer + "'");
        const NodeSolution* left = find_node(trace, 1);
        const NodeSolution* right = find_node(trace, 2);
        ck.require(left && right, "both leaves solved");
        if (left && right) {
            ck.require(left->chosen == QAModule::CB, "first leaf won closed-book");
            ck.require(right->chosen == QAModule::OB, "second leaf won open-book");
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 3: BM25 against a brute-force oracle on random corpora.
// ---------------------------------------------------------------------------

std::vector<std::string> oracle_tokenize(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

void criterion_retrieval(Checker& ck) {
    std::mt19937 rng(42);
    const std::vector<std::string> vocab = {"amber", "basalt", "cedar",  "delta",
                                            "ember", "fjord",  "garnet", "heron",
                                            "iris",  "jasper", "krill",  "lumen"};
    std::uniform_int_distribution<size_t> doc_count(1, 20);
    std::uniform_int_distribution<size_t> word_count(1, 30);
    std::uniform_int_distribution<size_t> pick(0, vocab.size() - 1);
    const double k1 = 1.2, b = 0.75;

    for (int corpus_i = 0; corpus_i < 100; ++corpus_i) {
        size_t n_docs = doc_count(rng);
        std::vector<Paragraph> paragraphs;
        for (size_t d = 0; d < n_docs; ++d) {
            std::string body;
            size_t words = word_count(rng);
            for (size_t w = 0; w < words; ++w) body += (w ? " " : "") + vocab[pick(rng)];
            paragraphs.push_back(
                {"doc-" + std::to_string(d), "Title " + vocab[pick(rng)], body});
        }
        Index index = Index::build_from(paragraphs);

        // oracle: per-document token counts over title + body
        std::vector<std::vector<std::string>> doc_tokens;
        double total_len = 0.0;
        for (const auto& p : paragraphs) {
            doc_tokens.push_back(oracle_tokenize(p.title + " " + p.text));
            total_len += static_cast<double>(doc_tokens.back().size());
        }
        double avg_len = total_len / static_cast<double>(n_docs);
        auto tf = [&](size_t d, const std::string& term) {
            return static_cast<double>(
                std::count(doc_tokens[d].begin(), doc_tokens[d].end(), term));
        };
        auto df = [&](const std::string& term) {
            size_t n = 0;
            for (size_t d = 0; d < n_docs; ++d)
                if (tf(d, term) > 0) ++n;
            return static_cast<double>(n);
        };
        auto oracle_score = [&](const std::vector<std::string>& terms, size_t d) {
            double s = 0.0;
            for (const auto& t : terms) {
                double f = tf(d, t);
                if (f == 0.0) continue;
                double idf = std::log((static_cast<double>(n_docs) - df(t) + 0.5) /
                                          (df(t) + 0.5) +
                                      1.0);
                double len = static_cast<double>(doc_tokens[d].size());
                s += idf * f * (k1 + 1.0) / (f + k1 * (1.0 - b + b * len / avg_len));
            }
            return s;
        };

        std::string query = vocab[pick(rng)] + " " + vocab[pick(rng)] + " " + vocab[pick(rng)];
        auto terms = oracle_tokenize(query);
        for (size_t d = 0; d < n_docs; ++d)
            ck.require_close(index.bm25_score(terms, d), oracle_score(terms, d), 1e-9,
                             "document score, corpus " + std::to_string(corpus_i));

        // oracle ranking: descending score, ties by ascending id, zeros excluded
        std::vector<std::pair<double, std::string>> ranked;
        for (size_t d = 0; d < n_docs; ++d) {
            double s = oracle_score(terms, d);
            if (s > 0.0) ranked.emplace_back(s, paragraphs[d].id);
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b2) {
            if (a.first != b2.first) return a.first > b2.first;
            return a.second < b2.second;
        });
        auto got = index.retrieve(query, 5);
        size_t want_n = std::min<size_t>(5, ranked.size());
        ck.require(got.size() == want_n, "result count, corpus " + std::to_string(corpus_i));
        for (size_t r = 0; r < std::min(want_n, got.size()); ++r)
            ck.require(got[r].para.id == ranked[r].second,
                       "ranking position " + std::to_string(r) + ", corpus " +
                           std::to_string(corpus_i));
        if (!ck.failures.empty()) return;
    }
}

// ---------------------------------------------------------------------------
// Criterion 4: answer metrics.
// ---------------------------------------------------------------------------

void criterion_metrics(Checker& ck) {
    ck.require_close(token_f1("19 June 2013", "June 2013"), 0.8, 1e-9,
                     "partial-overlap token F1");
    ck.require_close(token_f1("19 June 2013", "19 June 2013"), 1.0, 1e-9, "identity token F1");
    ck.require(exact_match("The 1630.", "1630") == 1, "normalization-insensitive exact match");
    ck.require(exact_match("19 June 2013", "June 2013") == 0, "partial overlap is not exact");
}

// ---------------------------------------------------------------------------
// Criterion 5: synthetic 20-question suite across engine modes.
// ---------------------------------------------------------------------------

std::set<std::string> failed_ids(const Report& r) {
    std::set<std::string> out;
    for (const auto& rec : r.records)
        if (rec.em == 0) out.insert(rec.id);
    return out;
}

void criterion_benchmark(Checker& ck) {
    auto start = std::chrono::steady_clock::now();
    fs::path dir = scratch_dir("benchmark");
    auto bench = testsupport::write_benchmark(dir.string());
    Index index = Index::build(bench.corpus_path);
    auto backend = std::make_shared<ReplayBackend>(load_replay_script(bench.script_path));
    PromptSet prompts = PromptSet::minimal();

    Report full = evaluate(bench.dataset_path, index, backend, prompts, {}, EvalMode::probtree);
    ck.require_close(full.f1, 1.0, 1e-12, "full engine F1");

    Report flat = evaluate(bench.dataset_path, index, backend, prompts, {}, EvalMode::sd);
    ck.require(flat.f1 < full.f1, "flat decomposition scores strictly lower");

    Report no_ob = evaluate(bench.dataset_path, index, backend, prompts, {}, EvalMode::wo_ob);
    std::set<std::string> want(bench.retrieval_required_ids.begin(),
                               bench.retrieval_required_ids.end());
    ck.require(failed_ids(no_ob) == want,
               "disabling retrieval fails exactly the retrieval-dependent records");

    Report sc_a = evaluate(bench.dataset_path, index, backend, prompts, {}, EvalMode::sc3);
    Report sc_b = evaluate(bench.dataset_path, index, backend, prompts, {}, EvalMode::sc3);
    ck.require(sc_a.to_json() == sc_b.to_json(), "self-consistency report is reproducible");

    auto elapsed = std::chrono::steady_clock::now() - start;
    ck.require(elapsed < std::chrono::minutes(2), "benchmark suite finished under 2 minutes");
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// Criterion 6: CLI determinism with a warm completion cache.
// ---------------------------------------------------------------------------

int run_command(const std::string& cmd) {
    int status = std::system(cmd.c_str());
    return status == -1 ? -1 : WEXITSTATUS(status);
}

void criterion_cli(Checker& ck, const std::string& cli) {
    fs::path dir = scratch_dir("cli");
    auto s = testsupport::scenario_father_in_law();
    fs::path script = dir / "script.json";
    fs::path corpus = dir / "corpus.jsonl";
    fs::path prompts = dir / "prompts";
    fs::path config = dir / "config.json";
    s.script.write_script(script.string());
    testsupport::write_corpus(corpus.string(), s.corpus);
    testsupport::write_prompts_dir(prompts.string(), s.script.prompts());
    {
        std::ofstream out(config);
        out << "{\n"
            << "  \"backend\": {\"type\": \"replay\", \"script\": \"" << script.string()
            << "\"},\n"
            << "  \"retrieval\": {\"corpus\": \"" << corpus.string() << "\"},\n"
            << "  \"prompts\": {\"dir\": \"" << prompts.string() << "\"},\n"
            << "  \"cache\": {\"dir\": \"" << (dir / "cache").string() << "\"}\n"
            << "}\n";
    }
    auto invoke = [&](const fs::path& trace) {
        return run_command("\"" + cli + "\" answer \"" + s.question + "\" --config " +
                           config.string() + " --trace " + trace.string() +
                           " >/dev/null 2>&1");
    };
    ck.require(invoke(dir / "warmup.json") == 0, "warm-up run exits zero");
    ck.require(invoke(dir / "t1.json") == 0, "first warm run exits zero");
    ck.require(invoke(dir / "t2.json") == 0, "second warm run exits zero");
    std::string t1 = read_file(dir / "t1.json");
    std::string t2 = read_file(dir / "t2.json");
    ck.require(!t1.empty(), "trace file written");
    ck.require(t1 == t2, "warm-cache trace files are byte-identical");
    ck.require(t1.find("Louis X of France") != std::string::npos,
               "trace carries the final answer");
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// Criterion 7: reference decomposition exemplars parse to the expected shape.
// ---------------------------------------------------------------------------

struct Exemplar {
    const char* root;
    const char* json;
    size_t nodes; // 3 = one level of leaves, 7 = two levels
};

const Exemplar kExemplars[] = {
    {"When did the director of film Hypocrite (Film) die?",
     R"({"When did the director of film Hypocrite (Film) die?": ["Who is the director of film Hypocrite (Film)?", "When did #1 die?"]})",
     3},
    {"Do director of film Coolie No. 1 (1995 Film) and director of film The Sensational Trial have the same nationality?",
     R"({"Do director of film Coolie No. 1 (1995 Film) and director of film The Sensational Trial have the same nationality?": ["What is the nationality of the director of film Coolie No. 1 (1995 Film)?", "What is the nationality of the director of film The Sensational Trial?"], "What is the nationality of the director of film Coolie No. 1 (1995 Film)?": ["Who is the director of film Coolie No. 1 (1995 Film)?", "What is the nationality of #1?"], "What is the nationality of the director of film The Sensational Trial?": ["Who is the director of film The Sensational Trial?", "What is the nationality of #1?"]})",
     7},
    {"Are both Kurram Garhi and Trojkrsti located in the same country?",
     R"({"Are both Kurram Garhi and Trojkrsti located in the same country?": ["Which country is Kurram Garhi located in?", "Which country is Trojkrsti located in?"]})",
     3},
    {"Who was born first out of Martin Hodge and Ivania Martinich?",
     R"({"Who was born first out of Martin Hodge and Ivania Martinich?": ["When was Martin Hodge born?", "When was Ivania Martinich born?"]})",
     3},
    {"Which film came out first, The Night Of Tricks or The Genealogy?",
     R"({"Which film came out first, The Night Of Tricks or The Genealogy?": ["When was the film The Night Of Tricks published?", "When was the film The Genealogy published?"]})",
     3},
    {"When did the director of film Laughter In Hell die?",
     R"({"When did the director of film Laughter In Hell die?": ["Who is the director of film Laughter In Hell?", "When did #1 die?"]})",
     3},
    {"Which film has the director died later, The Gal Who Took the West or Twenty Plus Two?",
     R"({"Which film has the director died later, The Gal Who Took the West or Twenty Plus Two?": ["When did the director of film The Gal Who Took the West die?", "When did the director of film Twenty Plus Two die?"], "When did the director of film The Gal Who Took the West die?": ["Who is the director of film The Gal Who Took the West?", "When did #1 die?"], "When did the director of film Twenty Plus Two die?": ["Who is the director of film Twenty Plus Two?", "When did #1 die?"]})",
     7},
    {"Who is Boraqchin (Wife Of ÃUgedei)'s father-in-law?",
     R"({"Who is Boraqchin (Wife Of ÃUgedei)'s father-in-law?": ["Who is Boraqchin married to?", "Who is the father of #1?"]})",
     3},
    {"What is the cause of death of Grand Duke Alexei Alexandrovich Of Russia's mother?",
     R"({"What is the cause of death of Grand Duke Alexei Alexandrovich Of Russia's mother?": ["Who is the mother of Grand Duke Alexei Alexandrovich Of Russia?", "What is the cause of death of #1?"]})",
     3},
    {"Which film has the director died earlier, When The Mad Aunts Arrive or The Miracle Worker (1962 Film)?",
     R"({"Which film has the director died earlier, When The Mad Aunts Arrive or The Miracle Worker (1962 Film)?": ["When did the director of film When The Mad Aunts Arrive die?", "When did the director of film The Miracle Worker (1962 Film) die?"], "When did the director of film When The Mad Aunts Arrive die?": ["Who is the director of film When The Mad Aunts Arrive?", "When did #1 die?"], "When did the director of film The Miracle Worker (1962 Film) die?": ["Who is the director of film The Miracle Worker (1962 Film)?", "When did #1 die?"]})",
     7},
    {"Which album was released earlier, What'S Inside or Cassandra'S Dream (Album)?",
     R"({"Which album was released earlier, What'S Inside or Cassandra'S Dream (Album)?": ["When was the album What'S Inside released?", "When was the album Cassandra'S Dream (Album) released?"]})",
     3},
    {"Are both mountains, Serre Mourene and Monte Galbiga, located in the same country?",
     R"({"Are both mountains, Serre Mourene and Monte Galbiga, located in the same country?": ["Which country was the mountain Serre Mourene located in?", "Which country was the mountain Monte Galbiga located in?"]})",
     3},
    {"What is the date of birth of the director of film Best Friends (1982 Film)?",
     R"({"What is the date of birth of the director of film Best Friends (1982 Film)?": ["Who is the director of film Best Friends (1982 Film)?", "What is the date of birth of #1?"]})",
     3},
    {"Which film has the director born first, Two Weeks With Pay or Chhailla Babu?",
     R"({"Which film has the director born first, Two Weeks With Pay or Chhailla Babu?": ["When was the director of film Two Weeks With Pay born?", "When was the director of film Chhailla Babu born?"], "When was the director of film Two Weeks With Pay born?": ["Who is the director of film Two Weeks With Pay?", "When was #1 born?"], "When was the director of film Chhailla Babu born?": ["Who is the director of film Chhailla Babu?", "When was #1 born?"]})",
     7},
    {"Who is the grandchild of Krishna Shah (Nepalese Royal)?",
     R"({"Who is the grandchild of Krishna Shah (Nepalese Royal)?": ["Who is the child of Krishna Shah (Nepalese Royal)?", "Who is the child of #1?"]})",
     3},
    {"When was the director of film P.S. Jerusalem born?",
     R"({"When was the director of film P.S. Jerusalem born?": ["Who is the director of film P.S. Jerusalem?", "When was #1 born?"]})",
     3},
    {"Which album was released more recently, If I Have to Stand Alone or Answering Machine Music?",
     R"({"Which album was released more recently, If I Have to Stand Alone or Answering Machine Music?": ["When was the album If I Have to Stand Alone released?", "When was the album Answering Machine Music released?"]})",
     3},
    {"Where did the director of film Maddalena (1954 Film) die?",
     R"({"Where did the director of film Maddalena (1954 Film) die?": ["Who is the director of film Maddalena (1954 Film)?", "Where did #1 die?"]})",
     3},
    {"When did the director of film The Boy And The Fog die?",
     R"({"When did the director of film The Boy And The Fog die?": ["Who is the director of film The Boy And The Fog?", "When did #1 die?"]})",
     3},
    {"Are the directors of films The Sun of the Sleepless and Nevada (1927 film) both from the same country?",
     R"({"Are the directors of films The Sun of the Sleepless and Nevada (1927 film) both from the same country?": ["Which country is the director of film The Sun of the Sleepless from?", "Which country is the director of film Nevada (1927 film) from?"], "Which country is the director of film The Sun of the Sleepless from?": ["Who is the director of film The Sun of the Sleepless?", "Which country is #1 from?"], "Which country is the director of film Nevada (1927 film) from?": ["Who is the director of film Nevada (1927 film)?", "Which country is #1 from?"]})",
     7},
};

void criterion_exemplars(Checker& ck) {
    size_t exemplar_i = 0;
    for (const auto& ex : kExemplars) {
        ++exemplar_i;
        std::string label = "exemplar " + std::to_string(exemplar_i);
        QueryTree tree = parse_tree_json(ex.json, ex.root);
        ck.require(tree.warnings.empty(), label + ": parsed without warnings");
        ck.require(tree.size() == ex.nodes,
                   label + ": expected " + std::to_string(ex.nodes) + " nodes, got " +
                       std::to_string(tree.size()));
        if (tree.size() != ex.nodes) continue;
        bool indices_ok = true;
        for (size_t i = 0; i < tree.size(); ++i)
            if (tree.nodes[i].index != i) indices_ok = false;
        ck.require(indices_ok, label + ": breadth-first indices are positional");
        ck.require(tree.root().question == ex.root, label + ": root question preserved");
        ck.require(tree.root().children == std::vector<size_t>{1, 2},
                   label + ": root children are nodes 1 and 2");
        if (ex.nodes == 7) {
            ck.require(tree.nodes[1].children == std::vector<size_t>{3, 4} &&
                           tree.nodes[2].children == std::vector<size_t>{5, 6},
                       label + ": second level expands to nodes 3-6");
            for (size_t i = 3; i < 7; ++i)
                ck.require(tree.nodes[i].is_leaf(), label + ": nodes 3-6 are leaves");
        } else {
            ck.require(tree.nodes[1].is_leaf() && tree.nodes[2].is_leaf(),
                       label + ": nodes 1 and 2 are leaves");
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-cli-binary>\n";
        return 2;
    }
    std::string cli = argv[1];

    struct Criterion {
        int number;
        std::string label;
        std::function<void(Checker&)> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "scoring formulas match brute-force oracles on 1000 random inputs",
         criterion_formulas},
        {2, "multi-hop scenarios produce the expected answers and confidences",
         criterion_scenarios},
        {3, "BM25 matches a brute-force oracle on 100 random corpora", criterion_retrieval},
        {4, "answer metrics behave on reference pairs", criterion_metrics},
        {5, "20-question suite separates the engine modes", criterion_benchmark},
        {6, "CLI runs with a warm cache are byte-identical",
         [&](Checker& ck) { criterion_cli(ck, cli); }},
        {7, "reference decompositions parse to the expected tree shapes",
         criterion_exemplars},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        Checker ck;
        try {
            c.run(ck);
        } catch (const std::exception& e) {
            ck.failures.push_back(std::string("exception: ") + e.what());
        }
        if (ck.failures.empty()) {
            std::cout << "PASS criterion " << c.number << ": " << c.label << "\n";
        } else {
            ++failed;
            std::cout << "FAIL criterion " << c.number << ": " << c.label << "\n";
            for (const auto& f : ck.failures) std::cout << "  - " << f << "\n";
        }
    }
    return failed == 0 ? 0 : 1;
}
