#include "treeqa/eval.hpp"

#include "treeqa/errors.hpp"
#include "treeqa/replay.hpp"

#include "scenarios.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include <doctest.h>
#include <json.hpp>

using namespace treeqa;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path dir =
        fs::temp_directory_path() / ("treeqa-eval-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("answer normalization") {
    CHECK(normalize_answer("The  Quick, Brown Fox!") == "quick brown fox");
    CHECK(normalize_answer("A Man, a Plan.") == "man plan");
    CHECK(normalize_answer("an") == "");
    CHECK(normalize_answer("") == "");
    CHECK(normalize_answer("1630") == "1630");
    SUBCASE("articles are only dropped as whole tokens") {
        CHECK(normalize_answer("theatre") == "theatre");
        CHECK(normalize_answer("Anne of the Thousand Days") == "anne of thousand days");
    }
    SUBCASE("idempotent on random strings") {
        std::mt19937 rng(17);
        std::uniform_int_distribution<int> ch(32, 126);
        std::uniform_int_distribution<int> len(0, 40);
        for (int iter = 0; iter < 200; ++iter) {
            std::string s;
            int n = len(rng);
            for (int i = 0; i < n; ++i) s.push_back(static_cast<char>(ch(rng)));
            CHECK(normalize_answer(normalize_answer(s)) == normalize_answer(s));
        }
    }
}

TEST_CASE("token F1 over normalized multisets") {
    // overlap 2 of prediction-3 and gold-2: P = 2/3, R = 1 -> F1 = 0.8
    CHECK(token_f1("19 June 2013", "June 2013") == doctest::Approx(0.8).epsilon(1e-9));
    CHECK(token_f1("same answer", "same answer") == doctest::Approx(1.0));
    CHECK(token_f1("alpha beta", "gamma delta") == doctest::Approx(0.0));
    SUBCASE("repeated tokens count with multiplicity") {
        CHECK(token_f1("x x y", "x y") == doctest::Approx(0.8).epsilon(1e-9));
        CHECK(token_f1("x x", "x x") == doctest::Approx(1.0));
    }
    SUBCASE("empty sides") {
        CHECK(token_f1("the a an", "an") == doctest::Approx(1.0)); // both normalize to nothing
        CHECK(token_f1("", "gold") == doctest::Approx(0.0));
        CHECK(token_f1("pred", "") == doctest::Approx(0.0));
    }
    SUBCASE("multiple golds take the best") {
        CHECK(token_f1_multi("19 June 2013", {"January 1999", "June 2013"}) ==
              doctest::Approx(0.8).epsilon(1e-9));
        CHECK(exact_match_multi("The Rush", {"Queen", "rush"}) == 1);
        CHECK(exact_match_multi("Rush", {"Queen", "Yes"}) == 0);
    }
    SUBCASE("exact match is normalization-insensitive") {
        CHECK(exact_match("The 19 June, 2013.", "19 june 2013") == 1);
        CHECK(exact_match("19 June 2013", "June 2013") == 0);
    }
}

TEST_CASE("dataset loading") {
    fs::path dir = temp_dir("dataset");
    fs::path file = dir / "d.jsonl";
    SUBCASE("answer scalar, answers list and optional type") {
        std::ofstream out(file);
        out << R"({"id": "1", "question": "Q1?", "answer": "A"})" << "\n";
        out << R"({"id": "2", "question": "Q2?", "answers": ["A", "B"], "type": "bridge"})" << "\n";
        out << "\n";
        out.close();
        auto recs = load_dataset(file.string());
        REQUIRE(recs.size() == 2);
        CHECK(recs[0].gold_answers == std::vector<std::string>{"A"});
        CHECK(recs[1].gold_answers == std::vector<std::string>{"A", "B"});
        CHECK(recs[1].qtype == "bridge");
        CHECK(recs[0].qtype.empty());
    }
    SUBCASE("line numbers in parse errors") {
        std::ofstream out(file);
        out << R"({"id": "1", "question": "Q1?", "answer": "A"})" << "\n" << "{oops" << "\n";
        out.close();
        try {
            load_dataset(file.string());
            FAIL("expected DatasetParseFailure");
        } catch (const DatasetParseFailure& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
    SUBCASE("missing fields and empty answers rejected") {
        std::ofstream out(file);
        out << R"({"id": "1", "answer": "A"})" << "\n";
        out.close();
        CHECK_THROWS_AS(load_dataset(file.string()), DatasetParseFailure);
        std::ofstream out2(file);
        out2 << R"({"id": "1", "question": "Q?", "answers": []})" << "\n";
        out2.close();
        CHECK_THROWS_AS(load_dataset(file.string()), DatasetParseFailure);
    }
}

TEST_CASE("mode names round-trip and unknown names are refused") {
    for (const auto& name : eval_mode_names()) {
        auto mode = parse_eval_mode(name);
        REQUIRE(mode.has_value());
        CHECK(eval_mode_name(*mode) == name);
    }
    CHECK(!parse_eval_mode("full_send").has_value());
    CHECK(eval_mode_names().size() == 10);
}

TEST_CASE("mode projection flips exactly the advertised knobs") {
    EngineConfig base;
    CHECK(apply_eval_mode(base, EvalMode::probtree).enable_ca);
    CHECK(!apply_eval_mode(base, EvalMode::wo_ca).enable_ca);
    CHECK(!apply_eval_mode(base, EvalMode::wo_cb).enable_cb);
    CHECK(!apply_eval_mode(base, EvalMode::wo_ob).enable_ob);
    CHECK(!apply_eval_mode(base, EvalMode::wo_ds).use_ds);
    CHECK(!apply_eval_mode(base, EvalMode::wo_descendants).include_descendants);
    CHECK(apply_eval_mode(base, EvalMode::rc).selection == SelectionPolicy::random_choice);
    auto sc3 = apply_eval_mode(base, EvalMode::sc3);
    CHECK(sc3.selection == SelectionPolicy::self_consistency);
    CHECK(sc3.sc_n == 3);
    CHECK(apply_eval_mode(base, EvalMode::sc5).sc_n == 5);
    // everything else untouched
    CHECK(apply_eval_mode(base, EvalMode::wo_ob).use_ds == base.use_ds);
    CHECK(apply_eval_mode(base, EvalMode::sd).enable_ca == base.enable_ca);
}

TEST_CASE("selection statistics split leaf and non-leaf nodes") {
    auto make_trace = [](std::vector<std::pair<bool, QAModule>> picks) {
        ReasoningTrace t;
        for (auto [leaf, m] : picks) {
            NodeSolution s;
            s.is_leaf = leaf;
            s.chosen = m;
            t.solutions.push_back(s);
        }
        return t;
    };
    std::vector<ReasoningTrace> traces = {
        make_trace({{true, QAModule::CB}, {true, QAModule::OB}, {false, QAModule::CA}}),
        make_trace({{true, QAModule::OB}, {false, QAModule::CB}}),
    };
    SelectionStats stats = selection_stats(traces);
    CHECK(stats.leaf.node_count == 3);
    CHECK(stats.non_leaf.node_count == 2);
    CHECK(stats.leaf.percent.at("CB") == doctest::Approx(100.0 / 3.0));
    CHECK(stats.leaf.percent.at("OB") == doctest::Approx(200.0 / 3.0));
    CHECK(stats.non_leaf.percent.at("CA") == doctest::Approx(50.0));
    CHECK(stats.non_leaf.percent.at("CB") == doctest::Approx(50.0));
    CHECK(stats.notes.empty());

    SUBCASE("empty categories produce a note instead of percentages") {
        SelectionStats none = selection_stats({});
        CHECK(none.notes.size() == 2);
        SelectionStats leaves_only = selection_stats({make_trace({{true, QAModule::CB}})});
        REQUIRE(leaves_only.notes.size() == 1);
        CHECK(leaves_only.notes[0].find("non-leaf") != std::string::npos);
    }
}

TEST_CASE("synthetic benchmark behaves per mode") {
    fs::path dir = temp_dir("benchmark");
    auto bench = testsupport::write_benchmark(dir.string());
    Index index = Index::build(bench.corpus_path);
    auto backend = std::make_shared<ReplayBackend>(load_replay_script(bench.script_path));
    PromptSet prompts = PromptSet::minimal();
    EngineConfig base;

    SUBCASE("full engine answers everything") {
        Report r = evaluate(bench.dataset_path, index, backend, prompts, base,
                            EvalMode::probtree);
        CHECK(r.f1 == doctest::Approx(1.0));
        CHECK(r.em == doctest::Approx(1.0));
        CHECK(r.records.size() == 20);
        CHECK(r.per_qtype.size() == 4);
        CHECK(r.selection.leaf.node_count == 40);
        CHECK(r.selection.non_leaf.node_count == 20);
        CHECK(r.backend_calls > 0);
        for (const auto& rec : r.records) CHECK(rec.error.empty());
    }
    SUBCASE("flat chains lose exactly the wrong-decomposition records") {
        Report r = evaluate(bench.dataset_path, index, backend, prompts, base, EvalMode::sd);
        CHECK(r.f1 < 1.0);
        for (const auto& rec : r.records) {
            bool fragile = std::count(bench.chain_fragile_ids.begin(),
                                      bench.chain_fragile_ids.end(), rec.id) > 0;
            CHECK(rec.em == (fragile ? 0 : 1));
        }
    }
    SUBCASE("disabling retrieval loses exactly the planted records") {
        Report r = evaluate(bench.dataset_path, index, backend, prompts, base, EvalMode::wo_ob);
        for (const auto& rec : r.records) {
            bool needs_retrieval = std::count(bench.retrieval_required_ids.begin(),
                                              bench.retrieval_required_ids.end(), rec.id) > 0;
            CHECK(rec.em == (needs_retrieval ? 0 : 1));
        }
    }
    SUBCASE("parallel evaluation folds to the identical report") {
        EvalOptions serial, parallel;
        parallel.parallelism = 4;
        Report a = evaluate(bench.dataset_path, index, backend, prompts, base,
                            EvalMode::probtree, serial);
        Report b = evaluate(bench.dataset_path, index, backend, prompts, base,
                            EvalMode::probtree, parallel);
        CHECK(a.to_json() == b.to_json());
    }
    SUBCASE("self-consistency with a fixed seed is reproducible") {
        Report a = evaluate(bench.dataset_path, index, backend, prompts, base, EvalMode::sc3);
        Report b = evaluate(bench.dataset_path, index, backend, prompts, base, EvalMode::sc3);
        CHECK(a.to_json() == b.to_json());
    }
    SUBCASE("per-record traces land in the trace directory") {
        EvalOptions opts;
        opts.trace_dir = (dir / "traces").string();
        evaluate(bench.dataset_path, index, backend, prompts, base, EvalMode::probtree, opts);
        CHECK(fs::exists(dir / "traces" / "b01.trace.json"));
        CHECK(fs::exists(dir / "traces" / "b20.trace.json"));
    }
}

TEST_CASE("records that fail become scored zeros with an error note") {
    fs::path dir = temp_dir("partial");
    auto s = testsupport::scenario_colony_date();
    fs::path dataset = dir / "d.jsonl";
    {
        std::ofstream out(dataset);
        nlohmann::ordered_json good;
        good["id"] = "good";
        good["question"] = s.question;
        good["answer"] = "1630";
        out << good.dump() << "\n";
        out << R"({"id": "bad", "question": "Totally unscripted?", "answer": "X"})" << "\n";
    }
    Index index = Index::build_from(s.corpus);
    Report r = evaluate(dataset.string(), index, s.script.backend(), s.script.prompts(), {},
                        EvalMode::probtree);
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[0].id == "bad");
    CHECK(!r.records[0].error.empty());
    CHECK(r.records[0].f1 == doctest::Approx(0.0));
    CHECK(r.records[1].id == "good");
    CHECK(r.records[1].em == 1);
    CHECK(r.f1 == doctest::Approx(0.5));
    std::string j = r.to_json();
    CHECK(j.find("\"mode\": \"probtree\"") != std::string::npos);
    CHECK(j == r.to_json());
}

TEST_CASE("empty datasets are refused") {
    fs::path dir = temp_dir("empty");
    std::ofstream(dir / "d.jsonl").close();
    Index index = Index::build_from({{"x", "t", "b"}});
    CHECK_THROWS_AS(evaluate((dir / "d.jsonl").string(), index,
                             std::make_shared<ReplayBackend>(), PromptSet::minimal(), {},
                             EvalMode::probtree),
                    DatasetParseFailure);
}
