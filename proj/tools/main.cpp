#include "treeqa/config.hpp"
#include "treeqa/errors.hpp"
#include "treeqa/eval.hpp"
#include "treeqa/tree.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

namespace {

using namespace treeqa;

int cmd_index(const std::string& corpus, const std::string& out) {
    try {
        Index index = Index::build(corpus);
        index.save(out);
        std::cerr << "indexed " << index.doc_count() << " paragraphs, avg length "
                  << index.avg_doc_length() << " tokens\n";
        std::cout << "doc_count " << index.doc_count() << "\n"
                  << "avg_doc_length " << index.avg_doc_length() << "\n";
        return 0;
    } catch (const CorpusParseFailure& e) {
        std::cerr << "corpus parse failure (line " << e.line_number << "): " << e.what() << "\n";
        return 1;
    } catch (const DuplicateId& e) {
        std::cerr << "duplicate id (line " << e.line_number << "): " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

void render_tree(const ReasoningTrace& trace, std::ostream& os) {
    if (trace.kind == "sequence") {
        for (const auto& sol : trace.solutions)
            os << "step " << (sol.node_index + 1) << ": " << sol.resolved_question << "  <- "
               << qa_module_name(sol.chosen) << " (" << sol.score << ") " << sol.answer << "\n";
        return;
    }
    QueryTree tree = parse_tree_json(trace.serialized_tree, trace.root_question);
    std::map<size_t, const NodeSolution*> by_index;
    for (const auto& sol : trace.solutions) by_index[sol.node_index] = &sol;
    for (const auto& node : tree.nodes) {
        std::string indent(2 * tree.depth(node.index), ' ');
        os << indent << "[" << node.index << "] ";
        auto it = by_index.find(node.index);
        if (it != by_index.end()) {
            os << it->second->resolved_question << "  <- " << qa_module_name(it->second->chosen)
               << " (" << it->second->score << ") " << it->second->answer << "\n";
        } else {
            os << node.question << "\n";
        }
    }
}

int cmd_answer(const std::string& question, const AppConfig& config, EvalMode mode,
               const std::string& trace_path, bool render) {
    auto write_error_trace = [&](const std::string& message) {
        if (trace_path.empty()) return;
        std::ofstream out(trace_path);
        out << "{\n  \"root_question\": " << nlohmann::json(question).dump()
            << ",\n  \"error\": " << nlohmann::json(message).dump() << "\n}\n";
    };
    try {
        Index index = config.load_index();
        auto backend = config.make_backend();
        PromptSet prompts = config.load_prompts();
        EngineConfig engine_config = apply_eval_mode(config.engine, mode);
        Engine engine(&index, backend, prompts, engine_config);

        auto start = std::chrono::steady_clock::now();
        auto [answer, trace] = mode == EvalMode::sd ? engine.solve_sequential(question)
                                                    : engine.solve_tree(question);
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        std::cerr << "solved in " << elapsed << " ms, " << trace.backend_calls
                  << " backend calls\n";
        if (!trace_path.empty()) {
            std::ofstream out(trace_path);
            out << trace.to_json();
            if (!out) {
                std::cerr << "failed to write trace to " << trace_path << "\n";
                return 1;
            }
        }
        if (render) render_tree(trace, std::cout);
        std::cout << answer << std::endl;
        return 0;
    } catch (const ReplayMiss& e) {
        std::cerr << "replay miss: " << e.what() << " (prompt digest " << e.prompt_digest << ")\n";
        write_error_trace(std::string(e.what()) + "; prompt digest " + e.prompt_digest);
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        write_error_trace(e.what());
        return 1;
    }
}

int cmd_eval(const std::string& dataset, const AppConfig& config, EvalMode mode,
             const std::string& report_path, int parallelism, const std::string& trace_dir) {
    try {
        Index index = config.load_index();
        auto backend = config.make_backend();
        PromptSet prompts = config.load_prompts();
        EvalOptions options;
        options.parallelism = parallelism;
        options.trace_dir = trace_dir;
        Report report = evaluate(dataset, index, backend, prompts, config.engine, mode, options);
        if (!report_path.empty()) {
            std::ofstream out(report_path);
            out << report.to_json();
            if (!out) {
                std::cerr << "failed to write report to " << report_path << "\n";
                return 1;
            }
        }
        std::cout << "mode " << report.mode << "\n";
        std::cout << "EM " << report.em << "  F1 " << report.f1 << "\n";
        auto print_cat = [](const char* name, const CategoryStats& c) {
            if (c.node_count == 0) return;
            std::cout << name << " (" << c.node_count << " nodes):";
            for (const auto& [m, p] : c.percent) std::cout << " " << m << " " << p << "%";
            std::cout << "\n";
        };
        print_cat("leaf", report.selection.leaf);
        print_cat("non-leaf", report.selection.non_leaf);
        std::cout << "backend calls " << report.backend_calls << ", cache hits "
                  << report.cache_hits << "\n";
        return 0;
    } catch (const DatasetParseFailure& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tree-structured multi-hop question answering"};
    app.require_subcommand(1);

    std::string config_path;
    std::string mode_name = "probtree";
    std::optional<std::uint64_t> seed;
    std::optional<int> k_override;
    bool no_cache = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "path to the JSON config file")->required();
        cmd->add_option("--mode", mode_name, "engine mode");
        cmd->add_option("--seed", seed, "seed for rc/sc modes");
        cmd->add_option("--k", k_override, "retrieval depth override");
        cmd->add_flag("--no-cache", no_cache, "bypass the completion cache");
    };

    // index
    auto* index_cmd = app.add_subcommand("index", "build and persist a BM25 index");
    std::string corpus_arg, index_out;
    index_cmd->add_option("corpus", corpus_arg, "line-delimited corpus file")->required();
    index_cmd->add_option("out", index_out, "output index directory")->required();

    // answer
    auto* answer_cmd = app.add_subcommand("answer", "answer a single question");
    std::string question, trace_path;
    bool render = false;
    answer_cmd->add_option("question", question, "the question to answer")->required();
    add_common(answer_cmd);
    answer_cmd->add_option("--trace", trace_path, "write the reasoning trace to this file");
    answer_cmd->add_flag("--render", render, "print an ASCII rendering of the solved tree");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a dataset");
    std::string dataset_path, report_path, trace_dir;
    int parallelism = 1;
    eval_cmd->add_option("dataset", dataset_path, "line-delimited dataset file")->required();
    add_common(eval_cmd);
    eval_cmd->add_option("--report", report_path, "write the report to this file");
    eval_cmd->add_option("--trace-dir", trace_dir, "write per-record traces here");
    eval_cmd->add_option("--parallelism", parallelism, "concurrent records");

    CLI11_PARSE(app, argc, argv);

    if (index_cmd->parsed()) return cmd_index(corpus_arg, index_out);

    auto mode = treeqa::parse_eval_mode(mode_name);
    if (!mode) {
        std::cerr << "unknown mode '" << mode_name << "'; valid modes:";
        for (const auto& m : treeqa::eval_mode_names()) std::cerr << " " << m;
        std::cerr << "\n";
        return 1;
    }

    treeqa::AppConfig config;
    try {
        config = treeqa::AppConfig::load(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    if (seed) config.engine.seed = *seed;
    if (k_override) config.engine.retrieval.K = *k_override;
    if (no_cache) config.cache_enabled = false;

    if (answer_cmd->parsed()) return cmd_answer(question, config, *mode, trace_path, render);
    return cmd_eval(dataset_path, config, *mode, report_path, parallelism, trace_dir);
}
