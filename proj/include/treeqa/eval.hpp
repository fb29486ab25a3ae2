#pragma once

#include "treeqa/reasoning.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace treeqa {

struct DatasetRecord {
    std::string id;
    std::string question;
    std::vector<std::string> gold_answers; // non-empty
    std::string qtype;                     // optional label (e.g. bridge, comparison)
};

// Line-delimited records {id, question, answer or answers, type?}.
std::vector<DatasetRecord> load_dataset(const std::string& path);

// Lowercase, drop punctuation, drop whole-token articles a/an/the, collapse
// whitespace. Idempotent.
std::string normalize_answer(const std::string& s);

// Token-multiset F1 over normalized strings; both empty -> 1, one empty -> 0.
double token_f1(const std::string& prediction, const std::string& gold);
double token_f1_multi(const std::string& prediction, const std::vector<std::string>& golds);

int exact_match(const std::string& prediction, const std::string& gold);
int exact_match_multi(const std::string& prediction, const std::vector<std::string>& golds);

enum class EvalMode {
    probtree,
    sd,
    wo_ca,
    rc,
    sc3,
    sc5,
    wo_cb,
    wo_ob,
    wo_ds,
    wo_descendants,
};

std::optional<EvalMode> parse_eval_mode(const std::string& name);
std::string eval_mode_name(EvalMode mode);
std::vector<std::string> eval_mode_names();

// Projects a base config onto a mode's EngineConfig.
EngineConfig apply_eval_mode(EngineConfig base, EvalMode mode);

struct CategoryStats {
    std::map<std::string, double> percent; // module name -> percentage
    size_t node_count = 0;
};

struct SelectionStats {
    CategoryStats leaf;     // over {CB, OB}
    CategoryStats non_leaf; // over {CB, OB, CA}
    std::vector<std::string> notes;
};

SelectionStats selection_stats(const std::vector<ReasoningTrace>& traces);

struct RecordResult {
    std::string id;
    std::string qtype;
    std::string prediction;
    double f1 = 0.0;
    int em = 0;
    std::string error; // non-empty when the engine failed on this record
};

struct Report {
    double em = 0.0;
    double f1 = 0.0;
    std::map<std::string, std::pair<double, double>> per_qtype; // qtype -> (em, f1)
    SelectionStats selection;
    size_t backend_calls = 0;
    size_t cache_hits = 0;
    std::vector<RecordResult> records; // sorted by record id
    std::string mode;
    std::string config_json;

    std::string to_json() const;
};

struct EvalOptions {
    int parallelism = 1;
    std::string trace_dir; // per-record trace files when non-empty
};

Report evaluate(const std::string& dataset_path, const Index& index,
                std::shared_ptr<Backend> backend, const PromptSet& prompts,
                const EngineConfig& base_config, EvalMode mode, const EvalOptions& options = {});

} // namespace treeqa
