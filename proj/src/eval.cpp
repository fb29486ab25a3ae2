#include "treeqa/eval.hpp"

#include "treeqa/cache.hpp"
#include "treeqa/errors.hpp"
#include "treeqa/text.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

namespace fs = std::filesystem;

namespace treeqa {

std::vector<DatasetRecord> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetParseFailure("cannot open dataset: " + path);
    std::vector<DatasetRecord> records;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DatasetParseFailure("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
        DatasetRecord r;
        try {
            r.id = j.at("id").get<std::string>();
            r.question = j.at("question").get<std::string>();
            if (j.contains("answers")) {
                for (const auto& a : j.at("answers")) r.gold_answers.push_back(a.get<std::string>());
            } else {
                r.gold_answers.push_back(j.at("answer").get<std::string>());
            }
            r.qtype = j.value("type", "");
        } catch (const nlohmann::json::exception& e) {
            throw DatasetParseFailure("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
        if (r.gold_answers.empty())
            throw DatasetParseFailure("dataset line " + std::to_string(line_no) +
                                      ": empty answer list");
        records.push_back(std::move(r));
    }
    return records;
}

std::string normalize_answer(const std::string& s) {
    std::string cleaned;
    cleaned.reserve(s.size());
    for (unsigned char c : s) {
        if (std::ispunct(c)) continue;
        cleaned.push_back(static_cast<char>(std::tolower(c)));
    }
    std::istringstream ss(cleaned);
    std::string tok, out;
    while (ss >> tok) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

namespace {

std::vector<std::string> ws_tokens(const std::string& s) {
    std::istringstream ss(s);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

} // namespace

double token_f1(const std::string& prediction, const std::string& gold) {
    auto p = ws_tokens(normalize_answer(prediction));
    auto g = ws_tokens(normalize_answer(gold));
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    std::unordered_map<std::string, size_t> gold_counts;
    for (const auto& t : g) ++gold_counts[t];
    size_t overlap = 0;
    for (const auto& t : p) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            ++overlap;
            --it->second;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / p.size();
    double recall = static_cast<double>(overlap) / g.size();
    return 2.0 * precision * recall / (precision + recall);
}

double token_f1_multi(const std::string& prediction, const std::vector<std::string>& golds) {
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, token_f1(prediction, g));
    return best;
}

int exact_match(const std::string& prediction, const std::string& gold) {
    return normalize_answer(prediction) == normalize_answer(gold) ? 1 : 0;
}

int exact_match_multi(const std::string& prediction, const std::vector<std::string>& golds) {
    for (const auto& g : golds)
        if (exact_match(prediction, g)) return 1;
    return 0;
}

std::optional<EvalMode> parse_eval_mode(const std::string& name) {
    static const std::map<std::string, EvalMode> modes = {
        {"probtree", EvalMode::probtree}, {"sd", EvalMode::sd},
        {"wo_ca", EvalMode::wo_ca},       {"rc", EvalMode::rc},
        {"sc3", EvalMode::sc3},           {"sc5", EvalMode::sc5},
        {"wo_cb", EvalMode::wo_cb},       {"wo_ob", EvalMode::wo_ob},
        {"wo_ds", EvalMode::wo_ds},       {"wo_descendants", EvalMode::wo_descendants},
    };
    auto it = modes.find(name);
    if (it == modes.end()) return std::nullopt;
    return it->second;
}

std::string eval_mode_name(EvalMode mode) {
    switch (mode) {
        case EvalMode::probtree: return "probtree";
        case EvalMode::sd: return "sd";
        case EvalMode::wo_ca: return "wo_ca";
        case EvalMode::rc: return "rc";
        case EvalMode::sc3: return "sc3";
        case EvalMode::sc5: return "sc5";
        case EvalMode::wo_cb: return "wo_cb";
        case EvalMode::wo_ob: return "wo_ob";
        case EvalMode::wo_ds: return "wo_ds";
        default: return "wo_descendants";
    }
}

std::vector<std::string> eval_mode_names() {
    return {"probtree", "sd",    "wo_ca", "rc",    "sc3",
            "sc5",      "wo_cb", "wo_ob", "wo_ds", "wo_descendants"};
}

EngineConfig apply_eval_mode(EngineConfig base, EvalMode mode) {
    switch (mode) {
        case EvalMode::probtree:
        case EvalMode::sd:
            break;
        case EvalMode::wo_ca:
            base.enable_ca = false;
            break;
        case EvalMode::rc:
            base.selection = SelectionPolicy::random_choice;
            break;
        case EvalMode::sc3:
            base.selection = SelectionPolicy::self_consistency;
            base.sc_n = 3;
            break;
        case EvalMode::sc5:
            base.selection = SelectionPolicy::self_consistency;
            base.sc_n = 5;
            break;
        case EvalMode::wo_cb:
            base.enable_cb = false;
            break;
        case EvalMode::wo_ob:
            base.enable_ob = false;
            break;
        case EvalMode::wo_ds:
            base.use_ds = false;
            break;
        case EvalMode::wo_descendants:
            base.include_descendants = false;
            break;
    }
    return base;
}

SelectionStats selection_stats(const std::vector<ReasoningTrace>& traces) {
    size_t leaf_total = 0, nonleaf_total = 0;
    std::map<std::string, size_t> leaf_counts, nonleaf_counts;
    for (const auto& t : traces) {
        for (const auto& sol : t.solutions) {
            if (sol.is_leaf) {
                ++leaf_total;
                ++leaf_counts[qa_module_name(sol.chosen)];
            } else {
                ++nonleaf_total;
                ++nonleaf_counts[qa_module_name(sol.chosen)];
            }
        }
    }
    SelectionStats stats;
    stats.leaf.node_count = leaf_total;
    stats.non_leaf.node_count = nonleaf_total;
    if (leaf_total == 0) {
        stats.notes.push_back("no leaf nodes in run; leaf category omitted");
    } else {
        for (const auto& [m, c] : leaf_counts)
            stats.leaf.percent[m] = 100.0 * static_cast<double>(c) / leaf_total;
    }
    if (nonleaf_total == 0) {
        stats.notes.push_back("no non-leaf nodes in run; non-leaf category omitted");
    } else {
        for (const auto& [m, c] : nonleaf_counts)
            stats.non_leaf.percent[m] = 100.0 * static_cast<double>(c) / nonleaf_total;
    }
    return stats;
}

namespace {

std::uint64_t record_seed(std::uint64_t base, const std::string& id) {
    // stable per-record derivation so parallel order cannot matter
    std::uint64_t h = base ^ 0xcbf29ce484222325ULL;
    for (unsigned char c : id) h = (h ^ c) * 0x100000001b3ULL;
    return h;
}

nlohmann::ordered_json stats_json(const SelectionStats& stats) {
    nlohmann::ordered_json j;
    auto cat = [](const CategoryStats& c) {
        nlohmann::ordered_json out;
        out["node_count"] = c.node_count;
        nlohmann::ordered_json pct = nlohmann::ordered_json::object();
        for (const auto& [m, p] : c.percent) pct[m] = p;
        out["percent"] = pct;
        return out;
    };
    j["leaf"] = cat(stats.leaf);
    j["non_leaf"] = cat(stats.non_leaf);
    if (!stats.notes.empty()) j["notes"] = stats.notes;
    return j;
}

} // namespace

std::string Report::to_json() const {
    nlohmann::ordered_json j;
    j["mode"] = mode;
    j["overall"] = {{"em", em}, {"f1", f1}};
    nlohmann::ordered_json types = nlohmann::ordered_json::object();
    for (const auto& [t, mf] : per_qtype) types[t] = {{"em", mf.first}, {"f1", mf.second}};
    j["per_type"] = types;
    j["selection_stats"] = stats_json(selection);
    j["cost"] = {{"backend_calls", backend_calls}, {"cache_hits", cache_hits}};
    nlohmann::ordered_json recs = nlohmann::ordered_json::array();
    for (const auto& r : records) {
        nlohmann::ordered_json rj;
        rj["id"] = r.id;
        if (!r.qtype.empty()) rj["type"] = r.qtype;
        rj["prediction"] = r.prediction;
        rj["em"] = r.em;
        rj["f1"] = r.f1;
        if (!r.error.empty()) rj["error"] = r.error;
        recs.push_back(std::move(rj));
    }
    j["records"] = recs;
    j["config"] = nlohmann::ordered_json::parse(config_json.empty() ? "{}" : config_json);
    return j.dump(2) + "\n";
}

Report evaluate(const std::string& dataset_path, const Index& index,
                std::shared_ptr<Backend> backend, const PromptSet& prompts,
                const EngineConfig& base_config, EvalMode mode, const EvalOptions& options) {
    auto records = load_dataset(dataset_path);
    if (records.empty()) throw DatasetParseFailure("dataset is empty: " + dataset_path);

    const EngineConfig config = apply_eval_mode(base_config, mode);
    if (!options.trace_dir.empty()) fs::create_directories(options.trace_dir);

    struct Slot {
        RecordResult result;
        std::optional<ReasoningTrace> trace;
    };
    std::vector<Slot> slots(records.size());

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= records.size()) return;
            const DatasetRecord& rec = records[i];
            Slot& slot = slots[i];
            slot.result.id = rec.id;
            slot.result.qtype = rec.qtype;
            try {
                EngineConfig rc = config;
                rc.seed = record_seed(config.seed, rec.id);
                Engine engine(&index, backend, prompts, rc);
                auto [answer, trace] = mode == EvalMode::sd
                                           ? engine.solve_sequential(rec.question)
                                           : engine.solve_tree(rec.question);
                slot.result.prediction = answer;
                slot.result.f1 = token_f1_multi(answer, rec.gold_answers);
                slot.result.em = exact_match_multi(answer, rec.gold_answers);
                slot.trace = std::move(trace);
            } catch (const std::exception& e) {
                slot.result.error = e.what();
                slot.result.f1 = 0.0;
                slot.result.em = 0;
            }
        }
    };

    int parallelism = std::max(1, options.parallelism);
    if (parallelism == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < parallelism; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // deterministic fold over record id order
    std::vector<size_t> order(slots.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return slots[a].result.id < slots[b].result.id; });

    Report report;
    report.mode = eval_mode_name(mode);
    report.config_json = config_snapshot_json(config);
    std::vector<ReasoningTrace> traces;
    std::map<std::string, std::pair<double, double>> type_sums; // em, f1
    std::map<std::string, size_t> type_counts;
    double em_sum = 0.0, f1_sum = 0.0;
    for (size_t i : order) {
        const Slot& slot = slots[i];
        em_sum += slot.result.em;
        f1_sum += slot.result.f1;
        if (!slot.result.qtype.empty()) {
            type_sums[slot.result.qtype].first += slot.result.em;
            type_sums[slot.result.qtype].second += slot.result.f1;
            ++type_counts[slot.result.qtype];
        }
        if (slot.trace) {
            report.backend_calls += slot.trace->backend_calls;
            traces.push_back(*slot.trace);
            if (!options.trace_dir.empty()) {
                std::ofstream out(fs::path(options.trace_dir) / (slot.result.id + ".trace.json"));
                out << slot.trace->to_json();
            }
        }
        report.records.push_back(slot.result);
    }
    report.em = em_sum / records.size();
    report.f1 = f1_sum / records.size();
    for (const auto& [t, sums] : type_sums)
        report.per_qtype[t] = {sums.first / type_counts[t], sums.second / type_counts[t]};
    report.selection = selection_stats(traces);
    if (auto* caching = dynamic_cast<CachingBackend*>(backend.get()))
        report.cache_hits = caching->cache_hits();
    return report;
}

} // namespace treeqa
