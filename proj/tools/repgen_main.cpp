#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "repgen/errors.hpp"
#include "repgen/evaluator.hpp"
#include "repgen/planner.hpp"
#include "repgen/run_config.hpp"
#include "repgen/synth.hpp"
#include "repgen/util.hpp"

namespace fs = std::filesystem;
using namespace repgen;

namespace {

// Exit codes: 0 ok, 1 hard failure, 2 degraded.
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitDegraded = 2;

RunConfig load_config(const std::string& config_path) {
    if (!config_path.empty()) return RunConfig::load(config_path);
    if (fs::exists("repgen.ini")) return RunConfig::load("repgen.ini");
    return RunConfig::defaults();
}

int report_error(const Error& e) {
    std::cerr << "error code=" << e.code() << " msg=" << e.what() << "\n";
    return kExitFailure;
}

int ask_once(Engine& engine, const std::string& question) {
    AskResult result = engine.ask(question);
    std::cout << "status=" << result.trace.status << " memory_hit=" << (result.memory_hit ? 1 : 0)
              << " report=" << result.report_path << " trace=" << result.trace_path
              << " report_digest=" << result.report_digest
              << " trace_digest=" << result.trace_digest << "\n";
    if (result.trace.status == "degraded") return kExitDegraded;
    if (result.trace.status == "failed") return kExitFailure;
    return kExitOk;
}

int cmd_ask(const std::string& db_path, const std::string& question, bool repl,
            const std::string& config_path, const std::string& out_dir) {
    RunConfig config = load_config(config_path);
    Engine engine(config, db_path, out_dir);

    if (!repl) return ask_once(engine, question);

    // REPL: one question per line, shared memory across turns.
    std::string line;
    int worst = kExitOk;
    while (true) {
        std::cerr << "question> " << std::flush;
        if (!std::getline(std::cin, line)) break;
        std::string q = trim(line);
        if (q.empty()) continue;
        if (q == "exit" || q == "quit") break;
        try {
            int code = ask_once(engine, q);
            worst = std::max(worst, code);
        } catch (const Error& e) {
            std::cerr << "error code=" << e.code() << " msg=" << e.what() << "\n";
            worst = kExitFailure;
        }
    }
    return worst;
}

int cmd_eval(const std::string& dataset, const std::string& pred_dir, const std::string& db_path,
             const std::string& config_path, const std::string& out_dir, bool ablation) {
    RunConfig config = load_config(config_path);
    EvalOptions options;
    options.dataset_path = dataset;
    options.predictions_dir = pred_dir;
    options.out_dir = out_dir.empty() ? pred_dir : out_dir;
    if (!db_path.empty()) options.db_path = db_path;

    if (ablation) {
        auto rows = run_ablation(options, config);
        for (const auto& row : rows) {
            std::cout << "mode=" << row.mode << " table_f1=" << row.table_f1 * 100.0
                      << " column_f1=" << row.column_f1 * 100.0 << " n=" << row.n << "\n";
        }
        return kExitOk;
    }

    EvalRunResult result = run_eval(options, config);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << result.summary.to_text_table();
    std::cout << "scores=" << (fs::path(options.out_dir) / "scores.jsonl").string()
              << " summary=" << (fs::path(options.out_dir) / "summary.json").string() << "\n";
    return result.exit_code;
}

int cmd_synth(const std::string& seeds, const std::string& db_path, int n,
              const std::string& config_path, const std::string& out_jsonl) {
    RunConfig config = load_config(config_path);
    SynthOptions options;
    options.seed_pairs_path = seeds;
    options.db_path = db_path;
    options.n_records = n;
    options.out_jsonl = out_jsonl;
    SynthRunResult result = run_synth(options, config);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& r : result.records) {
        std::cout << "id=" << r.id << " review_status=" << r.review_status << "\n";
    }
    return result.exit_code;
}

int cmd_review(const std::string& out_jsonl, const std::string& id, bool approve, bool reject) {
    if (approve == reject) {
        std::cerr << "error code=ConfigError msg=pass exactly one of --approve/--reject\n";
        return kExitFailure;
    }
    if (!review_record(out_jsonl, id, approve)) {
        std::cerr << "error code=ParseFailure msg=no record with id " << id << "\n";
        return kExitFailure;
    }
    std::cout << "id=" << id << " review_status=" << (approve ? "approved" : "rejected") << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"repgen: analytical report generation over relational databases"};
    app.require_subcommand(1);

    // ask
    auto* ask = app.add_subcommand("ask", "answer one question (or start a REPL)");
    std::string ask_db, ask_question, ask_config, ask_out = "out";
    bool ask_repl = false;
    ask->add_option("--db", ask_db, "database file")->required();
    ask->add_option("--question", ask_question, "question text");
    ask->add_flag("--repl", ask_repl, "read questions from stdin");
    ask->add_option("--config", ask_config, "config file");
    ask->add_option("--out", ask_out, "output directory");

    // eval
    auto* eval = app.add_subcommand("eval", "score predictions against a gold dataset");
    std::string eval_dataset, eval_pred, eval_db, eval_config, eval_out;
    bool eval_ablation = false;
    eval->add_option("--dataset", eval_dataset, "gold dataset JSONL")->required();
    eval->add_option("--pred", eval_pred, "predictions directory")->required();
    eval->add_option("--db", eval_db, "database file (runs missing predictions)");
    eval->add_option("--config", eval_config, "config file");
    eval->add_option("--out", eval_out, "output directory (defaults to --pred)");
    eval->add_flag("--ablation", eval_ablation, "run strategy-mode ablation");

    // synth
    auto* synth = app.add_subcommand("synth", "synthesize dataset records");
    std::string synth_seeds, synth_db, synth_config, synth_out;
    int synth_n = 1;
    synth->add_option("--seeds", synth_seeds, "seed question-SQL pairs JSONL")->required();
    synth->add_option("--db", synth_db, "database file")->required();
    synth->add_option("--n", synth_n, "number of records");
    synth->add_option("--config", synth_config, "config file");
    synth->add_option("--out", synth_out, "output JSONL")->required();

    // review
    auto* review = app.add_subcommand("review", "approve or reject a synthesized record");
    std::string review_out, review_id;
    bool review_approve = false, review_reject = false;
    review->add_option("--out", review_out, "dataset JSONL")->required();
    review->add_option("--id", review_id, "record id")->required();
    review->add_flag("--approve", review_approve, "approve the record");
    review->add_flag("--reject", review_reject, "reject the record");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(ask)) {
            if (!ask_repl && ask_question.empty()) {
                std::cerr << "error code=ConfigError msg=pass --question or --repl\n";
                return kExitFailure;
            }
            return cmd_ask(ask_db, ask_question, ask_repl, ask_config, ask_out);
        }
        if (app.got_subcommand(eval)) {
            return cmd_eval(eval_dataset, eval_pred, eval_db, eval_config, eval_out,
                            eval_ablation);
        }
        if (app.got_subcommand(synth)) {
            return cmd_synth(synth_seeds, synth_db, synth_n, synth_config, synth_out);
        }
        if (app.got_subcommand(review)) {
            return cmd_review(review_out, review_id, review_approve, review_reject);
        }
    } catch (const Error& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error code=Internal msg=" << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
