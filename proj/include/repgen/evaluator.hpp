#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repgen/llm_gateway.hpp"
#include "repgen/run_config.hpp"
#include "repgen/tools.hpp"

namespace repgen {

struct GoldAnnotation {
    std::string id;
    std::string db_id;
    std::string question;
    std::string enhanced_question;
    std::set<std::string> gold_tables;
    std::set<std::string> gold_columns;  // table.column
    std::vector<std::string> gold_sqls;
    std::optional<std::string> gold_report;

    static GoldAnnotation from_json(const nlohmann::json& j);
};

// Reads a dataset JSONL file; malformed lines raise ParseFailure naming the
// line number.
std::vector<GoldAnnotation> load_dataset(const std::string& path);

struct MetricScores {
    double table_p = 0, table_r = 0, table_f1 = 0;
    double column_p = 0, column_r = 0, column_f1 = 0;
    double context_relevance = 0;  // 0..10
    double accuracy = 0;           // 0..10
    double report_relevance = 0;   // 0..10

    nlohmann::json to_json() const;
};

struct Prf {
    double p = 0, r = 0, f1 = 0;
};

// p = |inter|/|pred| (0 on empty pred), r = |inter|/|gold| (0 on empty
// gold), f1 harmonic with 0/0 -> 0. Inputs are normalized name sets.
Prf prf(const std::set<std::string>& predicted, const std::set<std::string>& gold);

struct Predictions {
    std::set<std::string> tables;
    std::set<std::string> columns;
    std::vector<std::string> warnings;
};

// Union of identifiers from executed SQL and encoding hits in a bundle.
// Unparseable stored SQL is skipped with a warning.
Predictions extract_predictions(const RetrievalBundle& bundle, const std::string& trace_status);

// Same extraction over bare SQL texts (synth round-trips through this).
Predictions extract_from_sqls(const std::vector<std::string>& sqls);

// --- judge-backed metrics (scores clamped into [0,10]) -------------------

std::string build_context_relevance_prompt(const std::string& question,
                                           const RetrievalBundle& bundle);
double context_relevance(const std::string& question, const RetrievalBundle& bundle,
                         const Gateway& judge, const ChatParams& params);

std::string build_accuracy_prompt(const std::string& question, const std::string& report_md,
                                  const std::optional<std::string>& gold_report);
double report_accuracy(const std::string& question, const std::string& report_md,
                       const std::optional<std::string>& gold_report, const Gateway& judge,
                       const ChatParams& params);

std::string build_question_gen_prompt(const std::string& report_md, int n_questions);

// Generates n questions from the report, embeds them, and scores
// 10 * mean(max(0, cos)). Fewer parsed than requested is tolerated with a
// warning; zero raises NoQuestionsParsed.
double report_relevance(const std::string& question, const std::string& report_md,
                        int n_questions, const Gateway& gateway, const ChatParams& params,
                        std::vector<std::string>* warnings = nullptr);

// First number in a judge reply, clamped to [0,10]; nullopt when none.
std::optional<double> parse_judge_score(const std::string& response);

struct EvalSummary {
    int n = 0;
    MetricScores means;  // prf fields stored raw; reported x100

    nlohmann::json to_json() const;
    std::string to_text_table() const;
};

EvalSummary aggregate(const std::vector<MetricScores>& records);  // EmptyInput on empty

// --- harness ---------------------------------------------------------------

struct EvalOptions {
    std::string dataset_path;
    std::string predictions_dir;
    std::string out_dir;
    // When set, questions with missing predictions are executed against
    // this database and their artifacts written under predictions_dir.
    std::optional<std::string> db_path;
};

struct EvalRunResult {
    int exit_code = 0;
    EvalSummary summary;
    std::vector<std::string> warnings;
};

EvalRunResult run_eval(const EvalOptions& options, const RunConfig& config,
                       std::shared_ptr<ChatBackend> backend = nullptr);

struct AblationRow {
    std::string mode;
    double table_f1 = 0;   // raw 0..1
    double column_f1 = 0;  // raw 0..1
    int n = 0;
};

// Runs the dataset under each strategy mode and reports per-mode retrieval
// F1. Writes ablation_summary.{json,txt} under out_dir.
std::vector<AblationRow> run_ablation(const EvalOptions& options, const RunConfig& base_config,
                                      std::shared_ptr<ChatBackend> backend = nullptr);

}  // namespace repgen
