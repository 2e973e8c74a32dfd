#include "repgen/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "repgen/errors.hpp"
#include "repgen/planner.hpp"
#include "repgen/sql_analyzer.hpp"
#include "repgen/util.hpp"

namespace repgen {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

GoldAnnotation GoldAnnotation::from_json(const json& j) {
    GoldAnnotation g;
    g.id = j.at("id").get<std::string>();
    g.db_id = j.value("db_id", "");
    g.question = j.at("question").get<std::string>();
    g.enhanced_question = j.value("enhanced_question", g.question);
    for (const auto& t : j.value("gold_tables", json::array()))
        g.gold_tables.insert(lowercase(t.get<std::string>()));
    for (const auto& c : j.value("gold_columns", json::array()))
        g.gold_columns.insert(lowercase(c.get<std::string>()));
    for (const auto& s : j.value("gold_sqls", json::array()))
        g.gold_sqls.push_back(s.get<std::string>());
    if (j.contains("gold_report") && !j.at("gold_report").is_null())
        g.gold_report = j.at("gold_report").get<std::string>();
    return g;
}

std::vector<GoldAnnotation> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseFailure("cannot open dataset: " + path);
    std::vector<GoldAnnotation> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            records.push_back(GoldAnnotation::from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw ParseFailure(path + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// Set metrics
// ---------------------------------------------------------------------------

Prf prf(const std::set<std::string>& predicted, const std::set<std::string>& gold) {
    Prf out;
    if (predicted.empty() && gold.empty()) return out;
    size_t inter = 0;
    for (const auto& p : predicted) inter += gold.count(p);
    out.p = predicted.empty() ? 0.0 : static_cast<double>(inter) / predicted.size();
    out.r = gold.empty() ? 0.0 : static_cast<double>(inter) / gold.size();
    out.f1 = (out.p + out.r) == 0.0 ? 0.0 : 2.0 * out.p * out.r / (out.p + out.r);
    return out;
}

json MetricScores::to_json() const {
    return json{{"table_p", table_p},
                {"table_r", table_r},
                {"table_f1", table_f1},
                {"column_p", column_p},
                {"column_r", column_r},
                {"column_f1", column_f1},
                {"context_relevance", context_relevance},
                {"accuracy", accuracy},
                {"report_relevance", report_relevance}};
}

// ---------------------------------------------------------------------------
// Prediction extraction
// ---------------------------------------------------------------------------

Predictions extract_from_sqls(const std::vector<std::string>& sqls) {
    Predictions out;
    for (const auto& sql : sqls) {
        try {
            SqlIdentifiers ids = extract_sql_identifiers(sql);
            for (const auto& t : ids.tables) out.tables.insert(t);
            for (const auto& c : ids.columns) out.columns.insert(c);
            for (const auto& w : ids.warnings) out.warnings.push_back(w);
        } catch (const ParseFailure& e) {
            out.warnings.push_back(std::string("skipped unparseable SQL: ") + e.what());
        }
    }
    return out;
}

Predictions extract_predictions(const RetrievalBundle& bundle, const std::string& trace_status) {
    if (trace_status == "failed") {
        throw std::invalid_argument("extract_predictions: trace status is failed");
    }
    std::vector<std::string> sqls;
    for (const auto& entry : bundle.entries) {
        if (entry.sql) sqls.push_back(entry.sql->sql);
    }
    Predictions out = extract_from_sqls(sqls);
    for (const auto& entry : bundle.entries) {
        for (const auto& hit : entry.cell_hits) {
            out.tables.insert(lowercase(hit.cell.table));
            out.columns.insert(lowercase(hit.cell.table) + "." + lowercase(hit.cell.column));
        }
        for (const auto& hit : entry.table_hits) out.tables.insert(lowercase(hit.table));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Judge-backed metrics
// ---------------------------------------------------------------------------

std::optional<double> parse_judge_score(const std::string& response) {
    size_t i = 0;
    const size_t n = response.size();
    while (i < n) {
        char c = response[i];
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            ((c == '-' || c == '+') && i + 1 < n &&
             std::isdigit(static_cast<unsigned char>(response[i + 1])))) {
            size_t end = i + (c == '-' || c == '+' ? 1 : 0);
            while (end < n && (std::isdigit(static_cast<unsigned char>(response[end])) ||
                               response[end] == '.'))
                ++end;
            try {
                double v = std::stod(response.substr(i, end - i));
                return std::clamp(v, 0.0, 10.0);
            } catch (const std::exception&) {
                return std::nullopt;
            }
        }
        ++i;
    }
    return std::nullopt;
}

namespace {

// One judge call with a single reprompt on an unparseable reply.
double judged_score(const std::string& prompt, const Gateway& judge, const ChatParams& params) {
    std::string response;
    try {
        response = judge.complete(prompt, params);
    } catch (const Error& e) {
        throw JudgeUnavailable(e.what());
    }
    if (auto score = parse_judge_score(response)) return *score;
    try {
        response = judge.complete(
            prompt + "\nYour previous reply had no score. Reply with a single number from 0 to 10.",
            params);
    } catch (const Error& e) {
        throw JudgeUnavailable(e.what());
    }
    if (auto score = parse_judge_score(response)) return *score;
    throw UnparseableScore("judge returned no number twice");
}

std::string serialize_bundle_for_judge(const RetrievalBundle& bundle) {
    std::ostringstream ss;
    for (size_t i = 0; i < bundle.entries.size(); ++i) {
        ss << bundle_entry_evidence_text(bundle.entries[i], i) << "\n";
    }
    return ss.str();
}

}  // namespace

std::string build_context_relevance_prompt(const std::string& question,
                                           const RetrievalBundle& bundle) {
    return "You grade retrieval quality for database analytics.\n"
           "Context relevance measures the quality and alignment of the retrieved content "
           "with the question: high when the retrieved tables, columns, cells and SQL results "
           "carry the information the question needs, low when they are off-topic or noisy.\n"
           "Score the retrieved context below from 0 (irrelevant) to 10 (exactly what is "
           "needed). Reply with a single number only.\n\n"
           "Question: " +
           question + "\n\nRetrieved context:\n" + serialize_bundle_for_judge(bundle);
}

double context_relevance(const std::string& question, const RetrievalBundle& bundle,
                         const Gateway& judge, const ChatParams& params) {
    return judged_score(build_context_relevance_prompt(question, bundle), judge, params);
}

std::string build_accuracy_prompt(const std::string& question, const std::string& report_md,
                                  const std::optional<std::string>& gold_report) {
    std::string prompt =
        "You grade analytical reports generated from a relational database.\n"
        "Accuracy measures whether the report correctly addresses the query requirements "
        "and reflects the intended semantic meaning: high when the report answers exactly "
        "what was asked without errors or semantic drift.\n"
        "Score the report from 0 (wrong or off-topic) to 10 (fully correct). Reply with a "
        "single number only.\n\n"
        "Question: " +
        question + "\n\nReport:\n" + report_md + "\n";
    if (gold_report) {
        prompt += "\nReference report (ground truth):\n" + *gold_report + "\n";
    }
    return prompt;
}

double report_accuracy(const std::string& question, const std::string& report_md,
                       const std::optional<std::string>& gold_report, const Gateway& judge,
                       const ChatParams& params) {
    return judged_score(build_accuracy_prompt(question, report_md, gold_report), judge, params);
}

std::string build_question_gen_prompt(const std::string& report_md, int n_questions) {
    return "Read the analytical report below and write the " + std::to_string(n_questions) +
           " question(s) it most directly answers. Respond with numbered lines only, one "
           "question per line.\n\nReport:\n" +
           report_md + "\n";
}

double report_relevance(const std::string& question, const std::string& report_md,
                        int n_questions, const Gateway& gateway, const ChatParams& params,
                        std::vector<std::string>* warnings) {
    if (n_questions < 1) throw std::invalid_argument("report_relevance: n_questions must be >= 1");
    std::string response = gateway.complete(build_question_gen_prompt(report_md, n_questions),
                                            params);
    std::vector<std::string> generated = parse_numbered_lines(response);
    if (generated.empty()) throw NoQuestionsParsed("no questions parsed from model response");
    if (static_cast<int>(generated.size()) < n_questions && warnings) {
        warnings->push_back("asked for " + std::to_string(n_questions) + " questions, parsed " +
                            std::to_string(generated.size()));
    }
    EmbeddingVector qe = gateway.embed(question);
    double sum = 0.0;
    for (const auto& g : generated) {
        sum += std::max(0.0, cosine(gateway.embed(g), qe));
    }
    return 10.0 * sum / static_cast<double>(generated.size());
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

EvalSummary aggregate(const std::vector<MetricScores>& records) {
    if (records.empty()) throw EmptyInput("aggregate over zero records");
    EvalSummary s;
    s.n = static_cast<int>(records.size());
    for (const auto& r : records) {
        s.means.table_p += r.table_p;
        s.means.table_r += r.table_r;
        s.means.table_f1 += r.table_f1;
        s.means.column_p += r.column_p;
        s.means.column_r += r.column_r;
        s.means.column_f1 += r.column_f1;
        s.means.context_relevance += r.context_relevance;
        s.means.accuracy += r.accuracy;
        s.means.report_relevance += r.report_relevance;
    }
    double n = static_cast<double>(s.n);
    s.means.table_p /= n;
    s.means.table_r /= n;
    s.means.table_f1 /= n;
    s.means.column_p /= n;
    s.means.column_r /= n;
    s.means.column_f1 /= n;
    s.means.context_relevance /= n;
    s.means.accuracy /= n;
    s.means.report_relevance /= n;
    return s;
}

json EvalSummary::to_json() const {
    return json{{"n", n},
                {"table_precision_pct", means.table_p * 100.0},
                {"table_recall_pct", means.table_r * 100.0},
                {"table_f1_pct", means.table_f1 * 100.0},
                {"column_precision_pct", means.column_p * 100.0},
                {"column_recall_pct", means.column_r * 100.0},
                {"column_f1_pct", means.column_f1 * 100.0},
                {"context_relevance", means.context_relevance},
                {"accuracy", means.accuracy},
                {"report_relevance", means.report_relevance},
                {"metadata",
                 json{{"context_relevance_scope", "full serialized bundle (hits + sql results)"}}}};
}

std::string EvalSummary::to_text_table() const {
    std::ostringstream ss;
    char buf[64];
    auto row = [&](const char* name, double value) {
        std::snprintf(buf, sizeof(buf), "%-22s %8.2f\n", name, value);
        ss << buf;
    };
    ss << "records: " << n << "\n";
    row("table_precision", means.table_p * 100.0);
    row("table_recall", means.table_r * 100.0);
    row("table_f1", means.table_f1 * 100.0);
    row("column_precision", means.column_p * 100.0);
    row("column_recall", means.column_r * 100.0);
    row("column_f1", means.column_f1 * 100.0);
    row("context_relevance", means.context_relevance);
    row("accuracy", means.accuracy);
    row("report_relevance", means.report_relevance);
    return ss.str();
}

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

namespace {

struct PredictionArtifacts {
    RetrievalBundle bundle;
    std::string trace_status = "ok";
    std::string report_md;
};

std::optional<PredictionArtifacts> load_prediction(const std::string& predictions_dir,
                                                   const std::string& id) {
    fs::path bundle_path = fs::path(predictions_dir) / "bundle" / (id + ".json");
    if (!fs::exists(bundle_path)) return std::nullopt;
    PredictionArtifacts a;
    a.bundle = RetrievalBundle::from_json(json::parse(read_file(bundle_path.string())));
    fs::path trace_path = fs::path(predictions_dir) / "trace" / (id + ".json");
    if (fs::exists(trace_path)) {
        a.trace_status = json::parse(read_file(trace_path.string())).value("status", "ok");
    }
    fs::path report_path = fs::path(predictions_dir) / "reports" / (id + ".md");
    if (fs::exists(report_path)) a.report_md = read_file(report_path.string());
    return a;
}

void write_prediction(const std::string& predictions_dir, const std::string& id,
                      const AskResult& result) {
    fs::create_directories(fs::path(predictions_dir) / "bundle");
    fs::create_directories(fs::path(predictions_dir) / "trace");
    fs::create_directories(fs::path(predictions_dir) / "reports");
    write_file((fs::path(predictions_dir) / "bundle" / (id + ".json")).string(),
               result.bundle.to_json().dump(2) + "\n");
    write_file((fs::path(predictions_dir) / "trace" / (id + ".json")).string(),
               result.trace.to_json().dump(2) + "\n");
    write_file((fs::path(predictions_dir) / "reports" / (id + ".md")).string(),
               result.report.to_markdown());
}

}  // namespace

EvalRunResult run_eval(const EvalOptions& options, const RunConfig& config,
                       std::shared_ptr<ChatBackend> backend) {
    EvalRunResult out;
    std::vector<GoldAnnotation> dataset = load_dataset(options.dataset_path);
    fs::create_directories(options.out_dir);

    std::optional<Engine> engine;
    if (options.db_path) {
        RunConfig run_cfg = config;
        run_cfg.state_dir = (fs::path(options.predictions_dir) / "state").string();
        engine.emplace(run_cfg, *options.db_path, options.predictions_dir, backend);
    }

    Gateway judge(backend ? backend : config.make_backend());
    ChatParams judge_params;
    judge_params.model_id = config.chat_model;

    std::ofstream scores_out(fs::path(options.out_dir) / "scores.jsonl");
    std::vector<MetricScores> all_scores;

    for (const auto& gold : dataset) {
        MetricScores scores;
        std::vector<std::string> warnings;

        auto artifacts = load_prediction(options.predictions_dir, gold.id);
        if (!artifacts && engine) {
            try {
                AskResult result = engine->ask(gold.question);
                write_prediction(options.predictions_dir, gold.id, result);
                artifacts = load_prediction(options.predictions_dir, gold.id);
            } catch (const Error& e) {
                warnings.push_back(std::string("pipeline failed: ") + e.what());
            }
        }

        if (!artifacts) {
            warnings.push_back("missing prediction; scored as zeros");
        } else {
            Predictions pred = extract_predictions(artifacts->bundle, artifacts->trace_status);
            for (const auto& w : pred.warnings) warnings.push_back(w);
            Prf t = prf(pred.tables, gold.gold_tables);
            Prf c = prf(pred.columns, gold.gold_columns);
            scores.table_p = t.p;
            scores.table_r = t.r;
            scores.table_f1 = t.f1;
            scores.column_p = c.p;
            scores.column_r = c.r;
            scores.column_f1 = c.f1;
            try {
                scores.context_relevance =
                    context_relevance(gold.question, artifacts->bundle, judge, judge_params);
            } catch (const Error& e) {
                warnings.push_back(std::string("context_relevance unavailable: ") + e.what());
            }
            if (!artifacts->report_md.empty()) {
                try {
                    scores.accuracy = report_accuracy(gold.question, artifacts->report_md,
                                                      gold.gold_report, judge, judge_params);
                } catch (const Error& e) {
                    warnings.push_back(std::string("accuracy unavailable: ") + e.what());
                }
                try {
                    scores.report_relevance =
                        report_relevance(gold.question, artifacts->report_md,
                                         config.eval_n_questions, judge, judge_params, &warnings);
                } catch (const Error& e) {
                    warnings.push_back(std::string("report_relevance unavailable: ") + e.what());
                }
            } else {
                warnings.push_back("missing report; generation metrics scored as zeros");
            }
        }

        json line = scores.to_json();
        line["id"] = gold.id;
        line["warnings"] = warnings;
        scores_out << line.dump() << "\n";
        for (const auto& w : warnings) out.warnings.push_back(gold.id + ": " + w);
        all_scores.push_back(scores);
    }
    scores_out.close();

    out.summary = aggregate(all_scores);
    write_file((fs::path(options.out_dir) / "summary.json").string(),
               out.summary.to_json().dump(2) + "\n");
    write_file((fs::path(options.out_dir) / "summary.txt").string(),
               out.summary.to_text_table());
    out.exit_code = 0;
    return out;
}

std::vector<AblationRow> run_ablation(const EvalOptions& options, const RunConfig& base_config,
                                      std::shared_ptr<ChatBackend> backend) {
    std::vector<AblationRow> rows;
    for (StrategyMode mode :
         {StrategyMode::Both, StrategyMode::EncodingOnly, StrategyMode::SqlOnly}) {
        RunConfig config = base_config;
        config.strategy = mode;
        EvalOptions mode_options = options;
        std::string mode_name = strategy_mode_name(mode);
        mode_options.predictions_dir =
            (fs::path(options.predictions_dir) / mode_name).string();
        mode_options.out_dir = (fs::path(options.out_dir) / mode_name).string();
        EvalRunResult result = run_eval(mode_options, config, backend);
        rows.push_back({mode_name, result.summary.means.table_f1,
                        result.summary.means.column_f1, result.summary.n});
    }

    json summary = json::array();
    std::ostringstream text;
    text << "mode            table_f1  column_f1\n";
    for (const auto& row : rows) {
        summary.push_back(json{{"mode", row.mode},
                               {"table_f1_pct", row.table_f1 * 100.0},
                               {"column_f1_pct", row.column_f1 * 100.0},
                               {"n", row.n}});
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%-15s %8.2f %9.2f\n", row.mode.c_str(),
                      row.table_f1 * 100.0, row.column_f1 * 100.0);
        text << buf;
    }
    fs::create_directories(options.out_dir);
    write_file((fs::path(options.out_dir) / "ablation_summary.json").string(),
               summary.dump(2) + "\n");
    write_file((fs::path(options.out_dir) / "ablation_summary.txt").string(), text.str());
    return rows;
}

}  // namespace repgen
