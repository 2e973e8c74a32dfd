#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repgen/memory_store.hpp"
#include "repgen/run_config.hpp"
#include "repgen/schema_catalog.hpp"
#include "repgen/tools.hpp"

namespace repgen {

struct PlanStep {
    std::string tool;
    std::optional<std::string> decision_point;
    std::string input_digest;
    std::string output_digest;
    double duration_ms = 0.0;
    std::vector<std::string> warnings;
    std::vector<std::string> degradations;  // warnings that downgrade status
};

struct PlanTrace {
    std::string question_id;
    std::string question;
    std::string db_id;
    std::string schema_digest;
    std::string config_digest;
    std::string created_at;
    std::string status = "ok";  // ok | degraded | failed
    std::vector<PlanStep> steps;
    std::optional<std::vector<PlanDecision>> plan_suggestion;

    nlohmann::json to_json() const;
    // Canonical form excludes durations and timestamps, so replays of the
    // same seeded run digest identically.
    std::string canonical_digest() const;
};

struct DecisionOutcome {
    bool value = false;
    std::string rationale;
};

std::string build_decomposition_judge_prompt(const std::string& question);

// Deterministic fallback: decompose iff the question carries at least two
// coordination cues ("and"/"or"/"compare"/enumeration commas) or more than
// 25 content tokens.
DecisionOutcome needs_decomposition_heuristic(const std::string& question);

// LLM judge (YES/NO plus rationale); falls back to the heuristic when the
// backend is unavailable or the reply has no verdict.
DecisionOutcome needs_decomposition(const std::string& question, const Gateway& gateway,
                                    const ChatParams& params);

struct StrategyChoice {
    bool use_encoding = true;
    bool use_sql = true;
    std::string rationale;
};

// Default runs both retrieval routes; ablation modes force one.
StrategyChoice select_strategy(const std::string& subquestion, StrategyMode mode);

struct AskResult {
    Report report;
    PlanTrace trace;
    RetrievalBundle bundle;
    bool memory_hit = false;
    std::string report_path;
    std::string trace_path;
    std::string bundle_path;
    std::string report_digest;  // digest of the report markdown bytes
    std::string trace_digest;   // canonical trace digest
};

// Owns the shared immutable pieces (db, catalog, gateway, indices, memory)
// and runs one question at a time end to end, writing reports/, trace/ and
// bundle/ artifacts under out_dir.
class Engine {
public:
    // Backend defaults to whatever the config describes; tests and tooling
    // may inject their own (e.g. a recording backend).
    Engine(RunConfig config, const std::string& db_path, const std::string& out_dir,
           std::shared_ptr<ChatBackend> backend = nullptr);

    AskResult ask(const std::string& question);

    const SchemaCatalog& catalog() const { return catalog_; }
    const RunConfig& config() const { return config_; }
    MemoryStore& memory() { return memory_; }
    const Gateway& gateway() const { return gateway_; }
    std::string question_id(const std::string& question) const;

private:
    ToolContext tool_context() const;
    AskResult run_fresh(const std::string& question, const std::string& qid);
    AskResult run_pipeline(const std::string& question, const std::string& qid, PlanTrace& trace);
    AskResult return_memory_hit(const std::string& question, const std::string& qid,
                                const QaRecord& hit);

    RunConfig config_;
    std::string out_dir_;
    Database db_;
    SchemaCatalog catalog_;
    Gateway gateway_;
    PromptLibrary prompts_;
    MemoryStore memory_;
    SchemaIndex schema_index_;
    CellIndex cell_index_;
};

}  // namespace repgen
