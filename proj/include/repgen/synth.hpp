#pragma once

#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repgen/llm_gateway.hpp"
#include "repgen/prompt_library.hpp"
#include "repgen/run_config.hpp"
#include "repgen/schema_catalog.hpp"

namespace repgen {

struct SeedPair {
    std::string question;
    std::string sql;
    std::string db_id;

    static SeedPair from_json(const nlohmann::json& j);
};

std::vector<SeedPair> load_seed_pairs(const std::string& path);

struct SynthRecord {
    std::string id;
    std::string db_id;
    std::string question;
    std::string enhanced_question;
    std::set<std::string> gold_tables;
    std::set<std::string> gold_columns;
    std::vector<std::string> gold_sqls;
    std::string gold_report;
    std::string review_status = "pending";  // pending | approved | rejected
    std::vector<std::string> flags;

    nlohmann::json to_json() const;
    static SynthRecord from_json(const nlohmann::json& j);
};

// Deterministic Fisher-Yates sample of `group_size` pairs (hand-rolled so
// the draw sequence is identical across standard libraries).
std::vector<SeedPair> sample_seed_group(const std::vector<SeedPair>& pool, int group_size,
                                        std::mt19937_64& rng);

std::string build_synthesize_prompt(const std::vector<SeedPair>& seeds);

// One analytical question combining the seeds' logic. Seeds must all share
// one db_id and match the configured group size.
std::string synthesize_question(const std::vector<SeedPair>& seeds, int group_size,
                                const Gateway& gateway, const ChatParams& params);

std::string build_enhance_prompt(const std::string& question, const SchemaCatalog& catalog);

// Schema-aware rephrasing. The enhancement must mention at least one
// catalog identifier or the original question is kept (drift guard); empty
// model output also keeps the original.
std::string enhance_question(const std::string& question, const SchemaCatalog& catalog,
                             const Gateway& gateway, const ChatParams& params,
                             std::vector<std::string>* warnings = nullptr);

enum class SchemaScorer { BiEncoder, CrossEncoderEndpoint };

struct SchemaElementScore {
    std::string name;  // "table" or "table.column"
    double score = 0.0;
};

std::string build_pair_score_prompt(const std::string& question, const std::string& element_text);

// Top-k schema elements (tables and columns) by relevance to the enhanced
// question. BiEncoder scores by embedding cosine; CrossEncoderEndpoint asks
// the chat backend for a number per (question, element) pair. Descending,
// ties by name.
std::vector<SchemaElementScore> score_schema_relevance(const std::string& enhanced_question,
                                                       const SchemaCatalog& catalog,
                                                       SchemaScorer scorer, int k,
                                                       const Gateway& gateway,
                                                       const ChatParams& params);

std::string build_sql_candidates_prompt(const std::string& enhanced_question,
                                        const SchemaCatalog& catalog,
                                        const std::vector<SchemaElementScore>& focus,
                                        int m_candidates);

// Dynamic filtering: of the m generated candidates, keep those that (a)
// validate, (b) execute without error, (c) return at least one row.
// Duplicates (by normalized text) are dropped; retention order preserved.
std::vector<std::string> generate_and_filter_sqls(const std::string& enhanced_question,
                                                  const SchemaCatalog& catalog, const Database& db,
                                                  int m_candidates,
                                                  const std::vector<SchemaElementScore>& focus,
                                                  const Gateway& gateway, const ChatParams& params,
                                                  std::vector<std::string>* warnings = nullptr);

enum class QuestionType { Trend, Comparison, Aggregation, Mixed };
std::string question_type_name(QuestionType t);

// Keyword rules: trend ("trend", "over time", ...), comparison ("compare",
// "versus"), aggregation ("total", "average", "sum"); else mixed.
QuestionType classify_question(const std::string& question);

using TemplateRegistry = std::map<std::string, std::string>;

// Loads synth_<type>.txt for every question type. Missing files surface as
// TemplateMissing later, when render_report asks for that type.
TemplateRegistry load_synth_templates(const PromptLibrary& prompts);

// Deterministic template fill (no LLM): one section per SQL in input order,
// each embedding the outcome's columns and a bounded row sample.
std::string render_report(const std::string& question, const std::vector<std::string>& sqls,
                          const std::vector<SqlOutcome>& outcomes,
                          const TemplateRegistry& templates);

struct SynthOptions {
    std::string seed_pairs_path;
    std::string db_path;
    int n_records = 1;
    std::string out_jsonl;
};

struct SynthRunResult {
    int exit_code = 0;
    std::vector<SynthRecord> records;
    std::vector<std::string> warnings;
};

// End-to-end synthesis: sample seeds -> synthesize -> enhance -> schema
// scoring -> SQL generation/filtering -> template report; appends pending
// records to out_jsonl.
SynthRunResult run_synth(const SynthOptions& options, const RunConfig& config,
                         std::shared_ptr<ChatBackend> backend = nullptr);

// Flips review_status for one record id in place. Returns false when the
// id is not present.
bool review_record(const std::string& jsonl_path, const std::string& id, bool approve);

}  // namespace repgen
