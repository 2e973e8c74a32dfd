#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "repgen/llm_gateway.hpp"
#include "repgen/prompt_library.hpp"
#include "repgen/schema_catalog.hpp"

namespace repgen {

// Stand-in for a domain adapter: keyword vectors drive selection, the
// overlay and adapter id shape the decomposition call.
struct DomainProfile {
    std::string name;
    std::vector<std::string> keywords;
    std::string prompt_overlay;
    std::optional<std::string> adapter_id;
};

struct SubQuestionSet {
    std::string parent_question;
    std::vector<std::string> items;
    std::string rationale;
};

struct SchemaIndexEntry {
    std::string table;
    EmbeddingVector embedding;
};

struct SchemaIndex {
    int format_version = 1;
    std::string encoder_id;
    std::vector<SchemaIndexEntry> entries;  // one per catalog table, in order

    nlohmann::json to_json() const;
    static SchemaIndex from_json(const nlohmann::json& j);
};

struct CellIndexEntry {
    CellRef cell;
    EmbeddingVector embedding;
};

struct CellIndex {
    int format_version = 1;
    std::string encoder_id;
    std::vector<CellIndexEntry> entries;  // deterministic traversal order

    nlohmann::json to_json() const;
    static CellIndex from_json(const nlohmann::json& j);
};

enum class SqlGenerator { PromptApi, LocalModel };
std::string sql_generator_name(SqlGenerator g);

struct SqlCandidate {
    std::string subquestion;
    std::string sql;
    SqlGenerator generator = SqlGenerator::PromptApi;
    std::optional<std::string> rewritten_from;

    nlohmann::json to_json() const;
    static SqlCandidate from_json(const nlohmann::json& j);
};

struct TableHit {
    std::string table;
    double score = 0.0;
};

struct CellHit {
    CellRef cell;
    double score = 0.0;
};

// Merged evidence for one sub-question: encoding-retrieval hits plus the
// SQL route's candidate and execution outcome.
struct BundleEntry {
    std::string subquestion;
    std::vector<std::string> keywords;
    std::vector<TableHit> table_hits;
    std::vector<CellHit> cell_hits;
    std::optional<SqlCandidate> sql;
    std::optional<SqlOutcome> outcome;
    std::vector<std::string> warnings;

    bool has_evidence() const {
        return !table_hits.empty() || !cell_hits.empty() || (outcome && !outcome->error);
    }
};

struct RetrievalBundle {
    std::string question;
    std::vector<BundleEntry> entries;

    nlohmann::json to_json() const;
    static RetrievalBundle from_json(const nlohmann::json& j);
};

struct ReportFinding {
    std::string subquestion;
    std::string text;
    std::vector<std::string> citations;  // bundle element ids, e.g. "sql:0"
};

// Marker inserted for sub-questions that ended with no evidence.
extern const char* const kDataGapMarker;

struct Report {
    std::string question;
    std::string summary;
    std::vector<ReportFinding> findings;
    std::string evidence_md;  // pre-rendered Evidence section body
    std::string trace_ref;

    std::string to_markdown() const;
    static Report from_markdown(const std::string& md);
};

// Shared knobs for the generation-side tools.
struct ToolContext {
    const Gateway* gateway = nullptr;
    const PromptLibrary* prompts = nullptr;
    ChatParams chat;
    ChatParams sql_chat;  // model routing for text-to-SQL (mode dependent)
    int max_subquestions = 5;
    int n_retry = 2;
};

// ---------------------------------------------------------------------------
// Problem decomposition tools
// ---------------------------------------------------------------------------

// Profile whose keyword embeddings are on average closest to the question
// embedding; ties keep registry order. Throws EmptyRegistry.
const DomainProfile& select_domain_profile(const std::string& question,
                                           const std::vector<DomainProfile>& registry,
                                           const Gateway& gateway);

std::string build_decompose_prompt(const std::string& question, const SchemaCatalog& catalog,
                                   const DomainProfile& profile, int max_subquestions,
                                   const PromptLibrary& prompts);

// Parses "1. ..." style lines; empty/parent-equal items dropped; count capped
// at max_subquestions (excess dropped with a warning). One reprompt on an
// unparseable response, then UnparseableResponse.
SubQuestionSet decompose(const std::string& question, const SchemaCatalog& catalog,
                         const DomainProfile& profile, const ToolContext& ctx,
                         std::vector<std::string>* warnings = nullptr);

std::string build_keywords_prompt(const std::string& question, const PromptLibrary& prompts);

// 1-8 deduplicated lowercase keywords. Falls back to the question's content
// words when the model output yields nothing; never fails.
std::vector<std::string> generate_keywords(const std::string& question, const ToolContext& ctx);

// ---------------------------------------------------------------------------
// Direct encoding & retrieval tools
// ---------------------------------------------------------------------------

// Text serialized per table for the schema index (comments included when
// present; the convention is recorded in encoder_id).
std::string schema_embedding_text(const TableSchema& table);

// Fixed cell serialization: "table=<t> | column=<c> (<type>) | value=<v>".
std::string cell_embedding_text(const CellRef& cell, ColumnType type);

SchemaIndex build_schema_index(const SchemaCatalog& catalog, const Gateway& gateway);

CellIndex build_cell_index(const SchemaCatalog& catalog, const Database& db,
                           long long per_table_budget, const Gateway& gateway);

void save_index(const nlohmann::json& j, const std::string& path);
nlohmann::json load_index(const std::string& path);

// Top-k tables by cosine, descending; ties broken by table name.
std::vector<TableHit> retrieve_tables(const std::string& query_text, const SchemaIndex& index,
                                      int k, const Gateway& gateway);

// Top-k cells by cosine over the selected tables only; ties broken by
// (table, column, traversal order).
std::vector<CellHit> retrieve_cells(const std::string& query_text,
                                    const std::vector<std::string>& selected_tables,
                                    const CellIndex& index, int k, const Gateway& gateway);

// ---------------------------------------------------------------------------
// Text-to-SQL and SQL rewrite tools
// ---------------------------------------------------------------------------

std::string build_text2sql_prompt(const std::string& subquestion, const SchemaCatalog& catalog,
                                  const std::string& feedback, const PromptLibrary& prompts);

// Pulls the first SELECT/WITH statement out of a model response, dropping
// markdown fences and trailing prose.
std::string extract_sql_from_response(const std::string& response);

// Generates SQL that validates against the catalog, reprompting with the
// validation error up to n_retry times. Throws SqlGenerationFailed.
SqlCandidate generate_sql(const std::string& subquestion, const SchemaCatalog& catalog,
                          SqlGenerator mode, const ToolContext& ctx);

struct RewriteLimits {
    long long max_rows = 50;
    int max_cols = 8;
};

struct RewriteDecision {
    bool rewrite = false;
    std::string reason;
};

// Pure gate: rewrite iff the preview shows more rows than the budget, more
// projected columns than the budget, or was truncated.
RewriteDecision should_rewrite(const SqlCandidate& candidate, const SqlOutcome& preview,
                               const RewriteLimits& limits);

std::string build_rewrite_prompt(const SqlCandidate& candidate, const std::string& subquestion,
                                 const SchemaCatalog& catalog, const std::string& feedback,
                                 const PromptLibrary& prompts);

// Rewrites the candidate; the output must validate. After n_retry failed
// reprompts the input candidate is returned unchanged with a warning —
// degradation, never an error.
SqlCandidate rewrite_sql(const SqlCandidate& candidate, const std::string& subquestion,
                         const SchemaCatalog& catalog, const ToolContext& ctx,
                         std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// Report generation tools
// ---------------------------------------------------------------------------

std::string build_report_prompt(const std::string& question, const SubQuestionSet& subquestions,
                                const RetrievalBundle& bundle, const PromptLibrary& prompts);

// Serialization of one bundle entry used inside prompts and the Evidence
// section.
std::string bundle_entry_evidence_text(const BundleEntry& entry, size_t index);

Report generate_report(const std::string& question, const SubQuestionSet& subquestions,
                       const RetrievalBundle& bundle, const ToolContext& ctx);

// Parses "1. foo\n2. bar" (also "1) foo") into items.
std::vector<std::string> parse_numbered_lines(const std::string& text);

}  // namespace repgen
