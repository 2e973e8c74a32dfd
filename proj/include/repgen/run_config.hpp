#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "repgen/llm_gateway.hpp"
#include "repgen/tools.hpp"

namespace repgen {

enum class BackendKind { Http, Mock };
enum class StrategyMode { Both, EncodingOnly, SqlOnly };

std::string strategy_mode_name(StrategyMode m);
StrategyMode strategy_mode_from_name(const std::string& name);

// Every knob of a run, loadable from one key = value config file with
// [section] headers. Relative paths resolve against the config file's
// directory so bundled fixtures work from any cwd.
struct RunConfig {
    // [backend]
    BackendKind backend = BackendKind::Mock;
    std::string base_url = "http://localhost:8000/v1";
    std::string api_key_env = "REPGEN_API_KEY";
    std::string chat_model = "gpt-4o-mini";
    std::string embed_model = "text-embedding-3-small";
    std::string local_sql_model = "local-sql";
    std::string mock_script;       // optional when mock_echo
    bool mock_strict = false;
    bool mock_echo = true;         // permissive fallback echo allowed
    std::uint64_t seed = 42;       // mandatory under mock
    bool seed_set = true;
    int mock_dims = 64;
    int retries = 3;
    int backoff_ms = 500;
    int timeout_ms = 30000;

    // [retrieval]
    int k_tables = 5;
    int k_cells = 10;
    long long per_table_budget = 200;

    // [sql]
    SqlGenerator sql_mode = SqlGenerator::PromptApi;
    int n_retry = 2;
    long long preview_row_limit = 50;
    long long final_row_limit = 1000;

    // [rewrite]
    RewriteLimits rewrite_limits;

    // [planner]
    int max_subquestions = 5;
    StrategyMode strategy = StrategyMode::Both;

    // [memory]
    bool memory_enabled = true;
    double qa_threshold = 0.95;
    double plan_threshold = 0.85;
    bool regenerate_on_hit = false;

    // [paths]
    std::string state_dir = "state";
    std::string templates_dir = "templates";

    // [eval]
    int eval_n_questions = 3;

    // [synth]
    int synth_group_size = 10;
    int synth_m_candidates = 4;

    std::vector<DomainProfile> profiles;  // [profile.<name>] sections

    static RunConfig defaults();
    static RunConfig load(const std::string& path);

    // Validates invariants (mock needs seed and a script or echo mode).
    void validate() const;

    // Digest over behavior-affecting fields only; paths and timeouts are
    // excluded so runs in different directories share question ids.
    std::string semantic_digest() const;

    // Constructs the configured backend (mock script loaded, API key read
    // from the environment).
    std::shared_ptr<ChatBackend> make_backend() const;
};

std::vector<DomainProfile> default_profiles();

}  // namespace repgen
