#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "repgen/llm_gateway.hpp"

namespace repgen {

struct QaRecord {
    std::string question;
    EmbeddingVector question_embedding;
    std::string report_ref;
    std::string trace_ref;
    std::string created_at;
    std::string db_id;
    std::string schema_digest;
};

struct IntermediateKey {
    std::string kind;  // subquestions|keywords|encoding_hits|sql_raw|sql_rewritten|sql_outcome
    int index = -1;    // sub-question index; -1 for question-level entries

    std::string str() const {
        return index < 0 ? kind : kind + "[" + std::to_string(index) + "]";
    }
};

struct PlanDecision {
    std::string decision_point;  // decompose? | strategy | rewrite?
    std::string choice;
};

struct PlanPathRecord {
    std::string question;
    EmbeddingVector question_embedding;
    std::vector<PlanDecision> decisions;
    std::string db_id;
    std::string schema_digest;
};

// The three stores: QA history, per-question intermediates, and
// question -> plan-path correspondence. Persistent mode journals to
// append-only JSONL files under a state directory and rebuilds its index on
// load; ephemeral mode keeps everything in-process (used when memory reuse
// is disabled but intermediates still flow through the store).
//
// Reads are concurrent-safe; writes serialize through one mutex.
class MemoryStore {
public:
    static MemoryStore persistent(const std::string& state_dir, const std::string& artifacts_root,
                                  const Gateway* gateway);
    static MemoryStore ephemeral(const Gateway* gateway);

    bool is_persistent() const { return persistent_; }

    // Stores a QA record; report/trace artifacts must already exist on disk
    // (dangling refs raise StorageFailure). Same (question, db, schema)
    // overwrites: latest wins. Returns the record id.
    std::string store_qa(const std::string& question, const std::string& report_ref,
                         const std::string& trace_ref, const std::string& db_id,
                         const std::string& schema_digest);

    // Best stored record by cosine similarity, gated by the threshold;
    // exact question text (same db/schema) always hits. Records from other
    // databases or schema versions never match.
    std::optional<QaRecord> lookup_qa(const std::string& question, double similarity_threshold,
                                      const std::string& db_id,
                                      const std::string& schema_digest) const;

    void put_intermediate(const std::string& question_id, const IntermediateKey& key,
                          const nlohmann::json& value);
    std::map<std::string, nlohmann::json> get_intermediates(const std::string& question_id) const;

    void store_plan(const std::string& question, const std::vector<PlanDecision>& decisions,
                    const std::string& db_id, const std::string& schema_digest);
    std::optional<std::vector<PlanDecision>> suggest_plan(const std::string& question,
                                                          double plan_threshold,
                                                          const std::string& db_id,
                                                          const std::string& schema_digest) const;

    size_t qa_count() const;

private:
    MemoryStore() = default;
    void load_journals();
    void append_journal(const std::string& file, const nlohmann::json& line);
    static std::string qa_key(const std::string& question, const std::string& db_id,
                              const std::string& schema_digest);

    bool persistent_ = false;
    std::string state_dir_;
    std::string artifacts_root_;
    const Gateway* gateway_ = nullptr;

    // held by pointer so the store stays movable
    mutable std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
    std::map<std::string, QaRecord> qa_;                               // by qa_key
    std::map<std::string, std::map<std::string, nlohmann::json>> intermediates_;
    std::map<std::string, PlanPathRecord> plans_;                      // by qa_key
};

}  // namespace repgen
