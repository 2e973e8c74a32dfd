#include "repgen/memory_store.hpp"

#include <filesystem>
#include <fstream>

#include "repgen/errors.hpp"
#include "repgen/util.hpp"

namespace repgen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json embedding_to_json(const EmbeddingVector& v) { return json(v.values); }

EmbeddingVector embedding_from_json(const json& j) {
    EmbeddingVector v;
    v.values = j.get<std::vector<double>>();
    return v;
}

}  // namespace

MemoryStore MemoryStore::persistent(const std::string& state_dir,
                                    const std::string& artifacts_root, const Gateway* gateway) {
    MemoryStore m;
    m.persistent_ = true;
    m.state_dir_ = state_dir;
    m.artifacts_root_ = artifacts_root;
    m.gateway_ = gateway;
    fs::create_directories(state_dir);
    m.load_journals();
    return m;
}

MemoryStore MemoryStore::ephemeral(const Gateway* gateway) {
    MemoryStore m;
    m.persistent_ = false;
    m.gateway_ = gateway;
    return m;
}

std::string MemoryStore::qa_key(const std::string& question, const std::string& db_id,
                                const std::string& schema_digest) {
    return digest64_hex(question + "|" + db_id + "|" + schema_digest);
}

void MemoryStore::load_journals() {
    auto each_line = [&](const std::string& file, auto&& fn) {
        fs::path p = fs::path(state_dir_) / file;
        if (!fs::exists(p)) return;
        std::ifstream in(p);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            fn(json::parse(line));
        }
    };
    each_line("qa.jsonl", [&](const json& j) {
        QaRecord r;
        r.question = j.at("question").get<std::string>();
        r.question_embedding = embedding_from_json(j.at("question_embedding"));
        r.report_ref = j.at("report_ref").get<std::string>();
        r.trace_ref = j.at("trace_ref").get<std::string>();
        r.created_at = j.at("created_at").get<std::string>();
        r.db_id = j.at("db_id").get<std::string>();
        r.schema_digest = j.at("schema_digest").get<std::string>();
        qa_[qa_key(r.question, r.db_id, r.schema_digest)] = std::move(r);
    });
    each_line("intermediates.jsonl", [&](const json& j) {
        intermediates_[j.at("question_id").get<std::string>()][j.at("key").get<std::string>()] =
            j.at("value");
    });
    each_line("plans.jsonl", [&](const json& j) {
        PlanPathRecord r;
        r.question = j.at("question").get<std::string>();
        r.question_embedding = embedding_from_json(j.at("question_embedding"));
        for (const auto& d : j.at("decisions")) {
            r.decisions.push_back({d.at("decision_point").get<std::string>(),
                                   d.at("choice").get<std::string>()});
        }
        r.db_id = j.at("db_id").get<std::string>();
        r.schema_digest = j.at("schema_digest").get<std::string>();
        plans_[qa_key(r.question, r.db_id, r.schema_digest)] = std::move(r);
    });
}

void MemoryStore::append_journal(const std::string& file, const json& line) {
    if (!persistent_) return;
    fs::path p = fs::path(state_dir_) / file;
    std::ofstream out(p, std::ios::app);
    if (!out) throw StorageFailure("cannot append to " + p.string());
    out << line.dump() << "\n";
}

std::string MemoryStore::store_qa(const std::string& question, const std::string& report_ref,
                                  const std::string& trace_ref, const std::string& db_id,
                                  const std::string& schema_digest) {
    if (persistent_) {
        fs::path report_path = fs::path(artifacts_root_) / "reports" / (report_ref + ".md");
        fs::path trace_path = fs::path(artifacts_root_) / "trace" / (trace_ref + ".json");
        if (!fs::exists(report_path)) {
            throw StorageFailure("dangling report_ref: " + report_path.string());
        }
        if (!fs::exists(trace_path)) {
            throw StorageFailure("dangling trace_ref: " + trace_path.string());
        }
    }

    QaRecord r;
    r.question = question;
    r.question_embedding = gateway_->embed(question);
    r.report_ref = report_ref;
    r.trace_ref = trace_ref;
    r.created_at = now_iso8601_utc();
    r.db_id = db_id;
    r.schema_digest = schema_digest;

    std::string key = qa_key(question, db_id, schema_digest);
    {
        std::lock_guard<std::mutex> lock(*mutex_);
        qa_[key] = r;
        append_journal("qa.jsonl", json{{"question", r.question},
                                        {"question_embedding", embedding_to_json(r.question_embedding)},
                                        {"report_ref", r.report_ref},
                                        {"trace_ref", r.trace_ref},
                                        {"created_at", r.created_at},
                                        {"db_id", r.db_id},
                                        {"schema_digest", r.schema_digest}});
    }
    return key;
}

std::optional<QaRecord> MemoryStore::lookup_qa(const std::string& question,
                                               double similarity_threshold,
                                               const std::string& db_id,
                                               const std::string& schema_digest) const {
    std::lock_guard<std::mutex> lock(*mutex_);
    if (qa_.empty()) return std::nullopt;

    auto exact = qa_.find(qa_key(question, db_id, schema_digest));
    if (exact != qa_.end()) return exact->second;

    EmbeddingVector qe = gateway_->embed(question);
    const QaRecord* best = nullptr;
    double best_score = -2.0;
    for (const auto& [key, record] : qa_) {
        if (record.db_id != db_id || record.schema_digest != schema_digest) continue;
        double score = cosine(qe, record.question_embedding);
        if (score > best_score) {
            best_score = score;
            best = &record;
        }
    }
    if (best && best_score >= similarity_threshold) return *best;
    return std::nullopt;
}

void MemoryStore::put_intermediate(const std::string& question_id, const IntermediateKey& key,
                                   const json& value) {
    std::lock_guard<std::mutex> lock(*mutex_);
    intermediates_[question_id][key.str()] = value;
    append_journal("intermediates.jsonl", json{{"question_id", question_id},
                                               {"key", key.str()},
                                               {"value", value},
                                               {"created_at", now_iso8601_utc()}});
}

std::map<std::string, json> MemoryStore::get_intermediates(const std::string& question_id) const {
    std::lock_guard<std::mutex> lock(*mutex_);
    auto it = intermediates_.find(question_id);
    if (it == intermediates_.end()) return {};
    return it->second;
}

void MemoryStore::store_plan(const std::string& question,
                             const std::vector<PlanDecision>& decisions, const std::string& db_id,
                             const std::string& schema_digest) {
    PlanPathRecord r;
    r.question = question;
    r.question_embedding = gateway_->embed(question);
    r.decisions = decisions;
    r.db_id = db_id;
    r.schema_digest = schema_digest;

    json decisions_j = json::array();
    for (const auto& d : decisions) {
        decisions_j.push_back(json{{"decision_point", d.decision_point}, {"choice", d.choice}});
    }
    std::lock_guard<std::mutex> lock(*mutex_);
    plans_[qa_key(question, db_id, schema_digest)] = r;
    append_journal("plans.jsonl", json{{"question", r.question},
                                       {"question_embedding", embedding_to_json(r.question_embedding)},
                                       {"decisions", decisions_j},
                                       {"db_id", r.db_id},
                                       {"schema_digest", r.schema_digest}});
}

std::optional<std::vector<PlanDecision>> MemoryStore::suggest_plan(
    const std::string& question, double plan_threshold, const std::string& db_id,
    const std::string& schema_digest) const {
    std::lock_guard<std::mutex> lock(*mutex_);
    if (plans_.empty()) return std::nullopt;

    auto exact = plans_.find(qa_key(question, db_id, schema_digest));
    if (exact != plans_.end()) return exact->second.decisions;

    EmbeddingVector qe = gateway_->embed(question);
    const PlanPathRecord* best = nullptr;
    double best_score = -2.0;
    for (const auto& [key, record] : plans_) {
        if (record.db_id != db_id || record.schema_digest != schema_digest) continue;
        double score = cosine(qe, record.question_embedding);
        if (score > best_score) {
            best_score = score;
            best = &record;
        }
    }
    if (best && best_score >= plan_threshold) return best->decisions;
    return std::nullopt;
}

size_t MemoryStore::qa_count() const {
    std::lock_guard<std::mutex> lock(*mutex_);
    return qa_.size();
}

}  // namespace repgen
