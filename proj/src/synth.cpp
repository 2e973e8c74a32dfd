#include "repgen/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "repgen/errors.hpp"
#include "repgen/evaluator.hpp"
#include "repgen/sql_analyzer.hpp"
#include "repgen/tools.hpp"
#include "repgen/util.hpp"

namespace repgen {

namespace fs = std::filesystem;
using nlohmann::json;

SeedPair SeedPair::from_json(const json& j) {
    return {j.at("question").get<std::string>(), j.at("sql").get<std::string>(),
            j.at("db_id").get<std::string>()};
}

std::vector<SeedPair> load_seed_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseFailure("cannot open seed pairs: " + path);
    std::vector<SeedPair> pairs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            pairs.push_back(SeedPair::from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw ParseFailure(path + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return pairs;
}

json SynthRecord::to_json() const {
    json j;
    j["id"] = id;
    j["db_id"] = db_id;
    j["question"] = question;
    j["enhanced_question"] = enhanced_question;
    j["gold_tables"] = std::vector<std::string>(gold_tables.begin(), gold_tables.end());
    j["gold_columns"] = std::vector<std::string>(gold_columns.begin(), gold_columns.end());
    j["gold_sqls"] = gold_sqls;
    j["gold_report"] = gold_report;
    j["review_status"] = review_status;
    if (!flags.empty()) j["flags"] = flags;
    return j;
}

SynthRecord SynthRecord::from_json(const json& j) {
    SynthRecord r;
    r.id = j.at("id").get<std::string>();
    r.db_id = j.at("db_id").get<std::string>();
    r.question = j.at("question").get<std::string>();
    r.enhanced_question = j.at("enhanced_question").get<std::string>();
    for (const auto& t : j.at("gold_tables")) r.gold_tables.insert(t.get<std::string>());
    for (const auto& c : j.at("gold_columns")) r.gold_columns.insert(c.get<std::string>());
    r.gold_sqls = j.at("gold_sqls").get<std::vector<std::string>>();
    r.gold_report = j.at("gold_report").get<std::string>();
    r.review_status = j.at("review_status").get<std::string>();
    if (j.contains("flags")) r.flags = j.at("flags").get<std::vector<std::string>>();
    return r;
}

std::vector<SeedPair> sample_seed_group(const std::vector<SeedPair>& pool, int group_size,
                                        std::mt19937_64& rng) {
    if (static_cast<int>(pool.size()) < group_size) {
        throw std::invalid_argument("seed pool smaller than group size");
    }
    std::vector<size_t> indices(pool.size());
    for (size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    std::vector<SeedPair> group;
    group.reserve(static_cast<size_t>(group_size));
    for (int i = 0; i < group_size; ++i) {
        size_t remaining = indices.size() - static_cast<size_t>(i);
        size_t j = static_cast<size_t>(i) + static_cast<size_t>(rng() % remaining);
        std::swap(indices[static_cast<size_t>(i)], indices[j]);
        group.push_back(pool[indices[static_cast<size_t>(i)]]);
    }
    return group;
}

std::string build_synthesize_prompt(const std::vector<SeedPair>& seeds) {
    std::ostringstream ss;
    ss << "Below are " << seeds.size()
       << " question-SQL pairs drawn from one database. Write ONE analytical question that "
          "combines the logic of these questions: it should demand summarization across "
          "several of them, span multiple tables or measures, and read like a real analyst's "
          "request. Respond with the question text only.\n\n";
    for (size_t i = 0; i < seeds.size(); ++i) {
        ss << i + 1 << ". Q: " << seeds[i].question << "\n   SQL: " << seeds[i].sql << "\n";
    }
    return ss.str();
}

std::string synthesize_question(const std::vector<SeedPair>& seeds, int group_size,
                                const Gateway& gateway, const ChatParams& params) {
    if (static_cast<int>(seeds.size()) != group_size) {
        throw std::invalid_argument("expected exactly " + std::to_string(group_size) +
                                    " seed pairs, got " + std::to_string(seeds.size()));
    }
    for (const auto& seed : seeds) {
        if (seed.db_id != seeds.front().db_id) {
            throw std::invalid_argument("seed pairs span multiple databases: " +
                                        seeds.front().db_id + " vs " + seed.db_id);
        }
    }
    return trim(gateway.complete(build_synthesize_prompt(seeds), params));
}

std::string build_enhance_prompt(const std::string& question, const SchemaCatalog& catalog) {
    return "Rewrite the analytical question below so it is semantically clear and expressed "
           "in terms of this database schema: name the concrete tables or columns it should "
           "draw on. Keep the analytical intent unchanged. Respond with the rewritten "
           "question only.\n\nSchema:\n" +
           catalog.to_text() + "\nQuestion: " + question + "\n";
}

namespace {

bool mentions_catalog_identifier(const std::string& text, const SchemaCatalog& catalog) {
    std::string lower = lowercase(text);
    for (const auto& table : catalog.tables) {
        if (lower.find(lowercase(table.name)) != std::string::npos) return true;
        for (const auto& col : table.columns) {
            if (lower.find(lowercase(col.name)) != std::string::npos) return true;
        }
    }
    return false;
}

}  // namespace

std::string enhance_question(const std::string& question, const SchemaCatalog& catalog,
                             const Gateway& gateway, const ChatParams& params,
                             std::vector<std::string>* warnings) {
    if (question.empty()) throw std::invalid_argument("enhance_question: empty question");
    std::string enhanced = trim(gateway.complete(build_enhance_prompt(question, catalog), params));
    if (enhanced.empty()) {
        if (warnings) warnings->push_back("empty enhancement; keeping original question");
        return question;
    }
    if (!mentions_catalog_identifier(enhanced, catalog)) {
        if (warnings) {
            warnings->push_back("enhancement names no schema identifier; keeping original");
        }
        return question;
    }
    return enhanced;
}

std::string build_pair_score_prompt(const std::string& question, const std::string& element_text) {
    return "Rate how relevant this schema element is to the question, from 0 (unrelated) to "
           "10 (central). Reply with a single number only.\n\nQuestion: " +
           question + "\nSchema element: " + element_text + "\n";
}

std::vector<SchemaElementScore> score_schema_relevance(const std::string& enhanced_question,
                                                       const SchemaCatalog& catalog,
                                                       SchemaScorer scorer, int k,
                                                       const Gateway& gateway,
                                                       const ChatParams& params) {
    if (catalog.empty()) throw std::invalid_argument("score_schema_relevance: empty catalog");

    struct Element {
        std::string name;
        std::string text;
    };
    std::vector<Element> elements;
    for (const auto& table : catalog.tables) {
        elements.push_back({lowercase(table.name), schema_embedding_text(table)});
        for (const auto& col : table.columns) {
            elements.push_back({lowercase(table.name) + "." + lowercase(col.name),
                                "table=" + table.name + " | column=" + col.name + " (" +
                                    column_type_name(col.data_type) + ")"});
        }
    }

    std::vector<SchemaElementScore> scored;
    if (scorer == SchemaScorer::BiEncoder) {
        EmbeddingVector qe = gateway.embed(enhanced_question);
        for (const auto& e : elements) {
            scored.push_back({e.name, cosine(qe, gateway.embed(e.text))});
        }
    } else {
        for (const auto& e : elements) {
            std::string response =
                gateway.complete(build_pair_score_prompt(enhanced_question, e.text), params);
            auto score = parse_judge_score(response);
            scored.push_back({e.name, score ? *score : 0.0});
        }
    }
    std::sort(scored.begin(), scored.end(),
              [](const SchemaElementScore& a, const SchemaElementScore& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return a.name < b.name;
              });
    if (static_cast<int>(scored.size()) > k) scored.resize(static_cast<size_t>(k));
    return scored;
}

std::string build_sql_candidates_prompt(const std::string& enhanced_question,
                                        const SchemaCatalog& catalog,
                                        const std::vector<SchemaElementScore>& focus,
                                        int m_candidates) {
    std::ostringstream ss;
    ss << "Write " << m_candidates
       << " different SQLite SELECT statements that together answer the question. One "
          "statement per line, numbered like '1. SELECT ...'. Use only the schema below; no "
          "prose.\n\nSchema:\n"
       << catalog.to_text();
    if (!focus.empty()) {
        ss << "\nMost relevant schema elements: ";
        for (size_t i = 0; i < focus.size(); ++i) {
            if (i) ss << ", ";
            ss << focus[i].name;
        }
        ss << "\n";
    }
    ss << "\nQuestion: " << enhanced_question << "\n";
    return ss.str();
}

std::vector<std::string> generate_and_filter_sqls(const std::string& enhanced_question,
                                                  const SchemaCatalog& catalog, const Database& db,
                                                  int m_candidates,
                                                  const std::vector<SchemaElementScore>& focus,
                                                  const Gateway& gateway, const ChatParams& params,
                                                  std::vector<std::string>* warnings) {
    if (m_candidates < 1) throw std::invalid_argument("m_candidates must be >= 1");
    std::string response = gateway.complete(
        build_sql_candidates_prompt(enhanced_question, catalog, focus, m_candidates), params);

    std::vector<std::string> candidates;
    for (const auto& item : parse_numbered_lines(response)) {
        std::string sql = extract_sql_from_response(item);
        if (!sql.empty()) candidates.push_back(sql);
    }
    if (candidates.empty()) {
        // maybe the model skipped the numbering
        std::string sql = extract_sql_from_response(response);
        if (!sql.empty()) candidates.push_back(sql);
    }

    std::vector<std::string> retained;
    std::vector<std::string> seen_normalized;
    for (const auto& sql : candidates) {
        std::string norm = normalize_sql(sql);
        if (std::find(seen_normalized.begin(), seen_normalized.end(), norm) !=
            seen_normalized.end()) {
            if (warnings) warnings->push_back("duplicate candidate dropped: " + sql);
            continue;
        }
        seen_normalized.push_back(norm);

        ValidationVerdict verdict = validate_sql(sql, catalog);
        if (!verdict.ok()) {
            if (warnings) warnings->push_back("candidate failed validation: " + sql);
            continue;
        }
        SqlOutcome outcome = db.execute(sql, 10);
        if (outcome.error) {
            if (warnings) warnings->push_back("candidate failed execution: " + sql);
            continue;
        }
        if (outcome.row_count_total < 1) {
            if (warnings) warnings->push_back("candidate returned no rows: " + sql);
            continue;
        }
        retained.push_back(sql);
    }
    return retained;
}

std::string question_type_name(QuestionType t) {
    switch (t) {
        case QuestionType::Trend: return "trend";
        case QuestionType::Comparison: return "comparison";
        case QuestionType::Aggregation: return "aggregation";
        case QuestionType::Mixed: return "mixed";
    }
    return "mixed";
}

QuestionType classify_question(const std::string& question) {
    std::string lower = lowercase(question);
    auto has = [&](const char* needle) { return lower.find(needle) != std::string::npos; };
    if (has("trend") || has("over time") || has("evolve") || has("evolution") || has("growth"))
        return QuestionType::Trend;
    if (has("compare") || has("comparison") || has("versus") || has(" vs "))
        return QuestionType::Comparison;
    if (has("total") || has("average") || has("sum") || has("mean") || has("count"))
        return QuestionType::Aggregation;
    return QuestionType::Mixed;
}

TemplateRegistry load_synth_templates(const PromptLibrary& prompts) {
    TemplateRegistry registry;
    for (QuestionType t : {QuestionType::Trend, QuestionType::Comparison,
                           QuestionType::Aggregation, QuestionType::Mixed}) {
        std::string name = question_type_name(t);
        try {
            registry[name] = prompts.raw("synth_" + name);
        } catch (const TemplateMissing&) {
            // leave the slot empty; render_report reports it if needed
        }
    }
    return registry;
}

std::string render_report(const std::string& question, const std::vector<std::string>& sqls,
                          const std::vector<SqlOutcome>& outcomes,
                          const TemplateRegistry& templates) {
    if (sqls.empty() || sqls.size() != outcomes.size()) {
        throw std::invalid_argument("render_report needs matching non-empty sqls/outcomes");
    }
    std::string type = question_type_name(classify_question(question));
    auto it = templates.find(type);
    if (it == templates.end()) throw TemplateMissing("synth_" + type);

    std::ostringstream sections;
    for (size_t i = 0; i < sqls.size(); ++i) {
        const SqlOutcome& outcome = outcomes[i];
        sections << "Query " << i + 1 << ": " << sqls[i] << "\n";
        sections << "It reports";
        for (size_t c = 0; c < outcome.columns.size(); ++c) {
            sections << (c == 0 ? " " : ", ") << outcome.columns[c];
        }
        sections << " over " << outcome.row_count_total << " row(s).\n";
        size_t sample = std::min<size_t>(outcome.rows.size(), 5);
        for (size_t r = 0; r < sample; ++r) {
            sections << "  - ";
            for (size_t c = 0; c < outcome.rows[r].size(); ++c) {
                if (c) sections << ", ";
                sections << outcome.columns[c] << " = " << outcome.rows[r][c].dump();
            }
            sections << "\n";
        }
        if (outcome.rows.size() > sample) {
            sections << "  - (further rows omitted)\n";
        }
        sections << "\n";
    }

    return PromptLibrary::substitute(
        it->second, {
                        {"question", question},
                        {"sections", trim(sections.str())},
                        {"n_queries", std::to_string(sqls.size())},
                        {"query_plural", sqls.size() == 1 ? "y" : "ies"},
                    });
}

SynthRunResult run_synth(const SynthOptions& options, const RunConfig& config,
                         std::shared_ptr<ChatBackend> backend) {
    SynthRunResult out;
    Database db = Database::open(options.db_path);
    SchemaCatalog catalog = db.introspect();
    Gateway gateway(backend ? backend : config.make_backend());
    ChatParams params;
    params.model_id = config.chat_model;
    PromptLibrary prompts(config.templates_dir);
    TemplateRegistry templates = load_synth_templates(prompts);

    std::vector<SeedPair> pool;
    for (auto& seed : load_seed_pairs(options.seed_pairs_path)) {
        if (seed.db_id != catalog.db_id) continue;
        if (!validate_sql(seed.sql, catalog).ok()) {
            out.warnings.push_back("seed sql does not validate, skipped: " + seed.sql);
            continue;
        }
        pool.push_back(std::move(seed));
    }
    if (static_cast<int>(pool.size()) < config.synth_group_size) {
        out.exit_code = 1;
        out.warnings.push_back("seed pool has " + std::to_string(pool.size()) +
                               " usable pairs; need " + std::to_string(config.synth_group_size));
        return out;
    }

    std::mt19937_64 rng(config.seed);
    std::ofstream jsonl(options.out_jsonl, std::ios::app);
    if (!jsonl) throw StorageFailure("cannot append to " + options.out_jsonl);

    for (int i = 0; i < options.n_records; ++i) {
        std::vector<SeedPair> group = sample_seed_group(pool, config.synth_group_size, rng);
        SynthRecord record;
        record.db_id = catalog.db_id;
        record.question = synthesize_question(group, config.synth_group_size, gateway, params);
        std::vector<std::string> warnings;
        record.enhanced_question =
            enhance_question(record.question, catalog, gateway, params, &warnings);

        auto focus = score_schema_relevance(record.enhanced_question, catalog,
                                            SchemaScorer::BiEncoder, 8, gateway, params);
        record.gold_sqls =
            generate_and_filter_sqls(record.enhanced_question, catalog, db,
                                     config.synth_m_candidates, focus, gateway, params, &warnings);

        Predictions ids = extract_from_sqls(record.gold_sqls);
        record.gold_tables = ids.tables;
        record.gold_columns = ids.columns;

        if (record.gold_sqls.empty()) {
            record.flags.push_back("no_valid_sql");
            record.gold_report = "";
        } else {
            std::vector<SqlOutcome> outcomes;
            for (const auto& sql : record.gold_sqls) outcomes.push_back(db.execute(sql, 50));
            record.gold_report =
                render_report(record.enhanced_question, record.gold_sqls, outcomes, templates);
        }
        record.id = "synth-" + digest64_hex(record.db_id + "|" + record.question + "|" +
                                            std::to_string(i));
        record.flags.insert(record.flags.end(), warnings.begin(), warnings.end());

        jsonl << record.to_json().dump() << "\n";
        out.records.push_back(std::move(record));
    }
    return out;
}

bool review_record(const std::string& jsonl_path, const std::string& id, bool approve) {
    std::vector<json> lines;
    {
        std::ifstream in(jsonl_path);
        if (!in) throw ParseFailure("cannot open " + jsonl_path);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            lines.push_back(json::parse(line));
        }
    }
    bool found = false;
    for (auto& j : lines) {
        if (j.value("id", "") == id) {
            j["review_status"] = approve ? "approved" : "rejected";
            found = true;
        }
    }
    if (!found) return false;
    std::ostringstream out;
    for (const auto& j : lines) out << j.dump() << "\n";
    write_file(jsonl_path, out.str());
    return true;
}

}  // namespace repgen
