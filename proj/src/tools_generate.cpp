#include <algorithm>
#include <cctype>
#include <sstream>

#include "repgen/errors.hpp"
#include "repgen/sql_analyzer.hpp"
#include "repgen/tools.hpp"
#include "repgen/util.hpp"

namespace repgen {

using nlohmann::json;

const char* const kDataGapMarker =
    "No supporting data was retrieved for this sub-question.";

// ---------------------------------------------------------------------------
// JSON round-trips
// ---------------------------------------------------------------------------

std::string sql_generator_name(SqlGenerator g) {
    return g == SqlGenerator::PromptApi ? "prompt_api" : "local_model";
}

json SqlCandidate::to_json() const {
    json j;
    j["subquestion"] = subquestion;
    j["sql"] = sql;
    j["generator"] = sql_generator_name(generator);
    j["rewritten_from"] = rewritten_from ? json(*rewritten_from) : json(nullptr);
    return j;
}

SqlCandidate SqlCandidate::from_json(const json& j) {
    SqlCandidate c;
    c.subquestion = j.at("subquestion").get<std::string>();
    c.sql = j.at("sql").get<std::string>();
    c.generator = j.at("generator").get<std::string>() == "local_model" ? SqlGenerator::LocalModel
                                                                        : SqlGenerator::PromptApi;
    if (!j.at("rewritten_from").is_null())
        c.rewritten_from = j.at("rewritten_from").get<std::string>();
    return c;
}

json RetrievalBundle::to_json() const {
    json j;
    j["question"] = question;
    json entries_j = json::array();
    for (const auto& e : entries) {
        json ej;
        ej["subquestion"] = e.subquestion;
        ej["keywords"] = e.keywords;
        json tables_j = json::array();
        for (const auto& th : e.table_hits)
            tables_j.push_back(json{{"table", th.table}, {"score", th.score}});
        ej["table_hits"] = tables_j;
        json cells_j = json::array();
        for (const auto& ch : e.cell_hits) {
            cells_j.push_back(json{{"table", ch.cell.table},
                                   {"column", ch.cell.column},
                                   {"value", ch.cell.value},
                                   {"score", ch.score}});
        }
        ej["cell_hits"] = cells_j;
        ej["sql"] = e.sql ? e.sql->to_json() : json(nullptr);
        ej["outcome"] = e.outcome ? e.outcome->to_json() : json(nullptr);
        ej["warnings"] = e.warnings;
        entries_j.push_back(std::move(ej));
    }
    j["entries"] = entries_j;
    return j;
}

RetrievalBundle RetrievalBundle::from_json(const json& j) {
    RetrievalBundle b;
    b.question = j.at("question").get<std::string>();
    for (const auto& ej : j.at("entries")) {
        BundleEntry e;
        e.subquestion = ej.at("subquestion").get<std::string>();
        e.keywords = ej.at("keywords").get<std::vector<std::string>>();
        for (const auto& th : ej.at("table_hits"))
            e.table_hits.push_back({th.at("table").get<std::string>(), th.at("score").get<double>()});
        for (const auto& ch : ej.at("cell_hits")) {
            e.cell_hits.push_back({CellRef{ch.at("table").get<std::string>(),
                                           ch.at("column").get<std::string>(),
                                           ch.at("value").get<std::string>()},
                                   ch.at("score").get<double>()});
        }
        if (!ej.at("sql").is_null()) e.sql = SqlCandidate::from_json(ej.at("sql"));
        if (!ej.at("outcome").is_null()) e.outcome = SqlOutcome::from_json(ej.at("outcome"));
        e.warnings = ej.at("warnings").get<std::vector<std::string>>();
        b.entries.push_back(std::move(e));
    }
    return b;
}

// ---------------------------------------------------------------------------
// Response parsing helpers
// ---------------------------------------------------------------------------

std::vector<std::string> parse_numbered_lines(const std::string& text) {
    std::vector<std::string> items;
    for (const auto& raw : split(text, '\n')) {
        std::string line = trim(raw);
        if (line.empty()) continue;
        size_t i = 0;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i == 0 || i >= line.size()) continue;
        if (line[i] != '.' && line[i] != ')') continue;
        std::string item = trim(line.substr(i + 1));
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

std::string extract_sql_from_response(const std::string& response) {
    std::string text = response;
    // drop markdown fences
    size_t fence = text.find("```");
    if (fence != std::string::npos) {
        size_t body_start = text.find('\n', fence);
        if (body_start != std::string::npos) {
            size_t fence_end = text.find("```", body_start);
            text = fence_end == std::string::npos
                       ? text.substr(body_start + 1)
                       : text.substr(body_start + 1, fence_end - body_start - 1);
        }
    }
    // locate first SELECT or WITH (case-insensitive, word boundary)
    std::string upper = text;
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    size_t start = std::string::npos;
    for (const char* kw : {"SELECT", "WITH"}) {
        size_t pos = 0;
        std::string k = kw;
        while ((pos = upper.find(k, pos)) != std::string::npos) {
            bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(upper[pos - 1]));
            size_t after = pos + k.size();
            bool right_ok =
                after >= upper.size() || !std::isalnum(static_cast<unsigned char>(upper[after]));
            if (left_ok && right_ok) {
                start = std::min(start, pos);
                break;
            }
            pos = after;
        }
    }
    if (start == std::string::npos) return trim(text);
    std::string sql = text.substr(start);
    // cut at the first statement terminator outside quotes
    bool in_string = false;
    for (size_t i = 0; i < sql.size(); ++i) {
        if (sql[i] == '\'') in_string = !in_string;
        if (sql[i] == ';' && !in_string) {
            sql = sql.substr(0, i + 1);
            break;
        }
    }
    return trim(sql);
}

// ---------------------------------------------------------------------------
// Decomposition
// ---------------------------------------------------------------------------

std::string build_decompose_prompt(const std::string& question, const SchemaCatalog& catalog,
                                   const DomainProfile& profile, int max_subquestions,
                                   const PromptLibrary& prompts) {
    return prompts.render("decompose", {
                                           {"question", question},
                                           {"schema", catalog.to_text()},
                                           {"overlay", profile.prompt_overlay},
                                           {"max_subquestions", std::to_string(max_subquestions)},
                                       });
}

SubQuestionSet decompose(const std::string& question, const SchemaCatalog& catalog,
                         const DomainProfile& profile, const ToolContext& ctx,
                         std::vector<std::string>* warnings) {
    if (question.empty()) throw std::invalid_argument("decompose: empty question");

    ChatParams params = ctx.chat;
    params.adapter_id = profile.adapter_id;

    std::string prompt =
        build_decompose_prompt(question, catalog, profile, ctx.max_subquestions, *ctx.prompts);

    auto attempt = [&](const std::string& p) {
        std::string response = ctx.gateway->complete(p, params);
        std::vector<std::string> items;
        for (auto& item : parse_numbered_lines(response)) {
            if (item == question) continue;
            items.push_back(std::move(item));
        }
        return items;
    };

    std::vector<std::string> items = attempt(prompt);
    if (items.empty()) {
        items = attempt(prompt +
                        "\nYour previous reply was not a numbered list. Reply ONLY with "
                        "numbered sub-questions, one per line.");
    }
    if (items.empty()) {
        throw UnparseableResponse("decomposition produced no numbered sub-questions");
    }
    if (static_cast<int>(items.size()) > ctx.max_subquestions) {
        if (warnings) {
            warnings->push_back("decomposition returned " + std::to_string(items.size()) +
                                " sub-questions; keeping the first " +
                                std::to_string(ctx.max_subquestions));
        }
        items.resize(static_cast<size_t>(ctx.max_subquestions));
    }

    SubQuestionSet set;
    set.parent_question = question;
    set.items = std::move(items);
    set.rationale = "model decomposition under profile '" + profile.name + "'";
    return set;
}

// ---------------------------------------------------------------------------
// Text-to-SQL
// ---------------------------------------------------------------------------

std::string build_text2sql_prompt(const std::string& subquestion, const SchemaCatalog& catalog,
                                  const std::string& feedback, const PromptLibrary& prompts) {
    return prompts.render("text2sql", {
                                          {"subquestion", subquestion},
                                          {"schema", catalog.to_text()},
                                          {"feedback", feedback},
                                      });
}

SqlCandidate generate_sql(const std::string& subquestion, const SchemaCatalog& catalog,
                          SqlGenerator mode, const ToolContext& ctx) {
    if (catalog.empty()) throw std::invalid_argument("generate_sql: empty catalog");
    const ChatParams& params = mode == SqlGenerator::LocalModel ? ctx.sql_chat : ctx.chat;

    std::string feedback;
    std::string last_error;
    for (int attempt = 0; attempt <= ctx.n_retry; ++attempt) {
        std::string prompt = build_text2sql_prompt(subquestion, catalog, feedback, *ctx.prompts);
        std::string response;
        try {
            response = ctx.gateway->complete(prompt, params);
        } catch (const Error& e) {
            throw SqlGenerationFailed(std::string("backend failure: ") + e.what());
        }
        std::string sql = extract_sql_from_response(response);
        ValidationVerdict verdict = validate_sql(sql, catalog);
        if (verdict.ok()) {
            SqlCandidate c;
            c.subquestion = subquestion;
            c.sql = sql;
            c.generator = mode;
            return c;
        }
        last_error = verdict.kind == ValidationVerdict::Kind::ParseError
                         ? "parse error: " + verdict.message
                         : "unknown identifier: " + verdict.name;
        feedback = "\n### Previous attempt (rejected: " + last_error + ")\n" + sql + "\n";
    }
    throw SqlGenerationFailed("no valid SQL after " + std::to_string(ctx.n_retry + 1) +
                              " attempts; last error: " + last_error);
}

RewriteDecision should_rewrite(const SqlCandidate&, const SqlOutcome& preview,
                               const RewriteLimits& limits) {
    if (preview.row_count_total > limits.max_rows) return {true, "row budget"};
    if (static_cast<int>(preview.columns.size()) > limits.max_cols)
        return {true, "column budget"};
    if (preview.truncated) return {true, "truncated preview"};
    return {false, "within limits"};
}

std::string build_rewrite_prompt(const SqlCandidate& candidate, const std::string& subquestion,
                                 const SchemaCatalog& catalog, const std::string& feedback,
                                 const PromptLibrary& prompts) {
    return prompts.render("rewrite", {
                                         {"sql", candidate.sql},
                                         {"subquestion", subquestion},
                                         {"schema", catalog.to_text()},
                                         {"feedback", feedback},
                                     });
}

SqlCandidate rewrite_sql(const SqlCandidate& candidate, const std::string& subquestion,
                         const SchemaCatalog& catalog, const ToolContext& ctx,
                         std::vector<std::string>* warnings) {
    std::string feedback;
    for (int attempt = 0; attempt <= ctx.n_retry; ++attempt) {
        std::string prompt =
            build_rewrite_prompt(candidate, subquestion, catalog, feedback, *ctx.prompts);
        std::string response;
        try {
            response = ctx.gateway->complete(prompt, ctx.chat);
        } catch (const Error& e) {
            if (warnings) warnings->push_back(std::string("rewrite backend failed: ") + e.what());
            break;
        }
        std::string sql = extract_sql_from_response(response);
        ValidationVerdict verdict = validate_sql(sql, catalog);
        if (verdict.ok()) {
            SqlCandidate out;
            out.subquestion = candidate.subquestion;
            out.sql = sql;
            out.generator = candidate.generator;
            out.rewritten_from = candidate.sql;
            return out;
        }
        std::string why = verdict.kind == ValidationVerdict::Kind::ParseError
                              ? "parse error: " + verdict.message
                              : "unknown identifier: " + verdict.name;
        feedback = "\n### Previous attempt (rejected: " + why + ")\n" + sql + "\n";
    }
    if (warnings) {
        warnings->push_back("rewrite failed validation; keeping original SQL for: " +
                            candidate.sql);
    }
    return candidate;
}

// ---------------------------------------------------------------------------
// Report generation
// ---------------------------------------------------------------------------

namespace {

std::string render_outcome_rows(const SqlOutcome& outcome, size_t max_rows) {
    std::ostringstream ss;
    ss << "columns: ";
    for (size_t i = 0; i < outcome.columns.size(); ++i) {
        if (i) ss << ", ";
        ss << outcome.columns[i];
    }
    ss << "\nrows (" << outcome.row_count_total << " total";
    if (outcome.truncated) ss << ", truncated";
    ss << "):\n";
    for (size_t r = 0; r < outcome.rows.size() && r < max_rows; ++r) {
        ss << "  ";
        for (size_t c = 0; c < outcome.rows[r].size(); ++c) {
            if (c) ss << " | ";
            ss << outcome.rows[r][c].dump();
        }
        ss << "\n";
    }
    if (outcome.rows.size() > max_rows) {
        ss << "  ... (" << outcome.rows.size() - max_rows << " more shown rows omitted)\n";
    }
    return ss.str();
}

}  // namespace

std::string bundle_entry_evidence_text(const BundleEntry& entry, size_t index) {
    std::ostringstream ss;
    ss << "[sub-question " << index + 1 << "] " << entry.subquestion << "\n";
    if (!entry.keywords.empty()) {
        ss << "keywords: ";
        for (size_t i = 0; i < entry.keywords.size(); ++i) {
            if (i) ss << ", ";
            ss << entry.keywords[i];
        }
        ss << "\n";
    }
    if (!entry.table_hits.empty()) {
        ss << "table matches: ";
        for (size_t i = 0; i < entry.table_hits.size(); ++i) {
            if (i) ss << ", ";
            ss << entry.table_hits[i].table;
        }
        ss << "\n";
    }
    if (!entry.cell_hits.empty()) {
        ss << "cell matches:\n";
        for (const auto& ch : entry.cell_hits) {
            ss << "  " << ch.cell.table << "." << ch.cell.column << " = " << ch.cell.value << "\n";
        }
    }
    if (entry.sql) {
        ss << "sql: " << entry.sql->sql << "\n";
        if (entry.sql->rewritten_from) ss << "rewritten from: " << *entry.sql->rewritten_from << "\n";
    }
    if (entry.outcome) {
        if (entry.outcome->error) {
            ss << "execution error: " << *entry.outcome->error << "\n";
        } else {
            ss << render_outcome_rows(*entry.outcome, 20);
        }
    }
    if (!entry.sql && entry.table_hits.empty() && entry.cell_hits.empty()) {
        ss << "(no evidence retrieved)\n";
    }
    return ss.str();
}

std::string build_report_prompt(const std::string& question, const SubQuestionSet& subquestions,
                                const RetrievalBundle& bundle, const PromptLibrary& prompts) {
    std::ostringstream subq_text;
    for (size_t i = 0; i < subquestions.items.size(); ++i) {
        subq_text << i + 1 << ". " << subquestions.items[i] << "\n";
    }
    std::ostringstream evidence;
    for (size_t i = 0; i < bundle.entries.size(); ++i) {
        evidence << bundle_entry_evidence_text(bundle.entries[i], i) << "\n";
    }
    return prompts.render("report", {
                                        {"question", question},
                                        {"subquestions", subq_text.str()},
                                        {"evidence", evidence.str()},
                                    });
}

namespace {

// Splits a "SUMMARY: ... FINDING 1: ... FINDING 2: ..." response.
void parse_report_response(const std::string& response, std::string& summary,
                           std::vector<std::string>& findings) {
    summary.clear();
    findings.clear();
    std::string current;
    int section = -1;  // -1 preamble, 0 summary, >0 finding index
    auto flush = [&]() {
        std::string text = trim(current);
        if (section == 0) {
            summary = text;
        } else if (section > 0) {
            findings.resize(std::max(findings.size(), static_cast<size_t>(section)));
            findings[static_cast<size_t>(section - 1)] = text;
        }
        current.clear();
    };
    for (const auto& raw : split(response, '\n')) {
        std::string line = trim(raw);
        std::string upper = lowercase(line);
        if (upper.rfind("summary:", 0) == 0) {
            flush();
            section = 0;
            current = trim(line.substr(8));
            if (!current.empty()) current += "\n";
            continue;
        }
        if (upper.rfind("finding", 0) == 0) {
            size_t colon = line.find(':');
            if (colon != std::string::npos) {
                std::string num = trim(line.substr(7, colon - 7));
                int n = 0;
                for (char c : num)
                    if (std::isdigit(static_cast<unsigned char>(c))) n = n * 10 + (c - '0');
                if (n > 0) {
                    flush();
                    section = n;
                    current = trim(line.substr(colon + 1));
                    if (!current.empty()) current += "\n";
                    continue;
                }
            }
        }
        current += raw;
        current += "\n";
    }
    flush();
    if (summary.empty() && findings.empty()) {
        summary = trim(response);  // unstructured reply: keep it all as summary
    }
}

}  // namespace

Report generate_report(const std::string& question, const SubQuestionSet& subquestions,
                       const RetrievalBundle& bundle, const ToolContext& ctx) {
    if (bundle.entries.empty()) {
        throw std::invalid_argument("generate_report: bundle has no sub-question entries");
    }
    std::string prompt = build_report_prompt(question, subquestions, bundle, *ctx.prompts);
    std::string response = ctx.gateway->complete(prompt, ctx.chat);

    std::string summary;
    std::vector<std::string> model_findings;
    parse_report_response(response, summary, model_findings);

    Report report;
    report.question = question;
    report.summary = summary.empty() ? "(the model returned no summary)" : summary;

    std::ostringstream evidence_md;
    for (size_t i = 0; i < bundle.entries.size(); ++i) {
        const BundleEntry& entry = bundle.entries[i];
        ReportFinding finding;
        finding.subquestion = entry.subquestion;
        std::string text = i < model_findings.size() ? trim(model_findings[i]) : "";
        if (!entry.has_evidence()) {
            finding.text = text.empty() ? kDataGapMarker : text + "\n" + kDataGapMarker;
        } else {
            finding.text = text.empty() ? "(the model returned no finding for this sub-question)"
                                        : text;
            if (entry.sql) finding.citations.push_back("sql:" + std::to_string(i));
            for (const auto& ch : entry.cell_hits) {
                finding.citations.push_back("cell:" + ch.cell.table + "." + ch.cell.column + "=" +
                                            ch.cell.value);
            }
            for (const auto& th : entry.table_hits) {
                finding.citations.push_back("table:" + th.table);
            }
        }
        report.findings.push_back(std::move(finding));

        evidence_md << "## " << i + 1 << ". " << entry.subquestion << "\n\n";
        evidence_md << "```\n" << bundle_entry_evidence_text(entry, i) << "```\n\n";
    }
    report.evidence_md = evidence_md.str();
    return report;
}

// ---------------------------------------------------------------------------
// Markdown round-trip
// ---------------------------------------------------------------------------

std::string Report::to_markdown() const {
    std::ostringstream md;
    md << "# Question\n\n" << question << "\n\n";
    md << "# Summary\n\n" << summary << "\n\n";
    md << "# Findings\n\n";
    for (size_t i = 0; i < findings.size(); ++i) {
        md << "## " << i + 1 << ". " << findings[i].subquestion << "\n\n";
        md << findings[i].text << "\n\n";
        if (!findings[i].citations.empty()) {
            md << "Citations: ";
            for (size_t c = 0; c < findings[i].citations.size(); ++c) {
                if (c) md << ", ";
                md << findings[i].citations[c];
            }
            md << "\n\n";
        }
    }
    md << "# Evidence\n\n" << evidence_md;
    md << "---\ntrace: " << trace_ref << "\n";
    return md.str();
}

Report Report::from_markdown(const std::string& md) {
    Report r;
    enum { None, Question, Summary, Findings, Evidence } section = None;
    std::string buffer;
    ReportFinding* current_finding = nullptr;
    auto flush_scalar = [&](std::string& target) { target = trim(buffer); };

    for (const auto& raw : split(md, '\n')) {
        std::string line = raw;
        if (line.rfind("# Question", 0) == 0) {
            section = Question;
            buffer.clear();
            continue;
        }
        if (line.rfind("# Summary", 0) == 0) {
            flush_scalar(r.question);
            section = Summary;
            buffer.clear();
            continue;
        }
        if (line.rfind("# Findings", 0) == 0) {
            flush_scalar(r.summary);
            section = Findings;
            buffer.clear();
            continue;
        }
        if (line.rfind("# Evidence", 0) == 0) {
            if (current_finding) current_finding->text = trim(buffer);
            section = Evidence;
            buffer.clear();
            continue;
        }
        if (section == Findings && line.rfind("## ", 0) == 0) {
            if (current_finding) current_finding->text = trim(buffer);
            buffer.clear();
            std::string heading = line.substr(3);
            size_t dot = heading.find(". ");
            r.findings.push_back(
                {dot == std::string::npos ? heading : heading.substr(dot + 2), "", {}});
            current_finding = &r.findings.back();
            continue;
        }
        if (section == Findings && current_finding && line.rfind("Citations: ", 0) == 0) {
            for (auto& c : split(line.substr(11), ',')) {
                std::string id = trim(c);
                if (!id.empty()) current_finding->citations.push_back(id);
            }
            continue;
        }
        if (section == Evidence && line.rfind("---", 0) == 0) {
            while (!buffer.empty() && buffer.front() == '\n') buffer.erase(buffer.begin());
            r.evidence_md = buffer;
            buffer.clear();
            continue;
        }
        if (section == Evidence && line.rfind("trace: ", 0) == 0) {
            r.trace_ref = trim(line.substr(7));
            continue;
        }
        buffer += line;
        buffer += "\n";
    }
    return r;
}

}  // namespace repgen
