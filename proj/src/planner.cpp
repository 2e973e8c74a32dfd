#include "repgen/planner.hpp"

#include <chrono>
#include <filesystem>
#include <sstream>

#include "repgen/errors.hpp"
#include "repgen/util.hpp"

namespace repgen {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Trace serialization
// ---------------------------------------------------------------------------

namespace {

json step_to_json(const PlanStep& s, bool canonical) {
    json j;
    j["tool"] = s.tool;
    j["decision_point"] = s.decision_point ? json(*s.decision_point) : json(nullptr);
    j["input_digest"] = s.input_digest;
    j["output_digest"] = s.output_digest;
    j["warnings"] = s.warnings;
    j["degradations"] = s.degradations;
    if (!canonical) j["duration_ms"] = s.duration_ms;
    return j;
}

json trace_to_json_impl(const PlanTrace& t, bool canonical) {
    json j;
    j["question_id"] = t.question_id;
    j["question"] = t.question;
    j["db_id"] = t.db_id;
    j["schema_digest"] = t.schema_digest;
    j["config_digest"] = t.config_digest;
    j["status"] = t.status;
    if (!canonical) j["created_at"] = t.created_at;
    if (t.plan_suggestion) {
        json ds = json::array();
        for (const auto& d : *t.plan_suggestion) {
            ds.push_back(json{{"decision_point", d.decision_point}, {"choice", d.choice}});
        }
        j["plan_suggestion"] = ds;
    } else {
        j["plan_suggestion"] = nullptr;
    }
    json steps = json::array();
    for (const auto& s : t.steps) steps.push_back(step_to_json(s, canonical));
    j["steps"] = steps;
    return j;
}

}  // namespace

json PlanTrace::to_json() const { return trace_to_json_impl(*this, false); }

std::string PlanTrace::canonical_digest() const {
    return digest64_hex(trace_to_json_impl(*this, true).dump());
}

// ---------------------------------------------------------------------------
// Planning decisions
// ---------------------------------------------------------------------------

std::string build_decomposition_judge_prompt(const std::string& question) {
    return "Decide whether the analytical question below must be split into sub-questions "
           "before querying a relational database. Split when it touches several distinct "
           "aspects, needs multi-step reasoning, or compares multiple quantities.\n"
           "Answer YES or NO on the first line, then one sentence of rationale.\n\n"
           "Question: " +
           question + "\n";
}

DecisionOutcome needs_decomposition_heuristic(const std::string& question) {
    std::string lower = lowercase(question);
    int cues = 0;
    auto count_occurrences = [&](const std::string& needle) {
        size_t pos = 0;
        int n = 0;
        while ((pos = lower.find(needle, pos)) != std::string::npos) {
            ++n;
            pos += needle.size();
        }
        return n;
    };
    cues += count_occurrences(" and ");
    cues += count_occurrences(" or ");
    cues += count_occurrences("compare");
    cues += count_occurrences(" versus ");
    cues += count_occurrences(" vs ");
    cues += count_occurrences(", ");
    int tokens = static_cast<int>(content_words(question).size());
    bool value = cues >= 2 || tokens > 25;
    std::ostringstream why;
    why << "heuristic: " << cues << " coordination cue(s), " << tokens << " content token(s)";
    return {value, why.str()};
}

DecisionOutcome needs_decomposition(const std::string& question, const Gateway& gateway,
                                    const ChatParams& params) {
    if (question.empty()) return {false, "empty question"};
    std::string response;
    try {
        response = gateway.complete(build_decomposition_judge_prompt(question), params);
    } catch (const Error&) {
        return needs_decomposition_heuristic(question);
    }
    std::string first_line = lowercase(trim(split(response, '\n').front()));
    if (first_line.rfind("yes", 0) == 0) return {true, trim(response)};
    if (first_line.rfind("no", 0) == 0) return {false, trim(response)};
    return needs_decomposition_heuristic(question);
}

StrategyChoice select_strategy(const std::string&, StrategyMode mode) {
    switch (mode) {
        case StrategyMode::EncodingOnly:
            return {true, false, "forced encoding-only mode"};
        case StrategyMode::SqlOnly:
            return {false, true, "forced sql-only mode"};
        case StrategyMode::Both:
            break;
    }
    return {true, true, "hybrid retrieval: encoding for fuzzy matches, SQL for specifics"};
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

Engine::Engine(RunConfig config, const std::string& db_path, const std::string& out_dir,
               std::shared_ptr<ChatBackend> backend)
    : config_(std::move(config)),
      out_dir_(out_dir),
      db_(Database::open(db_path)),
      catalog_(db_.introspect()),
      gateway_(backend ? std::move(backend) : config_.make_backend()),
      prompts_(config_.templates_dir),
      memory_(config_.memory_enabled
                  ? MemoryStore::persistent(config_.state_dir, out_dir, &gateway_)
                  : MemoryStore::ephemeral(&gateway_)),
      schema_index_(build_schema_index(catalog_, gateway_)),
      cell_index_(build_cell_index(catalog_, db_, config_.per_table_budget, gateway_)) {
    fs::create_directories(fs::path(out_dir_) / "reports");
    fs::create_directories(fs::path(out_dir_) / "trace");
    fs::create_directories(fs::path(out_dir_) / "bundle");
    fs::create_directories(fs::path(out_dir_) / "index");
    save_index(schema_index_.to_json(), (fs::path(out_dir_) / "index" / "schema.json").string());
    save_index(cell_index_.to_json(), (fs::path(out_dir_) / "index" / "cells.json").string());
}

std::string Engine::question_id(const std::string& question) const {
    return digest64_hex(question + "|" + catalog_.digest() + "|" + config_.semantic_digest());
}

ToolContext Engine::tool_context() const {
    ToolContext ctx;
    ctx.gateway = &gateway_;
    ctx.prompts = &prompts_;
    ctx.chat.model_id = config_.chat_model;
    ctx.sql_chat.model_id =
        config_.sql_mode == SqlGenerator::LocalModel ? config_.local_sql_model : config_.chat_model;
    ctx.max_subquestions = config_.max_subquestions;
    ctx.n_retry = config_.n_retry;
    return ctx;
}

AskResult Engine::ask(const std::string& question) {
    if (question.empty()) throw PipelineFailed("empty question");
    std::string qid = question_id(question);

    if (config_.memory_enabled) {
        auto hit = memory_.lookup_qa(question, config_.qa_threshold, catalog_.db_id,
                                     catalog_.digest());
        if (hit && !config_.regenerate_on_hit) return return_memory_hit(question, qid, *hit);
    }
    return run_fresh(question, qid);
}

AskResult Engine::return_memory_hit(const std::string& question, const std::string& qid,
                                    const QaRecord& hit) {
    AskResult result;
    result.memory_hit = true;

    std::string report_md =
        read_file((fs::path(out_dir_) / "reports" / (hit.report_ref + ".md")).string());
    result.report = Report::from_markdown(report_md);

    PlanTrace trace;
    trace.question_id = qid;
    trace.question = question;
    trace.db_id = catalog_.db_id;
    trace.schema_digest = catalog_.digest();
    trace.config_digest = config_.semantic_digest();
    trace.created_at = now_iso8601_utc();
    PlanStep step;
    step.tool = "memory_hit";
    step.input_digest = digest64_hex(question);
    step.output_digest = digest64_hex(report_md);
    step.warnings.push_back("report reused verbatim from memory record " + hit.report_ref);
    trace.steps.push_back(std::move(step));
    trace.status = "ok";

    // The original trace stays in place; hit traces get their own file.
    result.trace_path = (fs::path(out_dir_) / "trace" / (qid + ".hit.json")).string();
    write_file(result.trace_path, trace.to_json().dump(2) + "\n");
    result.report_path = (fs::path(out_dir_) / "reports" / (hit.report_ref + ".md")).string();
    result.report_digest = digest64_hex(report_md);
    result.trace_digest = trace.canonical_digest();
    result.trace = std::move(trace);
    return result;
}

AskResult Engine::run_fresh(const std::string& question, const std::string& qid) {
    PlanTrace trace;
    trace.question_id = qid;
    trace.question = question;
    trace.db_id = catalog_.db_id;
    trace.schema_digest = catalog_.digest();
    trace.config_digest = config_.semantic_digest();
    trace.created_at = now_iso8601_utc();

    try {
        return run_pipeline(question, qid, trace);
    } catch (const PipelineFailed&) {
        throw;
    } catch (const Error& e) {
        trace.status = "failed";
        std::string trace_path = (fs::path(out_dir_) / "trace" / (qid + ".json")).string();
        write_file(trace_path, trace.to_json().dump(2) + "\n");
        throw PipelineFailed(std::string(e.what()) + " (partial trace at " + trace_path + ")");
    }
}

AskResult Engine::run_pipeline(const std::string& question, const std::string& qid,
                               PlanTrace& trace) {
    ToolContext ctx = tool_context();

    if (config_.memory_enabled) {
        trace.plan_suggestion = memory_.suggest_plan(question, config_.plan_threshold,
                                                     catalog_.db_id, catalog_.digest());
    }

    // Each tool invocation becomes exactly one step.
    auto timed_step = [&](const std::string& tool, std::optional<std::string> decision_point,
                          const std::string& input, auto&& fn) {
        auto t0 = std::chrono::steady_clock::now();
        PlanStep step;
        step.tool = tool;
        step.decision_point = std::move(decision_point);
        step.input_digest = digest64_hex(input);
        auto out = fn(step);
        step.duration_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        trace.steps.push_back(step);
        return out;
    };

    // 1. decomposition decision
    DecisionOutcome decide = timed_step(
        "needs_decomposition", "decompose?", question, [&](PlanStep& step) {
            DecisionOutcome d = needs_decomposition(question, gateway_, ctx.chat);
            step.output_digest = digest64_hex((d.value ? "yes|" : "no|") + d.rationale);
            return d;
        });

    SubQuestionSet subquestions;
    subquestions.parent_question = question;
    if (decide.value) {
        const DomainProfile& profile = timed_step(
            "select_domain_profile", std::nullopt, question, [&](PlanStep& step) -> const DomainProfile& {
                const DomainProfile& p = select_domain_profile(question, config_.profiles, gateway_);
                step.output_digest = digest64_hex(p.name);
                return p;
            });
        subquestions = timed_step("decompose", std::nullopt, question, [&](PlanStep& step) {
            std::vector<std::string> warnings;
            SubQuestionSet set = decompose(question, catalog_, profile, ctx, &warnings);
            step.warnings = warnings;
            std::string joined;
            for (const auto& item : set.items) joined += item + "\n";
            step.output_digest = digest64_hex(joined);
            return set;
        });
    } else {
        subquestions.items = {question};
        subquestions.rationale = decide.rationale;
    }
    memory_.put_intermediate(qid, {"subquestions", -1}, json(subquestions.items));

    // 2. per-sub-question retrieval
    RetrievalBundle bundle;
    bundle.question = question;
    bool any_rewrite = false;

    for (size_t i = 0; i < subquestions.items.size(); ++i) {
        const std::string& sq = subquestions.items[i];
        int idx = static_cast<int>(i);
        BundleEntry entry;
        entry.subquestion = sq;

        StrategyChoice strategy = timed_step(
            "select_strategy", "strategy", sq, [&](PlanStep& step) {
                StrategyChoice s = select_strategy(sq, config_.strategy);
                step.output_digest = digest64_hex(std::string(s.use_encoding ? "enc" : "") +
                                                  (s.use_sql ? "sql" : ""));
                return s;
            });

        if (strategy.use_encoding) {
            entry.keywords = timed_step("generate_keywords", std::nullopt, sq, [&](PlanStep& step) {
                auto kws = generate_keywords(sq, ctx);
                std::string joined;
                for (const auto& k : kws) joined += k + ",";
                step.output_digest = digest64_hex(joined);
                return kws;
            });
            memory_.put_intermediate(qid, {"keywords", idx}, json(entry.keywords));

            std::string query_text;
            for (const auto& k : entry.keywords) {
                if (!query_text.empty()) query_text += " ";
                query_text += k;
            }

            entry.table_hits = timed_step(
                "retrieve_tables", std::nullopt, query_text, [&](PlanStep& step) {
                    auto hits = retrieve_tables(query_text, schema_index_, config_.k_tables,
                                                gateway_);
                    std::string joined;
                    for (const auto& h : hits) joined += h.table + ",";
                    step.output_digest = digest64_hex(joined);
                    return hits;
                });
            std::vector<std::string> selected;
            for (const auto& h : entry.table_hits) selected.push_back(h.table);

            entry.cell_hits = timed_step(
                "retrieve_cells", std::nullopt, query_text, [&](PlanStep& step) {
                    auto hits =
                        retrieve_cells(query_text, selected, cell_index_, config_.k_cells, gateway_);
                    std::string joined;
                    for (const auto& h : hits)
                        joined += h.cell.table + "." + h.cell.column + "=" + h.cell.value + ",";
                    step.output_digest = digest64_hex(joined);
                    return hits;
                });
            json hits_j;
            hits_j["tables"] = json::array();
            for (const auto& h : entry.table_hits)
                hits_j["tables"].push_back(json{{"table", h.table}, {"score", h.score}});
            hits_j["cells"] = json::array();
            for (const auto& h : entry.cell_hits) {
                hits_j["cells"].push_back(json{{"table", h.cell.table},
                                               {"column", h.cell.column},
                                               {"value", h.cell.value},
                                               {"score", h.score}});
            }
            memory_.put_intermediate(qid, {"encoding_hits", idx}, hits_j);
        }

        if (strategy.use_sql) {
            std::optional<SqlCandidate> candidate;
            try {
                candidate = timed_step("generate_sql", std::nullopt, sq, [&](PlanStep& step) {
                    SqlCandidate c = generate_sql(sq, catalog_, config_.sql_mode, ctx);
                    step.output_digest = digest64_hex(c.sql);
                    return c;
                });
            } catch (const SqlGenerationFailed& e) {
                PlanStep step;
                step.tool = "generate_sql";
                step.input_digest = digest64_hex(sq);
                step.output_digest = digest64_hex(std::string("error:") + e.what());
                step.warnings.push_back(e.what());
                step.degradations.push_back("sql evidence lost for sub-question " +
                                            std::to_string(i + 1));
                trace.steps.push_back(std::move(step));
                entry.warnings.push_back(std::string("sql generation failed: ") + e.what());
            }

            if (candidate) {
                memory_.put_intermediate(qid, {"sql_raw", idx}, json(candidate->sql));

                SqlOutcome preview = timed_step(
                    "execute_sql", std::nullopt, candidate->sql + "|preview", [&](PlanStep& step) {
                        SqlOutcome o = db_.execute(candidate->sql, config_.preview_row_limit);
                        step.output_digest = digest64_hex(o.to_json().dump());
                        return o;
                    });

                RewriteDecision gate = timed_step(
                    "should_rewrite", "rewrite?", candidate->sql, [&](PlanStep& step) {
                        RewriteDecision d =
                            should_rewrite(*candidate, preview, config_.rewrite_limits);
                        step.output_digest =
                            digest64_hex((d.rewrite ? "true|" : "false|") + d.reason);
                        return d;
                    });

                if (gate.rewrite) {
                    any_rewrite = true;
                    candidate = timed_step("rewrite_sql", std::nullopt, candidate->sql,
                                           [&](PlanStep& step) {
                                               std::vector<std::string> warnings;
                                               SqlCandidate c = rewrite_sql(*candidate, sq,
                                                                            catalog_, ctx, &warnings);
                                               step.warnings = warnings;
                                               step.output_digest = digest64_hex(c.sql);
                                               return c;
                                           });
                    memory_.put_intermediate(qid, {"sql_rewritten", idx}, json(candidate->sql));
                }

                SqlOutcome final_outcome = timed_step(
                    "execute_sql", std::nullopt, candidate->sql + "|final", [&](PlanStep& step) {
                        SqlOutcome o = db_.execute(candidate->sql, config_.final_row_limit);
                        step.output_digest = digest64_hex(o.to_json().dump());
                        if (o.error) {
                            step.warnings.push_back("execution error: " + *o.error);
                            step.degradations.push_back("sql evidence lost for sub-question " +
                                                        std::to_string(i + 1));
                        }
                        return o;
                    });

                entry.sql = *candidate;
                entry.outcome = final_outcome;
                memory_.put_intermediate(qid, {"sql_outcome", idx}, final_outcome.to_json());
            }
        }

        bundle.entries.push_back(std::move(entry));
    }

    // 3. report generation over the stored intermediates
    Report report;
    bool report_failed = false;
    try {
        report = timed_step("generate_report", std::nullopt, question, [&](PlanStep& step) {
            Report r = generate_report(question, subquestions, bundle, ctx);
            step.output_digest = digest64_hex(r.summary);
            return r;
        });
    } catch (const Error& e) {
        report_failed = true;
        bool any_evidence = false;
        for (const auto& entry : bundle.entries)
            if (entry.has_evidence()) any_evidence = true;
        if (!any_evidence) {
            trace.status = "failed";
            std::string trace_path = (fs::path(out_dir_) / "trace" / (qid + ".json")).string();
            write_file(trace_path, trace.to_json().dump(2) + "\n");
            throw PipelineFailed(std::string("no evidence and report generation failed: ") +
                                 e.what() + " (trace at " + trace_path + ")");
        }
        // Degrade: render the report from the evidence alone.
        PlanStep step;
        step.tool = "generate_report";
        step.input_digest = digest64_hex(question);
        step.warnings.push_back(std::string("report backend failed: ") + e.what());
        step.degradations.push_back("report rendered from evidence without model narrative");
        report.question = question;
        report.summary = "Report generation was unavailable; the findings below are rendered "
                         "directly from the retrieved evidence.";
        std::ostringstream evidence_md;
        for (size_t i = 0; i < bundle.entries.size(); ++i) {
            const auto& entry = bundle.entries[i];
            ReportFinding f;
            f.subquestion = entry.subquestion;
            f.text = entry.has_evidence() ? "See the evidence section." : kDataGapMarker;
            if (entry.sql) f.citations.push_back("sql:" + std::to_string(i));
            report.findings.push_back(std::move(f));
            evidence_md << "## " << i + 1 << ". " << entry.subquestion << "\n\n```\n"
                        << bundle_entry_evidence_text(entry, i) << "```\n\n";
        }
        report.evidence_md = evidence_md.str();
        step.output_digest = digest64_hex(report.summary);
        trace.steps.push_back(std::move(step));
    }
    report.trace_ref = qid;

    // 4. status
    bool degraded = report_failed;
    for (const auto& step : trace.steps)
        if (!step.degradations.empty()) degraded = true;
    trace.status = degraded ? "degraded" : "ok";

    // 5. persist artifacts, then memory
    AskResult result;
    std::string report_md = report.to_markdown();
    result.report_path = (fs::path(out_dir_) / "reports" / (qid + ".md")).string();
    write_file(result.report_path, report_md);
    result.trace_path = (fs::path(out_dir_) / "trace" / (qid + ".json")).string();
    write_file(result.trace_path, trace.to_json().dump(2) + "\n");
    result.bundle_path = (fs::path(out_dir_) / "bundle" / (qid + ".json")).string();
    write_file(result.bundle_path, bundle.to_json().dump(2) + "\n");

    if (config_.memory_enabled) {
        memory_.store_qa(question, qid, qid, catalog_.db_id, catalog_.digest());
        std::vector<PlanDecision> decisions{
            {"decompose?", decide.value ? "yes" : "no"},
            {"strategy", strategy_mode_name(config_.strategy)},
            {"rewrite?", any_rewrite ? "yes" : "no"},
        };
        memory_.store_plan(question, decisions, catalog_.db_id, catalog_.digest());
    }

    result.report = std::move(report);
    result.report_digest = digest64_hex(report_md);
    result.trace_digest = trace.canonical_digest();
    result.trace = std::move(trace);
    result.bundle = std::move(bundle);
    return result;
}

}  // namespace repgen
