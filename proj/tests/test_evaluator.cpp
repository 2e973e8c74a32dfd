#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "repgen/errors.hpp"
#include "repgen/evaluator.hpp"
#include "repgen/util.hpp"
#include "support/fixtures.hpp"

using namespace repgen;
namespace ts = repgen::testsupport;
namespace fs = std::filesystem;

namespace {

Gateway scripted_gateway(std::map<std::string, std::string> script, bool strict = false) {
    return Gateway(std::make_shared<MockBackend>(MockOptions{42, 64, strict, std::move(script)}));
}

RetrievalBundle paper_bundle() {
    RetrievalBundle bundle;
    bundle.question = "Q";
    BundleEntry e;
    e.subquestion = "deposits";
    e.sql = SqlCandidate{"deposits",
                         "SELECT Year, SUM(GovernmentSavings) AS TotalSavings FROM "
                         "ed_moneyauthoritybs GROUP BY Year",
                         SqlGenerator::PromptApi,
                         std::string("SELECT GovernmentSavings FROM ed_moneyauthoritybs;")};
    SqlOutcome o;
    o.columns = {"Year", "TotalSavings"};
    o.row_count_total = 10;
    e.outcome = o;
    bundle.entries.push_back(e);
    return bundle;
}

}  // namespace

// --- prf ------------------------------------------------------------------------

TEST_CASE("prf hand vectors") {
    Prf r = prf({"a", "b"}, {"b", "c"});
    CHECK(r.p == doctest::Approx(0.5));
    CHECK(r.r == doctest::Approx(0.5));
    CHECK(r.f1 == doctest::Approx(0.5));

    Prf perfect = prf({"x", "y"}, {"x", "y"});
    CHECK(perfect.p == 1.0);
    CHECK(perfect.r == 1.0);
    CHECK(perfect.f1 == 1.0);

    Prf empty_pred = prf({}, {"x"});
    CHECK(empty_pred.p == 0.0);
    CHECK(empty_pred.r == 0.0);
    CHECK(empty_pred.f1 == 0.0);

    Prf both_empty = prf({}, {});
    CHECK(both_empty.f1 == 0.0);
}

TEST_CASE("prf equals a counting oracle and respects bounds (property)") {
    std::mt19937_64 rng(7);
    for (int iter = 0; iter < 500; ++iter) {
        std::set<std::string> pred, gold;
        int universe = 1 + static_cast<int>(rng() % 12);
        for (int e = 0; e < universe; ++e) {
            std::string name = "e" + std::to_string(e);
            if (rng() % 2) pred.insert(name);
            if (rng() % 2) gold.insert(name);
        }
        // element-by-element counting oracle
        int inter = 0;
        for (const auto& p : pred) inter += gold.count(p) ? 1 : 0;
        double op = pred.empty() ? 0.0 : double(inter) / pred.size();
        double orc = gold.empty() ? 0.0 : double(inter) / gold.size();
        double of1 = (op + orc) == 0 ? 0.0 : 2 * op * orc / (op + orc);

        Prf got = prf(pred, gold);
        CHECK(got.p == op);
        CHECK(got.r == orc);
        CHECK(got.f1 == of1);
        // bounds: 0 <= f1 <= (p+r)/2 and min <= f1 <= max
        CHECK(got.f1 >= 0.0);
        CHECK(got.f1 <= (got.p + got.r) / 2.0 + 1e-15);
        CHECK(got.f1 >= std::min(got.p, got.r) - 1e-15);
        CHECK(got.f1 <= std::max(got.p, got.r) + 1e-15);
    }
}

// --- extraction -------------------------------------------------------------------

TEST_CASE("extract_predictions on the rewritten worked-example query") {
    Predictions p = extract_predictions(paper_bundle(), "ok");
    CHECK(p.tables.count("ed_moneyauthoritybs") == 1);
    CHECK(p.columns.count("ed_moneyauthoritybs.year") == 1);
    CHECK(p.columns.count("ed_moneyauthoritybs.governmentsavings") == 1);
    CHECK(p.columns.count("ed_moneyauthoritybs.totalsavings") == 0);
}

TEST_CASE("extract_predictions: empty bundle yields empty sets") {
    RetrievalBundle bundle;
    bundle.question = "Q";
    Predictions p = extract_predictions(bundle, "ok");
    CHECK(p.tables.empty());
    CHECK(p.columns.empty());
}

TEST_CASE("extract_predictions: a single cell hit contributes (t, t.c)") {
    RetrievalBundle bundle;
    bundle.question = "Q";
    BundleEntry e;
    e.subquestion = "s";
    e.cell_hits.push_back({CellRef{"Regions", "GDP", "5"}, 0.4});
    bundle.entries.push_back(e);
    Predictions p = extract_predictions(bundle, "ok");
    CHECK(p.tables.count("regions") == 1);
    CHECK(p.columns.count("regions.gdp") == 1);
}

TEST_CASE("extract_predictions rejects failed traces; bad SQL is skipped with warning") {
    CHECK_THROWS_AS(extract_predictions(paper_bundle(), "failed"), std::invalid_argument);

    RetrievalBundle bundle;
    bundle.question = "Q";
    BundleEntry e;
    e.subquestion = "s";
    e.sql = SqlCandidate{"s", "DROP TABLE x", SqlGenerator::PromptApi, {}};
    bundle.entries.push_back(e);
    Predictions p = extract_predictions(bundle, "ok");
    CHECK(p.tables.empty());
    REQUIRE(!p.warnings.empty());
}

// --- judge parsing & judged metrics -------------------------------------------------

TEST_CASE("parse_judge_score clamps and scans") {
    CHECK(*parse_judge_score("7") == 7.0);
    CHECK(*parse_judge_score("Score: 8/10") == 8.0);
    CHECK(*parse_judge_score("11") == 10.0);
    CHECK(*parse_judge_score("-2") == 0.0);
    CHECK(*parse_judge_score("6.5 because reasons") == 6.5);
    CHECK(!parse_judge_score("no digits here").has_value());
}

TEST_CASE("context_relevance: scripted judge replies") {
    RetrievalBundle bundle = paper_bundle();
    std::string prompt = build_context_relevance_prompt("Q", bundle);
    Gateway judge = scripted_gateway({{MockBackend::prompt_digest(prompt), "7"}});
    CHECK(context_relevance("Q", bundle, judge, {}) == 7.0);

    Gateway clamped = scripted_gateway({{MockBackend::prompt_digest(prompt), "11"}});
    CHECK(context_relevance("Q", bundle, clamped, {}) == 10.0);
}

TEST_CASE("context_relevance: prose twice raises UnparseableScore") {
    RetrievalBundle bundle = paper_bundle();
    std::string prompt = build_context_relevance_prompt("Q", bundle);
    std::string reprompt =
        prompt + "\nYour previous reply had no score. Reply with a single number from 0 to 10.";
    Gateway judge = scripted_gateway({{MockBackend::prompt_digest(prompt), "mostly fine"},
                                      {MockBackend::prompt_digest(reprompt), "pretty good"}});
    CHECK_THROWS_AS(context_relevance("Q", bundle, judge, {}), UnparseableScore);
}

TEST_CASE("context_relevance: dead judge raises JudgeUnavailable") {
    RetrievalBundle bundle = paper_bundle();
    Gateway judge = scripted_gateway({}, /*strict=*/true);
    CHECK_THROWS_AS(context_relevance("Q", bundle, judge, {}), JudgeUnavailable);
}

TEST_CASE("report_accuracy embeds the gold report and clamps") {
    std::string prompt = build_accuracy_prompt("Q", "report body", std::string("gold body"));
    CHECK(prompt.find("gold body") != std::string::npos);
    Gateway judge = scripted_gateway({{MockBackend::prompt_digest(prompt), "6"}});
    CHECK(report_accuracy("Q", "report body", std::string("gold body"), judge, {}) == 6.0);

    Gateway neg = scripted_gateway({{MockBackend::prompt_digest(prompt), "-2"}});
    CHECK(report_accuracy("Q", "report body", std::string("gold body"), neg, {}) == 0.0);
}

TEST_CASE("report_accuracy: rubric-follower ranks the faithful report above garbage") {
    // ordinal check with two scripted judgments
    std::string good_prompt = build_accuracy_prompt("Q", "faithful report", std::nullopt);
    std::string bad_prompt = build_accuracy_prompt("Q", "garbage words", std::nullopt);
    Gateway judge = scripted_gateway({{MockBackend::prompt_digest(good_prompt), "9"},
                                      {MockBackend::prompt_digest(bad_prompt), "2"}});
    double good = report_accuracy("Q", "faithful report", std::nullopt, judge, {});
    double bad = report_accuracy("Q", "garbage words", std::nullopt, judge, {});
    CHECK(good >= bad);
}

// --- report relevance ------------------------------------------------------------

namespace {

// embeddings rigged so generated questions g1/g2 sit at cosine 0.8/0.6 from Q
class RiggedBackend : public ChatBackend {
public:
    explicit RiggedBackend(std::string questions_reply)
        : reply_(std::move(questions_reply)) {}
    std::string complete(const std::string&, const ChatParams&) override { return reply_; }
    std::vector<double> embed_raw(const std::string& text) override {
        if (text == "g1") return {0.8, 0.6, 0.0, 0.0};
        if (text == "g2") return {0.6, 0.8, 0.0, 0.0};
        if (text == "orthogonal") return {0.0, 0.0, 1.0, 0.0};
        return {1.0, 0.0, 0.0, 0.0};  // the original question Q
    }
    std::string encoder_id() const override { return "rigged-4"; }

private:
    std::string reply_;
};

}  // namespace

TEST_CASE("report_relevance: mean of clamped cosines x 10") {
    Gateway gw(std::make_shared<RiggedBackend>("1. g1\n2. g2"));
    double score = report_relevance("Q", "report", 2, gw, {});
    CHECK(score == doctest::Approx(7.0).epsilon(1e-9));
}

TEST_CASE("report_relevance: identical questions score 10, orthogonal score 0") {
    Gateway same(std::make_shared<RiggedBackend>("1. Q\n2. Q\n3. Q"));
    CHECK(report_relevance("Q", "report", 3, same, {}) == doctest::Approx(10.0).epsilon(1e-12));

    Gateway ortho(std::make_shared<RiggedBackend>("1. orthogonal"));
    CHECK(report_relevance("Q", "report", 1, ortho, {}) == 0.0);
}

TEST_CASE("report_relevance is permutation-invariant in the generated list") {
    Gateway fwd(std::make_shared<RiggedBackend>("1. g1\n2. g2"));
    Gateway rev(std::make_shared<RiggedBackend>("1. g2\n2. g1"));
    CHECK(report_relevance("Q", "r", 2, fwd, {}) ==
          doctest::Approx(report_relevance("Q", "r", 2, rev, {})).epsilon(1e-12));
}

TEST_CASE("report_relevance: fewer parsed questions warn; none parsed raises") {
    Gateway fewer(std::make_shared<RiggedBackend>("1. g1"));
    std::vector<std::string> warnings;
    report_relevance("Q", "r", 3, fewer, {}, &warnings);
    REQUIRE(warnings.size() == 1);

    Gateway none(std::make_shared<RiggedBackend>("no numbering"));
    CHECK_THROWS_AS(report_relevance("Q", "r", 2, none, {}), NoQuestionsParsed);
}

// --- aggregation -------------------------------------------------------------------

TEST_CASE("aggregate: single record is itself") {
    MetricScores one;
    one.table_f1 = 0.4;
    one.accuracy = 6.0;
    EvalSummary s = aggregate({one});
    CHECK(s.n == 1);
    CHECK(s.means.table_f1 == 0.4);
    CHECK(s.means.accuracy == 6.0);
}

TEST_CASE("aggregate: mean reported x100 for prf fields") {
    MetricScores a, b;
    a.table_f1 = 0.4;
    b.table_f1 = 0.6;
    EvalSummary s = aggregate({a, b});
    CHECK(s.means.table_f1 == doctest::Approx(0.5));
    CHECK(s.to_json().at("table_f1_pct").get<double>() == doctest::Approx(50.0));
    CHECK(s.to_text_table().find("table_f1") != std::string::npos);
}

TEST_CASE("aggregate: empty input raises") {
    CHECK_THROWS_AS(aggregate({}), EmptyInput);
}

// --- harness ------------------------------------------------------------------------

namespace {

void write_gold_line(std::ostream& out, const std::string& id, const std::string& question,
                     const std::vector<std::string>& tables,
                     const std::vector<std::string>& columns, const std::string& sql) {
    nlohmann::json j{{"id", id},
                     {"db_id", "fixture"},
                     {"question", question},
                     {"enhanced_question", question},
                     {"gold_tables", tables},
                     {"gold_columns", columns},
                     {"gold_sqls", std::vector<std::string>{sql}},
                     {"gold_report", "gold"},
                     {"review_status", "approved"}};
    out << j.dump() << "\n";
}

}  // namespace

TEST_CASE("run_eval: perfect predictions score F1 100; judges degrade to zero offline") {
    ts::TempDir dir("eval");
    std::string dataset = (fs::path(dir.path()) / "gold.jsonl").string();
    {
        std::ofstream out(dataset);
        for (int i = 1; i <= 3; ++i) {
            std::string id = "g" + std::to_string(i);
            write_gold_line(out, id, "q" + std::to_string(i), {"loans"}, {"loans.amount"},
                            "SELECT amount FROM loans");
        }
    }
    // craft predictions that extract to exactly the gold sets
    std::string pred = dir.sub("pred");
    fs::create_directories(fs::path(pred) / "bundle");
    for (int i = 1; i <= 3; ++i) {
        RetrievalBundle bundle;
        bundle.question = "q" + std::to_string(i);
        BundleEntry e;
        e.subquestion = bundle.question;
        e.sql = SqlCandidate{e.subquestion, "SELECT amount FROM loans", SqlGenerator::PromptApi, {}};
        bundle.entries.push_back(e);
        write_file((fs::path(pred) / "bundle" / ("g" + std::to_string(i) + ".json")).string(),
                   bundle.to_json().dump() + "\n");
    }

    EvalOptions options;
    options.dataset_path = dataset;
    options.predictions_dir = pred;
    options.out_dir = dir.sub("evalout");
    RunConfig config = ts::test_config(dir);

    EvalRunResult result = run_eval(options, config);
    CHECK(result.exit_code == 0);
    CHECK(result.summary.n == 3);
    CHECK(result.summary.means.table_f1 == doctest::Approx(1.0));
    CHECK(result.summary.means.column_f1 == doctest::Approx(1.0));
    CHECK(fs::exists(fs::path(options.out_dir) / "scores.jsonl"));
    CHECK(fs::exists(fs::path(options.out_dir) / "summary.json"));
    CHECK(fs::exists(fs::path(options.out_dir) / "summary.txt"));
}

TEST_CASE("run_eval: missing prediction scores zeros with a warning") {
    ts::TempDir dir("eval_missing");
    std::string dataset = (fs::path(dir.path()) / "gold.jsonl").string();
    {
        std::ofstream out(dataset);
        write_gold_line(out, "only", "q", {"loans"}, {"loans.amount"}, "SELECT amount FROM loans");
    }
    EvalOptions options;
    options.dataset_path = dataset;
    options.predictions_dir = dir.sub("pred");
    options.out_dir = dir.sub("out");
    EvalRunResult result = run_eval(options, ts::test_config(dir));
    CHECK(result.summary.means.table_f1 == 0.0);
    REQUIRE(!result.warnings.empty());
    CHECK(result.warnings[0].find("missing prediction") != std::string::npos);
}

TEST_CASE("run_eval: corrupt dataset line is named") {
    ts::TempDir dir("eval_corrupt");
    std::string dataset = (fs::path(dir.path()) / "gold.jsonl").string();
    write_file(dataset, "{\"id\":\"a\",\"question\":\"q\"}\nnot json at all\n");
    EvalOptions options;
    options.dataset_path = dataset;
    options.predictions_dir = dir.sub("pred");
    options.out_dir = dir.sub("out");
    try {
        run_eval(options, ts::test_config(dir));
        FAIL("expected ParseFailure");
    } catch (const ParseFailure& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}
