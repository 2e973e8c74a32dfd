#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "repgen/llm_gateway.hpp"
#include "repgen/run_config.hpp"
#include "repgen/schema_catalog.hpp"

namespace repgen::testsupport {

// Unique scratch directory under the build tree; removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::string& path() const { return path_; }
    std::string sub(const std::string& name) const;

private:
    std::string path_;
};

std::string source_dir();
std::string templates_dir();
std::string fixtures_dir();

// The bundled multi-table finance fixture (ed_moneyauthoritybs 120 rows,
// regions, accounts, loans), materialized from fixtures/fixture.sql.
std::string make_fixture_db(const TempDir& dir, const std::string& name = "fixture.db");

// Same schema with a 40-row ed_moneyauthoritybs (below the rewrite budget).
std::string make_small_fixture_db(const TempDir& dir, const std::string& name = "fixture.db");

// Minimal three-table db {accounts, loans, regions} for catalog tests.
std::string make_mini_db(const TempDir& dir, const std::string& name = "mini.db");

// Baseline config for offline tests: permissive mock, seed 42, templates
// from the source tree, memory off.
RunConfig test_config(const TempDir& dir);

// Substring-rule chat responder: first rule whose needles all appear in the
// prompt wins; otherwise the mock fallback echo. Deterministic, and
// recordable into a strict mock script.
struct Rule {
    std::vector<std::string> needles;
    std::string response;
};

class RuleResponder {
public:
    explicit RuleResponder(std::vector<Rule> rules) : rules_(std::move(rules)) {}
    std::string operator()(const std::string& prompt) const;

private:
    std::vector<Rule> rules_;
};

// The worked government-deposits scenario: a three-way decomposition over
// the finance fixture, with the deposits SQL gated into a GROUP BY rewrite.
extern const char* const kFixtureQuestion;
extern const char* const kDepositsSubquestion;
extern const char* const kDepositsSql;
extern const char* const kDepositsRewrittenSql;

std::vector<Rule> fixture_scenario_rules();

}  // namespace repgen::testsupport
