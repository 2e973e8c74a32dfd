#include "support/fixtures.hpp"

#include <unistd.h>

#include <atomic>
#include <sstream>

#include "repgen/util.hpp"

namespace repgen::testsupport {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    fs::path base = fs::temp_directory_path() / "repgen_tests";
    fs::create_directories(base);
    path_ = (base / (tag + "_" + std::to_string(::getpid()) + "_" +
                     std::to_string(counter.fetch_add(1))))
                .string();
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string TempDir::sub(const std::string& name) const {
    fs::path p = fs::path(path_) / name;
    fs::create_directories(p);
    return p.string();
}

std::string source_dir() { return REPGEN_SOURCE_DIR; }
std::string templates_dir() { return (fs::path(source_dir()) / "templates").string(); }
std::string fixtures_dir() { return (fs::path(source_dir()) / "fixtures").string(); }

std::string make_fixture_db(const TempDir& dir, const std::string& name) {
    std::string path = (fs::path(dir.path()) / name).string();
    std::string script = read_file((fs::path(fixtures_dir()) / "fixture.sql").string());
    Database::create(path, script);
    return path;
}

std::string make_small_fixture_db(const TempDir& dir, const std::string& name) {
    std::string path = (fs::path(dir.path()) / name).string();
    std::ostringstream script;
    script << "CREATE TABLE ed_moneyauthoritybs (Year INTEGER, Month INTEGER, "
              "GovernmentSavings REAL, ForeignLiabilities REAL);\n";
    for (int i = 0; i < 40; ++i) {
        int year = 2021 + i / 12;
        int month = 1 + i % 12;
        script << "INSERT INTO ed_moneyauthoritybs VALUES (" << year << ", " << month << ", "
               << 1500.0 + i * 4.5 << ", " << 600.0 + i * 1.5 << ");\n";
    }
    script << "CREATE TABLE regions (id INTEGER, name TEXT, gdp REAL, year INTEGER);\n";
    for (int i = 0; i < 12; ++i) {
        script << "INSERT INTO regions VALUES (" << i + 1 << ", 'r" << i % 4 << "', "
               << 4000.0 + i * 120.0 << ", " << 2021 + i / 4 << ");\n";
    }
    script << "CREATE TABLE accounts (id INTEGER, region_id INTEGER, balance REAL, opened TEXT);\n"
              "INSERT INTO accounts VALUES (1, 1, 1000.0, '2021-01-01');\n";
    Database::create(path, script.str());
    return path;
}

std::string make_mini_db(const TempDir& dir, const std::string& name) {
    std::string path = (fs::path(dir.path()) / name).string();
    Database::create(path,
                     "CREATE TABLE accounts (id INTEGER, region_id INTEGER, balance REAL);\n"
                     "INSERT INTO accounts VALUES (1, 1, 120.5), (2, 1, 80.0), (3, 2, 44.25);\n"
                     "CREATE TABLE loans (id INTEGER, account_id INTEGER, amount REAL);\n"
                     "INSERT INTO loans VALUES (1, 1, 900.0), (2, 3, 1500.0);\n"
                     "CREATE TABLE regions (id INTEGER, name TEXT);\n"
                     "INSERT INTO regions VALUES (1, 'north'), (2, 'south');\n");
    return path;
}

RunConfig test_config(const TempDir& dir) {
    RunConfig config = RunConfig::defaults();
    config.backend = BackendKind::Mock;
    config.mock_echo = true;
    config.mock_strict = false;
    config.seed = 42;
    config.seed_set = true;
    config.templates_dir = templates_dir();
    config.state_dir = (fs::path(dir.path()) / "state").string();
    config.memory_enabled = false;
    return config;
}

std::string RuleResponder::operator()(const std::string& prompt) const {
    for (const auto& rule : rules_) {
        bool all = true;
        for (const auto& needle : rule.needles) {
            if (prompt.find(needle) == std::string::npos) {
                all = false;
                break;
            }
        }
        if (all) return rule.response;
    }
    return MockBackend::fallback_echo(prompt);
}

const char* const kFixtureQuestion =
    "How do key financial indicators in China's central bank and regional economies, "
    "including foreign liabilities, government deposits, and GDP, compare over the previous "
    "year, and what insights can be gained from this comparison?";

const char* const kDepositsSubquestion =
    "What are the government deposit trends over the past year?";

const char* const kDepositsSql = "SELECT GovernmentSavings FROM ed_moneyauthoritybs;";

const char* const kDepositsRewrittenSql =
    "SELECT Year, SUM(GovernmentSavings) AS TotalSavings FROM ed_moneyauthoritybs GROUP BY Year;";

std::vector<Rule> fixture_scenario_rules() {
    std::vector<Rule> rules;

    // report (checked first: its prompt embeds everything else)
    rules.push_back(
        {{"Respond in exactly this layout"},
         "SUMMARY:\n"
         "Government savings rose steadily while regional GDP expanded and foreign "
         "liabilities grew modestly, so the central bank position strengthened relative to "
         "its obligations over the period.\n"
         "FINDING 1:\n"
         "Aggregated by year, total government savings increase monotonically across the "
         "observed window.\n"
         "FINDING 2:\n"
         "Regional GDP rises in every region, with the coastal and central regions leading.\n"
         "FINDING 3:\n"
         "Average foreign liabilities to the central bank grow slowly, well below the pace "
         "of government savings.\n"});

    // rewrites
    rules.push_back({{"### Rewritten SQL", "SELECT GovernmentSavings FROM ed_moneyauthoritybs;"},
                     kDepositsRewrittenSql});
    rules.push_back({{"### Rewritten SQL", "SELECT ForeignLiabilities FROM ed_moneyauthoritybs;"},
                     "SELECT Year, AVG(ForeignLiabilities) AS AvgForeignLiabilities FROM "
                     "ed_moneyauthoritybs GROUP BY Year;"});

    // text-to-SQL per sub-question
    rules.push_back({{"### SQL", "government deposit trends"}, kDepositsSql});
    rules.push_back({{"### SQL", "GDP evolved"}, "SELECT year, name, gdp FROM regions;"});
    rules.push_back({{"### SQL", "foreign liabilities"},
                     "SELECT ForeignLiabilities FROM ed_moneyauthoritybs;"});

    // keywords per sub-question
    rules.push_back({{"Keywords:", "government deposit trends"},
                     "government deposits, savings trend"});
    rules.push_back({{"Keywords:", "GDP evolved"}, "gdp, regional economies"});
    rules.push_back({{"Keywords:", "foreign liabilities"}, "foreign liabilities, central bank"});

    // decomposition of the fixture question
    rules.push_back(
        {{"Break the analytical question", "foreign liabilities, government deposits, and GDP"},
         "1. What are the government deposit trends over the past year?\n"
         "2. How has GDP evolved over the past year in regional economies?\n"
         "3. How have foreign liabilities to the central bank changed in the past year?"});

    // decomposition judge
    rules.push_back(
        {{"Answer YES or NO", "foreign liabilities, government deposits, and GDP"},
         "YES: it spans several indicators, a temporal comparison and an insight request."});
    rules.push_back({{"Answer YES or NO", "government deposit trends"},
                     "NO: a single measure over a single period."});

    return rules;
}

}  // namespace repgen::testsupport
