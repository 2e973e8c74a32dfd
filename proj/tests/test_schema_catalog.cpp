#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "repgen/errors.hpp"
#include "repgen/schema_catalog.hpp"
#include "repgen/util.hpp"
#include "support/fixtures.hpp"

using namespace repgen;
namespace ts = repgen::testsupport;

TEST_CASE("introspect lists fixture tables in storage order") {
    ts::TempDir dir("catalog");
    Database db = Database::open(ts::make_mini_db(dir));
    SchemaCatalog catalog = db.introspect();

    REQUIRE(catalog.tables.size() == 3);
    CHECK(catalog.tables[0].name == "accounts");
    CHECK(catalog.tables[1].name == "loans");
    CHECK(catalog.tables[2].name == "regions");
    CHECK(catalog.db_id == "mini");

    const TableSchema& accounts = catalog.tables[0];
    REQUIRE(accounts.columns.size() == 3);
    CHECK(accounts.columns[0].name == "id");
    CHECK(accounts.columns[0].data_type == ColumnType::Integer);
    CHECK(accounts.columns[2].name == "balance");
    CHECK(accounts.columns[2].data_type == ColumnType::Real);
    CHECK(accounts.row_count == 3);

    CHECK(catalog.tables[2].columns[1].data_type == ColumnType::Text);
}

TEST_CASE("introspect is idempotent") {
    ts::TempDir dir("catalog");
    std::string path = ts::make_mini_db(dir);
    SchemaCatalog a = Database::open(path).introspect();
    SchemaCatalog b = Database::open(path).introspect();
    CHECK(a.to_text() == b.to_text());
    CHECK(a.digest() == b.digest());
}

TEST_CASE("introspect minimal one-table database") {
    ts::TempDir dir("catalog");
    std::string path = (std::filesystem::path(dir.path()) / "one.db").string();
    Database::create(path, "CREATE TABLE t (x INTEGER); INSERT INTO t VALUES (1);");
    SchemaCatalog catalog = Database::open(path).introspect();
    REQUIRE(catalog.tables.size() == 1);
    REQUIRE(catalog.tables[0].columns.size() == 1);
}

TEST_CASE("opening a non-database file raises ConnectionFailed") {
    ts::TempDir dir("catalog");
    std::string path = (std::filesystem::path(dir.path()) / "junk.db").string();
    write_file(path, "this is definitely not a sqlite file, just plain text filler bytes");
    CHECK_THROWS_AS(Database::open(path), ConnectionFailed);
}

TEST_CASE("opening a missing file raises ConnectionFailed") {
    CHECK_THROWS_AS(Database::open("/nonexistent/path/nope.db"), ConnectionFailed);
}

TEST_CASE("empty database raises EmptyDatabase") {
    ts::TempDir dir("catalog");
    std::string path = (std::filesystem::path(dir.path()) / "empty.db").string();
    Database::create(path, "");
    CHECK_THROWS_AS(Database::open(path).introspect(), EmptyDatabase);
}

TEST_CASE("execute: SELECT 1") {
    ts::TempDir dir("catalog");
    Database db = Database::open(ts::make_mini_db(dir));
    SqlOutcome out = db.execute("SELECT 1", 50);
    REQUIRE(!out.error);
    REQUIRE(out.rows.size() == 1);
    REQUIRE(out.columns.size() == 1);
    CHECK(out.rows[0][0].get<long long>() == 1);
    CHECK(out.truncated == false);
    CHECK(out.row_count_total == 1);
}

TEST_CASE("execute: row limit truncates and reports the full count") {
    ts::TempDir dir("catalog");
    Database db = Database::open(ts::make_fixture_db(dir));
    SqlOutcome out = db.execute("SELECT GovernmentSavings FROM ed_moneyauthoritybs", 50);
    REQUIRE(!out.error);
    CHECK(out.rows.size() == 50);
    CHECK(out.truncated == true);
    CHECK(out.row_count_total == 120);
}

TEST_CASE("execute: truncated=false means rows == row_count_total") {
    ts::TempDir dir("catalog");
    Database db = Database::open(ts::make_mini_db(dir));
    SqlOutcome out = db.execute("SELECT id FROM accounts", 50);
    REQUIRE(!out.truncated);
    CHECK(static_cast<long long>(out.rows.size()) == out.row_count_total);
}

TEST_CASE("execute: engine-level failure is captured, not thrown") {
    ts::TempDir dir("catalog");
    Database db = Database::open(ts::make_mini_db(dir));
    // integer overflow raises a runtime error inside the engine
    SqlOutcome out = db.execute("SELECT abs(-9223372036854775808)", 50);
    REQUIRE(out.error.has_value());
    CHECK(out.rows.empty());
    CHECK(out.columns.empty());
}

TEST_CASE("execute: division by zero yields NULL under this engine") {
    // The embedded engine defines x/0 as NULL rather than an error; the
    // error-capture path is exercised by the overflow case above.
    ts::TempDir dir("catalog");
    Database db = Database::open(ts::make_mini_db(dir));
    SqlOutcome out = db.execute("SELECT 1/0", 50);
    REQUIRE(!out.error);
    REQUIRE(out.rows.size() == 1);
    CHECK(out.rows[0][0].is_null());
}

TEST_CASE("SqlOutcome JSON round-trip") {
    ts::TempDir dir("catalog");
    Database db = Database::open(ts::make_mini_db(dir));
    SqlOutcome out = db.execute("SELECT id, balance FROM accounts", 2);
    SqlOutcome back = SqlOutcome::from_json(out.to_json());
    CHECK(back.to_json() == out.to_json());
    CHECK(back.truncated == out.truncated);
    CHECK(back.row_count_total == out.row_count_total);
}

TEST_CASE("sample_cells: empty table yields nothing") {
    ts::TempDir dir("catalog");
    std::string path = (std::filesystem::path(dir.path()) / "e.db").string();
    Database::create(path, "CREATE TABLE empty_t (a INTEGER, b TEXT);");
    Database db = Database::open(path);
    SchemaCatalog catalog = db.introspect();
    CHECK(db.sample_cells(catalog.tables[0], 10).empty());
}

TEST_CASE("sample_cells: budget covering all cells returns them row-major") {
    ts::TempDir dir("catalog");
    std::string path = (std::filesystem::path(dir.path()) / "s.db").string();
    Database::create(path,
                     "CREATE TABLE t (a INTEGER, b TEXT);"
                     "INSERT INTO t VALUES (1, 'x'), (2, 'y');");
    Database db = Database::open(path);
    SchemaCatalog catalog = db.introspect();
    auto cells = db.sample_cells(catalog.tables[0], 4);
    REQUIRE(cells.size() == 4);
    CHECK(cells[0] == CellRef{"t", "a", "1"});
    CHECK(cells[1] == CellRef{"t", "b", "x"});
    CHECK(cells[2] == CellRef{"t", "a", "2"});
    CHECK(cells[3] == CellRef{"t", "b", "y"});
}

TEST_CASE("sample_cells: budget cuts the deterministic traversal") {
    ts::TempDir dir("catalog");
    std::string path = (std::filesystem::path(dir.path()) / "s10.db").string();
    std::string script = "CREATE TABLE t (a INTEGER, b INTEGER, c INTEGER);";
    for (int i = 0; i < 10; ++i) {
        script += "INSERT INTO t VALUES (" + std::to_string(100 + i) + ", " +
                  std::to_string(200 + i) + ", " + std::to_string(300 + i) + ");";
    }
    Database::create(path, script);
    Database db = Database::open(path);
    SchemaCatalog catalog = db.introspect();
    auto cells = db.sample_cells(catalog.tables[0], 5);
    // first 5 cells of the row-major traversal (all values distinct)
    REQUIRE(cells.size() == 5);
    CHECK(cells[0] == CellRef{"t", "a", "100"});
    CHECK(cells[1] == CellRef{"t", "b", "200"});
    CHECK(cells[2] == CellRef{"t", "c", "300"});
    CHECK(cells[3] == CellRef{"t", "a", "101"});
    CHECK(cells[4] == CellRef{"t", "b", "201"});
}

TEST_CASE("sample_cells: duplicate values are skipped") {
    ts::TempDir dir("catalog");
    std::string path = (std::filesystem::path(dir.path()) / "dup.db").string();
    Database::create(path,
                     "CREATE TABLE t (a INTEGER);"
                     "INSERT INTO t VALUES (7), (7), (8);");
    Database db = Database::open(path);
    SchemaCatalog catalog = db.introspect();
    auto cells = db.sample_cells(catalog.tables[0], 10);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].value == "7");
    CHECK(cells[1].value == "8");
}
