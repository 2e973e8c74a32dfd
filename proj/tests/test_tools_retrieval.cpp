#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "repgen/errors.hpp"
#include "repgen/tools.hpp"
#include "repgen/util.hpp"
#include "support/fixtures.hpp"

using namespace repgen;
namespace ts = repgen::testsupport;

namespace {

Gateway mock_gateway(std::uint64_t seed = 42) {
    return Gateway(std::make_shared<MockBackend>(MockOptions{seed, 64, false, {}}));
}

Gateway scripted_gateway(std::map<std::string, std::string> script) {
    return Gateway(std::make_shared<MockBackend>(MockOptions{42, 64, false, std::move(script)}));
}

ToolContext make_ctx(const Gateway& gw, const PromptLibrary& prompts) {
    ToolContext ctx;
    ctx.gateway = &gw;
    ctx.prompts = &prompts;
    return ctx;
}

// brute-force oracle: exhaustive cosine scan, stable sort with the same tie
// rules, computed independently of the retrieval implementation
std::vector<TableHit> oracle_tables(const std::string& query, const SchemaIndex& index, int k,
                                    const Gateway& gw) {
    EmbeddingVector qe = gw.embed(query);
    std::vector<TableHit> all;
    for (const auto& e : index.entries) {
        double dot = 0;
        for (size_t i = 0; i < qe.dims(); ++i) dot += qe.values[i] * e.embedding.values[i];
        all.push_back({e.table, std::clamp(dot, -1.0, 1.0)});
    }
    std::stable_sort(all.begin(), all.end(), [](const TableHit& a, const TableHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.table < b.table;
    });
    if (static_cast<int>(all.size()) > k) all.resize(static_cast<size_t>(k));
    return all;
}

}  // namespace

TEST_CASE("select_domain_profile: single profile wins by default") {
    Gateway gw = mock_gateway();
    std::vector<DomainProfile> registry{{"only", {"anything"}, "", std::nullopt}};
    CHECK(select_domain_profile("whatever", registry, gw).name == "only");
}

TEST_CASE("select_domain_profile: empty registry raises") {
    Gateway gw = mock_gateway();
    CHECK_THROWS_AS(select_domain_profile("q", {}, gw), EmptyRegistry);
}

TEST_CASE("select_domain_profile: argmax of mean keyword cosine") {
    Gateway gw = mock_gateway();
    std::string question = "what about GDP this year?";
    std::vector<DomainProfile> registry{
        {"finance", {"GDP", "deposits"}, "", std::nullopt},
        {"health", {"patient"}, "", std::nullopt},
    };
    // independent computation of both means
    EmbeddingVector qe = gw.embed(question);
    double mean_finance = (cosine(qe, gw.embed("GDP")) + cosine(qe, gw.embed("deposits"))) / 2.0;
    double mean_health = cosine(qe, gw.embed("patient"));
    const DomainProfile& chosen = select_domain_profile(question, registry, gw);
    CHECK(chosen.name == (mean_finance >= mean_health ? "finance" : "health"));
}

TEST_CASE("select_domain_profile is invariant under keyword reordering") {
    Gateway gw = mock_gateway();
    std::vector<DomainProfile> a{
        {"p1", {"gdp", "loans", "tax"}, "", std::nullopt},
        {"p2", {"patient", "ward"}, "", std::nullopt},
    };
    std::vector<DomainProfile> b{
        {"p1", {"tax", "gdp", "loans"}, "", std::nullopt},
        {"p2", {"ward", "patient"}, "", std::nullopt},
    };
    for (const char* q : {"about gdp", "hospital ward data", "tax and loans"}) {
        CHECK(select_domain_profile(q, a, gw).name == select_domain_profile(q, b, gw).name);
    }
}

TEST_CASE("generate_keywords: scripted output is parsed, lowercased, deduplicated") {
    PromptLibrary prompts(ts::templates_dir());
    std::string question = "What are the government deposit trends over the past year?";
    std::string prompt = build_keywords_prompt(question, prompts);
    Gateway gw = scripted_gateway(
        {{MockBackend::prompt_digest(prompt), "Government Deposits, deposits, DEPOSITS\ntrend"}});
    ToolContext ctx = make_ctx(gw, prompts);
    auto kws = generate_keywords(question, ctx);
    REQUIRE(kws.size() == 3);
    CHECK(kws[0] == "government deposits");
    CHECK(kws[1] == "deposits");
    CHECK(kws[2] == "trend");
}

TEST_CASE("generate_keywords: empty model output falls back to content words") {
    PromptLibrary prompts(ts::templates_dir());
    std::string question = "What are the government deposit trends over the past year?";
    std::string prompt = build_keywords_prompt(question, prompts);
    Gateway gw = scripted_gateway({{MockBackend::prompt_digest(prompt), "   \n  "}});
    ToolContext ctx = make_ctx(gw, prompts);
    auto kws = generate_keywords(question, ctx);
    REQUIRE(!kws.empty());
    CHECK(std::find(kws.begin(), kws.end(), "government") != kws.end());
    CHECK(std::find(kws.begin(), kws.end(), "deposit") != kws.end());
}

TEST_CASE("generate_keywords caps at 8") {
    PromptLibrary prompts(ts::templates_dir());
    std::string prompt = build_keywords_prompt("q", prompts);
    Gateway gw = scripted_gateway(
        {{MockBackend::prompt_digest(prompt), "a,b,c,d,e,f,g,h,i,j,k"}});
    ToolContext ctx = make_ctx(gw, prompts);
    CHECK(generate_keywords("q", ctx).size() == 8);
}

TEST_CASE("schema index has one entry per table; empty table embeds no cells") {
    ts::TempDir dir("idx");
    std::string path = (std::filesystem::path(dir.path()) / "d.db").string();
    Database::create(path,
                     "CREATE TABLE a (x INTEGER); INSERT INTO a VALUES (1), (2);"
                     "CREATE TABLE b (y TEXT);"  // empty
                     "CREATE TABLE c (z REAL); INSERT INTO c VALUES (0.5);");
    Database db = Database::open(path);
    SchemaCatalog catalog = db.introspect();
    Gateway gw = mock_gateway();

    SchemaIndex sidx = build_schema_index(catalog, gw);
    REQUIRE(sidx.entries.size() == 3);
    CHECK(sidx.entries[0].table == "a");

    CellIndex cidx = build_cell_index(catalog, db, 100, gw);
    for (const auto& e : cidx.entries) CHECK(e.cell.table != "b");
    CHECK(cidx.entries.size() == 3);  // 2 from a, 1 from c
}

TEST_CASE("cell embedding input uses the fixed concatenation format") {
    CellRef cell{"regions", "gdp", "5000.0"};
    CHECK(cell_embedding_text(cell, ColumnType::Real) ==
          "table=regions | column=gdp (real) | value=5000.0");
}

TEST_CASE("index rebuild under the same seed is byte-identical") {
    ts::TempDir dir("idx2");
    Database db = Database::open(ts::make_fixture_db(dir));
    SchemaCatalog catalog = db.introspect();
    Gateway gw = mock_gateway();

    std::string a = build_schema_index(catalog, gw).to_json().dump();
    std::string b = build_schema_index(catalog, gw).to_json().dump();
    CHECK(digest64_hex(a) == digest64_hex(b));

    std::string ca = build_cell_index(catalog, db, 50, gw).to_json().dump();
    std::string cb = build_cell_index(catalog, db, 50, gw).to_json().dump();
    CHECK(digest64_hex(ca) == digest64_hex(cb));
}

TEST_CASE("indices save and reload byte-identically") {
    ts::TempDir dir("idx3");
    Database db = Database::open(ts::make_fixture_db(dir));
    SchemaCatalog catalog = db.introspect();
    Gateway gw = mock_gateway();

    CellIndex cidx = build_cell_index(catalog, db, 30, gw);
    std::string path = (std::filesystem::path(dir.path()) / "cells.json").string();
    save_index(cidx.to_json(), path);
    CellIndex back = CellIndex::from_json(load_index(path));
    CHECK(back.to_json().dump() == cidx.to_json().dump());
    CHECK(back.encoder_id == cidx.encoder_id);
}

TEST_CASE("retrieve_tables equals the brute-force oracle") {
    ts::TempDir dir("ret");
    Database db = Database::open(ts::make_fixture_db(dir));
    SchemaCatalog catalog = db.introspect();
    Gateway gw = mock_gateway();
    SchemaIndex index = build_schema_index(catalog, gw);

    for (const char* query : {"government deposits", "regional gdp growth", "loan balances",
                              "foreign liabilities of the bank"}) {
        for (int k : {1, 2, 10}) {
            auto got = retrieve_tables(query, index, k, gw);
            auto want = oracle_tables(query, index, k, gw);
            REQUIRE(got.size() == want.size());
            for (size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].table == want[i].table);
                CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("retrieve_tables: k beyond table count returns all, sorted nonincreasing") {
    ts::TempDir dir("ret2");
    Database db = Database::open(ts::make_fixture_db(dir));
    Gateway gw = mock_gateway();
    SchemaIndex index = build_schema_index(db.introspect(), gw);
    auto hits = retrieve_tables("anything", index, 100, gw);
    REQUIRE(hits.size() == index.entries.size());
    for (size_t i = 1; i < hits.size(); ++i) CHECK(hits[i - 1].score >= hits[i].score);
}

TEST_CASE("retrieve_tables: identical embeddings tie-break by table name") {
    Gateway gw = mock_gateway();
    EmbeddingVector shared = gw.embed("identical payload");
    SchemaIndex index;
    index.encoder_id = "test";
    index.entries.push_back({"zebra", shared});
    index.entries.push_back({"alpha", shared});
    auto hits = retrieve_tables("some query", index, 2, gw);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].table == "alpha");
    CHECK(hits[1].table == "zebra");
    CHECK(hits[0].score == hits[1].score);
}

TEST_CASE("retrieve_cells: empty selection yields an empty list") {
    ts::TempDir dir("ret3");
    Database db = Database::open(ts::make_fixture_db(dir));
    SchemaCatalog catalog = db.introspect();
    Gateway gw = mock_gateway();
    CellIndex index = build_cell_index(catalog, db, 20, gw);
    CHECK(retrieve_cells("q", {}, index, 5, gw).empty());
}

TEST_CASE("retrieve_cells equals an exhaustive scan over the selected tables") {
    ts::TempDir dir("ret4");
    Database db = Database::open(ts::make_fixture_db(dir));
    SchemaCatalog catalog = db.introspect();
    Gateway gw = mock_gateway();
    CellIndex index = build_cell_index(catalog, db, 60, gw);

    std::vector<std::string> selected{"regions", "loans"};
    EmbeddingVector qe = gw.embed("regional gdp");

    struct Scored {
        CellRef cell;
        double score;
        size_t ordinal;
    };
    std::vector<Scored> oracle;
    for (size_t i = 0; i < index.entries.size(); ++i) {
        const auto& e = index.entries[i];
        if (e.cell.table != "regions" && e.cell.table != "loans") continue;
        double dot = 0;
        for (size_t d = 0; d < qe.dims(); ++d) dot += qe.values[d] * e.embedding.values[d];
        oracle.push_back({e.cell, std::clamp(dot, -1.0, 1.0), i});
    }
    std::stable_sort(oracle.begin(), oracle.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.cell.table != b.cell.table) return a.cell.table < b.cell.table;
        if (a.cell.column != b.cell.column) return a.cell.column < b.cell.column;
        return a.ordinal < b.ordinal;
    });

    for (int k : {1, 7, 1000}) {
        auto got = retrieve_cells("regional gdp", selected, index, k, gw);
        size_t expect = std::min<size_t>(oracle.size(), static_cast<size_t>(k));
        REQUIRE(got.size() == expect);
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].cell == oracle[i].cell);
            CHECK(got[i].score == doctest::Approx(oracle[i].score).epsilon(1e-12));
        }
    }
}

TEST_CASE("retrieve_cells restricts candidates to the selected tables") {
    ts::TempDir dir("ret5");
    Database db = Database::open(ts::make_fixture_db(dir));
    SchemaCatalog catalog = db.introspect();
    Gateway gw = mock_gateway();
    CellIndex index = build_cell_index(catalog, db, 40, gw);
    auto hits = retrieve_cells("anything at all", {"loans"}, index, 1000, gw);
    REQUIRE(!hits.empty());
    for (const auto& h : hits) CHECK(h.cell.table == "loans");
}
