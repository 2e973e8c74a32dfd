#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "repgen/errors.hpp"
#include "repgen/memory_store.hpp"
#include "repgen/util.hpp"
#include "support/fixtures.hpp"

using namespace repgen;
namespace ts = repgen::testsupport;
namespace fs = std::filesystem;

namespace {

struct MemoryFixture {
    ts::TempDir dir{"memory"};
    Gateway gateway;
    std::string artifacts;
    MemoryStore store;

    MemoryFixture()
        : gateway(std::make_shared<MockBackend>(MockOptions{42, 64, false, {}})),
          artifacts(dir.sub("out")),
          store(MemoryStore::persistent(dir.sub("state"), artifacts, &gateway)) {}

    // lays down report/trace artifacts so refs resolve
    void persist_artifacts(const std::string& ref) {
        fs::create_directories(fs::path(artifacts) / "reports");
        fs::create_directories(fs::path(artifacts) / "trace");
        write_file((fs::path(artifacts) / "reports" / (ref + ".md")).string(), "# report\n");
        write_file((fs::path(artifacts) / "trace" / (ref + ".json")).string(), "{}\n");
    }
};

}  // namespace

TEST_CASE("store then exact lookup hits regardless of threshold") {
    MemoryFixture f;
    f.persist_artifacts("r1");
    f.store.store_qa("What is total GDP?", "r1", "r1", "db", "s1");
    auto hit = f.store.lookup_qa("What is total GDP?", 1.0, "db", "s1");
    REQUIRE(hit.has_value());
    CHECK(hit->report_ref == "r1");
}

TEST_CASE("unseen question on an empty store misses") {
    MemoryFixture f;
    CHECK(!f.store.lookup_qa("anything", 0.0, "db", "s1").has_value());
}

TEST_CASE("storing the same question twice keeps the latest record only") {
    MemoryFixture f;
    f.persist_artifacts("r1");
    f.persist_artifacts("r2");
    f.store.store_qa("Q", "r1", "r1", "db", "s1");
    f.store.store_qa("Q", "r2", "r2", "db", "s1");
    CHECK(f.store.qa_count() == 1);
    auto hit = f.store.lookup_qa("Q", 1.0, "db", "s1");
    REQUIRE(hit.has_value());
    CHECK(hit->report_ref == "r2");
}

TEST_CASE("dangling trace_ref raises StorageFailure") {
    MemoryFixture f;
    CHECK_THROWS_AS(f.store.store_qa("Q", "missing", "missing", "db", "s1"), StorageFailure);
}

namespace {

// Embedding backend with hand-placed vectors so similarity is exact: the
// stored and query questions sit at cosine 0.93.
class CannedEmbedBackend : public ChatBackend {
public:
    std::string complete(const std::string& prompt, const ChatParams&) override {
        return MockBackend::fallback_echo(prompt);
    }
    std::vector<double> embed_raw(const std::string& text) override {
        if (text.find("last year") != std::string::npos) {
            return {0.93, std::sqrt(1.0 - 0.93 * 0.93), 0.0};
        }
        return {1.0, 0.0, 0.0};
    }
    std::string encoder_id() const override { return "canned-3"; }
};

}  // namespace

TEST_CASE("similarity lookup respects the threshold both ways") {
    ts::TempDir dir("memory_sim");
    Gateway gateway(std::make_shared<CannedEmbedBackend>());
    std::string artifacts = dir.sub("out");
    fs::create_directories(fs::path(artifacts) / "reports");
    fs::create_directories(fs::path(artifacts) / "trace");
    write_file((fs::path(artifacts) / "reports" / "r1.md").string(), "# r\n");
    write_file((fs::path(artifacts) / "trace" / "r1.json").string(), "{}\n");
    MemoryStore store = MemoryStore::persistent(dir.sub("state"), artifacts, &gateway);

    std::string stored = "What are the government deposit trends over the past year?";
    std::string query = "What are the government deposit trends over the last year?";
    store.store_qa(stored, "r1", "r1", "db", "s1");

    double c = cosine(gateway.embed(stored), gateway.embed(query));
    CHECK(c == doctest::Approx(0.93).epsilon(1e-12));

    auto hit_below = store.lookup_qa(query, 0.9, "db", "s1");
    REQUIRE(hit_below.has_value());
    CHECK(hit_below->question == stored);

    auto miss_above = store.lookup_qa(query, 0.95, "db", "s1");
    CHECK(!miss_above.has_value());
}

TEST_CASE("records from other databases or schema versions never match") {
    MemoryFixture f;
    f.persist_artifacts("r1");
    f.store.store_qa("Q", "r1", "r1", "db", "s1");
    CHECK(!f.store.lookup_qa("Q", 0.0, "other_db", "s1").has_value());
    CHECK(!f.store.lookup_qa("Q", 0.0, "db", "s2").has_value());
}

TEST_CASE("intermediates: put three entries, get a map of three") {
    MemoryFixture f;
    f.store.put_intermediate("q1", {"subquestions", -1}, nlohmann::json::array({"a", "b"}));
    f.store.put_intermediate("q1", {"keywords", 0}, nlohmann::json::array({"gdp"}));
    f.store.put_intermediate("q1", {"sql_raw", 0}, nlohmann::json("SELECT 1"));
    auto m = f.store.get_intermediates("q1");
    REQUIRE(m.size() == 3);
    CHECK(m.count("subquestions") == 1);
    CHECK(m.count("keywords[0]") == 1);
    CHECK(m.count("sql_raw[0]") == 1);
}

TEST_CASE("intermediates: unknown id yields an empty map") {
    MemoryFixture f;
    CHECK(f.store.get_intermediates("nope").empty());
}

TEST_CASE("intermediates: same key twice returns the latest value") {
    MemoryFixture f;
    f.store.put_intermediate("q1", {"sql_raw", 0}, nlohmann::json("A"));
    f.store.put_intermediate("q1", {"sql_raw", 0}, nlohmann::json("B"));
    auto m = f.store.get_intermediates("q1");
    REQUIRE(m.size() == 1);
    CHECK(m.at("sql_raw[0]").get<std::string>() == "B");
}

TEST_CASE("suggest_plan: empty store yields nothing") {
    MemoryFixture f;
    CHECK(!f.store.suggest_plan("Q", 0.5, "db", "s1").has_value());
}

TEST_CASE("suggest_plan: nearest below threshold yields nothing") {
    MemoryFixture f;
    f.store.store_plan("completely different text about patients", {{"decompose?", "no"}}, "db",
                       "s1");
    double c = cosine(f.gateway.embed("completely different text about patients"),
                      f.gateway.embed("total gdp for 2020"));
    CHECK(!f.store.suggest_plan("total gdp for 2020", std::min(1.0, c + 0.05), "db", "s1")
               .has_value());
}

TEST_CASE("suggest_plan: repeated question returns the stored decisions") {
    MemoryFixture f;
    std::vector<PlanDecision> decisions{
        {"decompose?", "yes"}, {"strategy", "both"}, {"rewrite?", "no"}};
    f.store.store_plan("Q", decisions, "db", "s1");
    auto got = f.store.suggest_plan("Q", 0.99, "db", "s1");
    REQUIRE(got.has_value());
    REQUIRE(got->size() == 3);
    CHECK((*got)[0].decision_point == "decompose?");
    CHECK((*got)[0].choice == "yes");
}

TEST_CASE("journals reload into an equivalent store") {
    ts::TempDir dir("memory_reload");
    Gateway gateway(std::make_shared<MockBackend>(MockOptions{42, 64, false, {}}));
    std::string artifacts = dir.sub("out");
    std::string state = dir.sub("state");
    fs::create_directories(fs::path(artifacts) / "reports");
    fs::create_directories(fs::path(artifacts) / "trace");
    write_file((fs::path(artifacts) / "reports" / "r1.md").string(), "# r\n");
    write_file((fs::path(artifacts) / "trace" / "r1.json").string(), "{}\n");

    {
        MemoryStore store = MemoryStore::persistent(state, artifacts, &gateway);
        store.store_qa("Q", "r1", "r1", "db", "s1");
        store.put_intermediate("q1", {"keywords", 2}, nlohmann::json("x"));
        store.store_plan("Q", {{"decompose?", "no"}}, "db", "s1");
    }
    MemoryStore reloaded = MemoryStore::persistent(state, artifacts, &gateway);
    CHECK(reloaded.qa_count() == 1);
    CHECK(reloaded.lookup_qa("Q", 1.0, "db", "s1").has_value());
    CHECK(reloaded.get_intermediates("q1").count("keywords[2]") == 1);
    CHECK(reloaded.suggest_plan("Q", 0.99, "db", "s1").has_value());
}

TEST_CASE("ephemeral store works without touching the filesystem") {
    Gateway gateway(std::make_shared<MockBackend>(MockOptions{42, 64, false, {}}));
    MemoryStore store = MemoryStore::ephemeral(&gateway);
    store.put_intermediate("q", {"subquestions", -1}, nlohmann::json::array());
    CHECK(store.get_intermediates("q").size() == 1);
    CHECK(!store.is_persistent());
}
