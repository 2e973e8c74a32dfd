// Regenerates fixtures/mock_script.json: runs the bundled worked scenario
// against a recording backend and dumps every prompt/response pair so the
// strict mock can replay the run byte-for-byte.
//
//   cmake --build build --target fixture_gen && ./build/tools/fixture_gen

#include <filesystem>
#include <iostream>

#include "repgen/planner.hpp"
#include "repgen/util.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using namespace repgen;
namespace ts = repgen::testsupport;

int main() {
    ts::TempDir dir("fixture_gen");
    std::string db_path = ts::make_fixture_db(dir);

    RunConfig config = ts::test_config(dir);
    auto backend = std::make_shared<RecordingBackend>(
        ts::RuleResponder(ts::fixture_scenario_rules()), config.seed, config.mock_dims);

    Engine engine(config, db_path, dir.sub("out"), backend);
    AskResult result = engine.ask(ts::kFixtureQuestion);

    std::string script_path =
        (fs::path(ts::fixtures_dir()) / "mock_script.json").string();
    backend->save_script(script_path);

    std::cout << "scenario status=" << result.trace.status
              << " steps=" << result.trace.steps.size()
              << " report_digest=" << result.report_digest << "\n";
    std::cout << "wrote " << script_path << " with " << backend->recorded().size()
              << " scripted prompts\n";
    return result.trace.status == "ok" ? 0 : 1;
}
