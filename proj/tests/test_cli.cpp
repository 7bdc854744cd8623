#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "irrdrift/checks.hpp"
#include "irrdrift/io.hpp"
#include "irrdrift/scenario.hpp"

using namespace irrdrift;
using namespace irrdrift::cli;

namespace {

nlohmann::json base_config() {
    return nlohmann::json{
        {"version", 1},
        {"name", "unit"},
        {"coefficients", {{"kind", "heat"}}},
        {"domain", {{"L", 6.0}, {"n_points", 401}}},
        {"solver", {{"T", 1.0}, {"dt", 0.002}, {"n_paths", 2000}, {"seed", 9}}},
        {"problem", {{"u0", "sin"}, {"u0_param", 1.0}, {"lambda_const", 0.0}}},
        {"checks", {"feasibility", "scale_identities", "hatl_anchors"}}};
}

}  // namespace

TEST_CASE("config validation lists every violation") {
    auto j = base_config();
    j["coefficients"]["kind"] = "environment";
    j["coefficients"]["hurst"] = 0.2;  // below 1/3
    j["solver"].erase("seed");
    j["checks"].push_back("no_such_check");
    std::vector<std::string> errors;
    parse_scenario(j, errors);
    REQUIRE(errors.size() >= 3);
    bool saw_hurst = false, saw_seed = false, saw_check = false;
    for (const auto& e : errors) {
        saw_hurst = saw_hurst || e.find("hurst") != std::string::npos;
        saw_seed = saw_seed || e.find("seed") != std::string::npos;
        saw_check = saw_check || e.find("no_such_check") != std::string::npos;
    }
    CHECK(saw_hurst);
    CHECK(saw_seed);
    CHECK(saw_check);
}

TEST_CASE("valid config parses cleanly") {
    std::vector<std::string> errors;
    auto sc = parse_scenario(base_config(), errors);
    CHECK(errors.empty());
    CHECK(sc.name == "unit");
    CHECK(sc.n_paths == 2000);
}

TEST_CASE("scenario hash is stable and sensitive") {
    std::vector<std::string> errors;
    auto a = parse_scenario(base_config(), errors);
    auto b = parse_scenario(base_config(), errors);
    CHECK(scenario_hash(a) == scenario_hash(b));
    b.seed = 10;
    CHECK(scenario_hash(a) != scenario_hash(b));
}

TEST_CASE("IRRDRIFT_SEED environment override is recorded") {
    setenv("IRRDRIFT_SEED", "4242", 1);
    std::vector<std::string> errors;
    auto sc = parse_scenario(base_config(), errors);
    unsetenv("IRRDRIFT_SEED");
    CHECK(sc.seed == 4242);
    CHECK(sc.seed_overridden);
}

TEST_CASE("manifests are identical across reruns and thread counts") {
    std::vector<std::string> errors;
    auto sc = parse_scenario(base_config(), errors);
    REQUIRE(errors.empty());
    auto dir = std::filesystem::temp_directory_path() / "irrdrift_cli_test";
    std::filesystem::remove_all(dir);

    unsigned saved = thread_count();
    thread_count() = 1;
    auto m1 = run_scenario(sc, dir.string());
    thread_count() = 4;
    auto m2 = run_scenario(sc, dir.string());
    thread_count() = saved;
    CHECK(m1.fingerprint() == m2.fingerprint());
    CHECK(manifest_all_pass(m1));

    // check statuses and per-check metrics landed in the manifest file
    bool found = false;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        auto mf = entry.path() / "manifest.json";
        if (std::filesystem::exists(mf)) {
            found = true;
            std::ifstream in(mf);
            auto j = nlohmann::json::parse(in);
            CHECK(j["checks"].contains("feasibility"));
            CHECK(j["checks"]["feasibility"]["status"] == "pass");
            CHECK(j.contains("timestamp"));
        }
    }
    CHECK(found);
    std::filesystem::remove_all(dir);
}

TEST_CASE("grid function CSV round trip") {
    auto f = GridFunction::sample(-2.0, 3.0, 257, [](double x) { return std::sin(2 * x) + x; });
    auto dir = std::filesystem::temp_directory_path() / "irrdrift_io_test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "f.csv").string();
    io::write_grid_function(path, f);
    auto g = io::read_grid_function(path);
    REQUIRE(g.size() == f.size());
    CHECK(g.x_min() == f.x_min());
    CHECK(g.x_max() == f.x_max());
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(g.value(i) == f.value(i));
    std::filesystem::remove_all(dir);
}

TEST_CASE("csv coefficient scenarios load through the context") {
    auto dir = std::filesystem::temp_directory_path() / "irrdrift_csv_test";
    std::filesystem::create_directories(dir);
    auto sig = GridFunction::constant(-2.0, 2.0, 257, 1.0);
    auto b = GridFunction::sample(-2.0, 2.0, 257, [](double x) { return 0.2 * std::sin(x); });
    io::write_grid_function((dir / "sigma.csv").string(), sig);
    io::write_grid_function((dir / "b.csv").string(), b);
    auto j = base_config();
    j["coefficients"] = {{"kind", "csv"},
                         {"sigma_csv", (dir / "sigma.csv").string()},
                         {"b_csv", (dir / "b.csv").string()}};
    j["domain"]["L"] = 2.0;
    j["domain"]["n_points"] = 257;
    std::vector<std::string> errors;
    auto sc = parse_scenario(j, errors);
    REQUIRE(errors.empty());
    auto ctx = Context::build(sc);
    CHECK(ctx.coeffs.b(1.0) == Catch::Approx(0.2 * std::sin(1.0)).margin(1e-9));
    std::filesystem::remove_all(dir);
}
