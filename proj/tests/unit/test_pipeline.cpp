#include "msw/errors.hpp"
#include "msw/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace msw;
using nlohmann::json;

TEST_CASE("config round trip") {
    RunConfig c;
    c.lambdas = {0.1, 1.0};
    c.fold_delta = 0.2;
    c.seed = 7;
    const json j = config_to_json(c);
    CHECK(config_to_json(config_from_json(j)) == j);
}

TEST_CASE("config validation") {
    const json base = config_to_json(RunConfig{});
    auto bad = [&](auto&& edit) {
        json j = base;
        edit(j);
        try {
            config_from_json(j);
        } catch (const Error& e) {
            return e.kind() == ErrorKind::Config;
        }
        return false;
    };
    CHECK(bad([](json& j) { j["lambdaz"] = 1; }));
    CHECK(bad([](json& j) { j["problem"]["g"] = json::array(); }));
    CHECK(bad([](json& j) { j["tolerances"]["rtoll"] = 1e-9; }));
    CHECK(bad([](json& j) { j["lambdas"] = json::array({1.0, -2.0}); }));
    CHECK(bad([](json& j) { j["fold_delta"] = 0.9; }));
    CHECK(bad([](json& j) { j["fold_epsilons"] = json::array({1e-4, 1e-2}); }));
}

TEST_CASE("rounded") {
    const json j = {{"a", 0.1 + 0.2}, {"b", json::array({1.0 / 3.0, 2})}, {"c", INFINITY}};
    const json r = rounded(j, 12);
    CHECK(r["a"].get<double>() == 0.3);
    CHECK(r["b"][0].get<double>() == 0.333333333333);
    CHECK(r["b"][1].get<int>() == 2);
    CHECK(r["c"].is_null());
}

TEST_CASE("perturbation is deterministic") {
    const Problem p = default_problem();
    const Problem a = perturbed(p, 3), b = perturbed(p, 3), c = perturbed(p, 4);
    CHECK(a.tol.shoot_radius == b.tol.shoot_radius);
    CHECK(a.tol.angle_samples == b.tol.angle_samples);
    CHECK(a.tol.shoot_radius != c.tol.shoot_radius);
    CHECK(halved_tolerances(p).tol.rtol == doctest::Approx(p.tol.rtol / 2));
}

TEST_CASE("commands") {
    const auto dir = std::filesystem::temp_directory_path() / "msw_test_pipeline";
    std::filesystem::remove_all(dir);
    RunConfig c;
    c.output = dir.string();
    std::ostringstream log;
    CHECK(run_command("check", c, log) == kExitOk);
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(run_command("foldtest", c, log) == kExitOk);
    CHECK(std::filesystem::exists(dir / "tables" / "foldtest.csv"));
    CHECK(run_command("nonsense", c, log) == kExitConfig);

    // degenerate critical point at eta = 0: check must refuse the configuration
    RunConfig sym;
    sym.problem.f = TorusField({{{0, 1}, 1.0, 0.0}});
    sym.problem.mu = TorusField({{{1, 0}, 1.0, 0.0}, {{0, 1}, 0.5, 0.0}});
    sym.output = dir.string();
    CHECK(run_command("check", sym, log) == kExitAssumptions);
    std::filesystem::remove_all(dir);
}
