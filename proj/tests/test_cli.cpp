#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gausstest/experiment.hpp"

using namespace gausstest;
using nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run_cli(const std::string& args) {
    const std::string cmd = std::string(GAUSSTEST_CLI) + " " + args + " 2>/dev/null";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int st = pclose(p);
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

json run_json(const std::string& args, int want_code = 0) {
    Run r = run_cli(args);
    CHECK(r.code == want_code);
    return json::parse(r.out);
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "gausstest_cli_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

// Keys and value types only; arrays are described by their first element.
json skeleton(const json& j) {
    if (j.is_object()) {
        json o = json::object();
        for (auto it = j.begin(); it != j.end(); ++it) o[it.key()] = skeleton(it.value());
        return o;
    }
    if (j.is_array()) return j.empty() ? json::array() : json::array({skeleton(j.front())});
    if (j.is_number()) return "number";
    if (j.is_boolean()) return "boolean";
    if (j.is_string()) return "string";
    return "null";
}

void check_golden(const std::string& name, const json& envelope) {
    const auto path = std::filesystem::path(GAUSSTEST_GOLDEN_DIR) / (name + ".json");
    const json got = skeleton(envelope);
    if (std::getenv("GAUSSTEST_UPDATE_GOLDEN")) {
        std::ofstream(path) << got.dump(2) << "\n";
        return;
    }
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), "missing golden file " << path);
    json want = json::parse(in);
    CHECK_MESSAGE(got == want, name << " schema changed:\n" << got.dump(2));
}

ExperimentConfig config_for(const std::string& text) { return parse_config_text(text); }

}  // namespace

TEST_CASE("strict configuration parsing") {
    ExperimentConfig c = config_for(R"({"command": "rotation-test", "state": "fock:1", "test": 5, "seed": 3})");
    CHECK(c.test == "5");
    CHECK(c.seed == 3);

    const std::string unknown = "{\n  \"command\": \"state\",\n  \"state\": \"vacuum\",\n  \"colour\": 3\n}";
    try {
        config_for(unknown);
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "colour");
        CHECK(e.line() == 4);
    }
    try {
        config_for("{\"command\": \"bounds\",\n\"state\": \"vacuum\",\n\"rounds\": 5}");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "rounds");
        CHECK(e.line() == 3);
    }
    try {
        config_for(R"({"command": "state", "state": "vacuum", "cutoff": "ten"})");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "cutoff");
    }
    CHECK_THROWS_AS(config_for(R"({"command": "rotation-test"})"), ConfigError);
    CHECK_THROWS_AS(config_for(R"({"command": "state", "state": "vacuum", "format": "csv"})"), ConfigError);
    CHECK_THROWS_AS(config_for(R"({"command": "bounds", "pair": ["vacuum"]})"), ConfigError);
    CHECK_THROWS_AS(config_for(R"({"command": "launch", "state": "vacuum"})"), ConfigError);
    CHECK_THROWS_AS(config_for(R"({"state": "vacuum"})"), ConfigError);

    // the echo round-trips
    ExperimentConfig h = config_for(R"({"command": "hardness", "energies": [2, 5], "seed": 9})");
    json echo = config_to_json(h);
    ExperimentConfig back = parse_config(echo);
    CHECK(config_to_json(back) == echo);
}

TEST_CASE("default seed") {
    ::unsetenv("GAUSSTEST_SEED");
    CHECK(default_seed() == 1);
    ::setenv("GAUSSTEST_SEED", "77", 1);
    CHECK(default_seed() == 77);
    CHECK(config_for(R"({"command": "state", "state": "vacuum"})").seed == 77);
    ::unsetenv("GAUSSTEST_SEED");
}

TEST_CASE("state specs") {
    Fixture g = parse_state_spec(R"({"gaussian": {"n": 1, "mean": [0, 0], "cov": [[3, 0], [0, 3]]}})", std::nullopt,
                                 1e-8);
    REQUIRE(g.gaussian.has_value());
    CHECK(std::holds_alternative<MixedFockState>(g.state));

    Fixture f = parse_state_spec(R"({"fock": {"n": 1, "cutoff": 3, "amplitudes": [0, 1, 0]}})", std::nullopt, 1e-8);
    CHECK(std::abs(std::get<PureFockState>(f.state).amplitudes()(1) - Complex(1.0)) < 1e-15);

    Fixture pc = parse_state_spec(R"({"fock": {"n": 1, "cutoff": 2, "amplitudes": [[0.6, 0], [0, 0.8]]}})",
                                  std::nullopt, 1e-8);
    CHECK(std::abs(std::get<PureFockState>(pc.state).amplitudes()(1) - Complex(0.0, 0.8)) < 1e-15);

    Fixture pr = parse_state_spec(R"({"fock": {"n": 1, "cutoff": 2, "probabilities": [0.25, 0.75]}})", std::nullopt,
                                  1e-8);
    CHECK(std::get<MixedFockState>(pr.state).is_diagonal());

    const auto path = scratch("state.json");
    std::ofstream(path) << R"({"fock": {"cutoff": 4, "amplitudes": [0, 0, 1, 0]}})" << "\n";
    Fixture fromfile = parse_state_spec("@" + path.string(), std::nullopt, 1e-8);
    CHECK(shape_of(fromfile.state).cutoff == 4);

    CHECK_THROWS_AS(parse_state_spec(R"({"gaussian": {"mean": [0, 0]}})", std::nullopt, 1e-8), InvalidArgument);
    CHECK_THROWS_AS(parse_state_spec(R"({"fock": {"cutoff": 2, "spin": 1}})", std::nullopt, 1e-8), InvalidArgument);
    CHECK_THROWS_AS(parse_state_spec("{not json", std::nullopt, 1e-8), InvalidArgument);
    CHECK_THROWS_AS(parse_state_spec("@/nonexistent/state.json", std::nullopt, 1e-8), InvalidArgument);
}

TEST_CASE("in-process runs and exit codes") {
    ExperimentOutcome ok = run_experiment(config_for(R"({"command": "state", "state": "thermal:1", "seed": 2})"));
    CHECK(ok.exit_code == 0);
    CHECK(ok.envelope["schema_version"] == kSchemaVersion);
    CHECK(ok.envelope["tool_version"] == kToolVersion);
    CHECK(ok.envelope["config"]["seed"] == 2);
    CHECK(ok.envelope["results"]["energy"].get<double>() == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(ok.envelope.contains("wall_clock_seconds"));
    CHECK_FALSE(payload_of(ok.envelope).contains("wall_clock_seconds"));

    ExperimentOutcome inf = run_experiment(config_for(
        R"({"command": "covariance-test", "state": "vacuum", "epsA": 0.5, "epsB": 0.1})"));
    CHECK(inf.exit_code == 2);
    CHECK(inf.envelope["error"]["type"] == "infeasible");
    CHECK(inf.envelope["results"].is_null());

    ExperimentOutcome bad = run_experiment(config_for(R"({"command": "state", "state": "banana"})"));
    CHECK(bad.exit_code == 2);

    ExperimentOutcome pre = run_experiment(config_for(R"({"command": "moments", "state": "coherent:0.5"})"));
    CHECK(pre.exit_code == 0);
    CHECK(pre.envelope["results"]["G"].is_null());
    CHECK_FALSE(pre.envelope["warnings"].empty());

    ExperimentOutcome leak = run_experiment(config_for(R"({"command": "state", "state": "thermal:3", "cutoff": 5})"));
    CHECK(leak.exit_code == 2);
    CHECK(leak.envelope["error"]["type"] == "leakage");

    ExperimentOutcome domain = run_experiment(
        config_for(R"({"command": "covariance-test", "state": "vacuum", "epsB": 0.3, "delta": 2})"));
    CHECK(domain.exit_code == 2);
}

TEST_CASE("report schemas") {
    const std::vector<std::pair<std::string, std::string>> cases{
        {"state", R"({"command": "state", "state": "squeezed:0.3", "seed": 1})"},
        {"moments", R"({"command": "moments", "state": "thermal:0.5", "seed": 1})"},
        {"rotation-test", R"({"command": "rotation-test", "state": "fock:1", "test": "5", "rounds": 1000,
                               "epsB": 0.1, "seed": 1})"},
        {"covariance-test", R"({"command": "covariance-test", "state": "vacuum", "epsB": 0.3, "shots": 2000,
                                 "seed": 1})"},
        {"bounds-pair", R"({"command": "bounds", "pair": ["vacuum", "thermal:0.5"], "seed": 1})"},
        {"bounds-single", R"({"command": "bounds", "state": "fock:1", "E": 1.5, "seed": 1})"},
        {"hardness", R"({"command": "hardness", "n": 1, "energies": [4, 5], "trials": 2, "members": 2,
                          "reps": 20, "seed": 1})"},
        {"error", R"({"command": "covariance-test", "state": "vacuum", "epsA": 0.5, "epsB": 0.1, "seed": 1})"},
    };
    for (const auto& [name, text] : cases) {
        ExperimentOutcome o = run_experiment(config_for(text));
        check_golden(name, o.envelope);
        // round trip through text
        CHECK(json::parse(o.envelope.dump(2)) == o.envelope);
    }
}

TEST_CASE("command line") {
    SUBCASE("rotation test") {
        json j = run_json("rotation-test --test 5 --state fock:1 --rounds 10000 --seed 7");
        const json& r = j["results"];
        CHECK(r["exact_probability"].get<double>() == doctest::Approx(5.0 / 9.0).epsilon(1e-9));
        const double p = 5.0 / 9.0;
        CHECK(std::abs(r["accept_fraction"].get<double>() - p) < 3.0 * std::sqrt(p * (1 - p) / 10000));
        CHECK(j["config"]["seed"] == 7);
    }
    SUBCASE("covariance test") {
        json j = run_json("covariance-test --state thermal:0.5 --epsB 0.3 --E 1 --delta 0.1 --seed 1");
        CHECK(j["results"]["decision"] == "B_far");
        CHECK(j["results"]["capped"] == true);
    }
    SUBCASE("bounds") {
        json j = run_json("bounds --pair vacuum fock:1");
        const json& r = j["results"];
        CHECK(r["lower"].get<double>() == doctest::Approx(4.0 / (3098.0 * 2.25)).epsilon(1e-9));
        CHECK(r["exact"].get<double>() == doctest::Approx(1.0));
        CHECK(r["upper"].get<double>() == 1.0);
    }
    SUBCASE("config file with flag override") {
        const auto path = scratch("cfg.json");
        std::ofstream(path) << R"({"state": "fock:1", "test": "2", "rounds": 100, "seed": 4})" << "\n";
        json j = run_json("--config " + path.string() + " rotation-test --test 5");
        CHECK(j["config"]["test"] == "5");
        CHECK(j["config"]["rounds"] == 100);
    }
    SUBCASE("environment seed") {
        json j = run_json("state --state vacuum");
        CHECK(j["config"]["seed"] == 1);
        const std::string cmd = "GAUSSTEST_SEED=42 " + std::string(GAUSSTEST_CLI) + " state --state vacuum";
        FILE* p = popen(cmd.c_str(), "r");
        std::string out;
        char buf[4096];
        std::size_t n;
        while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
        pclose(p);
        CHECK(json::parse(out)["config"]["seed"] == 42);
    }
    SUBCASE("csv and output file") {
        Run r = run_cli("hardness --n 1 --energies 4,5 --trials 2 --members 2 --reps 20 --format csv");
        CHECK(r.code == 0);
        CHECK(r.out.rfind("E,", 0) == 0);
        CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);
        const auto path = scratch("report.json");
        std::filesystem::remove(path);
        Run w = run_cli("state --state vacuum --output " + path.string());
        CHECK(w.code == 0);
        CHECK(w.out.empty());
        std::ifstream in(path);
        CHECK(json::parse(in)["command"] == "state");
    }
    SUBCASE("exit codes") {
        CHECK(run_cli("state --state vacuum --colour red").code == 1);
        CHECK(run_cli("state").code == 1);
        CHECK(run_cli("state --state vacuum --cutoff ten").code == 1);
        const auto bad = scratch("bad.json");
        std::ofstream(bad) << "{\n  \"state\": \"vacuum\",\n  \"shots\": 5\n}\n";
        CHECK(run_cli("--config " + bad.string() + " state").code == 1);
        json inf = run_json("covariance-test --state vacuum --epsA 0.5 --epsB 0.1", 2);
        CHECK(inf["error"]["type"] == "infeasible");
        CHECK(run_cli("state --state thermal:-1").code == 2);
        CHECK(run_cli("covariance-test --state vacuum --epsB 0.3 --delta 2").code == 2);
    }
}

TEST_CASE("reproducible payloads") {
    for (const char* args : {"state --state squeezed:0.4 --seed 3", "moments --state fock:1 --seed 3",
                             "rotation-test --test 2 --state thermal:0.2 --rounds 500 --seed 3",
                             "covariance-test --state coherent:0.5 --epsB 0.3 --shots 3000 --seed 3",
                             "bounds --pair vacuum coherent:1 --seed 3",
                             "hardness --n 1 --energies 4,5 --trials 2 --members 2 --reps 20 --seed 3"}) {
        Run a = run_cli(args), b = run_cli(args);
        CHECK(a.code == 0);
        CHECK(payload_of(json::parse(a.out)).dump() == payload_of(json::parse(b.out)).dump());
    }
}
