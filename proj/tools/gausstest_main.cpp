#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gausstest/experiment.hpp"

using nlohmann::json;

namespace {

enum class Kind { text, number, text_list, number_list };

struct Flag {
    const char* name;  // also the config key
    Kind kind;
    const char* help;
    std::vector<std::string> commands;
};

const std::vector<Flag> kFlags{
    {"state", Kind::text, "named fixture, inline JSON or @file", {"state", "moments", "rotation-test", "covariance-test", "bounds"}},
    {"cutoff", Kind::number, "per-mode Fock cutoff", {"state", "moments", "rotation-test", "covariance-test", "bounds"}},
    {"seed", Kind::number, "RNG seed (default GAUSSTEST_SEED or 1)", {}},
    {"leakage_bound", Kind::number, "truncation leakage budget", {}},
    {"format", Kind::text, "json or csv", {}},
    {"output", Kind::text, "write the report here instead of stdout", {}},
    {"test", Kind::text, "1, 2, 2', 3, 4 or 5", {"rotation-test"}},
    {"rounds", Kind::number, "simulated rounds", {"rotation-test"}},
    {"kappa", Kind::number, "round-count constant", {"rotation-test"}},
    {"epsA", Kind::number, "closeness parameter", {"rotation-test", "covariance-test"}},
    {"epsB", Kind::number, "farness parameter", {"rotation-test", "covariance-test", "hardness"}},
    {"E", Kind::number, "energy bound per mode", {"rotation-test", "covariance-test", "bounds"}},
    {"delta", Kind::number, "failure probability", {"rotation-test", "covariance-test"}},
    {"shots", Kind::number, "cap on heterodyne shots", {"covariance-test"}},
    {"scaling", Kind::number_list, "shot grid for the estimator scaling table", {"covariance-test"}},
    {"pair", Kind::text_list, "two states to compare", {"bounds"}},
    {"n", Kind::number, "modes", {"hardness"}},
    {"energies", Kind::number_list, "energy grid", {"hardness"}},
    {"eps", Kind::number, "family perturbation strength", {"hardness"}},
    {"trials", Kind::number, "trials per energy", {"hardness"}},
    {"members", Kind::number, "family members per energy", {"hardness"}},
    {"reps", Kind::number, "repetitions per success estimate", {"hardness"}},
};

const std::vector<std::pair<std::string, std::string>> kCommands{
    {"state", "build a state and report its moments and entropies"},
    {"moments", "generator moments of the copy rotations"},
    {"rotation-test", "exact acceptance and simulated rounds of a rotation test"},
    {"covariance-test", "heterodyne covariance tester"},
    {"bounds", "trace-distance bounds for a pair or a single state"},
    {"hardness", "mixed-state hardness lab over an energy grid"},
};

bool applies(const Flag& f, const std::string& cmd) {
    return f.commands.empty() || std::find(f.commands.begin(), f.commands.end(), cmd) != f.commands.end();
}

json number_value(const std::string& flag, const std::string& s) {
    try {
        json v = json::parse(s);
        if (!v.is_number()) throw std::invalid_argument("not a number");
        return v;
    } catch (const std::exception&) {
        throw gausstest::ConfigError(flag, 0, "expected a number, got '" + s + "'");
    }
}

int emit(const std::string& text, const std::optional<std::string>& path) {
    if (!path) {
        std::cout << text;
        return 0;
    }
    std::ofstream out(*path);
    if (!out) {
        std::cerr << "error: cannot write " << *path << "\n";
        return 1;
    }
    out << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussianity testing on truncated Fock spaces"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file with the same keys as the flags");

    std::map<std::string, std::map<std::string, std::vector<std::string>>> values;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [cmd, help] : kCommands) {
        CLI::App* sub = app.add_subcommand(cmd, help);
        subs[cmd] = sub;
        for (const Flag& f : kFlags) {
            if (!applies(f, cmd)) continue;
            auto& slot = values[cmd][f.name];
            std::string flag = std::string("--") + f.name;
            if (std::string(f.name) == "leakage_bound") flag += ",--leakage-bound";
            CLI::Option* o = sub->add_option(flag, slot, f.help);
            if (f.kind == Kind::text || f.kind == Kind::number) o->expected(1);
            if (std::string(f.name) == "pair") o->expected(2);
            if (f.kind == Kind::number_list) o->expected(1, 64)->delimiter(',');
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    std::string cmd;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) cmd = name;

    gausstest::ExperimentConfig cfg;
    try {
        json j = json::object();
        std::string text;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw gausstest::ConfigError("config", 0, "cannot read " + config_path);
            std::stringstream ss;
            ss << in.rdbuf();
            text = ss.str();
            try {
                j = json::parse(text);
            } catch (const json::parse_error& e) {
                int line = 1;
                for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i)
                    if (text[i] == '\n') ++line;
                throw gausstest::ConfigError("<syntax>", line, e.what());
            }
            if (!j.is_object()) throw gausstest::ConfigError("<root>", 1, "configuration must be a JSON object");
            if (j.contains("command") && j["command"] != cmd)
                throw gausstest::ConfigError("command", 0, "config file is for a different subcommand");
        }
        j["command"] = cmd;
        for (const Flag& f : kFlags) {
            if (!applies(f, cmd)) continue;
            const auto& v = values[cmd][f.name];
            if (v.empty()) continue;
            switch (f.kind) {
                case Kind::text: j[f.name] = v.front(); break;
                case Kind::number: j[f.name] = number_value(f.name, v.front()); break;
                case Kind::text_list: j[f.name] = v; break;
                case Kind::number_list: {
                    json a = json::array();
                    for (const auto& s : v) a.push_back(number_value(f.name, s));
                    j[f.name] = a;
                    break;
                }
            }
        }
        cfg = gausstest::parse_config(j, text);
    } catch (const gausstest::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    gausstest::ExperimentOutcome out = gausstest::run_experiment(cfg);
    if (out.envelope.contains("error")) std::cerr << "error: " << out.envelope["error"]["message"].get<std::string>() << "\n";
    int rc = 0;
    if (cfg.format == "csv" && out.exit_code == 0)
        rc = emit(out.csv, cfg.output);
    else
        rc = emit(out.envelope.dump(2) + "\n", cfg.output);
    return out.exit_code != 0 ? out.exit_code : rc;
}
