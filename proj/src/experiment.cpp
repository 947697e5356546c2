#include "gausstest/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "gausstest/bounds.hpp"
#include "gausstest/estimators.hpp"
#include "gausstest/hardness.hpp"
#include "gausstest/rotations.hpp"
#include "gausstest/sampling.hpp"

namespace gausstest {

using nlohmann::json;

namespace {

const std::set<std::string> kCommon{"command", "state", "cutoff", "seed", "leakage_bound", "format", "output"};

const std::map<std::string, std::set<std::string>> kCommandKeys{
    {"state", {}},
    {"moments", {}},
    {"rotation-test", {"test", "rounds", "kappa", "epsA", "epsB", "E", "delta"}},
    {"covariance-test", {"epsA", "epsB", "E", "delta", "shots", "scaling"}},
    {"bounds", {"pair", "E"}},
    {"hardness", {"n", "energies", "eps", "epsB", "trials", "members", "reps"}},
};

int line_of(const std::string& text, const std::string& key) {
    if (text.empty()) return 0;
    const auto pos = text.find("\"" + key + "\"");
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

int line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

template <class T>
T field_as(const json& j, const std::string& key, const std::string& text, const char* expected) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(key, line_of(text, key), std::string("expected ") + expected);
    }
}

json vec_json(const RVec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json mat_json(const RMat& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
    return a;
}

json bound_json(const BoundReport& r) {
    json j{{"which", r.which}, {"lower", r.lower}, {"upper_raw", r.upper_raw}, {"upper", r.upper},
           {"params", r.params}, {"sandwich_ok", r.sandwich_ok()}};
    j["exact"] = r.exact ? json(*r.exact) : json(nullptr);
    return j;
}

RVec json_rvec(const json& j, const char* what) {
    if (!j.is_array()) throw InvalidArgument(std::string(what) + " must be an array");
    RVec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

RMat json_rmat(const json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw InvalidArgument(std::string(what) + " must be a nonempty array of rows");
    const auto r = static_cast<Eigen::Index>(j.size());
    RMat m(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
        RVec row = json_rvec(j[static_cast<std::size_t>(i)], what);
        if (row.size() != r) throw InvalidArgument(std::string(what) + " must be square");
        m.row(i) = row.transpose();
    }
    return m;
}

Fixture inline_state(const json& j, const std::string& spec, std::optional<int> cutoff, double leakage_bound) {
    if (!j.is_object() || j.size() != 1) throw InvalidArgument("inline state needs exactly one of gaussian, fock");
    if (j.contains("gaussian")) {
        const json& g = j["gaussian"];
        for (const auto& [k, v] : g.items())
            if (k != "n" && k != "mean" && k != "cov") throw InvalidArgument("unknown gaussian field '" + k + "'");
        RVec mean = json_rvec(g.at("mean"), "mean");
        RMat cov = json_rmat(g.at("cov"), "cov");
        if (g.contains("n") && 2 * g["n"].get<int>() != mean.size())
            throw InvalidArgument("gaussian n does not match the mean length");
        GaussianState gs(mean, cov);
        const int d = cutoff.value_or(std::max(4, minimal_cutoff(gs, 1e-12)));
        return Fixture{spec, gaussian_state_to_fock(gs, d, Purity::automatic, leakage_bound), gs};
    }
    if (j.contains("fock")) {
        const json& f = j["fock"];
        for (const auto& [k, v] : f.items())
            if (k != "n" && k != "cutoff" && k != "amplitudes" && k != "probabilities")
                throw InvalidArgument("unknown fock field '" + k + "'");
        const int n = f.value("n", 1);
        const int d = f.at("cutoff").get<int>();
        std::optional<FockState> st;
        if (f.contains("amplitudes")) {
            const json& a = f["amplitudes"];
            CVec amps(static_cast<Eigen::Index>(a.size()));
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (a[i].is_array())
                    amps(static_cast<Eigen::Index>(i)) = Complex(a[i].at(0).get<double>(), a[i].at(1).get<double>());
                else
                    amps(static_cast<Eigen::Index>(i)) = a[i].get<double>();
            }
            st = PureFockState(n, d, amps);
        } else if (f.contains("probabilities")) {
            st = MixedFockState::diagonal(n, d, json_rvec(f["probabilities"], "probabilities"));
        } else {
            throw InvalidArgument("fock state needs amplitudes or probabilities");
        }
        if (cutoff && *cutoff != d) {
            if (*cutoff < d) throw InvalidArgument("requested cutoff is below the state's own cutoff");
            if (auto p = std::get_if<PureFockState>(&*st))
                st = p->padded(*cutoff);
            else
                st = std::get<MixedFockState>(*st).padded(*cutoff);
        }
        return Fixture{spec, *st, std::nullopt};
    }
    throw InvalidArgument("inline state needs exactly one of gaussian, fock");
}

StateMoments moments_for(const Fixture& f, double leakage_bound) {
    if (f.gaussian) return gaussian_moments(*f.gaussian);
    return state_moments(f.state, leakage_bound);
}

void state_warnings(const Fixture& f, const std::string& label, json& warnings) {
    const double leak = leakage_of(f.state);
    if (leak > 0.0) {
        std::ostringstream os;
        os << label << ": truncation leakage " << leak;
        warnings.push_back(os.str());
    }
    if (auto m = std::get_if<MixedFockState>(&f.state); m && m->clamped())
        warnings.push_back(label + ": negative eigenvalues clamped");
}

json run_state(const ExperimentConfig& cfg, json& warnings) {
    Fixture f = parse_state_spec(*cfg.state, cfg.cutoff, cfg.leakage_bound);
    state_warnings(f, *cfg.state, warnings);
    const FockShape& sh = shape_of(f.state);
    Moments mo = moments_of_state(f.state, cfg.leakage_bound);
    StateMoments sm = state_moments(f.state, cfg.leakage_bound);
    SpectralFunctionals sf = spectral_functionals(to_mixed(f.state), nullptr);
    json r;
    r["modes"] = sh.modes;
    r["cutoff"] = sh.cutoff;
    r["kind"] = std::holds_alternative<PureFockState>(f.state) ? "pure" : "mixed";
    r["leakage"] = leakage_of(f.state);
    r["gaussian"] = f.gaussian.has_value();
    r["mean"] = vec_json(mo.mean);
    r["cov"] = mat_json(mo.cov);
    r["symplectic_eigenvalues"] = vec_json(symplectic_eigenvalues(mo.cov));
    r["energy"] = sm.energy;
    r["energy_sq"] = sm.energy_sq;
    r["purity"] = sf.purity;
    r["entropy"] = sf.von_neumann_entropy;
    r["nongaussianity_relative_entropy"] = nongaussianity_relative_entropy(f.state, cfg.leakage_bound);
    return r;
}

json run_moments(const ExperimentConfig& cfg, json& warnings) {
    Fixture f = parse_state_spec(*cfg.state, cfg.cutoff, cfg.leakage_bound);
    state_warnings(f, *cfg.state, warnings);
    Moments mo = moments_of_state(f.state, cfg.leakage_bound);
    const RVec nu = symplectic_eigenvalues(mo.cov);
    const double s = (nu.array().square() - 1.0).sum();
    GeneratorMoments gt = generator_moments(f.state, GeneratorKind::Gtilde, cfg.leakage_bound);
    json r;
    r["symplectic_eigenvalues"] = vec_json(nu);
    r["energy_sq"] = gt.energy_second_moment;
    try {
        GeneratorMoments g = generator_moments(f.state, GeneratorKind::G, cfg.leakage_bound);
        r["G"] = {{"second", g.g2}, {"fourth", g.g4}, {"gaussian_value", 0.5 * s}, {"fourth_bound", g.bound},
                  {"bound_ok", g.bound_ok}};
    } catch (const PreconditionError& e) {
        r["G"] = nullptr;
        warnings.push_back(std::string("G moments skipped: ") + e.what());
    }
    r["Gtilde"] = {{"second", gt.g2}, {"fourth", gt.g4}, {"gaussian_value", 1.5 * s}};
    return r;
}

json run_rotation(const ExperimentConfig& cfg, json& warnings) {
    Fixture f = parse_state_spec(*cfg.state, cfg.cutoff, cfg.leakage_bound);
    state_warnings(f, *cfg.state, warnings);
    const TestId id = parse_test_id(cfg.test);
    AcceptanceOptions opt;
    opt.leakage_bound = cfg.leakage_bound;
    TestRoundSampler sampler(id, f.state, opt);
    RngStream rng(cfg.seed, 1);
    std::uint64_t accepted = 0;
    for (std::uint64_t r = 0; r < cfg.rounds; ++r)
        if (sampler(rng)) ++accepted;
    const double p = sampler.probability();
    const double frac = static_cast<double>(accepted) / static_cast<double>(cfg.rounds);
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(cfg.rounds));
    json r;
    r["test"] = to_string(id);
    r["exact_probability"] = p;
    r["rounds"] = cfg.rounds;
    r["accepted"] = accepted;
    r["accept_fraction"] = frac;
    r["sigma"] = sigma;
    r["z_score"] = sigma > 0.0 ? (frac - p) / sigma : 0.0;
    r["copies_per_round"] = copies_per_round(id);
    if (cfg.eps_b) {
        TestPlanConfig pc;
        pc.delta = cfg.delta;
        pc.E = cfg.E;
        pc.n = shape_of(f.state).modes;
        pc.kappa = cfg.kappa;
        pc.test = id;
        TestPlan plan = rotation_test_plan(pc, cfg.eps_a.value_or(0.0), *cfg.eps_b);
        r["plan"] = {{"epsilon_gap", plan.epsilon_gap}, {"rounds", plan.rounds},
                     {"copies_per_round", plan.copies_per_round}, {"total_copies", plan.total_copies},
                     {"energy_branch", plan.energy_branch}, {"C", pc.C_universal}, {"kappa", pc.kappa}};
    }
    return r;
}

json run_covariance(const ExperimentConfig& cfg, json& warnings, std::string& csv) {
    Fixture f = parse_state_spec(*cfg.state, cfg.cutoff, cfg.leakage_bound);
    state_warnings(f, *cfg.state, warnings);
    HeterodyneOptions hopt;
    hopt.leakage_bound = cfg.leakage_bound;
    auto sampler = std::make_shared<HeterodyneSampler>(f.state, hopt);
    HeterodyneSource source = [sampler](RngStream& rng) { return (*sampler)(rng); };
    json r;
    if (!cfg.scaling.empty()) {
        Moments exact = moments_of_state(f.state, cfg.leakage_bound);
        RngStream base(cfg.seed, 2);
        json rows = json::array();
        std::ostringstream os;
        os.precision(17);
        os << "shots,error_two,error_inf\n";
        for (std::uint64_t shots : cfg.scaling) {
            RngStream rng = base.substream(shots);
            CovarianceEstimate est = estimate_moments(source, shots, rng);
            const double e2 = norm_two(est.cov_hat - exact.cov);
            const double ei = norm_inf(est.cov_hat - exact.cov);
            rows.push_back({{"shots", shots}, {"error_two", e2}, {"error_inf", ei}});
            os << shots << ',' << e2 << ',' << ei << '\n';
        }
        r["scaling"] = rows;
        csv = os.str();
        return r;
    }
    if (cfg.format == "csv") throw InvalidArgument("csv output needs a scaling grid");
    PipelineConfig pc;
    pc.n = shape_of(f.state).modes;
    pc.E = cfg.E;
    pc.eps_a = cfg.eps_a.value_or(0.0);
    pc.eps_b = cfg.eps_b.value_or(0.1);
    pc.delta = cfg.delta;
    pc.max_shots = cfg.shots;
    RngStream rng(cfg.seed, 2);
    PipelineResult res = pure_testing_pipeline(source, pc, rng);
    for (const auto& w : res.decision.warnings) warnings.push_back(w);
    r["decision"] = to_string(res.decision.hypothesis);
    r["threshold"] = res.decision.threshold;
    r["nu_max"] = res.decision.statistic;
    r["eps_v"] = res.eps_v;
    r["eta"] = res.eta;
    r["mu"] = res.mu;
    r["required_shots"] = res.required_shots;
    r["shots_used"] = res.shots_used;
    r["capped"] = res.capped;
    r["mean_hat"] = vec_json(res.estimate.mean_hat);
    r["cov_hat"] = mat_json(res.estimate.cov_hat);
    r["parameters"] = {{"n", pc.n}, {"E", pc.E}, {"epsA", pc.eps_a}, {"epsB", pc.eps_b}, {"delta", pc.delta}};
    return r;
}

json run_bounds(const ExperimentConfig& cfg, json& warnings) {
    json r;
    if (!cfg.pair.empty()) {
        Fixture a0 = parse_state_spec(cfg.pair[0], cfg.cutoff, cfg.leakage_bound);
        Fixture b0 = parse_state_spec(cfg.pair[1], cfg.cutoff, cfg.leakage_bound);
        const int d = std::max(shape_of(a0.state).cutoff, shape_of(b0.state).cutoff);
        Fixture a = shape_of(a0.state).cutoff == d ? a0 : parse_state_spec(cfg.pair[0], d, cfg.leakage_bound);
        Fixture b = shape_of(b0.state).cutoff == d ? b0 : parse_state_spec(cfg.pair[1], d, cfg.leakage_bound);
        state_warnings(a, cfg.pair[0], warnings);
        state_warnings(b, cfg.pair[1], warnings);
        const double exact = trace_distance_exact(to_mixed(a.state), to_mixed(b.state));
        BoundReport gen = general_pair_bounds(moments_for(a, cfg.leakage_bound), moments_for(b, cfg.leakage_bound));
        gen.exact = exact;
        r["pair"] = cfg.pair;
        r["cutoff"] = d;
        r["exact"] = exact;
        r["general_pair"] = bound_json(gen);
        r["lower"] = gen.lower;
        r["upper"] = gen.upper;
        if (a.gaussian && b.gaussian) {
            BoundReport gp = gaussian_pair_bounds(*a.gaussian, *b.gaussian);
            gp.exact = exact;
            r["gaussian_pair"] = bound_json(gp);
            r["lower"] = std::max(gen.lower, gp.lower);
            r["upper"] = std::min(gen.upper, gp.upper);
        }
        return r;
    }
    Fixture f = parse_state_spec(*cfg.state, cfg.cutoff, cfg.leakage_bound);
    state_warnings(f, *cfg.state, warnings);
    const int n = shape_of(f.state).modes;
    StateMoments sm = moments_for(f, cfg.leakage_bound);
    const RVec nu = symplectic_eigenvalues(sm.cov);
    if (std::sqrt(sm.energy_sq) > n * cfg.E)
        warnings.push_back("second energy moment exceeds (nE)^2 for the declared E");
    r["symplectic_eigenvalues"] = vec_json(nu);
    r["pure_gaussian_set"] = bound_json(pure_gaussian_set_distance_bounds(nu.cwiseMax(1.0), n, cfg.E));
    GaussianificationBounds gb = gaussianification_bounds(f.state, n, cfg.E, std::nullopt, cfg.leakage_bound);
    json g = bound_json(gb.report);
    g["forward_ok"] = gb.forward_ok;
    g["converse_ok"] = gb.converse_ok;
    r["gaussianification"] = g;
    return r;
}

json run_hardness(const ExperimentConfig& cfg, json& warnings, std::string& csv) {
    HardnessConfig hc;
    hc.n = cfg.n;
    hc.energies = cfg.energies;
    hc.eps_b = cfg.eps_b;
    hc.eps = cfg.eps;
    hc.trials = cfg.trials;
    hc.members = cfg.members;
    hc.reps = cfg.reps;
    RngStream rng(cfg.seed, 3);
    HardnessReport rep = hardness_experiment(hc, rng);
    for (const auto& w : rep.warnings) warnings.push_back(w);
    json rows = json::array();
    std::ostringstream os;
    os.precision(17);
    os << "E,nu,cutoff,q_inf,energy_limit,energy_sq_q,energy_sq_p_max,tv_min,embed_gap,resamples,mean_samples\n";
    for (const HardnessRow& row : rep.rows) {
        if (row.resamples > 0)
            warnings.push_back("E = " + std::to_string(row.E) + ": " + std::to_string(row.resamples) +
                               " family resamples");
        rows.push_back({{"E", row.E}, {"nu", row.nu}, {"cutoff", row.cutoff}, {"q_inf", row.q_inf},
                        {"energy_limit", row.energy_limit}, {"energy_sq_q", row.energy_sq_q},
                        {"energy_sq_p_max", row.energy_sq_p_max}, {"energy_ok", row.energy_ok},
                        {"tv_min", row.tv_min}, {"embed_gap", row.embed_gap}, {"resamples", row.resamples},
                        {"samples", row.samples}, {"mean_samples", row.mean_samples}});
        os << row.E << ',' << row.nu << ',' << row.cutoff << ',' << row.q_inf << ',' << row.energy_limit << ','
           << row.energy_sq_q << ',' << row.energy_sq_p_max << ',' << row.tv_min << ',' << row.embed_gap << ','
           << row.resamples << ',' << row.mean_samples << '\n';
    }
    csv = os.str();
    return {{"n", rep.n}, {"eps", rep.eps}, {"rows", rows}, {"monotone", rep.monotone},
            {"asymptotic_claim", rep.asymptotic_claim}};
}

}  // namespace

ConfigError::ConfigError(const std::string& field, int line, const std::string& what)
    : Error("config field '" + field + "'" + (line > 0 ? " (line " + std::to_string(line) + ")" : "") + ": " + what),
      field_(field),
      line_(line) {}

std::uint64_t default_seed() {
    if (const char* s = std::getenv("GAUSSTEST_SEED")) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(s, &used);
            if (used == std::string(s).size()) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError("GAUSSTEST_SEED", 0, "not an unsigned integer");
    }
    return 1;
}

ExperimentConfig parse_config(const json& j, const std::string& text) {
    if (!j.is_object()) throw ConfigError("<root>", 1, "configuration must be a JSON object");
    ExperimentConfig c;
    if (!j.contains("command")) throw ConfigError("command", 0, "missing");
    c.command = field_as<std::string>(j, "command", text, "a string");
    auto it = kCommandKeys.find(c.command);
    if (it == kCommandKeys.end()) throw ConfigError("command", line_of(text, "command"), "unknown command '" + c.command + "'");
    for (const auto& [key, value] : j.items())
        if (!kCommon.count(key) && !it->second.count(key))
            throw ConfigError(key, line_of(text, key), "unknown field for command " + c.command);

    auto has = [&](const char* k) { return j.contains(k) && !j[k].is_null(); };
    if (has("state")) c.state = j["state"].is_string() ? j["state"].get<std::string>() : j["state"].dump();
    if (has("cutoff")) c.cutoff = field_as<int>(j, "cutoff", text, "an integer");
    c.seed = has("seed") ? field_as<std::uint64_t>(j, "seed", text, "an unsigned integer") : default_seed();
    if (has("leakage_bound")) c.leakage_bound = field_as<double>(j, "leakage_bound", text, "a number");
    if (has("format")) c.format = field_as<std::string>(j, "format", text, "a string");
    if (has("output")) c.output = field_as<std::string>(j, "output", text, "a string");
    if (has("test")) c.test = j["test"].is_number_integer() ? std::to_string(j["test"].get<int>())
                                                              : field_as<std::string>(j, "test", text, "a test id");
    if (has("rounds")) c.rounds = field_as<std::uint64_t>(j, "rounds", text, "an unsigned integer");
    if (has("kappa")) c.kappa = field_as<double>(j, "kappa", text, "a number");
    if (has("epsA")) c.eps_a = field_as<double>(j, "epsA", text, "a number");
    if (has("epsB")) c.eps_b = field_as<double>(j, "epsB", text, "a number");
    if (has("E")) c.E = field_as<double>(j, "E", text, "a number");
    if (has("delta")) c.delta = field_as<double>(j, "delta", text, "a number");
    if (has("shots")) c.shots = field_as<std::uint64_t>(j, "shots", text, "an unsigned integer");
    if (has("scaling")) c.scaling = field_as<std::vector<std::uint64_t>>(j, "scaling", text, "a list of shot counts");
    if (has("pair")) c.pair = field_as<std::vector<std::string>>(j, "pair", text, "two state specs");
    if (has("n")) c.n = field_as<int>(j, "n", text, "an integer");
    if (has("energies")) c.energies = field_as<std::vector<double>>(j, "energies", text, "a list of numbers");
    if (has("eps")) c.eps = field_as<double>(j, "eps", text, "a number");
    if (has("trials")) c.trials = field_as<int>(j, "trials", text, "an integer");
    if (has("members")) c.members = field_as<int>(j, "members", text, "an integer");
    if (has("reps")) c.reps = field_as<int>(j, "reps", text, "an integer");

    if (c.format != "json" && c.format != "csv") throw ConfigError("format", line_of(text, "format"), "must be json or csv");
    if (c.format == "csv" && c.command != "hardness" && c.command != "covariance-test")
        throw ConfigError("format", line_of(text, "format"), "csv is only available for grid experiments");
    if (c.command == "bounds") {
        if (!c.pair.empty() && c.pair.size() != 2) throw ConfigError("pair", line_of(text, "pair"), "needs exactly two states");
        if (c.pair.empty() && !c.state) throw ConfigError("state", 0, "bounds needs --state or --pair");
        if (!c.pair.empty() && c.state) throw ConfigError("pair", line_of(text, "pair"), "give either state or pair");
    } else if (c.command != "hardness" && !c.state) {
        throw ConfigError("state", 0, "missing");
    }
    if (c.command == "rotation-test" && c.rounds == 0) throw ConfigError("rounds", line_of(text, "rounds"), "must be positive");
    return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<syntax>", line_of_offset(text, e.byte), e.what());
    }
    return parse_config(j, text);
}

json config_to_json(const ExperimentConfig& c) {
    json j{{"command", c.command}, {"seed", c.seed}, {"leakage_bound", c.leakage_bound}, {"format", c.format}};
    if (c.state) j["state"] = *c.state;
    if (c.cutoff) j["cutoff"] = *c.cutoff;
    const auto& keys = kCommandKeys.at(c.command);
    auto put = [&](const char* k, const json& v) {
        if (keys.count(k)) j[k] = v;
    };
    put("test", c.test);
    put("rounds", c.rounds);
    put("kappa", c.kappa);
    if (c.eps_a) put("epsA", *c.eps_a);
    if (c.eps_b) put("epsB", *c.eps_b);
    put("E", c.E);
    put("delta", c.delta);
    put("shots", c.shots);
    if (!c.scaling.empty()) put("scaling", c.scaling);
    if (!c.pair.empty()) put("pair", c.pair);
    put("n", c.n);
    put("energies", c.energies);
    put("eps", c.eps);
    put("trials", c.trials);
    put("members", c.members);
    put("reps", c.reps);
    return j;
}

Fixture parse_state_spec(const std::string& spec, std::optional<int> cutoff, double leakage_bound) {
    if (spec.empty()) throw InvalidArgument("empty state spec");
    if (spec[0] == '@') {
        std::ifstream in(spec.substr(1));
        if (!in) throw InvalidArgument("cannot read state file '" + spec.substr(1) + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        std::string body = ss.str();
        while (!body.empty() && std::isspace(static_cast<unsigned char>(body.back()))) body.pop_back();
        Fixture f = parse_state_spec(body, cutoff, leakage_bound);
        f.spec = spec;
        return f;
    }
    const auto first = spec.find_first_not_of(" \t\n\r");
    if (first != std::string::npos && spec[first] == '{') {
        json j;
        try {
            j = json::parse(spec);
        } catch (const json::parse_error& e) {
            throw InvalidArgument(std::string("inline state is not valid JSON: ") + e.what());
        }
        try {
            return inline_state(j, spec, cutoff, leakage_bound);
        } catch (const json::exception& e) {
            throw InvalidArgument(std::string("inline state: ") + e.what());
        }
    }
    return make_fixture(spec, cutoff, leakage_bound);
}

json payload_of(const json& envelope) {
    json p = envelope;
    p.erase("wall_clock_seconds");
    return p;
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentOutcome out;
    json& env = out.envelope;
    env["schema_version"] = kSchemaVersion;
    env["tool_version"] = kToolVersion;
    env["command"] = cfg.command;
    env["config"] = config_to_json(cfg);
    json warnings = json::array();
    auto fail = [&](int code, const char* type, const std::exception& e) {
        out.exit_code = code;
        env["results"] = nullptr;
        env["error"] = {{"type", type}, {"message", e.what()}};
    };
    try {
        json results;
        if (cfg.command == "state")
            results = run_state(cfg, warnings);
        else if (cfg.command == "moments")
            results = run_moments(cfg, warnings);
        else if (cfg.command == "rotation-test")
            results = run_rotation(cfg, warnings);
        else if (cfg.command == "covariance-test")
            results = run_covariance(cfg, warnings, out.csv);
        else if (cfg.command == "bounds")
            results = run_bounds(cfg, warnings);
        else if (cfg.command == "hardness")
            results = run_hardness(cfg, warnings, out.csv);
        else
            throw ConfigError("command", 0, "unknown command '" + cfg.command + "'");
        env["results"] = results;
    } catch (const ConfigError& e) {
        fail(1, "config", e);
    } catch (const InfeasibleError& e) {
        fail(2, "infeasible", e);
    } catch (const PreconditionError& e) {
        fail(2, "precondition", e);
    } catch (const LeakageError& e) {
        fail(2, "leakage", e);
    } catch (const BudgetError& e) {
        fail(2, "budget", e);
    } catch (const InvalidArgument& e) {
        fail(2, "invalid_argument", e);
    } catch (const std::exception& e) {
        fail(1, "internal", e);
    }
    env["warnings"] = warnings;
    env["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace gausstest
