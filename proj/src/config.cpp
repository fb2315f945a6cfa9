#include "steinq/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace steinq::cfg {

namespace {

using nlohmann::json;

ph::PhaseType parse_preset(const json& j, std::string& label) {
    std::string name;
    json opts = json::object();
    if (j.is_string()) {
        name = j.get<std::string>();
    } else if (j.is_object()) {
        if (!j.contains("name")) throw invalid_input("config: preset object needs \"name\"");
        name = j.at("name").get<std::string>();
        opts = j;
    } else {
        throw invalid_input("config: \"preset\" must be a string or an object");
    }
    if (name == "E2") {
        const double theta = opts.value("theta", 2.0);
        label = "E2(theta=" + std::to_string(theta) + ")";
        return ph::PhaseType::erlang2(theta);
    }
    if (name == "H2") {
        const double p1 = opts.value("p1", 0.5);
        const double nu1 = opts.value("nu1", 1.0);
        const double nu2 = opts.value("nu2", 3.0);
        label = "H2(p1=" + std::to_string(p1) + ",nu=" + std::to_string(nu1) + "," +
                std::to_string(nu2) + ")";
        return ph::PhaseType::hyper2(p1, nu1, nu2);
    }
    if (name == "M") {
        const double mu = opts.value("mu", 1.0);
        label = "M(mu=" + std::to_string(mu) + ")";
        return ph::PhaseType::exponential(mu);
    }
    throw invalid_input("config: unknown preset \"" + name + "\" (expected E2, H2, or M)");
}

ph::PhaseType parse_phase_type(const json& j, std::string& label) {
    if (!j.is_object() || !j.contains("p") || !j.contains("nu") || !j.contains("P"))
        throw invalid_input("config: \"phase_type\" needs arrays p, nu and matrix P");
    const auto pv = j.at("p").get<std::vector<double>>();
    const auto nv = j.at("nu").get<std::vector<double>>();
    const auto Pv = j.at("P").get<std::vector<std::vector<double>>>();
    const int d = static_cast<int>(pv.size());
    if (static_cast<int>(nv.size()) != d || static_cast<int>(Pv.size()) != d)
        throw invalid_input("config: phase_type p, nu, P sizes disagree");
    ph::PhaseType pht;
    pht.d = d;
    pht.p.resize(d);
    pht.nu.resize(d);
    pht.P.resize(d, d);
    for (int i = 0; i < d; ++i) {
        pht.p(i) = pv[i];
        pht.nu(i) = nv[i];
        if (static_cast<int>(Pv[i].size()) != d)
            throw invalid_input("config: phase_type P must be d x d");
        for (int k = 0; k < d; ++k) pht.P(i, k) = Pv[i][k];
    }
    label = "custom(d=" + std::to_string(d) + ")";
    const auto rep = ph::validate(pht);
    if (!rep.ok) throw invalid_input("config: invalid phase_type: " + rep.message);
    return pht;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw invalid_input(std::string("config: JSON parse error: ") + e.what());
    }
    if (!j.is_object()) throw invalid_input("config: top level must be an object");

    static const std::set<std::string> known = {
        "lambda", "lambdas", "beta",  "alpha",         "phase_type", "preset",
        "queue_tail_tol",    "sde",   "sim",           "seed",       "h_polynomials"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw invalid_input("config: unknown key \"" + key + "\"");

    RunConfig cfg;
    cfg.sde.dt = -1.0;  // resolved to the model default at use time

    if (j.contains("lambda") && j.contains("lambdas"))
        throw invalid_input("config: give either \"lambda\" or \"lambdas\", not both");
    if (j.contains("lambda")) cfg.lambdas = {j.at("lambda").get<double>()};
    if (j.contains("lambdas")) cfg.lambdas = j.at("lambdas").get<std::vector<double>>();
    if (cfg.lambdas.empty()) throw invalid_input("config: \"lambda\" or \"lambdas\" required");
    for (double l : cfg.lambdas)
        if (!(l > 0.0) || !std::isfinite(l))
            throw invalid_input("config: arrival rates must be positive and finite");

    cfg.beta = j.value("beta", cfg.beta);
    cfg.alpha = j.value("alpha", cfg.alpha);
    if (!(cfg.alpha > 0.0)) throw invalid_input("config: alpha must be positive");
    cfg.queue_tail_tol = j.value("queue_tail_tol", cfg.queue_tail_tol);
    if (!(cfg.queue_tail_tol > 0.0))
        throw invalid_input("config: queue_tail_tol must be positive");
    cfg.seed = j.value("seed", cfg.seed);
    cfg.sde.seed = cfg.seed;  // sub-blocks inherit the global seed unless overridden
    cfg.sim.seed = cfg.seed;

    if (j.contains("phase_type") && j.contains("preset"))
        throw invalid_input("config: give either \"phase_type\" or \"preset\", not both");
    if (j.contains("preset"))
        cfg.pht = parse_preset(j.at("preset"), cfg.phase_type_label);
    else if (j.contains("phase_type"))
        cfg.pht = parse_phase_type(j.at("phase_type"), cfg.phase_type_label);

    if (j.contains("sde")) {
        const json& s = j.at("sde");
        static const std::set<std::string> sde_keys = {"dt", "burn_in", "n_samples", "thinning",
                                                       "seed"};
        for (const auto& [key, _] : s.items())
            if (!sde_keys.count(key))
                throw invalid_input("config: unknown sde key \"" + key + "\"");
        cfg.sde.dt = s.value("dt", cfg.sde.dt);
        cfg.sde.burn_in = s.value("burn_in", cfg.sde.burn_in);
        cfg.sde.n_samples = s.value("n_samples", cfg.sde.n_samples);
        cfg.sde.thinning = s.value("thinning", cfg.sde.thinning);
        cfg.sde.seed = s.value("seed", cfg.sde.seed);
    }
    if (j.contains("sim")) {
        const json& s = j.at("sim");
        static const std::set<std::string> sim_keys = {"warmup", "horizon", "sample_interval",
                                                       "replications"};
        for (const auto& [key, _] : s.items())
            if (!sim_keys.count(key))
                throw invalid_input("config: unknown sim key \"" + key + "\"");
        cfg.sim.warmup = s.value("warmup", cfg.sim.warmup);
        cfg.sim.horizon = s.value("horizon", cfg.sim.horizon);
        cfg.sim.sample_interval = s.value("sample_interval", cfg.sim.sample_interval);
        cfg.sim.replications = s.value("replications", cfg.sim.replications);
    }

    if (j.contains("h_polynomials")) {
        cfg.h_polynomials = j.at("h_polynomials").get<std::vector<std::vector<double>>>();
        for (const auto& c : cfg.h_polynomials)
            if (c.empty()) throw invalid_input("config: empty polynomial in h_polynomials");
    } else {
        cfg.h_polynomials = {{0.0, 1.0}, {0.0, 0.0, 1.0}};  // x and x^2
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input("config: cannot open \"" + path + "\"");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const invalid_input& e) {
        throw invalid_input(std::string(e.what()) + " [" + path + "]");
    }
}

double eval_polynomial(const std::vector<double>& coeffs, double u) {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * u + *it;
    return acc;
}

}  // namespace steinq::cfg
