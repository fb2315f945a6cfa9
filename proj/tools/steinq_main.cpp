// =============================================================================
// steinq: exact and simulated steady-state analysis of many-server queues with
// phase-type service and abandonment, against their piecewise-OU diffusion
// limit. Every output CSV is a pure function of (config file, seed).
// =============================================================================

#include "steinq/config.hpp"
#include "steinq/ctmc.hpp"
#include "steinq/des_sim.hpp"
#include "steinq/experiments.hpp"
#include "steinq/phase_type.hpp"
#include "steinq/piecewise_ou.hpp"
#include "steinq/stein.hpp"
#include "steinq/system_params.hpp"
#include "steinq/wasserstein.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace steinq;

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw invalid_input("cannot open output file: " + path);
    out << std::setprecision(17);
    return out;
}

// "runs/pi.csv" -> "runs/pi_xtilde.csv"
std::string insert_suffix(const std::string& path, const std::string& suffix) {
    const auto dot = path.find_last_of('.');
    const auto slash = path.find_last_of("/\\");
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return path + suffix;
    return path.substr(0, dot) + suffix + path.substr(dot);
}

std::string join_coeffs(const std::vector<double>& coeffs) {
    std::ostringstream ss;
    ss << std::setprecision(17);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        if (i) ss << ';';
        ss << coeffs[i];
    }
    return ss.str();
}

std::vector<double> parse_coeffs(const std::string& spec) {
    std::vector<double> out;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used])))
                ++used;
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw invalid_input("--h: cannot parse coefficient \"" + tok + "\"");
        }
    }
    if (out.empty()) throw invalid_input("--h: empty coefficient list");
    return out;
}

double pick_first_lambda(const cfg::RunConfig& config, const char* cmd) {
    if (config.lambdas.size() > 1)
        std::cout << "note: config lists " << config.lambdas.size() << " arrival rates; " << cmd
                  << " uses the first (lambda = " << config.lambdas.front() << ")\n";
    return config.lambdas.front();
}

// ---------------------------------------------------------------------------
// solve-ctmc
// ---------------------------------------------------------------------------
void cmd_solve_ctmc(const std::string& config_path, const std::string& out_path) {
    const auto config = cfg::load_config(config_path);
    const double lambda = pick_first_lambda(config, "solve-ctmc");
    const auto sp = make_system(lambda, config.beta, config.alpha, config.pht);
    ctmc::SolveOptions opt;
    opt.queue_tail_tol = config.queue_tail_tol;
    const auto pi = ctmc::solve_stationary(sp, opt);
    const int d = sp.pht.d;

    {
        auto out = open_csv(out_path);
        for (int i = 1; i <= d; ++i) out << "state_z" << i << ',';
        out << "ell,prob\n";
        for (int s = 0; s < pi.space->size(); ++s) {
            for (int i = 0; i < d; ++i) out << pi.space->z(s, i) << ',';
            out << pi.space->ell(s) << ',' << pi.prob(s) << '\n';
        }
    }
    const auto law = ctmc::scaled_system_law(pi, sp);
    const std::string xt_path = insert_suffix(out_path, "_xtilde");
    {
        auto out = open_csv(xt_path);
        for (int i = 1; i <= d; ++i) out << "xtilde_x" << i << ',';
        out << "prob\n";
        for (long r = 0; r < law.prob.size(); ++r) {
            for (int i = 0; i < d; ++i) out << law.points(r, i) << ',';
            out << law.prob(r) << '\n';
        }
    }
    const auto mt = ctmc::moments(law, 2);
    std::cout << std::setprecision(10);
    std::cout << "lambda=" << lambda << " n=" << sp.n << " beta_eff=" << sp.beta_eff
              << " phase_type=" << config.phase_type_label << '\n';
    std::cout << "states=" << pi.space->size() << " queue_cap=" << pi.queue_cap
              << " tail_bound=" << pi.tail_bound << " residual=" << pi.residual << '\n';
    std::cout << "scaled mean = (";
    for (int i = 0; i < d; ++i) {
        std::vector<int> e(d, 0);
        e[i] = 1;
        std::cout << (i ? ", " : "") << mt.mixed.at(e);
    }
    std::cout << "),  E|x|^2 = " << mt.abs_moment[1] << '\n';
    std::cout << "wrote " << out_path << " and " << xt_path << '\n';
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------
void cmd_simulate(const std::string& config_path, const std::string& out_path,
                  std::uint64_t seed_flag, bool seed_given) {
    auto config = cfg::load_config(config_path);
    if (seed_given) config.sim.seed = seed_flag;
    const double lambda = pick_first_lambda(config, "simulate");
    const auto sp = make_system(lambda, config.beta, config.alpha, config.pht);
    const auto res = sim::simulate(sp, config.sim);
    const int d = sp.pht.d;

    auto out = open_csv(out_path);
    out << 't';
    for (int i = 1; i <= d; ++i) out << ",x" << i;
    for (int i = 1; i <= d; ++i) out << ",q" << i;
    for (int i = 1; i <= d; ++i) out << ",z" << i;
    out << '\n';
    long total = 0, arrived = 0, served = 0, abandoned = 0;
    for (const auto& rep : res.reps) {
        for (long r = 0; r < rep.ell.size(); ++r) {
            const double t = res.config.warmup + (r + 1) * res.config.sample_interval;
            const Vec x = sim::scaled_snapshot(sp, rep, r);
            out << t;
            for (int i = 0; i < d; ++i) out << ',' << x(i);
            for (int i = 0; i < d; ++i) out << ',' << rep.q(r, i);
            for (int i = 0; i < d; ++i) out << ',' << rep.z(r, i);
            out << '\n';
            ++total;
        }
        arrived += rep.arrived;
        served += rep.served;
        abandoned += rep.abandoned;
    }
    std::cout << std::setprecision(10);
    std::cout << "lambda=" << lambda << " n=" << sp.n << " replications=" << res.reps.size()
              << " snapshots=" << total << " warmup=" << res.config.warmup
              << " seed=" << config.sim.seed << '\n';
    std::cout << "arrived=" << arrived << " served=" << served << " abandoned=" << abandoned
              << '\n';
    const auto hz = sim::hazard_exponentiality(res);
    std::cout << "abandonment hazard audit: max |z| over " << hz.bins.size()
              << " age bins = " << hz.max_abs_z << '\n';
    std::cout << "wrote " << out_path << '\n';
}

// ---------------------------------------------------------------------------
// simulate-sde
// ---------------------------------------------------------------------------
void cmd_simulate_sde(const std::string& config_path, const std::string& out_path) {
    const auto config = cfg::load_config(config_path);
    const double lambda = pick_first_lambda(config, "simulate-sde");
    const auto sp = make_system(lambda, config.beta, config.alpha, config.pht);
    const auto model = ou::make_diffusion(sp);
    ou::SdeConfig sc = config.sde;
    if (sc.dt <= 0.0) sc.dt = ou::default_dt(config.pht, config.alpha);
    if (sc.n_samples <= 0) sc.n_samples = 100000;
    const Mat samples = ou::euler_maruyama_samples(model, sc);

    auto out = open_csv(out_path);
    for (int i = 1; i <= model.d; ++i) out << (i > 1 ? "," : "") << 'x' << i;
    out << '\n';
    for (long r = 0; r < samples.rows(); ++r) {
        for (int i = 0; i < model.d; ++i) out << (i ? "," : "") << samples(r, i);
        out << '\n';
    }
    std::cout << std::setprecision(10);
    std::cout << "lambda=" << lambda << " beta_eff=" << sp.beta_eff << " dt=" << sc.dt
              << " burn_in=" << sc.burn_in << " thinning=" << sc.thinning
              << " samples=" << samples.rows() << " seed=" << sc.seed << '\n';
    std::cout << "sample mean = (";
    for (int i = 0; i < model.d; ++i) std::cout << (i ? ", " : "") << samples.col(i).mean();
    std::cout << ")\n";
    std::cout << "wrote " << out_path << '\n';
}

// ---------------------------------------------------------------------------
// exact-ou1d
// ---------------------------------------------------------------------------
void cmd_exact_ou1d(const std::string& config_path, const std::string& out_path, long n_points) {
    const auto config = cfg::load_config(config_path);
    if (config.pht.d != 1)
        throw invalid_input("exact-ou1d: requires a one-phase (exponential) service distribution");
    const double lambda = pick_first_lambda(config, "exact-ou1d");
    const auto sp = make_system(lambda, config.beta, config.alpha, config.pht);
    const auto law = ou::exact_1d(ou::make_diffusion(sp));

    const double lo = law.quantile(1e-9);
    const double hi = law.quantile(1.0 - 1e-9);
    if (n_points < 2) throw invalid_input("exact-ou1d: need at least 2 grid points");

    const bool to_stdout = out_path.empty();
    std::ofstream file;
    if (!to_stdout) file = open_csv(out_path);
    std::ostream& out = to_stdout ? std::cout : file;
    if (to_stdout) out << std::setprecision(17);

    out << "x,pdf,cdf\n";
    for (long k = 0; k < n_points; ++k) {
        const double x = lo + (hi - lo) * static_cast<double>(k) / (n_points - 1);
        out << x << ',' << law.density(x) << ',' << law.cdf(x) << '\n';
    }
    if (!to_stdout) {
        std::cout << std::setprecision(10);
        std::cout << "lambda=" << lambda << " beta_eff=" << law.beta() << " alpha=" << law.alpha()
                  << " mu=" << law.mu() << " sigma^2=" << law.sigma2() << '\n';
        std::cout << "moments: ";
        for (int k = 1; k <= 4; ++k) std::cout << (k > 1 ? ", " : "") << "E Y^" << k << " = "
                                               << law.moment(k);
        std::cout << "\nwrote " << out_path << '\n';
    }
}

// ---------------------------------------------------------------------------
// stein-check
// ---------------------------------------------------------------------------
void cmd_stein_check(const std::string& config_path, const std::string& out_path,
                     const std::vector<std::string>& h_flags) {
    const auto config = cfg::load_config(config_path);
    if (config.pht.d != 1)
        throw invalid_input(
            "stein-check: the generator-coupling identity is implemented for one-phase "
            "(exponential) service only");
    std::vector<std::vector<double>> hs;
    if (!h_flags.empty())
        for (const auto& s : h_flags) hs.push_back(parse_coeffs(s));
    else
        hs = config.h_polynomials;

    auto out = open_csv(out_path);
    out << "lambda,n,beta_eff,h,lhs,rhs,mismatch\n";
    double worst = 0.0;
    for (const double lambda : config.lambdas) {
        const auto sp = make_system(lambda, config.beta, config.alpha, config.pht);
        ctmc::SolveOptions opt;
        opt.queue_tail_tol = config.queue_tail_tol;
        const auto pi = ctmc::solve_stationary(sp, opt);
        const auto law = ctmc::scaled_system_law(pi, sp);
        const auto model = ou::make_diffusion(sp);
        for (const auto& coeffs : hs) {
            const auto h = [&coeffs](double u) { return cfg::eval_polynomial(coeffs, u); };
            const auto fh = stein::poisson_solve_1d(model, h);
            const auto gap = stein::stein_gap_1d(law, model, fh, h);
            out << lambda << ',' << sp.n << ',' << sp.beta_eff << ',' << join_coeffs(coeffs)
                << ',' << gap.lhs << ',' << gap.rhs << ',' << gap.mismatch << '\n';
            worst = std::max(worst, gap.mismatch);
            std::cout << std::setprecision(10) << "lambda=" << lambda << "  h=["
                      << join_coeffs(coeffs) << "]  lhs=" << gap.lhs << "  rhs=" << gap.rhs
                      << "  |lhs-rhs|=" << gap.mismatch << '\n';
        }
    }
    std::cout << std::setprecision(10) << "worst coupling mismatch = " << worst << '\n';
    std::cout << "wrote " << out_path << '\n';
}

// ---------------------------------------------------------------------------
// ssc-check
// ---------------------------------------------------------------------------
void cmd_ssc_check(const std::string& config_path, const std::string& out_path, long min_count) {
    const auto config = cfg::load_config(config_path);
    const double lambda = pick_first_lambda(config, "ssc-check");
    const auto sp = make_system(lambda, config.beta, config.alpha, config.pht);
    const auto res = sim::simulate(sp, config.sim);
    const auto rep = sim::ssc_conditional(res, min_count);
    const int d = sp.pht.d;

    if (!out_path.empty()) {
        auto out = open_csv(out_path);
        out << "ell,count,chi2,dof,p_value\n";
        for (const auto& c : rep.cells)
            out << c.ell << ',' << c.count << ',' << c.chi2 << ',' << c.dof << ',' << c.p_value
                << '\n';
    }
    std::cout << std::setprecision(10);
    std::cout << "lambda=" << lambda << " n=" << sp.n << " replications=" << res.reps.size()
              << " seed=" << config.sim.seed << '\n';
    std::cout << "queue-composition cells with count >= " << min_count << ": " << rep.cells.size()
              << '\n';
    if (!rep.cells.empty()) {
        double min_p = 1.0;
        for (const auto& c : rep.cells) min_p = std::min(min_p, c.p_value);
        const double bonf = 0.01 / static_cast<double>(rep.cells.size());
        std::cout << "min p-value = " << min_p << "  (Bonferroni threshold at level 0.01: " << bonf
                  << ")  => " << (min_p >= bonf ? "consistent" : "REJECTED") << '\n';
    }
    std::cout << "mean w = delta q - p (e.x)^+ per phase, with z-scores:\n";
    for (int i = 0; i < d; ++i)
        std::cout << "  phase " << i + 1 << ": mean=" << rep.mean_w(i) << " se=" << rep.mean_w_se(i)
                  << " z=" << rep.mean_w_z(i) << '\n';
    std::cout << "corr(q1 - p1 ell, z1) = " << rep.corr_q1_z1 << '\n';
    if (!out_path.empty()) std::cout << "wrote " << out_path << '\n';
}

// ---------------------------------------------------------------------------
// rate-sweep
// ---------------------------------------------------------------------------
void cmd_rate_sweep(const std::string& config_path, const std::string& out_dir) {
    const auto config = cfg::load_config(config_path);
    const auto sweep = experiments::rate_sweep(config);
    std::filesystem::create_directories(out_dir);
    const std::string fit_path = out_dir + "/ratefit.csv";
    const std::string sum_path = out_dir + "/ratefit_summary.csv";

    {
        auto out = open_csv(fit_path);
        out << "lambda,n,beta_eff,w1,sqrtlambda_w1";
        for (int mo = 1; mo <= sweep.orders; ++mo) out << ",gap_m" << mo;
        out << '\n';
        for (const auto& r : sweep.reports) {
            if (!r.ok) {
                std::cout << "warning: lambda=" << r.lambda << " skipped: " << r.message << '\n';
                continue;
            }
            out << r.lambda << ',' << r.n << ',' << r.beta_eff << ',' << r.w1 << ','
                << std::sqrt(r.lambda) * r.w1;
            for (int mo = 0; mo < sweep.orders; ++mo) out << ',' << r.moment_gaps[mo];
            out << '\n';
        }
    }
    {
        auto out = open_csv(sum_path);
        out << "metric,slope,intercept,r2\n";
        auto write_fit = [&out](const std::string& name, const experiments::RateFit& f) {
            if (f.normalized.empty()) return;  // no fit computed
            out << name << ',' << f.fit.slope << ',' << f.fit.intercept << ',' << f.fit.r_squared
                << '\n';
        };
        write_fit("w1", sweep.w1_fit);
        for (int mo = 0; mo < sweep.orders; ++mo)
            write_fit("gap_m" + std::to_string(mo + 1), sweep.gap_fits[mo]);
    }

    std::cout << std::setprecision(10);
    std::cout << "phase_type=" << config.phase_type_label << "  beta=" << config.beta
              << "  alpha=" << config.alpha << '\n';
    for (const auto& r : sweep.reports) {
        if (!r.ok) continue;
        std::cout << "lambda=" << r.lambda << " n=" << r.n << " w1=" << r.w1
                  << " sqrt(lambda)*w1=" << std::sqrt(r.lambda) * r.w1;
        for (int mo = 0; mo < sweep.orders; ++mo)
            std::cout << " gap_m" << mo + 1 << "=" << r.moment_gaps[mo];
        std::cout << '\n';
    }
    if (!sweep.w1_fit.normalized.empty())
        std::cout << "w1 rate fit: slope=" << sweep.w1_fit.fit.slope
                  << " intercept=" << sweep.w1_fit.fit.intercept
                  << " r2=" << sweep.w1_fit.fit.r_squared << '\n';
    const auto bt = experiments::moment_boundedness(sweep);
    for (std::size_t k = 0; k < bt.orders.size(); ++k)
        std::cout << "max/min E|x|^" << bt.orders[k] << " across rates = " << bt.ratios[k] << '\n';
    std::cout << "wrote " << fit_path << " and " << sum_path << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "steinq: steady-state laws of many-server queues with phase-type service and "
        "abandonment, their piecewise-OU diffusion approximation, and generator-coupling "
        "diagnostics"};
    app.require_subcommand(1);

    std::string config_path, out_path, out_dir = ".";
    std::uint64_t seed_flag = 0;
    long n_points = 2001, min_count = 2000;
    std::vector<std::string> h_flags;

    auto* solve = app.add_subcommand("solve-ctmc",
                                     "Exact stationary law of the truncated Markov chain");
    solve->add_option("--config", config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    solve->add_option("--out", out_path, "states CSV (a *_xtilde companion file is also written)")
        ->required();
    solve->callback([&] { cmd_solve_ctmc(config_path, out_path); });

    auto* simc = app.add_subcommand("simulate", "Discrete-event simulation with state snapshots");
    simc->add_option("--config", config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    auto* seed_opt = simc->add_option("--seed", seed_flag, "override the simulation seed");
    simc->add_option("--out", out_path, "snapshot CSV")->required();
    simc->callback(
        [&] { cmd_simulate(config_path, out_path, seed_flag, seed_opt->count() > 0); });

    auto* sde = app.add_subcommand("simulate-sde",
                                   "Euler-Maruyama sampling of the piecewise-OU diffusion");
    sde->add_option("--config", config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    sde->add_option("--out", out_path, "sample CSV")->required();
    sde->callback([&] { cmd_simulate_sde(config_path, out_path); });

    auto* exact = app.add_subcommand("exact-ou1d",
                                     "Exact one-dimensional stationary density/cdf table");
    exact->add_option("--config", config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    exact->add_option("--out", out_path, "table CSV (stdout when omitted)");
    exact->add_option("--points", n_points, "grid points (default 2001)");
    exact->callback([&] { cmd_exact_ou1d(config_path, out_path, n_points); });

    auto* steinc = app.add_subcommand("stein-check",
                                      "Generator-coupling identity for polynomial test functions");
    steinc->set_help_flag("--help", "print help");  // frees -h so --h can name the test function
    steinc->add_option("--config", config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    steinc->add_option("--h", h_flags,
                       "polynomial as ascending coefficients \"c0,c1,...\" (repeatable; "
                       "overrides the config's h_polynomials)");
    steinc->add_option("--out", out_path, "gap CSV")->required();
    steinc->callback([&] { cmd_stein_check(config_path, out_path, h_flags); });

    auto* ssc = app.add_subcommand("ssc-check",
                                   "Queue-composition (state-space collapse) diagnostics");
    ssc->add_option("--config", config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    ssc->add_option("--out", out_path, "per-queue-length chi-square CSV");
    ssc->add_option("--min-count", min_count, "minimum snapshots per queue length (default 2000)");
    ssc->callback([&] { cmd_ssc_check(config_path, out_path, min_count); });

    auto* sweep = app.add_subcommand("rate-sweep",
                                     "Chain-vs-diffusion distances across arrival rates");
    sweep->add_option("--config", config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    sweep->add_option("--out-dir", out_dir, "output directory (default .)");
    sweep->callback([&] { cmd_rate_sweep(config_path, out_dir); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const invalid_input& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
