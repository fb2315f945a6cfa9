#include "steinq/experiments.hpp"

#include "steinq/piecewise_ou.hpp"
#include "steinq/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace steinq::experiments {

std::vector<std::vector<int>> multi_indices(int d, int max_order) {
    if (d < 1 || max_order < 1) throw invalid_input("multi_indices: need d >= 1, order >= 1");
    std::vector<std::vector<int>> out;
    std::vector<int> cur(d, 0);
    std::function<void(int, int)> gen = [&](int pos, int remaining) {
        if (pos == d) {
            int deg = 0;
            for (int e : cur) deg += e;
            if (deg >= 1) out.push_back(cur);
            return;
        }
        for (int e = 0; e <= remaining; ++e) {
            cur[pos] = e;
            gen(pos + 1, remaining - e);
        }
        cur[pos] = 0;
    };
    gen(0, max_order);
    std::sort(out.begin(), out.end(), [](const std::vector<int>& a, const std::vector<int>& b) {
        int da = 0, db = 0;
        for (int e : a) da += e;
        for (int e : b) db += e;
        if (da != db) return da < db;
        return a < b;
    });
    return out;
}

RateFit fit_rate(const std::vector<double>& lambdas, const std::vector<double>& distances) {
    if (lambdas.size() != distances.size())
        throw invalid_input("fit_rate: size mismatch");
    std::vector<double> lx, ly;
    RateFit out;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        out.normalized.push_back(std::sqrt(lambdas[i]) * distances[i]);
        if (distances[i] > 0.0) {
            lx.push_back(std::log(lambdas[i]));
            ly.push_back(std::log(distances[i]));
        }
    }
    if (lx.size() < 3)
        throw invalid_input("fit_rate: need at least 3 positive distances");
    out.fit = stats::linear_fit(lx, ly);
    return out;
}

SweepResult rate_sweep(const cfg::RunConfig& config) {
    const int d = config.pht.d;
    SweepResult sweep;
    sweep.orders = d == 1 ? 4 : 2;

    for (std::size_t li = 0; li < config.lambdas.size(); ++li) {
        const double lambda = config.lambdas[li];
        DistanceReport rep;
        rep.lambda = lambda;
        if (lambda < 4.0) {
            rep.message =
                "arrival rate below the supported asymptotic range (need lambda >= 4); skipped";
            sweep.reports.push_back(rep);
            continue;
        }
        try {
            const SystemParams sp = make_system(lambda, config.beta, config.alpha, config.pht);
            rep.n = sp.n;
            rep.beta_eff = sp.beta_eff;
            ctmc::SolveOptions opt;
            opt.queue_tail_tol = config.queue_tail_tol;
            const auto pi = ctmc::solve_stationary(sp, opt);
            const auto law = ctmc::scaled_system_law(pi, sp);
            const auto mt = ctmc::moments(law, sweep.orders);
            rep.abs_moments = mt.abs_moment;
            rep.moment_gaps.assign(sweep.orders, 0.0);
            rep.moment_gap_se.assign(sweep.orders, 0.0);
            const auto model = ou::make_diffusion(sp);

            if (d == 1) {
                const ou::Ou1dLaw exact(model);
                const auto atomic = w1::make_atomic(law.points.col(0), law.prob);
                rep.w1 = w1::discrete_continuous(
                    atomic, [&](double t) { return exact.cdf(t); }, exact.quantile(1e-13),
                    exact.quantile(1.0 - 1e-13));
                for (int mo = 1; mo <= sweep.orders; ++mo)
                    rep.moment_gaps[mo - 1] =
                        std::abs(mt.mixed.at(std::vector<int>{mo}) - exact.moment(mo));
            } else {
                const double dt =
                    config.sde.dt > 0.0 ? config.sde.dt : ou::default_dt(config.pht, config.alpha);
                const int reps = 10;
                const std::int64_t steps =
                    std::max<std::int64_t>(1, config.sde.n_samples / reps) *
                    std::max(1, config.sde.thinning);
                const auto gaps = sde_moment_gaps(sp, mt, sweep.orders, reps, steps, dt,
                                                  config.sde.burn_in,
                                                  derive_seed(config.seed, 1000 + li));
                rep.moment_gaps = gaps.gap;
                rep.moment_gap_se = gaps.se;

                // Sliced W1 as a labeled estimate on a capped retained set.
                ou::SdeConfig sc;
                sc.dt = dt;
                sc.burn_in = config.sde.burn_in;
                sc.n_samples = std::min<std::int64_t>(std::max<std::int64_t>(
                                                          config.sde.n_samples, 10000),
                                                      200000);
                sc.thinning = std::max(config.sde.thinning, 8);
                sc.seed = derive_seed(config.seed, 2000 + li);
                const Mat samples = ou::euler_maruyama_samples(model, sc);
                const auto sl = w1::sliced(
                    law.points, law.prob, samples,
                    Vec::Constant(samples.rows(), 1.0 / static_cast<double>(samples.rows())), 32,
                    derive_seed(config.seed, 3000 + li));
                rep.w1 = sl.mean;
                rep.w1_se = sl.se;
            }
            rep.ok = true;
        } catch (const std::exception& e) {
            rep.ok = false;
            rep.message = e.what();
        }
        sweep.reports.push_back(rep);
    }

    // Rate fits over the successful rows (left default when too few points).
    std::vector<double> ls, w1s;
    std::vector<std::vector<double>> gaps(sweep.orders);
    for (const auto& r : sweep.reports) {
        if (!r.ok) continue;
        ls.push_back(r.lambda);
        w1s.push_back(r.w1);
        for (int mo = 0; mo < sweep.orders; ++mo) gaps[mo].push_back(r.moment_gaps[mo]);
    }
    auto positive = [](const std::vector<double>& v) {
        return static_cast<int>(std::count_if(v.begin(), v.end(), [](double x) { return x > 0; }));
    };
    if (ls.size() >= 3 && positive(w1s) >= 3) sweep.w1_fit = fit_rate(ls, w1s);
    sweep.gap_fits.resize(sweep.orders);
    for (int mo = 0; mo < sweep.orders; ++mo)
        if (ls.size() >= 3 && positive(gaps[mo]) >= 3) sweep.gap_fits[mo] = fit_rate(ls, gaps[mo]);
    return sweep;
}

BoundednessTable moment_boundedness(const SweepResult& sweep) {
    BoundednessTable tab;
    std::vector<const DistanceReport*> rows;
    for (const auto& r : sweep.reports)
        if (r.ok) rows.push_back(&r);
    if (rows.empty() || sweep.orders == 0) return tab;
    for (int mo = 1; mo <= sweep.orders; ++mo) tab.orders.push_back(mo);
    tab.values.resize(rows.size(), sweep.orders);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (int mo = 0; mo < sweep.orders; ++mo) tab.values(r, mo) = rows[r]->abs_moments[mo];
    for (int mo = 0; mo < sweep.orders; ++mo) {
        const double mx = tab.values.col(mo).maxCoeff();
        const double mn = tab.values.col(mo).minCoeff();
        tab.ratios.push_back(mn > 0.0 ? mx / mn : (mx == 0.0 ? 1.0 : 1e300));
    }
    return tab;
}

MomentGapReport sde_moment_gaps(const SystemParams& sp, const ctmc::MomentTable& exact,
                                int max_order, int replications, std::int64_t steps_per_rep,
                                double dt, double burn_in, std::uint64_t seed) {
    if (replications < 2) throw invalid_input("sde_moment_gaps: need >= 2 replications");
    if (max_order > exact.max_order)
        throw invalid_input("sde_moment_gaps: exact table order too low");
    const int d = sp.pht.d;
    const auto model = ou::make_diffusion(sp);
    const auto idxs = multi_indices(d, max_order);
    const std::size_t K = idxs.size();

    Mat rep_vals(replications, static_cast<long>(K));
    std::vector<double> acc(K);
    for (int r = 0; r < replications; ++r) {
        std::fill(acc.begin(), acc.end(), 0.0);
        ou::euler_maruyama_visit(model, dt, burn_in, steps_per_rep, derive_seed(seed, r),
                                 [&](const Vec& x) {
                                     for (std::size_t t = 0; t < K; ++t) {
                                         double prod = 1.0;
                                         for (int i = 0; i < d; ++i) {
                                             const int e = idxs[t][i];
                                             for (int k = 0; k < e; ++k) prod *= x(i);
                                         }
                                         acc[t] += prod;
                                     }
                                 });
        for (std::size_t t = 0; t < K; ++t)
            rep_vals(r, static_cast<long>(t)) = acc[t] / static_cast<double>(steps_per_rep);
    }

    MomentGapReport out;
    out.total_steps = static_cast<std::int64_t>(replications) * steps_per_rep;
    for (int mo = 1; mo <= max_order; ++mo) {
        double gap = 0.0, var = 0.0;
        for (std::size_t t = 0; t < K; ++t) {
            int deg = 0;
            for (int e : idxs[t]) deg += e;
            if (deg != mo) continue;
            std::vector<double> col(replications);
            for (int r = 0; r < replications; ++r) col[r] = rep_vals(r, static_cast<long>(t));
            const auto ms = stats::mean_se(col);
            gap += std::abs(exact.mixed.at(idxs[t]) - ms.mean);
            var += ms.se * ms.se;
        }
        out.orders.push_back(mo);
        out.gap.push_back(gap);
        out.se.push_back(std::sqrt(var));
    }
    return out;
}

}  // namespace steinq::experiments
