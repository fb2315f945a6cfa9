#include "doctest.h"

#include "steinq/ctmc.hpp"
#include "steinq/des_sim.hpp"
#include "steinq/phase_type.hpp"
#include "steinq/stats.hpp"
#include "steinq/system_params.hpp"

#include <cmath>
#include <cstdlib>

using namespace steinq;

TEST_SUITE("des_sim") {

TEST_CASE("balanced abandonment gives the exact Poisson head-count mean") {
    // alpha = mu makes the total head count exactly Poisson(lambda/mu), so
    // E[e^T x] = delta*(lambda/mu - n) with no truncation error at all.
    const auto sp = make_system(20.0, 1.0, 1.0, ph::PhaseType::exponential(1.0));
    REQUIRE(sp.n == 24);
    sim::SimConfig cfg;
    cfg.horizon = 3000.0;
    cfg.replications = 8;
    cfg.seed = 21;
    const auto res = sim::simulate(sp, cfg);
    REQUIRE(res.reps.size() == 8);

    const auto means = sim::rep_means(res, [](const Vec& x) { return x.sum(); });
    const auto ms = stats::mean_se(means);
    const double exact = (20.0 - 24.0) / std::sqrt(20.0);
    CHECK(ms.se > 0.0);
    CHECK(ms.se < 0.05);
    CHECK(std::abs(ms.mean - exact) < 5.0 * ms.se);
}

TEST_CASE("snapshot moments agree with the exact chain law") {
    const auto sp = make_system(20.0, 1.0, 1.0, ph::PhaseType::exponential(1.0));
    sim::SimConfig cfg;
    cfg.horizon = 2000.0;
    cfg.replications = 6;
    cfg.seed = 33;
    const auto res = sim::simulate(sp, cfg);
    const auto law = ctmc::scaled_system_law(ctmc::solve_stationary(sp), sp);
    const auto cmp = sim::compare_to_ctmc(res, law);
    REQUIRE(!cmp.rows.empty());
    for (const auto& row : cmp.rows) CHECK(row.sim_se > 0.0);
    CHECK(cmp.max_abs_z < 5.0);
}

TEST_CASE("event accounting is conserved") {
    const auto sp = make_system(30.0, 1.0, 0.5, ph::PhaseType::erlang2(2.0));
    sim::SimConfig cfg;
    cfg.horizon = 500.0;
    cfg.replications = 2;
    cfg.seed = 7;
    const auto res = sim::simulate(sp, cfg);
    for (const auto& rep : res.reps) {
        CHECK(rep.arrived > 0);
        CHECK(rep.served > 0);
        const long in_flight = rep.arrived - rep.served - rep.abandoned;
        CHECK(in_flight >= 0);       // what's left is still in the system
        CHECK(in_flight < sp.n + 500);
    }
}

TEST_CASE("abandonment hazard is flat at the patience rate") {
    const auto sp = make_system(50.0, 1.0, 2.0, ph::PhaseType::exponential(1.0));
    sim::SimConfig cfg;
    cfg.horizon = 2000.0;
    cfg.replications = 4;
    cfg.seed = 15;
    const auto res = sim::simulate(sp, cfg);
    const auto hc = sim::hazard_exponentiality(res);
    REQUIRE(!hc.bins.empty());
    double total_exposure = 0.0;
    long total_abandons = 0;
    for (const auto& bin : hc.bins) {
        total_exposure += bin.exposure;
        total_abandons += bin.abandons;
    }
    CHECK(total_exposure > 0.0);
    CHECK(total_abandons > 1000);
    CHECK(hc.max_abs_z < 5.0);
}

TEST_CASE("queued phases look multinomial given the queue length") {
    const auto sp = make_system(50.0, 1.0, 0.5, ph::PhaseType::hyper2(0.5, 1.0, 3.0));
    sim::SimConfig cfg;
    cfg.horizon = 4000.0;
    cfg.replications = 5;
    cfg.seed = 29;
    const auto res = sim::simulate(sp, cfg);
    const auto rpt = sim::ssc_conditional(res, 500);
    REQUIRE(!rpt.cells.empty());
    for (const auto& cell : rpt.cells) {
        CHECK(cell.count >= 500);
        CHECK(cell.p_value > 1e-6);
    }
    CHECK(rpt.mean_w_z.cwiseAbs().maxCoeff() < 6.0);
    CHECK(std::abs(rpt.corr_q1_z1) <= 1.0);
}

TEST_CASE("runs are deterministic under the seed") {
    const auto sp = make_system(10.0, 1.0, 0.5, ph::PhaseType::erlang2(2.0));
    sim::SimConfig cfg;
    cfg.horizon = 200.0;
    cfg.replications = 2;
    cfg.seed = 99;
    const auto a = sim::simulate(sp, cfg);
    const auto b = sim::simulate(sp, cfg);
    for (size_t r = 0; r < a.reps.size(); ++r) {
        CHECK((a.reps[r].z.array() == b.reps[r].z.array()).all());
        CHECK((a.reps[r].q.array() == b.reps[r].q.array()).all());
        CHECK(a.reps[r].arrived == b.reps[r].arrived);
    }
    cfg.seed = 100;
    const auto c = sim::simulate(sp, cfg);
    CHECK(a.reps[0].arrived != c.reps[0].arrived);
}

TEST_CASE("warmup resolves automatically from the slowest rate") {
    const auto sp = make_system(5.0, 1.0, 0.1, ph::PhaseType::exponential(1.0));
    sim::SimConfig cfg;
    cfg.horizon = 10.0;
    cfg.seed = 3;
    const auto res = sim::simulate(sp, cfg);
    CHECK(res.config.warmup == doctest::Approx(200.0));  // 20 / min(mu, alpha)

    cfg.warmup = 50.0;
    const auto res2 = sim::simulate(sp, cfg);
    CHECK(res2.config.warmup == doctest::Approx(50.0));
}

TEST_CASE("snapshot scaling matches the definition") {
    const auto sp = make_system(20.0, 1.0, 0.5, ph::PhaseType::hyper2(0.5, 1.0, 3.0));
    sim::SimConfig cfg;
    cfg.horizon = 50.0;
    cfg.seed = 5;
    const auto res = sim::simulate(sp, cfg);
    const auto& rep = res.reps[0];
    REQUIRE(rep.z.rows() > 0);
    const long row = rep.z.rows() / 2;
    const Vec x = sim::scaled_snapshot(sp, rep, row);
    for (int i = 0; i < sp.pht.d; ++i) {
        const double manual =
            sp.delta * (rep.z(row, i) + rep.q(row, i) - sp.dp.gamma(i) * sp.n);
        CHECK(x(i) == doctest::Approx(manual).epsilon(1e-14));
    }
    CHECK(rep.ell(row) == rep.q.row(row).sum());
}

}  // TEST_SUITE
