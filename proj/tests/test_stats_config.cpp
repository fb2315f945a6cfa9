#include "doctest.h"

#include "steinq/config.hpp"
#include "steinq/experiments.hpp"
#include "steinq/stats.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

using namespace steinq;

TEST_SUITE("stats_config") {

TEST_CASE("least squares recovers an exact line") {
    const auto fit = stats::linear_fit({1.0, 2.0, 3.0, 4.0}, {1.0, 4.0, 7.0, 10.0});
    CHECK(fit.slope == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rate fitting on synthetic 1/sqrt(lambda) decay") {
    const std::vector<double> lambdas = {25.0, 100.0, 400.0, 1600.0};
    std::vector<double> dist;
    for (double l : lambdas) dist.push_back(3.0 / std::sqrt(l));
    const auto rf = experiments::fit_rate(lambdas, dist);
    CHECK(rf.fit.slope == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(rf.fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(rf.normalized.size() == 4);
    for (double v : rf.normalized) CHECK(v == doctest::Approx(3.0).epsilon(1e-12));

    CHECK_THROWS_AS((void)experiments::fit_rate({25.0, 100.0}, {0.1, 0.0}), invalid_input);
}

TEST_CASE("multi-index enumeration is ordered by degree then lexicographically") {
    const auto idx2 = experiments::multi_indices(2, 2);
    const std::vector<std::vector<int>> expect = {
        {0, 1}, {1, 0}, {0, 2}, {1, 1}, {2, 0}};
    CHECK(idx2 == expect);
    const auto idx1 = experiments::multi_indices(1, 4);
    CHECK(idx1 == std::vector<std::vector<int>>{{1}, {2}, {3}, {4}});
}

TEST_CASE("batch means degrade gracefully to iid behaviour") {
    const std::vector<double> flat(300, 2.5);
    const auto c = stats::batch_means(flat, 30);
    CHECK(c.mean == doctest::Approx(2.5));
    CHECK(c.se == doctest::Approx(0.0));

    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> iid(4000);
    for (auto& v : iid) v = g(rng);
    const auto b = stats::batch_means(iid, 40);
    const double iid_se = 1.0 / std::sqrt(4000.0);
    CHECK(std::abs(b.mean) < 0.1);
    CHECK(b.se > 0.5 * iid_se);
    CHECK(b.se < 2.0 * iid_se);
}

TEST_CASE("chi-square tail quantiles") {
    CHECK(stats::chi_square_pvalue(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-4));
    CHECK(stats::chi_square_pvalue(5.991464547107979, 2) == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(stats::chi_square_pvalue(0.0, 3) == doctest::Approx(1.0));
}

TEST_CASE("counting helpers") {
    CHECK(std::exp(stats::log_choose(10, 3)) == doctest::Approx(120.0).epsilon(1e-10));
    CHECK(std::exp(stats::log_choose(5, 0)) == doctest::Approx(1.0));

    double total = 0.0;
    for (long k = 0; k <= 20; ++k) total += stats::binomial_pmf(k, 20, 0.3);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stats::binomial_pmf(3, 10, 0.25) ==
          doctest::Approx(120.0 * std::pow(0.25, 3) * std::pow(0.75, 7)).epsilon(1e-12));
}

TEST_CASE("goodness of fit pools sparse cells") {
    const std::vector<double> same = {10.0, 20.0, 30.0};
    const auto r0 = stats::chi_square_gof(same, same);
    CHECK(r0.stat == doctest::Approx(0.0));
    CHECK(r0.p_value == doctest::Approx(1.0));

    const std::vector<double> obs = {1.0, 1.0, 10.0, 10.0};
    const auto r1 = stats::chi_square_gof(obs, obs);
    CHECK(r1.pooled_cells == 2);  // {1,1,10} pooled to reach the minimum, then {10}
    CHECK(r1.dof == 1);
}

TEST_CASE("correlation endpoints") {
    CHECK(stats::correlation({1.0, 2.0, 3.0}, {2.0, 4.0, 6.0}) == doctest::Approx(1.0));
    CHECK(stats::correlation({1.0, 2.0, 3.0}, {-1.0, -2.0, -3.0}) == doctest::Approx(-1.0));
}

TEST_CASE("full configuration round-trip") {
    const auto cfg = cfg::parse_config(R"({
        "lambdas": [25, 100],
        "beta": 1.5,
        "alpha": 0.25,
        "preset": {"name": "H2", "p1": 0.5, "nu1": 1.0, "nu2": 3.0},
        "queue_tail_tol": 1e-8,
        "sde": {"dt": 0.002, "burn_in": 10, "n_samples": 500, "thinning": 4, "seed": 7},
        "sim": {"warmup": 30, "horizon": 100, "sample_interval": 0.5, "replications": 3},
        "seed": 42,
        "h_polynomials": [[0, 1], [0, 0, 2]]
    })");
    CHECK(cfg.lambdas == std::vector<double>{25.0, 100.0});
    CHECK(cfg.beta == doctest::Approx(1.5));
    CHECK(cfg.alpha == doctest::Approx(0.25));
    CHECK(cfg.pht.d == 2);
    CHECK(cfg.pht.nu(1) == doctest::Approx(3.0));
    CHECK(cfg.queue_tail_tol == doctest::Approx(1e-8));
    CHECK(cfg.sde.dt == doctest::Approx(0.002));
    CHECK(cfg.sde.n_samples == 500);
    CHECK(cfg.sde.thinning == 4);
    CHECK(cfg.sde.seed == 7);  // block seed overrides the global one
    CHECK(cfg.sim.warmup == doctest::Approx(30.0));
    CHECK(cfg.sim.replications == 3);
    CHECK(cfg.sim.seed == 42);  // inherited
    CHECK(cfg.seed == 42);
    REQUIRE(cfg.h_polynomials.size() == 2);
    CHECK(cfg.h_polynomials[1] == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("defaults and seed inheritance") {
    const auto cfg = cfg::parse_config(R"({"lambda": 25})");
    CHECK(cfg.lambdas == std::vector<double>{25.0});
    CHECK(cfg.beta == doctest::Approx(1.0));
    CHECK(cfg.alpha == doctest::Approx(0.5));
    CHECK(cfg.pht.d == 1);
    CHECK(cfg.sde.dt == doctest::Approx(-1.0));  // resolved downstream
    CHECK(cfg.seed == 1);
    const std::vector<std::vector<double>> def = {{0.0, 1.0}, {0.0, 0.0, 1.0}};
    CHECK(cfg.h_polynomials == def);

    const auto seeded = cfg::parse_config(R"({"lambda": 25, "seed": 42})");
    CHECK(seeded.sde.seed == 42);
    CHECK(seeded.sim.seed == 42);
}

TEST_CASE("preset shorthand") {
    CHECK(cfg::parse_config(R"({"lambda": 9, "preset": "E2"})").pht.nu(0) ==
          doctest::Approx(2.0));
    CHECK(cfg::parse_config(R"({"lambda": 9, "preset": "M"})").pht.d == 1);
    CHECK(cfg::parse_config(R"({"lambda": 9, "preset": "H2"})").pht.d == 2);
}

TEST_CASE("custom phase type is validated") {
    const auto cfg = cfg::parse_config(R"({
        "lambda": 9,
        "phase_type": {"p": [0.2, 0.8], "nu": [1.0, 2.0], "P": [[0.0, 0.5], [0.0, 0.0]]}
    })");
    CHECK(cfg.pht.d == 2);
    CHECK(cfg.pht.P(0, 1) == doctest::Approx(0.5));

    CHECK_THROWS_AS((void)cfg::parse_config(R"({
        "lambda": 9,
        "phase_type": {"p": [1.2, 0.8], "nu": [1.0, 2.0], "P": [[0.0, 0.5], [0.0, 0.0]]}
    })"),
                    invalid_input);
}

TEST_CASE("malformed configurations are rejected") {
    CHECK_THROWS_AS((void)cfg::parse_config(R"({"lambda": 25, "lambdaz": 1})"), invalid_input);
    CHECK_THROWS_AS((void)cfg::parse_config(R"({"lambda": 25, "sde": {"dtx": 1}})"),
                    invalid_input);
    CHECK_THROWS_AS((void)cfg::parse_config(R"({"lambda": 25, "sim": {"horizonx": 1}})"),
                    invalid_input);
    CHECK_THROWS_AS((void)cfg::parse_config(R"({"lambda": 25, "lambdas": [25]})"), invalid_input);
    CHECK_THROWS_AS((void)cfg::parse_config(R"({"beta": 1.0})"), invalid_input);
    CHECK_THROWS_AS((void)cfg::parse_config(R"({"lambda": -3})"), invalid_input);
    CHECK_THROWS_AS((void)cfg::parse_config(R"({"lambda": 0})"), invalid_input);
    CHECK_THROWS_AS((void)cfg::parse_config(R"({"lambda": 25, "preset": "X2"})"), invalid_input);
    CHECK_THROWS_AS((void)cfg::parse_config(R"({"lambda": 25, "h_polynomials": [[]]})"),
                    invalid_input);
    CHECK_THROWS_AS((void)cfg::parse_config("not json at all"), invalid_input);
}

TEST_CASE("missing configuration files name the path") {
    try {
        (void)cfg::load_config("/nonexistent/steinq.json");
        FAIL("expected a throw");
    } catch (const invalid_input& e) {
        CHECK(std::string(e.what()).find("/nonexistent/steinq.json") != std::string::npos);
    }
}

TEST_CASE("polynomial evaluation uses ascending coefficients") {
    CHECK(cfg::eval_polynomial({1.0, 2.0, 3.0}, 2.0) == doctest::Approx(17.0));
    CHECK(cfg::eval_polynomial({5.0}, 3.0) == doctest::Approx(5.0));
}

}  // TEST_SUITE
