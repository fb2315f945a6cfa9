#include "doctest.h"

#include "steinq/ctmc.hpp"
#include "steinq/phase_type.hpp"
#include "steinq/system_params.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

using namespace steinq;

namespace {

// Independent oracle for one-phase systems: the total customer count is a
// birth-death chain (birth lambda; death min(k,n)*mu + alpha*(k-n)^+), and
// truncating a reversible birth-death chain just conditions its stationary
// law, so the detailed-balance recursion must match the sparse solve exactly.
std::vector<double> birth_death_pi(double lambda, int n, double mu, double alpha, long cap) {
    const long K = n + cap;
    std::vector<double> lp(K + 1);
    lp[0] = 0.0;
    for (long k = 0; k < K; ++k) {
        const double death =
            (k + 1 <= n) ? (k + 1) * mu : n * mu + alpha * static_cast<double>(k + 1 - n);
        lp[k + 1] = lp[k] + std::log(lambda) - std::log(death);
    }
    const double mx = *std::max_element(lp.begin(), lp.end());
    double z = 0.0;
    for (double v : lp) z += std::exp(v - mx);
    const double logz = mx + std::log(z);
    std::vector<double> pi(K + 1);
    for (long k = 0; k <= K; ++k) pi[k] = std::exp(lp[k] - logz);
    return pi;
}

ctmc::StationaryPmf solve(const SystemParams& sp, double tail_tol = 1e-9) {
    ctmc::SolveOptions opt;
    opt.queue_tail_tol = tail_tol;
    return ctmc::solve_stationary(sp, opt);
}

}  // namespace

TEST_SUITE("ctmc") {

TEST_CASE("state space enumerates, indexes, and round-trips") {
    const ctmc::StateSpace space(2, 3, 4);
    // Count: all z with e^T z <= n, ell = 0, plus (e^T z = n) * ell in [1, cap].
    const int expect = (3 + 1) * (3 + 2) / 2 + 4 * (3 + 1);
    CHECK(space.size() == expect);
    for (int idx = 0; idx < space.size(); ++idx) {
        const auto st = space.state(idx);
        CHECK(space.index(st.z, st.ell) == idx);
        CHECK(st.z.sum() == space.in_service(idx));
        if (st.ell > 0) CHECK(st.z.sum() == 3);
    }
    VecI z(2);
    z << 3, 1;  // 4 > n
    CHECK(space.index(z, 0) == -1);
    z << 1, 1;
    CHECK(space.index(z, 1) == -1);  // queue with idle servers
    z << 2, 1;
    CHECK(space.index(z, 5) == -1);  // beyond cap
}

TEST_CASE("generator rows conserve probability flow") {
    const auto sp = make_system(30.0, 1.0, 0.5, ph::PhaseType::erlang2(2.0));
    const auto gen = ctmc::build_generator(sp, 20);
    const int N = gen.space->size();
    // GT holds the transposed rates, so G's row sums are GT's column sums.
    Vec colsum = Vec::Zero(N);
    for (int k = 0; k < gen.GT.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(gen.GT, k); it; ++it)
            colsum(it.col()) += it.value();
    CHECK(colsum.cwiseAbs().maxCoeff() < 1e-10 * sp.lambda);
}

TEST_CASE("one-phase stationary law matches the birth-death recursion") {
    const double lambda = 25.0, alpha = 0.5, mu = 1.0;
    const auto sp = make_system(lambda, 1.0, alpha, ph::PhaseType::exponential(mu));
    REQUIRE(sp.n == 30);
    const auto pi = solve(sp);
    const auto oracle = birth_death_pi(lambda, sp.n, mu, alpha, pi.queue_cap);

    for (int idx = 0; idx < pi.space->size(); ++idx) {
        const long k = pi.space->in_service(idx) + pi.space->ell(idx);
        const double expect = oracle[static_cast<std::size_t>(k)];
        if (expect > 1e-250)
            CHECK(pi.prob(idx) == doctest::Approx(expect).epsilon(1e-9));
    }
    CHECK(pi.residual < 1e-10);
}

TEST_CASE("abandonment rate equal to service rate makes the count Poisson") {
    // With alpha = mu the death rate is k*mu for every k, so the stationary
    // count is Poisson(lambda/mu) conditioned on the truncation range.
    const double lambda = 20.0;
    const auto sp = make_system(lambda, 1.0, 1.0, ph::PhaseType::exponential(1.0));
    REQUIRE(sp.n == 24);
    const auto pi = solve(sp, 1e-10);

    double log_pmf = -lambda;  // log P(K = 0)
    std::vector<double> poisson(static_cast<std::size_t>(sp.n + pi.queue_cap) + 1);
    for (long k = 0; k < static_cast<long>(poisson.size()); ++k) {
        poisson[k] = std::exp(log_pmf);
        log_pmf += std::log(lambda) - std::log(static_cast<double>(k + 1));
    }
    for (int idx = 0; idx < pi.space->size(); ++idx) {
        const long k = pi.space->in_service(idx) + pi.space->ell(idx);
        if (poisson[k] > 1e-200)
            CHECK(pi.prob(idx) == doctest::Approx(poisson[k]).epsilon(1e-8));
    }

    // Scaled-law moments against exact Poisson moments: X = (K - n)/sqrt(l),
    // E X = -4/sqrt(20), E X^2 = (20 + 16)/20, E X^4 = 3076/400.
    const auto law = ctmc::scaled_system_law(pi, sp);
    const auto mt = ctmc::moments(law, 4);
    CHECK(mt.mixed.at({1}) == doctest::Approx(-0.89442719099991586).epsilon(1e-9));
    CHECK(mt.mixed.at({2}) == doctest::Approx(1.8).epsilon(1e-9));
    CHECK(mt.mixed.at({4}) == doctest::Approx(7.69).epsilon(1e-9));
}

TEST_CASE("adaptive truncation doubles the cap until the tail bound clears") {
    const auto sp = make_system(25.0, 1.0, 0.5, ph::PhaseType::exponential(1.0));
    ctmc::SolveOptions opt;
    opt.initial_cap = 2;
    opt.queue_tail_tol = 1e-9;
    const auto pi = ctmc::solve_stationary(sp, opt);
    CHECK(pi.queue_cap > 2);
    CHECK(pi.tail_bound < 1e-9);

    const auto ref = solve(sp);
    const auto mt_a = ctmc::moments(ctmc::scaled_system_law(pi, sp), 2);
    const auto mt_b = ctmc::moments(ctmc::scaled_system_law(ref, sp), 2);
    CHECK(mt_a.mixed.at({1}) == doctest::Approx(mt_b.mixed.at({1})).epsilon(1e-7));
    CHECK(mt_a.mixed.at({2}) == doctest::Approx(mt_b.mixed.at({2})).epsilon(1e-7));
}

TEST_CASE("power iteration agrees with the direct solve") {
    const auto sp = make_system(9.0, 1.0, 1.0, ph::PhaseType::erlang2(2.0));
    ctmc::SolveOptions direct;
    direct.method = ctmc::SolveMethod::Direct;
    ctmc::SolveOptions power;
    power.method = ctmc::SolveMethod::Power;
    const auto a = ctmc::solve_stationary(sp, direct);
    const auto b = ctmc::solve_stationary(sp, power);
    REQUIRE(a.prob.size() == b.prob.size());
    CHECK((a.prob - b.prob).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("solves are deterministic") {
    const auto sp = make_system(16.0, 1.0, 0.5, ph::PhaseType::hyper2(0.5, 1.0, 3.0));
    const auto a = solve(sp);
    const auto b = solve(sp);
    REQUIRE(a.prob.size() == b.prob.size());
    CHECK((a.prob - b.prob).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scaled law reproduces moments computed directly from the reduced chain") {
    const auto sp = make_system(30.0, 1.0, 0.5, ph::PhaseType::erlang2(2.0));
    const auto pi = solve(sp);
    const auto law = ctmc::scaled_system_law(pi, sp);
    const auto mt = ctmc::moments(law, 2);
    const int d = 2;
    const double delta = sp.delta;
    const Vec& p = sp.pht.p;
    const Vec& gamma = sp.dp.gamma;

    // First and second moments straight from the reduced pmf, using the exact
    // multinomial queue-split moments E[q|l] = p*l, Cov(q_i,q_j|l).
    Vec m1 = Vec::Zero(d);
    Mat m2 = Mat::Zero(d, d);
    for (int idx = 0; idx < pi.space->size(); ++idx) {
        const double w = pi.prob(idx);
        const double l = static_cast<double>(pi.space->ell(idx));
        Vec a(d);
        for (int i = 0; i < d; ++i) a(i) = pi.space->z(idx, i) - gamma(i) * sp.n;
        for (int i = 0; i < d; ++i) {
            m1(i) += w * (a(i) + p(i) * l);
            for (int j = 0; j < d; ++j) {
                double qq = l * (l - 1.0) * p(i) * p(j);
                if (i == j) qq += l * p(i);  // E q_i^2 = l p (1-p) + l^2 p^2
                m2(i, j) += w * (a(i) * a(j) + a(i) * p(j) * l + a(j) * p(i) * l + qq);
            }
        }
    }
    m1 *= delta;
    m2 *= delta * delta;
    CHECK(mt.mixed.at({1, 0}) == doctest::Approx(m1(0)).epsilon(1e-10));
    CHECK(mt.mixed.at({0, 1}) == doctest::Approx(m1(1)).epsilon(1e-10));
    CHECK(mt.mixed.at({2, 0}) == doctest::Approx(m2(0, 0)).epsilon(1e-10));
    CHECK(mt.mixed.at({0, 2}) == doctest::Approx(m2(1, 1)).epsilon(1e-10));
    CHECK(mt.mixed.at({1, 1}) == doctest::Approx(m2(0, 1)).epsilon(1e-10));

    // (e^T x)^+ equals delta * ell on every state, so positive-part moments
    // are exactly the scaled queue-length moments.
    double el1 = 0.0, el2 = 0.0;
    for (int idx = 0; idx < pi.space->size(); ++idx) {
        const double l = static_cast<double>(pi.space->ell(idx));
        el1 += pi.prob(idx) * l;
        el2 += pi.prob(idx) * l * l;
    }
    CHECK(mt.pos_part[0] == doctest::Approx(delta * el1).epsilon(1e-10));
    CHECK(mt.pos_part[1] == doctest::Approx(delta * delta * el2).epsilon(1e-10));

    // mean_under agrees with the tabulated mixed moment for a monomial.
    const double direct =
        ctmc::mean_under(law, [](const Vec& x) { return x(0) * x(0) * x(1); });
    const auto mt3 = ctmc::moments(law, 3);
    CHECK(direct == doctest::Approx(mt3.mixed.at({2, 1})).epsilon(1e-10));
}

TEST_CASE("throughput balances arrivals against departures and abandonments") {
    const auto sp = make_system(30.0, 1.0, 0.5, ph::PhaseType::erlang2(2.0));
    const auto pi = solve(sp, 1e-11);
    // Erlang-2 departures happen only from phase 2.
    double dep = 0.0, el = 0.0;
    for (int idx = 0; idx < pi.space->size(); ++idx) {
        dep += pi.prob(idx) * sp.pht.nu(1) * pi.space->z(idx, 1);
        el += pi.prob(idx) * static_cast<double>(pi.space->ell(idx));
    }
    const double inflow = sp.lambda * (1.0 - pi.tail_bound);
    CHECK(dep + sp.alpha * el == doctest::Approx(inflow).epsilon(1e-9));
}

}  // TEST_SUITE
