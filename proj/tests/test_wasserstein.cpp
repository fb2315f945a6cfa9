#include "doctest.h"

#include "steinq/wasserstein.hpp"

#include <cmath>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

using namespace steinq;

namespace {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<long>(v.size()));
    long i = 0;
    for (double t : v) out(i++) = t;
    return out;
}

w1::Atomic1d random_atomic(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> ux(-3.0, 3.0), uw(0.1, 1.0);
    Vec x(n), p(n);
    for (int i = 0; i < n; ++i) {
        x(i) = ux(rng);
        p(i) = uw(rng);
    }
    return w1::make_atomic(x, p);
}

}  // namespace

TEST_SUITE("wasserstein") {

TEST_CASE("atomic construction normalizes, sorts, merges, and validates") {
    auto a = w1::make_atomic(vec({2.0, -1.0, 2.0, 0.0}), vec({1.0, 2.0, 3.0, 0.0}));
    REQUIRE(a.x.size() == 2);  // zero-weight atom dropped, duplicates merged
    CHECK(a.x(0) == -1.0);
    CHECK(a.x(1) == 2.0);
    CHECK(a.p(0) == doctest::Approx(2.0 / 6.0));
    CHECK(a.p(1) == doctest::Approx(4.0 / 6.0));

    CHECK_THROWS_AS((void)w1::make_atomic(vec({0.0}), vec({1.0, 2.0})), invalid_input);
    CHECK_THROWS_AS((void)w1::make_atomic(vec({}), vec({})), invalid_input);
    CHECK_THROWS_AS(
        (void)w1::make_atomic(vec({std::numeric_limits<double>::quiet_NaN()}), vec({1.0})),
        invalid_input);
    CHECK_THROWS_AS((void)w1::make_atomic(vec({0.0, 1.0}), vec({1.0, -0.5})), invalid_input);
    CHECK_THROWS_AS((void)w1::make_atomic(vec({0.0, 1.0}), vec({0.0, 0.0})), invalid_input);
}

TEST_CASE("distance between atomic laws") {
    const auto d0 = w1::make_atomic(vec({0.0}), vec({1.0}));
    const auto d1 = w1::make_atomic(vec({1.0}), vec({1.0}));
    CHECK(w1::discrete_discrete(d0, d1) == doctest::Approx(1.0));
    CHECK(w1::discrete_discrete(d0, d0) == doctest::Approx(0.0));

    // Translation invariance: W1(mu, mu + c) = |c|.
    std::mt19937_64 rng(11);
    const auto a = random_atomic(rng, 40);
    const double c = 0.35;
    const auto shifted = w1::make_atomic((a.x.array() + c).matrix(), a.p);
    CHECK(w1::discrete_discrete(a, shifted) == doctest::Approx(c).epsilon(1e-12));
    CHECK(w1::discrete_discrete(shifted, a) == doctest::Approx(c).epsilon(1e-12));

    // Triangle inequality on random triples.
    for (int rep = 0; rep < 5; ++rep) {
        const auto u = random_atomic(rng, 15), v = random_atomic(rng, 20),
                   w = random_atomic(rng, 25);
        const double uv = w1::discrete_discrete(u, v), vw = w1::discrete_discrete(v, w),
                     uw = w1::discrete_discrete(u, w);
        CHECK(uw <= uv + vw + 1e-12);
    }
}

TEST_CASE("distance from an atom to the standard normal") {
    // W1(delta_m, N(m,1)) = E|Z| = sqrt(2/pi).
    const double expect = 0.7978845608028654;
    for (double m : {0.0, -1.3}) {
        const auto atom = w1::make_atomic(vec({m}), vec({1.0}));
        const double d = w1::discrete_continuous(
            atom, [m](double x) { return std_normal_cdf(x - m); }, m - 12.0, m + 12.0);
        CHECK(d == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("distance from a symmetric two-atom law to the standard normal") {
    // W1({-1,+1} w.p. 1/2 each, N(0,1)) = 2*((Phi(1)-1/2) - (phi(0)-phi(1)))
    //                                   = 0.5353773215478798.
    const auto a = w1::make_atomic(vec({-1.0, 1.0}), vec({0.5, 0.5}));
    const double d = w1::discrete_continuous(a, std_normal_cdf, -12.0, 12.0);
    CHECK(d == doctest::Approx(0.5353773215478798).epsilon(1e-9));
}

TEST_CASE("empirical distance pairs sorted samples") {
    CHECK(w1::empirical({0.0, 1.0}, {1.0, 2.0}) == doctest::Approx(1.0));
    CHECK(w1::empirical({3.0, -1.0, 0.5}, {0.5, 3.0, -1.0}) == doctest::Approx(0.0));
    CHECK_THROWS_AS((void)w1::empirical({0.0}, {0.0, 1.0}), invalid_input);
}

TEST_CASE("sample ingestion merges duplicates") {
    const auto a = w1::from_samples({1.0, 0.0, 1.0, 0.0, 0.0, 2.0});
    REQUIRE(a.x.size() == 3);
    CHECK(a.p(0) == doctest::Approx(0.5));  // x = 0
    CHECK(a.p(1) == doctest::Approx(2.0 / 6.0));
    CHECK(a.p(2) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("projection extracts a marginal") {
    Mat pts(3, 2);
    pts << 0.0, 5.0, 1.0, -5.0, 2.0, 0.0;
    Vec prob(3);
    prob << 0.25, 0.25, 0.5;
    const auto marg = w1::project(pts, prob, vec({1.0, 0.0}));
    REQUIRE(marg.x.size() == 3);
    CHECK(marg.x(0) == 0.0);
    CHECK(marg.x(2) == 2.0);
    CHECK(marg.p(2) == doctest::Approx(0.5));
}

TEST_CASE("sliced distance vanishes on identical clouds and tracks translations") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    Mat pts(200, 2);
    for (long i = 0; i < pts.rows(); ++i) {
        pts(i, 0) = g(rng);
        pts(i, 1) = g(rng);
    }
    const Vec prob = Vec::Constant(200, 1.0 / 200.0);

    const auto same = w1::sliced(pts, prob, pts, prob, 16, 9);
    CHECK(same.mean == doctest::Approx(0.0));
    CHECK(same.se == doctest::Approx(0.0));
    CHECK(same.n_directions == 16);

    // Shift along e1 by c: each slice contributes c*|u_1|, E|u_1| = 2/pi in d=2.
    const double c = 2.0;
    Mat shifted = pts;
    shifted.col(0).array() += c;
    const auto sl = w1::sliced(pts, prob, shifted, prob, 64, 9);
    CHECK(sl.mean > 0.4 * c);
    CHECK(sl.mean < 0.9 * c);
    CHECK(sl.se > 0.0);

    const auto sl2 = w1::sliced(pts, prob, shifted, prob, 64, 9);
    CHECK(sl2.mean == doctest::Approx(sl.mean));  // deterministic under the seed
}

}  // TEST_SUITE
