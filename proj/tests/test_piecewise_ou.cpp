#include "doctest.h"

#include "steinq/phase_type.hpp"
#include "steinq/piecewise_ou.hpp"

#include <cmath>

using namespace steinq;

namespace {

constexpr double kSqrt2Pi = 2.5066282746310005024;

double phi(double t) { return std::exp(-0.5 * t * t) / kSqrt2Pi; }
double Phi(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

ou::DiffusionModel model_1d(double beta, double alpha, double mu) {
    const auto pht = ph::PhaseType::exponential(mu);
    return ou::make_diffusion(beta, alpha, pht, ph::derive(pht));
}

}  // namespace

TEST_SUITE("piecewise_ou") {

TEST_CASE("drift matches the two-sided closed form and is continuous at the kink") {
    const auto pht = ph::PhaseType::erlang2(2.0);
    const auto dp = ph::derive(pht);
    const auto model = ou::make_diffusion(0.8, 0.5, pht, dp);

    Vec x(2);
    x << -1.0, 0.3;  // e^T x < 0
    Vec expect = -0.8 * pht.p - dp.R * x;
    CHECK((ou::drift(model, x) - expect).cwiseAbs().maxCoeff() < 1e-14);

    x << 1.0, 0.4;  // e^T x = 1.4 > 0
    const double of = 1.4;
    expect = -0.8 * pht.p - dp.R * (x - pht.p * of) - 0.5 * of * pht.p;
    CHECK((ou::drift(model, x) - expect).cwiseAbs().maxCoeff() < 1e-12);

    // Continuity across the hyperplane e^T x = 0.
    Vec on(2);
    on << 0.7, -0.7;
    Vec e(2);
    e << 1.0, 1.0;
    const Vec below = ou::drift(model, on - 1e-9 * e);
    const Vec above = ou::drift(model, on + 1e-9 * e);
    CHECK((below - above).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("generator applies drift and covariance to a quadratic") {
    const auto pht = ph::PhaseType::hyper2(0.5, 1.0, 3.0);
    const auto dp = ph::derive(pht);
    const auto model = ou::make_diffusion(1.0, 0.5, pht, dp);
    Mat A(2, 2);
    A << 1.0, 0.25, 0.25, -0.5;
    Vec c(2);
    c << 0.3, -0.7;
    auto grad = [&](const Vec& x) { return Vec(2.0 * A * x + c); };
    auto hess = [&](const Vec&) { return Mat(2.0 * A); };
    Vec x(2);
    x << 0.9, -0.2;
    const double expect =
        ou::drift(model, x).dot(2.0 * A * x + c) + model.Sigma.cwiseProduct(2.0 * A).sum() / 2.0;
    CHECK(ou::generator_apply(model, grad, hess, x) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("zero slack with alpha = mu = 1 gives the standard normal law") {
    const auto law = ou::exact_1d(model_1d(0.0, 1.0, 1.0));
    CHECK(law.sigma2() == doctest::Approx(2.0));
    for (double x : {-2.0, -0.5, 0.0, 1.0, 2.5})
        CHECK(law.density(x) == doctest::Approx(phi(x)).epsilon(1e-12));
    CHECK(law.cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
    CHECK(law.moment(1) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(law.moment(2) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(law.moment(4) == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(law.quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-9));
}

TEST_CASE("alpha equal to mu collapses the law to a single Gaussian") {
    const auto law = ou::exact_1d(model_1d(1.0, 0.5, 0.5));
    // N(-beta/mu, Sigma/(2 mu)) = N(-2, 2) on both sides of the kink.
    CHECK(law.moment(1) == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(law.moment(2) == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(law.cdf(-2.0) == doctest::Approx(0.5).epsilon(1e-10));
    const double s = std::sqrt(2.0);
    for (double x : {-4.0, -2.0, 0.5})
        CHECK(law.density(x) == doctest::Approx(phi((x + 2.0) / s) / s).epsilon(1e-10));
}

TEST_CASE("two-piece law matches the glued-Gaussian closed form") {
    const double beta = 1.0, mu = 1.0, alpha = 0.5, Sigma = 2.0;
    const auto law = ou::exact_1d(model_1d(beta, alpha, mu));
    REQUIRE(law.sigma2() == doctest::Approx(Sigma));

    const double sL = std::sqrt(Sigma / (2.0 * mu)), mL = -beta / mu;
    const double sR = std::sqrt(Sigma / (2.0 * alpha)), mR = -beta / alpha;
    const double cL = beta * beta / (Sigma * mu), cR = beta * beta / (Sigma * alpha);
    const double u = (0.0 - mL) / sL, v = (0.0 - mR) / sR;
    const double zL = std::exp(cL) * sL * kSqrt2Pi * Phi(u);
    const double zR = std::exp(cR) * sR * kSqrt2Pi * (1.0 - Phi(v));
    const double z = zL + zR;

    // Continuity of the density at the kink and total mass one.
    CHECK(law.density(-1e-13) == doctest::Approx(law.density(1e-13)).epsilon(1e-10));
    CHECK(law.density(0.0) == doctest::Approx(1.0 / z).epsilon(1e-12));
    CHECK(law.cdf(0.0) == doctest::Approx(zL / z).epsilon(1e-12));

    // First and second moments of the truncated-Gaussian pieces.
    const double m1 = (std::exp(cL) * sL * kSqrt2Pi * (mL * Phi(u) - sL * phi(u)) +
                       std::exp(cR) * sR * kSqrt2Pi * (mR * (1.0 - Phi(v)) + sR * phi(v))) /
                      z;
    const double m2 =
        (std::exp(cL) * sL * kSqrt2Pi * ((mL * mL + sL * sL) * Phi(u) - sL * mL * phi(u)) +
         std::exp(cR) * sR * kSqrt2Pi * ((mR * mR + sR * sR) * (1.0 - Phi(v)) + sR * mR * phi(v))) /
        z;
    CHECK(law.moment(1) == doctest::Approx(m1).epsilon(1e-10));
    CHECK(law.moment(2) == doctest::Approx(m2).epsilon(1e-10));
    CHECK(law.mean_of([](double t) { return t * t; }) == doctest::Approx(m2).epsilon(1e-10));

    // Quantile/cdf round-trips.
    for (double x : {-2.0, -1.0, -0.1, 0.4, 1.7})
        CHECK(law.quantile(law.cdf(x)) == doctest::Approx(x).epsilon(1e-8));
    for (double q : {1e-6, 0.2, 0.5, 0.9, 1.0 - 1e-6})
        CHECK(law.cdf(law.quantile(q)) == doctest::Approx(q).epsilon(1e-9));
}

TEST_CASE("default step resolves against the fastest rate") {
    CHECK(ou::default_dt(ph::PhaseType::exponential(1.0), 0.5) == doctest::Approx(1e-3));
    CHECK(ou::default_dt(ph::PhaseType::hyper2(0.5, 1.0, 300.0), 0.5) ==
          doctest::Approx(0.1 / 300.0));
}

TEST_CASE("sampler is deterministic and the streaming variant sees the same path") {
    const auto model = model_1d(1.0, 0.5, 1.0);
    ou::SdeConfig cfg;
    cfg.dt = 1e-3;
    cfg.burn_in = 1.0;
    cfg.n_samples = 1000;
    cfg.thinning = 1;
    cfg.seed = 77;
    const Mat a = ou::euler_maruyama_samples(model, cfg);
    const Mat b = ou::euler_maruyama_samples(model, cfg);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);

    std::vector<double> path;
    ou::euler_maruyama_visit(model, cfg.dt, cfg.burn_in, cfg.n_samples, cfg.seed,
                             [&](const Vec& x) { path.push_back(x(0)); });
    REQUIRE(static_cast<long>(path.size()) == a.rows());
    double diff = 0.0;
    for (long k = 0; k < a.rows(); ++k) diff = std::max(diff, std::abs(path[k] - a(k, 0)));
    CHECK(diff == 0.0);

    cfg.seed = 78;
    const Mat c = ou::euler_maruyama_samples(model, cfg);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("long run settles near the exact stationary moments") {
    const auto model = model_1d(1.0, 0.5, 1.0);
    const auto law = ou::exact_1d(model);
    ou::SdeConfig cfg;
    cfg.dt = 1e-3;
    cfg.burn_in = 50.0;
    cfg.n_samples = 200000;
    cfg.thinning = 20;  // 4e6 steps, 4000 time units
    cfg.seed = 5;
    const Mat s = ou::euler_maruyama_samples(model, cfg);
    const double mean = s.col(0).mean();
    const double msq = s.col(0).array().square().mean();
    // ~4.5 sigma of the autocorrelated-mean error plus O(dt) bias headroom.
    CHECK(std::abs(mean - law.moment(1)) < 0.2);
    CHECK(std::abs(msq - law.moment(2)) < 0.3);
}

TEST_CASE("an unstable step size reports a blow-up") {
    const auto model = model_1d(1.0, 0.5, 1.0);
    ou::SdeConfig cfg;
    cfg.dt = 1000.0;
    cfg.burn_in = 0.0;
    cfg.n_samples = 50;
    CHECK_THROWS_AS((void)ou::euler_maruyama_samples(model, cfg), numerical_error);
}

}  // TEST_SUITE
