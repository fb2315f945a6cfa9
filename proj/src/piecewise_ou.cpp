#include "steinq/piecewise_ou.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace steinq::ou {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310005024;

double norm_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

using GK = boost::math::quadrature::gauss_kronrod<double, 61>;

}  // namespace

DiffusionModel make_diffusion(double beta, double alpha, const ph::PhaseType& pht,
                              const ph::DerivedParams& dp) {
    if (!(alpha > 0.0)) throw invalid_input("make_diffusion: alpha must be positive");
    DiffusionModel m;
    m.d = pht.d;
    m.beta = beta;
    m.alpha = alpha;
    m.p = pht.p;
    m.R = dp.R;
    m.Sigma = dp.Sigma;
    m.sqrtSigma = dp.sqrtSigma;
    m.Rp = dp.R * pht.p;
    return m;
}

DiffusionModel make_diffusion(const SystemParams& sp) {
    return make_diffusion(sp.beta_eff, sp.alpha, sp.pht, sp.dp);
}

Vec drift(const DiffusionModel& model, const Vec& x) {
    if (x.size() != model.d) throw invalid_input("drift: dimension mismatch");
    const double overflow = pos_part(x.sum());
    // -p*beta - R x + (R p + alpha p) * (e^T x)^+ ; continuous at e^T x = 0.
    return -model.beta * model.p - model.R * x + overflow * model.Rp -
           (model.alpha * overflow) * model.p;
}

double generator_apply(const DiffusionModel& model,
                       const std::function<Vec(const Vec&)>& grad,
                       const std::function<Mat(const Vec&)>& hess, const Vec& x) {
    const Vec b = drift(model, x);
    const Vec g = grad(x);
    const Mat H = hess(x);
    if (g.size() != model.d || H.rows() != model.d || H.cols() != model.d)
        throw invalid_input("generator_apply: derivative dimension mismatch");
    return g.dot(b) + 0.5 * model.Sigma.cwiseProduct(H).sum();
}

double default_dt(const ph::PhaseType& pht, double alpha) {
    const double fastest = std::max(pht.nu.maxCoeff(), alpha);
    return std::min(1e-3, 0.1 / fastest);
}

namespace detail {

// Shared Euler-Maruyama core. Calls visit(x_raw) once per retained step.
template <class Visitor>
void em_core(const DiffusionModel& model, double dt, double burn_in,
             std::int64_t n_steps, std::uint64_t seed, Visitor&& visit) {
    if (!(dt > 0.0)) throw invalid_input("euler_maruyama: dt must be positive");
    const int d = model.d;
    // Start at the drift fixed point on the spare-capacity side,
    // x0 = -beta R^{-1} p, for fast entry into stationarity.
    Vec x0 = -model.beta * Eigen::PartialPivLU<Mat>(model.R).solve(model.p);

    // Flatten everything into raw arrays: the step loop runs O(1e8+) times.
    std::vector<double> x(x0.data(), x0.data() + d);
    std::vector<double> bp(d), A(d * d), Rrow(d * d), pb(d), ap(d), rp(d);
    const Mat Adt = std::sqrt(dt) * model.sqrtSigma;
    for (int i = 0; i < d; ++i) {
        pb[i] = -model.beta * model.p(i);
        ap[i] = model.alpha * model.p(i);
        rp[i] = model.Rp(i);
        for (int j = 0; j < d; ++j) {
            A[i * d + j] = Adt(i, j);
            Rrow[i * d + j] = model.R(i, j);
        }
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> xi(d);

    const std::int64_t burn_steps = static_cast<std::int64_t>(std::llround(burn_in / dt));
    for (std::int64_t step = 0; step < burn_steps + n_steps; ++step) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += x[i];
        const double overflow = s > 0.0 ? s : 0.0;
        for (int i = 0; i < d; ++i) xi[i] = normal(rng);
        for (int i = 0; i < d; ++i) {
            double b = pb[i] + overflow * (rp[i] - ap[i]);
            double noise = 0.0;
            for (int j = 0; j < d; ++j) {
                b -= Rrow[i * d + j] * x[j];
                noise += A[i * d + j] * xi[j];
            }
            bp[i] = x[i] + b * dt + noise;
        }
        for (int i = 0; i < d; ++i) {
            x[i] = bp[i];
            if (std::abs(x[i]) > 1e6)
                throw numerical_error(
                    "euler_maruyama: blow-up (|x| > 1e6) at step " + std::to_string(step) +
                    "; reduce dt (current " + std::to_string(dt) + ")");
        }
        if (step >= burn_steps) visit(x.data());
    }
}

}  // namespace detail

Mat euler_maruyama_samples(const DiffusionModel& model, const SdeConfig& cfg) {
    if (cfg.n_samples <= 0) throw invalid_input("euler_maruyama: n_samples must be positive");
    if (cfg.thinning < 1) throw invalid_input("euler_maruyama: thinning must be >= 1");
    Mat out(cfg.n_samples, model.d);
    std::int64_t count = 0, row = 0;
    detail::em_core(model, cfg.dt, cfg.burn_in, cfg.n_samples * cfg.thinning, cfg.seed,
                    [&](const double* x) {
                        if (++count % cfg.thinning == 0) {
                            for (int j = 0; j < model.d; ++j) out(row, j) = x[j];
                            ++row;
                        }
                    });
    return out;
}

void euler_maruyama_visit(const DiffusionModel& model, double dt, double burn_in,
                          std::int64_t n_steps, std::uint64_t seed,
                          const std::function<void(const Vec&)>& visit) {
    Vec xv(model.d);
    detail::em_core(model, dt, burn_in, n_steps, seed, [&](const double* x) {
        for (int j = 0; j < model.d; ++j) xv(j) = x[j];
        visit(xv);
    });
}

// -----------------------------------------------------------------------------
// Ou1dLaw
// -----------------------------------------------------------------------------

Ou1dLaw::Ou1dLaw(const DiffusionModel& model) {
    if (model.d != 1)
        throw invalid_input("exact_1d: closed-form stationary law requires d == 1");
    beta_ = model.beta;
    alpha_ = model.alpha;
    mu_ = model.R(0, 0);
    Sigma_ = model.Sigma(0, 0);

    // Piece parameters: left N(-beta/mu, Sigma/(2mu)) truncated to x<=0 with
    // log-amplitude beta^2/(Sigma*mu); right N(-beta/alpha, Sigma/(2alpha)) on
    // x>=0 with log-amplitude beta^2/(Sigma*alpha). Both pieces equal 1 at 0.
    const double sL = std::sqrt(Sigma_ / (2.0 * mu_));
    const double sR = std::sqrt(Sigma_ / (2.0 * alpha_));
    const double mL = -beta_ / mu_;
    const double mR = -beta_ / alpha_;
    const double cL = beta_ * beta_ / (Sigma_ * mu_);
    const double cR = beta_ * beta_ / (Sigma_ * alpha_);

    const double zL = std::exp(cL) * sL * kSqrt2Pi * norm_cdf((0.0 - mL) / sL);
    const double zR = std::exp(cR) * sR * kSqrt2Pi * norm_cdf(-(0.0 - mR) / sR);
    const double z = zL + zR;
    mass_left_ = zL / z;
    mass_right_ = zR / z;
    log_norm_ = std::log(z);

    lo_ = mL - 15.0 * sL;
    hi_ = mR + 15.0 * sR;
}

double Ou1dLaw::density(double x) const {
    const double q = (x <= 0.0) ? beta_ * x + 0.5 * mu_ * x * x
                                : beta_ * x + 0.5 * alpha_ * x * x;
    return std::exp(-(2.0 / Sigma_) * q - log_norm_);
}

double Ou1dLaw::cdf(double x) const {
    const double sL = std::sqrt(Sigma_ / (2.0 * mu_));
    const double mL = -beta_ / mu_;
    const double cL = beta_ * beta_ / (Sigma_ * mu_);
    if (x <= 0.0)
        return std::exp(cL - log_norm_) * sL * kSqrt2Pi * norm_cdf((x - mL) / sL);
    const double sR = std::sqrt(Sigma_ / (2.0 * alpha_));
    const double mR = -beta_ / alpha_;
    const double cR = beta_ * beta_ / (Sigma_ * alpha_);
    const double seg = norm_cdf((x - mR) / sR) - norm_cdf((0.0 - mR) / sR);
    return mass_left_ + std::exp(cR - log_norm_) * sR * kSqrt2Pi * seg;
}

double Ou1dLaw::quantile(double q) const {
    if (!(q > 0.0 && q < 1.0)) throw invalid_input("quantile: q must be in (0,1)");
    double lo = lo_, hi = hi_;
    // Extend brackets if the requested quantile lies beyond the nominal range.
    while (cdf(lo) > q) lo -= 5.0;
    while (cdf(hi) < q) hi += 5.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) < q)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-13 * std::max(1.0, std::abs(mid))) break;
    }
    return 0.5 * (lo + hi);
}

double Ou1dLaw::mean_of(const std::function<double(double)>& h) const {
    const auto f = [&](double x) { return h(x) * density(x); };
    const double left = GK::integrate(f, lo_, 0.0, 15, 1e-12);
    const double right = GK::integrate(f, 0.0, hi_, 15, 1e-12);
    return left + right;
}

double Ou1dLaw::moment(int k) const {
    if (k == 0) return 1.0;
    return mean_of([k](double x) { return std::pow(x, k); });
}

Ou1dLaw exact_1d(const DiffusionModel& model) { return Ou1dLaw(model); }

}  // namespace steinq::ou
