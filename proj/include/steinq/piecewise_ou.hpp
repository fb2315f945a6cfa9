#pragma once

// =============================================================================
// FILE: steinq/piecewise_ou.hpp
// BRIEF: The d-dimensional piecewise Ornstein-Uhlenbeck diffusion
//          dY = b(Y) dt + sqrtSigma dB,
//          b(x) = -p*beta - R(x - p(e^T x)^+) - alpha*p*(e^T x)^+,
//        with drift/generator evaluation, an Euler-Maruyama long-run sampler,
//        and the exact one-dimensional stationary law.
//
// The drift is affine on each side of the hyperplane e^T x = 0 and continuous
// across it. Below the hyperplane (spare capacity) the pull is -p*beta - R x;
// above it (queueing) the overflow mass relaxes at the abandonment rate.
// =============================================================================

#include "steinq/common.hpp"
#include "steinq/phase_type.hpp"
#include "steinq/system_params.hpp"

#include <cstdint>
#include <functional>

namespace steinq::ou {

struct DiffusionModel {
    int d = 0;
    double beta = 0.0;   // capacity slack (use the staffed system's beta_eff)
    double alpha = 0.0;  // abandonment rate
    Vec p;               // initial-phase law of the service distribution
    Mat R;               // (I - P^T) diag(nu)
    Mat Sigma;           // diffusion covariance
    Mat sqrtSigma;       // fixed factor, sqrtSigma*sqrtSigma^T = Sigma
    Vec Rp;              // cached R*p (drift kink term)
};

DiffusionModel make_diffusion(double beta, double alpha, const ph::PhaseType& pht,
                              const ph::DerivedParams& dp);

// Convenience: the diffusion matched to a staffed system (uses beta_eff).
DiffusionModel make_diffusion(const SystemParams& sp);

// b(x) = -p*beta - R(x - p(e^T x)^+) - alpha*p*(e^T x)^+; continuous at the kink.
Vec drift(const DiffusionModel& model, const Vec& x);

// G_Y f(x) = sum_i d_i f(x) b_i(x) + (1/2) sum_ij Sigma_ij d_ij f(x),
// with the gradient and Hessian supplied by the caller.
double generator_apply(const DiffusionModel& model,
                       const std::function<Vec(const Vec&)>& grad,
                       const std::function<Mat(const Vec&)>& hess, const Vec& x);

// -----------------------------------------------------------------------------
// Euler-Maruyama sampling of the stationary law
// -----------------------------------------------------------------------------

struct SdeConfig {
    double dt = 1e-3;            // step size
    double burn_in = 50.0;       // time discarded before sampling
    std::int64_t n_samples = 0;  // retained samples
    int thinning = 1;            // steps between retained samples
    std::uint64_t seed = 1;
};

// Recommended step for a model: min(1e-3, 0.1 / max(nu_i, alpha)).
double default_dt(const ph::PhaseType& pht, double alpha);

// Runs the chain and returns the retained samples (n_samples x d).
// Deterministic under the seed. Throws numerical_error on blow-up (|x| > 1e6).
Mat euler_maruyama_samples(const DiffusionModel& model, const SdeConfig& cfg);

// Streaming variant for long runs that must not materialize samples:
// after burn-in, `visit(x)` is called once per step for `n_steps` steps.
void euler_maruyama_visit(const DiffusionModel& model, double dt, double burn_in,
                          std::int64_t n_steps, std::uint64_t seed,
                          const std::function<void(const Vec&)>& visit);

// -----------------------------------------------------------------------------
// Exact stationary law in one dimension
// -----------------------------------------------------------------------------
// For d=1 the stationary density solves pi(x) ~ exp((2/Sigma) int_0^x b(u) du):
// two Gaussian pieces glued continuously at 0,
//   x <= 0:  ~ exp(-(2/Sigma)(beta x + mu x^2/2))   (mean -beta/mu, var Sigma/(2 mu))
//   x >= 0:  ~ exp(-(2/Sigma)(beta x + alpha x^2/2)) (mean -beta/alpha, var Sigma/(2 alpha))
// where mu here is the sole service rate R(0,0).

class Ou1dLaw {
  public:
    // Throws invalid_input unless model.d == 1.
    explicit Ou1dLaw(const DiffusionModel& model);

    double density(double x) const;
    double cdf(double x) const;
    double quantile(double q) const;       // inverse cdf, q in (0,1)
    double moment(int k) const;            // E Y^k by quadrature
    double mean_of(const std::function<double(double)>& h) const;  // E h(Y)

    double beta() const { return beta_; }
    double alpha() const { return alpha_; }
    double mu() const { return mu_; }
    double sigma2() const { return Sigma_; }  // the (scalar) diffusion coefficient

  private:
    double beta_, alpha_, mu_, Sigma_;
    double mass_left_, mass_right_;  // normalized piece masses (sum to 1)
    double log_norm_;                // log of the overall normalizing constant
    double lo_, hi_;                 // effective support for quadrature
};

Ou1dLaw exact_1d(const DiffusionModel& model);

}  // namespace steinq::ou
