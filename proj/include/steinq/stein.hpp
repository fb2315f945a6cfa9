#pragma once

// =============================================================================
// FILE: steinq/stein.hpp
// BRIEF: Generator-comparison diagnostics: the exact Markov-chain generator
//        applied to smooth test functions in diffusion coordinates, its
//        Taylor decomposition against the piecewise-OU generator, stationary
//        (basic adjoint relationship) residuals, and the 1-D Poisson-equation
//        solver used to couple queue and diffusion expectations.
// =============================================================================

#include "steinq/common.hpp"
#include "steinq/ctmc.hpp"
#include "steinq/piecewise_ou.hpp"
#include "steinq/system_params.hpp"

#include <functional>

namespace steinq::stein {

// -----------------------------------------------------------------------------
// Smooth test functions on R^d
// -----------------------------------------------------------------------------

struct SmoothFunction {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    std::function<Mat(const Vec&)> hessian;
};

// f(x) = b . x
SmoothFunction linear(const Vec& b);

// f(x) = x^T A x + b . x  (A is symmetrized internally)
SmoothFunction quadratic(const Mat& A, const Vec& b);

// f(x) = prod_i x_i^{e_i}
SmoothFunction monomial(const std::vector<int>& exponents);

// Compactly supported C^inf bump: exp(-1 / (1 - r^2)) for r = |x - c|/radius < 1,
// 0 outside. Vanishes with all derivatives at the support boundary.
SmoothFunction bump(const Vec& center, double radius);

// -----------------------------------------------------------------------------
// Microscopic state of the phase-labelled chain
// -----------------------------------------------------------------------------

// The phase-labelled ("lifted") chain assigns every customer its service phase
// on arrival, so queued customers carry phases too: z = in-service counts,
// q = queued counts. Feasibility: z, q >= 0, e^T z <= n, and a nonempty queue
// requires every server busy.
struct FullState {
    VecI z;
    VecI q;

    long ell() const { return q.sum(); }
    int in_service() const { return z.sum(); }
};

FullState make_state(const SystemParams& sp, const VecI& z, const VecI& q);

// Diffusion coordinates of a microscopic state: x = delta * (z + q - gamma * n).
Vec scaled_coordinates(const SystemParams& sp, const FullState& st);

// Exact generator of the phase-labelled chain applied to f in diffusion
// coordinates: arrivals move x by +delta e_i (w.p. p_i), abandonments by
// -delta e_i (rate alpha q_i), and phase completions (rate nu_i z_i) either
// route i -> j (x moves by delta(e_j - e_i)) or depart (x moves by -delta e_i).
double ctmc_generator_apply(const SystemParams& sp, const SmoothFunction& f, const FullState& st);

// -----------------------------------------------------------------------------
// Taylor decomposition against the piecewise-OU generator
// -----------------------------------------------------------------------------

// Splits the exact generator difference as
//   (chain generator) f = (diffusion generator) f + ssc_term + error_term,
// where ssc_term is the first-order term driven by the queue-composition
// deviation w = delta q - p (e^T x)^+ (identically zero on the state-space
// collapse manifold) and error_term collects second-order mismatch plus all
// higher-order Taylor remainders. bound_shape is the reference envelope
// delta * (1 + |x|^2)^m * (1 + |x|)^4 used for bound-ratio diagnostics.
struct TaylorDecomposition {
    double full_diff = 0.0;
    double diffusion_part = 0.0;
    double ssc_term = 0.0;
    double error_term = 0.0;
    double bound_shape = 0.0;
};

TaylorDecomposition taylor_decompose(const SystemParams& sp, const SmoothFunction& f,
                                     const FullState& st, int m = 1);

// Closed-form error_term for the exactly-quadratic f(x) = x^T A x + b . x
// (all Taylor remainders vanish); used as an independent oracle.
double quadratic_error_oracle(const SystemParams& sp, const Mat& A, const Vec& b,
                              const FullState& st);

// -----------------------------------------------------------------------------
// Stationary (basic adjoint relationship) residual
// -----------------------------------------------------------------------------

// E_pi[(chain generator) f] computed from a reduced-chain stationary law by
// averaging the queued-phase composition q | ell ~ Multinomial(ell, p), which
// is exact for the phase-labelled chain. Zero (up to truncation leakage) for
// every f in the generator's domain.
double bar_residual(const ctmc::StationaryPmf& pi, const SystemParams& sp,
                    const SmoothFunction& f);

// -----------------------------------------------------------------------------
// 1-D Poisson equation for the piecewise-OU generator
// -----------------------------------------------------------------------------

// Tabulated solution of  b(x) f'(x) + (Sigma/2) f''(x) = h(x) - E_nu[h]  on a
// uniform grid, where nu is the exact 1-D stationary law. Evaluation uses
// 4-point cubic interpolation inside the grid and second-order extrapolation
// outside it.
class PoissonSolution {
  public:
    double mean_h() const { return mean_h_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double step() const { return step_; }

    double value(double x) const;
    double deriv(double x) const;
    double second(double x) const;

    const Vec& f_table() const { return f_; }
    const Vec& fp_table() const { return fp_; }
    const Vec& fpp_table() const { return fpp_; }

  private:
    friend PoissonSolution poisson_solve_1d(const ou::DiffusionModel&,
                                            const std::function<double(double)>&, double, double);
    double lo_ = 0.0, hi_ = 0.0, step_ = 0.0, mean_h_ = 0.0;
    long kink_ = -1;  // node index of the drift kink x = 0 when it lies on the grid
    Vec f_, fp_, fpp_;

    // Interpolation keeps its 4-node window on one side of the kink node:
    // the tables are smooth on each side of it but not across it.
    static double interp(const Vec& y, double lo, double step, long kink, double x);
};

// Solves the Poisson equation for scalar test function h. `tail_mass` sets the
// quantile range covered by the grid, `step` its spacing.
PoissonSolution poisson_solve_1d(const ou::DiffusionModel& model,
                                 const std::function<double(double)>& h,
                                 double tail_mass = 1e-12, double step = 1e-3);

// -----------------------------------------------------------------------------
// Generator-coupling gap
// -----------------------------------------------------------------------------

// lhs = E_pi[h] - E_nu[h] directly; rhs = E_pi[b f' + (Sigma/2) f''] through the
// tabulated Poisson solution. The two agree when the tabulated f really solves
// the Poisson equation, making the coupling identity a non-vacuous check.
struct GapReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double mismatch = 0.0;  // |lhs - rhs|
};

GapReport stein_gap_1d(const ctmc::ScaledLaw& law, const ou::DiffusionModel& model,
                       const PoissonSolution& fh, const std::function<double(double)>& h);

// Convenience: solves the Poisson equation internally with default grid.
GapReport stein_gap_1d(const ctmc::ScaledLaw& law, const ou::DiffusionModel& model,
                       const std::function<double(double)>& h);

}  // namespace steinq::stein
