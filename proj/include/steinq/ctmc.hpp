#pragma once

// =============================================================================
// FILE: steinq/ctmc.hpp
// BRIEF: The reduced finite CTMC of the M/Ph/n+M system: state enumeration,
//        sparse generator assembly on a truncated queue, exact stationary
//        solve, and the law of the diffusion-scaled system-size vector.
//
// Reduced state: (z, ell) where z counts in-service customers per phase
// (e^T z <= n) and ell is the queue length (ell > 0 forces e^T z = n).
// Queue phase composition is not tracked: a customer entering service from
// the queue carries a fresh phase drawn from p, which matches the full
// system's law because queued customers' phases are i.i.d. p and independent
// of everything else given ell.
// =============================================================================

#include "steinq/common.hpp"
#include "steinq/system_params.hpp"

#include <Eigen/SparseCore>

#include <functional>
#include <map>
#include <memory>
#include <unordered_map>
#include <vector>

namespace steinq::ctmc {

struct CtmcState {
    VecI z;
    long ell = 0;
};

// Enumerates all reduced states with queue length capped at queue_cap,
// ordered lexicographically by (e^T z, z, ell) for reproducible layouts.
class StateSpace {
  public:
    StateSpace(int d, int n, long queue_cap);

    int size() const { return static_cast<int>(ell_.size()); }
    int dim() const { return d_; }
    int n_servers() const { return n_; }
    long queue_cap() const { return cap_; }

    int z(int idx, int i) const { return zdata_[static_cast<std::size_t>(idx) * d_ + i]; }
    long ell(int idx) const { return ell_[idx]; }
    int in_service(int idx) const { return s_[idx]; }  // e^T z
    VecI zvec(int idx) const;
    CtmcState state(int idx) const { return CtmcState{zvec(idx), ell(idx)}; }

    // Index of (z, ell), or -1 when the state is not in the space.
    int index(const int* zptr, long ell) const;
    int index(const VecI& z, long ell) const { return index(z.data(), ell); }

  private:
    int d_, n_;
    long cap_;
    std::vector<int> zdata_;  // size() * d_, row-major
    std::vector<int> s_;
    std::vector<long> ell_;
    std::unordered_map<std::uint64_t, int> lookup_;
    std::uint64_t key(const int* zptr, long ell) const;
};

// Sparse generator on the truncated space. GT is the transpose of the rate
// matrix (column = from-state), which is the layout the stationary solvers
// want. Arrivals that would push ell beyond the cap are dropped (reflected
// truncation), so every retained row still sums to zero; the dropped rate is
// recorded per state for tail accounting.
struct Generator {
    std::shared_ptr<const StateSpace> space;
    SystemParams params;
    Eigen::SparseMatrix<double> GT;
    std::vector<double> out_rate;      // total retained outflow per state
    std::vector<double> dropped_rate;  // arrival rate lost to the cap (boundary states)
};

Generator build_generator(const SystemParams& sp, long queue_cap);

enum class SolveMethod { Auto, Direct, Power };

struct StationaryPmf {
    std::shared_ptr<const StateSpace> space;
    Vec prob;                 // stationary probabilities, sum to 1
    long queue_cap = 0;
    double tail_bound = 0.0;  // stationary mass on the ell = cap boundary
    double residual = 0.0;    // achieved max-norm of pi * G
};

struct SolveOptions {
    SolveMethod method = SolveMethod::Auto;
    double residual_tol = 1e-10;
    long max_power_iters = 2000000;
    double queue_tail_tol = 1e-9;  // used by the adaptive wrapper
    long initial_cap = -1;         // < 0: ceil(10 sqrt(lambda)) + 10
    int max_doublings = 8;
};

// Solves pi G = 0, sum(pi) = 1 on the generator's (fixed) truncated space.
// Direct: sparse LU on the balance equations with one state pinned.
// Power: uniformized power iteration with stall detection.
// Auto: direct first, power as fallback.
StationaryPmf stationary(const Generator& gen, const SolveOptions& opt = {});

// Adaptive truncation: starts at initial_cap and doubles the queue cap until
// the boundary mass tail_bound drops below queue_tail_tol.
StationaryPmf solve_stationary(const SystemParams& sp, const SolveOptions& opt = {});

// -----------------------------------------------------------------------------
// Law of the scaled system size X~ = delta (Z + Q - gamma n)
// -----------------------------------------------------------------------------

// Discrete law over lattice points in R^d. Obtained from the stationary pmf
// by convolving each (z, ell) atom with the Multinomial(ell, p) law of the
// queue phase split, consolidated on the integer lattice.
struct ScaledLaw {
    int d = 0;
    Mat points;  // n_atoms x d
    Vec prob;
};

ScaledLaw scaled_system_law(const StationaryPmf& pi, const SystemParams& sp);

// Mixed moments up to total degree m, positive-part moments of e^T x, and
// Euclidean-norm absolute moments (for uniform-boundedness checks).
struct MomentTable {
    int max_order = 0;
    std::map<std::vector<int>, double> mixed;  // exponent multi-index -> E prod x_i^{k_i}
    std::vector<double> pos_part;              // E ((e^T x)^+)^k, k = 1..m
    std::vector<double> abs_moment;            // E |x|^k, k = 1..m
};

MomentTable moments(const ScaledLaw& law, int m);

// Expectation of an arbitrary function under the law (exact sum over atoms).
double mean_under(const ScaledLaw& law, const std::function<double(const Vec&)>& h);

}  // namespace steinq::ctmc
