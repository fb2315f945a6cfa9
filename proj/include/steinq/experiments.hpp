#pragma once

// =============================================================================
// FILE: steinq/experiments.hpp
// BRIEF: Sweep orchestration: per-arrival-rate distance reports between the
//        exact chain law and its diffusion approximation, log-log rate fits,
//        normalized (sqrt-lambda scaled) distance sequences, moment-
//        boundedness tables, and SDE moment-gap estimation with Monte Carlo
//        standard errors.
// =============================================================================

#include "steinq/common.hpp"
#include "steinq/config.hpp"
#include "steinq/ctmc.hpp"
#include "steinq/stats.hpp"
#include "steinq/system_params.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace steinq::experiments {

// All exponent multi-indices over d coordinates with total degree 1..max_order,
// in a deterministic order (the same order ctmc::moments uses for its keys).
std::vector<std::vector<int>> multi_indices(int d, int max_order);

// One arrival rate's comparison row. `ok == false` records a per-rate failure
// (message says why) without aborting the sweep.
struct DistanceReport {
    double lambda = 0.0;
    int n = 0;
    double beta_eff = 0.0;
    bool ok = false;
    std::string message;
    double w1 = 0.0;     // d=1: exact CDF-difference integral; d>1: sliced estimate
    double w1_se = 0.0;  // 0 when exact
    std::vector<double> moment_gaps;     // per total degree 1..orders
    std::vector<double> moment_gap_se;   // 0 when both sides are exact
    std::vector<double> abs_moments;     // chain-side E|X|^m, m = 1..orders
};

struct RateFit {
    stats::LinFit fit;                // least squares on (log lambda, log distance)
    std::vector<double> normalized;   // sqrt(lambda) * distance per rate
};

// Log-log rate fit; needs >= 3 strictly positive distances.
RateFit fit_rate(const std::vector<double>& lambdas, const std::vector<double>& distances);

struct SweepResult {
    int orders = 0;
    std::vector<DistanceReport> reports;
    RateFit w1_fit;
    std::vector<RateFit> gap_fits;  // one per moment order
};

// Runs the full sweep over config.lambdas: staff, solve the chain, build the
// matching diffusion law (exact in d=1, Euler-Maruyama in d>1), and compare.
// Rates below 4 are outside the intended asymptotic range and are recorded as
// failed rows with a warning message.
SweepResult rate_sweep(const cfg::RunConfig& config);

// Max/min ratio of E|X|^m across the sweep's successful rows (ratio 1 when
// only one row). Flags nothing by itself; callers compare against their bound.
struct BoundednessTable {
    std::vector<int> orders;
    Mat values;  // rows: successful sweep entries; cols: orders
    std::vector<double> ratios;
};

BoundednessTable moment_boundedness(const SweepResult& sweep);

// Monte Carlo moment gaps between an exact chain moment table and the
// diffusion sampled by Euler-Maruyama: per total degree m, the sum over
// multi-indices of |exact - MC estimate|, with replication standard errors.
struct MomentGapReport {
    std::vector<int> orders;
    std::vector<double> gap;
    std::vector<double> se;
    std::int64_t total_steps = 0;
};

MomentGapReport sde_moment_gaps(const SystemParams& sp, const ctmc::MomentTable& exact,
                                int max_order, int replications, std::int64_t steps_per_rep,
                                double dt, double burn_in, std::uint64_t seed);

}  // namespace steinq::experiments
