#pragma once

// =============================================================================
// FILE: steinq/des_sim.hpp
// BRIEF: Exact discrete-event simulation of the many-server queue with
//        phase-type service and exponential patience, with periodic state
//        snapshots, an abandonment-hazard audit table, queue-composition
//        (state-space collapse) diagnostics, and moment comparison helpers.
// =============================================================================

#include "steinq/common.hpp"
#include "steinq/ctmc.hpp"
#include "steinq/system_params.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace steinq::sim {

struct SimConfig {
    double warmup = -1.0;          // < 0: auto, max(100, 20 / min(mu, alpha))
    double horizon = 1e4;          // sampling window length after warmup
    double sample_interval = 1.0;  // time between snapshots
    int replications = 1;
    std::uint64_t seed = 1;
};

// Abandonment-age audit: per age bin, total queue exposure time and number of
// abandonments. Under exponential patience the per-bin hazard estimate
// (abandons / exposure) is flat at alpha.
struct HazardTable {
    double bin_width = 0.0;
    std::vector<double> exposure;
    std::vector<long> abandons;
};

// One replication: snapshots are rows (in-service counts z, queued counts q by
// the phase assigned at arrival) plus event totals and the hazard audit.
struct RepResult {
    Eigen::MatrixXi z;  // n_snapshots x d
    Eigen::MatrixXi q;  // n_snapshots x d
    Eigen::VectorXi ell;
    long arrived = 0;
    long served = 0;
    long abandoned = 0;
    HazardTable hazard;
};

struct SimResult {
    SystemParams params;
    SimConfig config;
    std::vector<RepResult> reps;
};

// Runs `replications` independent replications. Each customer draws its
// initial service phase at arrival (distributionally equivalent to drawing at
// service entry, and it makes the queued-phase composition observable).
// Deterministic under the seed.
SimResult simulate(const SystemParams& sp, const SimConfig& cfg);

// Diffusion coordinates of one snapshot row: x = delta * (z + q - gamma * n).
Vec scaled_snapshot(const SystemParams& sp, const RepResult& rep, long row);

// Per-replication snapshot means of h(x); feed to stats::mean_se.
std::vector<double> rep_means(const SimResult& res, const std::function<double(const Vec&)>& h);

// -----------------------------------------------------------------------------
// Queue-composition diagnostics
// -----------------------------------------------------------------------------

// For each queue length ell observed at least `min_count` times, tests the
// snapshot counts of q_1 against Binomial(ell, p_1) by chi-square with cells
// pooled to expected count >= 5. Also z-scores the componentwise mean identity
// E[delta q - p (e^T x)^+] = 0 using across-replication standard errors.
struct SscReport {
    struct Cell {
        long ell = 0;
        long count = 0;
        double chi2 = 0.0;
        int dof = 0;
        double p_value = 1.0;
    };
    std::vector<Cell> cells;
    Vec mean_w;        // componentwise mean of w = delta q - p (e^T x)^+
    Vec mean_w_se;     // replication standard errors
    Vec mean_w_z;      // mean_w ./ mean_w_se
    double corr_q1_z1 = 0.0;  // correlation of q1 - p1*ell with z1 (diagnostic)
};

SscReport ssc_conditional(const SimResult& res, long min_count = 2000);

// -----------------------------------------------------------------------------
// Abandonment-hazard audit
// -----------------------------------------------------------------------------

// Pools the hazard tables across replications and z-scores each of the first
// `max_bins` age bins against the exponential rate alpha (Poisson counts given
// exposure).
struct HazardCheck {
    struct Bin {
        double age_lo = 0.0, age_hi = 0.0;
        double exposure = 0.0;
        long abandons = 0;
        double zscore = 0.0;
    };
    std::vector<Bin> bins;
    double max_abs_z = 0.0;
};

HazardCheck hazard_exponentiality(const SimResult& res, int max_bins = 10);

// -----------------------------------------------------------------------------
// Simulation vs exact-chain moments
// -----------------------------------------------------------------------------

// Compares snapshot means of a standard functional family (each coordinate,
// its square, the positive part of e^T x and its square) against exact values
// under the chain's scaled stationary law; z-scores use replication SEs.
struct MomentComparison {
    struct Row {
        std::string name;
        double sim_mean = 0.0;
        double sim_se = 0.0;
        double exact = 0.0;
        double zscore = 0.0;
    };
    std::vector<Row> rows;
    double max_abs_z = 0.0;
};

MomentComparison compare_to_ctmc(const SimResult& res, const ctmc::ScaledLaw& law);

}  // namespace steinq::sim
