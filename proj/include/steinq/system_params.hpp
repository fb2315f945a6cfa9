#pragma once

// =============================================================================
// FILE: steinq/system_params.hpp
// BRIEF: Parameters of one M/Ph/n+M instance under square-root staffing, shared
//        by the exact CTMC solver, the event-driven simulator, and the
//        diffusion diagnostics.
// =============================================================================

#include "steinq/common.hpp"
#include "steinq/phase_type.hpp"

#include <utility>

namespace steinq {

struct SystemParams {
    double lambda = 0.0;       // Poisson arrival rate
    int n = 0;                 // server count
    double alpha = 0.0;        // abandonment (patience) rate, > 0
    ph::PhaseType pht;         // service-time law
    ph::DerivedParams dp;      // derived quantities of pht
    double beta_eff = 0.0;     // (n*mu - lambda)/sqrt(lambda): realized slack
    double delta = 0.0;        // 1/sqrt(lambda): diffusion scaling unit
};

// Square-root staffing: choose the integer server count n so that
// n*mu ~= lambda + beta_target*sqrt(lambda), then report the slack actually
// realized by the rounding. All downstream computations use beta_eff, so the
// CTMC and the diffusion always describe the same staffed system.
std::pair<int, double> staffing(double lambda, double beta_target, double mu);

// Assembles a full parameter set (validates the phase type, derives, staffs).
SystemParams make_system(double lambda, double beta_target, double alpha,
                         const ph::PhaseType& pht);

}  // namespace steinq
