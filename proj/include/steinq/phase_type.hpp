#pragma once

// =============================================================================
// FILE: steinq/phase_type.hpp
// BRIEF: Phase-type service-time law (p, nu, P) and every derived quantity the
//        queueing and diffusion models need: service rate mu, the matrix
//        R = (I - P^T) diag(nu), the stationary phase mix gamma, and the
//        diffusion covariance Sigma with a fixed square-root factor.
//
// A phase-type distribution is the absorption time of a CTMC on d transient
// phases: the initial phase is drawn from p, phase i completes at rate nu_i,
// and on completion routes to phase j with probability P_ij or absorbs
// (service ends) with probability 1 - sum_j P_ij.
// =============================================================================

#include "steinq/common.hpp"

#include <random>
#include <string>
#include <vector>

namespace steinq::ph {

struct PhaseType {
    int d = 0;  // number of phases
    Vec p;      // initial-phase probabilities, length d
    Vec nu;     // per-phase completion rates (> 0), length d
    Mat P;      // substochastic routing matrix, zero diagonal, d x d

    // Named presets.
    // Erlang-2: two sequential phases at the same rate theta (mean 2/theta).
    static PhaseType erlang2(double theta);
    // Two-phase hyperexponential: phase 1 w.p. p1 at rate nu1, else phase 2
    // at rate nu2; no routing.
    static PhaseType hyper2(double p1, double nu1, double nu2);
    // Plain exponential with rate mu (d = 1).
    static PhaseType exponential(double mu);
};

struct ValidationReport {
    bool ok = true;
    std::string message;  // names the first violated requirement when !ok
};

// Checks all structural requirements: p a probability vector, nu positive,
// P substochastic with zero diagonal and (I - P) invertible (every service
// eventually completes), and no redundant phase (every phase is reachable:
// p_i > 0 or P_ji > 0 for some j).
ValidationReport validate(const PhaseType& pht);

struct DerivedParams {
    double mu = 0.0;  // long-run service rate: 1 / mean service time
    Mat R;            // (I - P^T) diag(nu)
    Vec gamma;        // mu * R^{-1} p; the stationary phase mix, sums to 1
    Mat Sigma;        // diffusion covariance (see derive() notes)
    Mat sqrtSigma;    // lower-triangular Cholesky factor, sqrtSigma*sqrtSigma^T = Sigma
};

// Computes the derived quantities. Requires validate(pht).ok.
//
// Sigma is the local covariance of the diffusion-scaled system-size vector at
// the nominal operating point: arrivals contribute diag(p); one phase-k
// completion has jump covariance H^k + (I-P^T) e_k e_k^T (I-P), where
// H^k = diag(P_k.) - P_k.^T P_k. is the one-trial covariance of the routing
// row, and phase-k completions occur at asymptotic rate gamma_k nu_k n with
// n/lambda -> 1/mu under square-root staffing. Hence
//   Sigma = diag(p)
//         + (1/mu) * [ sum_k gamma_k nu_k H^k + (I-P^T) diag(nu) diag(gamma) (I-P) ].
// Entrywise this equals
//   Sigma_ii = 2 (p_i + (1/mu) sum_j P_ji gamma_j nu_j),
//   Sigma_ij = -(1/mu) (P_ij nu_i gamma_i + P_ji nu_j gamma_j)   (i != j),
// using the identity nu_i gamma_i - sum_j P_ji nu_j gamma_j = mu p_i.
// For d = 1 this is always 2.
DerivedParams derive(const PhaseType& pht);

struct ServiceSample {
    double duration = 0.0;    // time to absorption
    std::vector<int> trace;   // visited phases, in order
};

// Simulates one service time by running the absorbing phase chain.
ServiceSample sample_service(const PhaseType& pht, std::mt19937_64& rng);

}  // namespace steinq::ph
