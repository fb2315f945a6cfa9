#pragma once

// =============================================================================
// FILE: steinq/config.hpp
// BRIEF: JSON run configuration shared by all CLI subcommands: arrival sweep,
//        staffing/abandonment parameters, service distribution (inline or
//        preset), solver tolerances, SDE and simulation blocks, and the
//        polynomial test-function family.
// =============================================================================

#include "steinq/des_sim.hpp"
#include "steinq/phase_type.hpp"
#include "steinq/piecewise_ou.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace steinq::cfg {

struct RunConfig {
    std::vector<double> lambdas;  // from "lambda" (scalar) or "lambdas" (array)
    double beta = 1.0;
    double alpha = 0.5;
    ph::PhaseType pht = ph::PhaseType::exponential(1.0);
    std::string phase_type_label = "M(mu=1)";
    double queue_tail_tol = 1e-9;
    ou::SdeConfig sde;           // sde.dt <= 0 means "use the model default"
    sim::SimConfig sim;
    std::uint64_t seed = 1;
    // Scalar polynomials h (ascending coefficients), applied to x in d=1 and
    // to e^T x in d > 1. Default: {x, x^2}.
    std::vector<std::vector<double>> h_polynomials;
};

// Parses a JSON document. Unknown keys are rejected to catch typos; all keys
// are optional except that at least one lambda must be present.
RunConfig parse_config(const std::string& json_text);

// Reads and parses a file; error messages carry the path.
RunConfig load_config(const std::string& path);

// Evaluates an ascending-coefficient polynomial.
double eval_polynomial(const std::vector<double>& coeffs, double u);

}  // namespace steinq::cfg
