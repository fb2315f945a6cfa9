#pragma once

// =============================================================================
// FILE: steinq/common.hpp
// BRIEF: Shared aliases and small numeric helpers used across the library.
// =============================================================================

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace steinq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecI = Eigen::VectorXi;

// Positive part (x)^+.
inline double pos_part(double v) { return v > 0.0 ? v : 0.0; }

// Mixes a base seed into a stream/replication-specific one (splitmix64 step).
// Used wherever several independent random streams are derived from a single
// user-facing seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + (stream + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Thrown when an operation receives structurally inconsistent inputs
// (invalid distributions, mismatched dimensions, inconsistent states).
class invalid_input : public std::invalid_argument {
  public:
    explicit invalid_input(const std::string& msg) : std::invalid_argument(msg) {}
};

// Thrown when a numerical routine fails to reach its contract tolerance
// (solver non-convergence, quadrature failure, sampler blow-up).
class numerical_error : public std::runtime_error {
  public:
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace steinq
