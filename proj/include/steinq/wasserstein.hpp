#pragma once

// =============================================================================
// FILE: steinq/wasserstein.hpp
// BRIEF: Exact 1-D Wasserstein-1 distances (atomic vs atomic, atomic vs smooth
//        via the CDF-difference integral) plus a sliced-W1 estimate in d >= 2.
// =============================================================================

#include "steinq/common.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace steinq::w1 {

// Atomic distribution on the real line: strictly increasing support `x` with
// matching weights `p` (nonnegative, summing to 1).
struct Atomic1d {
    Vec x;
    Vec p;
};

// Sorts, merges duplicate support points, drops zero-weight atoms, and
// normalizes. Throws `invalid_input` on size mismatch, NaNs, or zero mass.
Atomic1d make_atomic(Vec x, Vec p);

// Empirical distribution of a sample (equal weights).
Atomic1d from_samples(const std::vector<double>& samples);

// One-dimensional projection of an atomic law in R^d onto `direction`.
Atomic1d project(const Mat& points, const Vec& prob, const Vec& direction);

// Exact W1 between two atomic laws: the area between their CDF step functions.
double discrete_discrete(const Atomic1d& a, const Atomic1d& b);

// Exact W1 between an atomic law and a law with smooth strictly increasing CDF
// `cdf`. `lo`/`hi` must bracket essentially all continuous mass (far-tail
// quantiles); integration runs over the union of [lo, hi] and the atom range.
double discrete_continuous(const Atomic1d& a, const std::function<double(double)>& cdf,
                           double lo, double hi);

// W1 between two equal-size empirical samples: mean absolute difference of the
// sorted samples. Throws `invalid_input` on size mismatch.
double empirical(const std::vector<double>& a, const std::vector<double>& b);

// Sliced W1 between two atomic laws in R^d: average of projected 1-D W1 over
// `n_directions` seeded uniform random directions, with a standard error.
struct SlicedResult {
    double mean = 0.0;
    double se = 0.0;
    int n_directions = 0;
};

SlicedResult sliced(const Mat& pts_a, const Vec& prob_a, const Mat& pts_b, const Vec& prob_b,
                    int n_directions, std::uint64_t seed);

}  // namespace steinq::w1
