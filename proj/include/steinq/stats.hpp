#pragma once

// =============================================================================
// FILE: steinq/stats.hpp
// BRIEF: Small statistics toolbox: least squares on log-log data, batch-means
//        standard errors, chi-square p-values, and counting pmf helpers.
// =============================================================================

#include "steinq/common.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace steinq::stats {

// Ordinary least squares fit y = slope*x + intercept with r^2.
struct LinFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// Mean and standard error of the mean from a list of (roughly independent)
// replicate values, e.g. replication means or batch means.
struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    int count = 0;
};

MeanSe mean_se(const std::vector<double>& values);

// Splits a correlated time series into `n_batches` contiguous batches and
// returns the batch-means estimate of the mean and its standard error.
MeanSe batch_means(const std::vector<double>& series, int n_batches);

// Upper-tail p-value of a chi-square statistic with `dof` degrees of freedom.
double chi_square_pvalue(double stat, int dof);

// log C(n, k) via lgamma; exact enough for pmf assembly at n up to ~10^6.
double log_choose(long n, long k);

// Binomial(n, p) pmf evaluated in log space for numerical range safety.
double binomial_pmf(long k, long n, double p);

// Chi-square goodness-of-fit of observed counts against expected counts.
// Cells are pooled greedily (left to right) until every pooled cell has
// expected count >= min_expected; dof = pooled_cells - 1 - dof_reduction.
struct ChiSquareResult {
    double stat = 0.0;
    int dof = 0;
    double p_value = 1.0;
    int pooled_cells = 0;
};

ChiSquareResult chi_square_gof(const std::vector<double>& observed,
                               const std::vector<double>& expected,
                               double min_expected = 5.0, int dof_reduction = 0);

// Pearson correlation of two equal-length series.
double correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace steinq::stats
