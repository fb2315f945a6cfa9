#include "steinq/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace steinq::stats {

LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw invalid_input("linear_fit: need >= 2 points with matching sizes");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0) throw invalid_input("linear_fit: degenerate x values");
    LinFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = (syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

MeanSe mean_se(const std::vector<double>& values) {
    MeanSe out;
    out.count = static_cast<int>(values.size());
    if (values.empty()) return out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / out.count;
    if (out.count < 2) return out;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / (out.count - 1) / out.count);
    return out;
}

MeanSe batch_means(const std::vector<double>& series, int n_batches) {
    if (n_batches < 2) throw invalid_input("batch_means: need >= 2 batches");
    const std::size_t n = series.size();
    if (n < static_cast<std::size_t>(2 * n_batches))
        throw invalid_input("batch_means: series too short for batch count");
    const std::size_t len = n / n_batches;  // drop the ragged tail
    std::vector<double> means(n_batches);
    for (int b = 0; b < n_batches; ++b) {
        double s = 0.0;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += series[i];
        means[b] = s / static_cast<double>(len);
    }
    return mean_se(means);
}

double chi_square_pvalue(double stat, int dof) {
    if (dof <= 0) return 1.0;
    boost::math::chi_squared dist(static_cast<double>(dof));
    if (stat <= 0.0) return 1.0;
    return boost::math::cdf(boost::math::complement(dist, stat));
}

double log_choose(long n, long k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(static_cast<double>(n) + 1.0) -
           std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

double binomial_pmf(long k, long n, double p) {
    if (k < 0 || k > n) return 0.0;
    if (p <= 0.0) return k == 0 ? 1.0 : 0.0;
    if (p >= 1.0) return k == n ? 1.0 : 0.0;
    const double lp = log_choose(n, k) + k * std::log(p) + (n - k) * std::log1p(-p);
    return std::exp(lp);
}

ChiSquareResult chi_square_gof(const std::vector<double>& observed,
                               const std::vector<double>& expected,
                               double min_expected, int dof_reduction) {
    if (observed.size() != expected.size() || observed.empty())
        throw invalid_input("chi_square_gof: size mismatch");
    // Greedy left-to-right pooling so every cell has expected >= min_expected;
    // a trailing underweight cell is merged into its predecessor.
    std::vector<double> obs_p, exp_p;
    double o_acc = 0.0, e_acc = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        o_acc += observed[i];
        e_acc += expected[i];
        if (e_acc >= min_expected) {
            obs_p.push_back(o_acc);
            exp_p.push_back(e_acc);
            o_acc = e_acc = 0.0;
        }
    }
    if (e_acc > 0.0 || o_acc > 0.0) {
        if (exp_p.empty()) {
            obs_p.push_back(o_acc);
            exp_p.push_back(e_acc);
        } else {
            obs_p.back() += o_acc;
            exp_p.back() += e_acc;
        }
    }
    ChiSquareResult res;
    res.pooled_cells = static_cast<int>(exp_p.size());
    for (std::size_t i = 0; i < exp_p.size(); ++i) {
        if (exp_p[i] <= 0.0) continue;
        const double diff = obs_p[i] - exp_p[i];
        res.stat += diff * diff / exp_p[i];
    }
    res.dof = res.pooled_cells - 1 - dof_reduction;
    res.p_value = res.dof > 0 ? chi_square_pvalue(res.stat, res.dof) : 1.0;
    return res;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw invalid_input("correlation: size mismatch");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;  // a constant series is uncorrelated
    return sab / std::sqrt(saa * sbb);
}

}  // namespace steinq::stats
