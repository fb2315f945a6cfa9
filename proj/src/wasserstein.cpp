#include "steinq/wasserstein.hpp"

#include "steinq/stats.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace steinq::w1 {

namespace {

using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;

// Integrate |c - cdf(x)| over [a, b] where cdf is monotone increasing, so the
// integrand changes sign at most once; locate the crossing by bisection and
// integrate each signed piece smoothly.
double segment_area(double c, const std::function<double(double)>& cdf, double a, double b) {
    if (b <= a) return 0.0;
    const double fa = c - cdf(a);
    const double fb = c - cdf(b);
    auto piece = [&](double u, double v) {
        if (v <= u) return 0.0;
        const double val =
            Quad::integrate([&](double t) { return c - cdf(t); }, u, v, 10, 1e-12);
        return std::abs(val);
    };
    if (fa == 0.0 || fb == 0.0 || (fa > 0.0) == (fb > 0.0)) return piece(a, b);
    double lo = a, hi = b;
    for (int it = 0; it < 80 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = c - cdf(mid);
        if (fm == 0.0) {
            lo = hi = mid;
            break;
        }
        ((fm > 0.0) == (fa > 0.0) ? lo : hi) = mid;
    }
    const double cross = 0.5 * (lo + hi);
    return piece(a, cross) + piece(cross, b);
}

}  // namespace

Atomic1d make_atomic(Vec x, Vec p) {
    if (x.size() != p.size() || x.size() == 0)
        throw invalid_input("make_atomic: support and weights must match and be nonempty");
    const long n = x.size();
    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0L);
    std::sort(order.begin(), order.end(), [&](long i, long j) { return x(i) < x(j); });

    Atomic1d out;
    out.x.resize(n);
    out.p.resize(n);
    long m = 0;
    for (long k = 0; k < n; ++k) {
        const double xi = x(order[k]);
        const double pi = p(order[k]);
        if (!std::isfinite(xi) || !std::isfinite(pi) || pi < 0.0)
            throw invalid_input("make_atomic: weights must be finite and nonnegative");
        if (pi == 0.0) continue;
        if (m > 0 && xi == out.x(m - 1)) {
            out.p(m - 1) += pi;
        } else {
            out.x(m) = xi;
            out.p(m) = pi;
            ++m;
        }
    }
    if (m == 0) throw invalid_input("make_atomic: distribution has zero mass");
    out.x.conservativeResize(m);
    out.p.conservativeResize(m);
    out.p /= out.p.sum();
    return out;
}

Atomic1d from_samples(const std::vector<double>& samples) {
    if (samples.empty()) throw invalid_input("from_samples: empty sample");
    const long n = static_cast<long>(samples.size());
    Vec x(n);
    for (long i = 0; i < n; ++i) x(i) = samples[static_cast<std::size_t>(i)];
    return make_atomic(std::move(x), Vec::Constant(n, 1.0));
}

Atomic1d project(const Mat& points, const Vec& prob, const Vec& direction) {
    if (points.cols() != direction.size() || points.rows() != prob.size())
        throw invalid_input("project: dimension mismatch");
    return make_atomic(points * direction, prob);
}

double discrete_discrete(const Atomic1d& a, const Atomic1d& b) {
    // W1 = integral of |F_a - F_b|; both CDFs are step functions, so sweep the
    // merged support and add |F_a - F_b| times each gap width.
    long ia = 0, ib = 0;
    double Fa = 0.0, Fb = 0.0, total = 0.0;
    double xcur = std::min(a.x(0), b.x(0));
    while (ia < a.x.size() || ib < b.x.size()) {
        const double xa = ia < a.x.size() ? a.x(ia) : std::numeric_limits<double>::infinity();
        const double xb = ib < b.x.size() ? b.x(ib) : std::numeric_limits<double>::infinity();
        const double xnext = std::min(xa, xb);
        total += std::abs(Fa - Fb) * (xnext - xcur);
        if (xa <= xnext) Fa += a.p(ia++);
        while (ia < a.x.size() && a.x(ia) == xnext) Fa += a.p(ia++);
        if (xb <= xnext) Fb += b.p(ib++);
        while (ib < b.x.size() && b.x(ib) == xnext) Fb += b.p(ib++);
        xcur = xnext;
    }
    return total;
}

double discrete_continuous(const Atomic1d& a, const std::function<double(double)>& cdf,
                           double lo, double hi) {
    const long m = a.x.size();
    const double L = std::min(lo, a.x(0));
    const double U = std::max(hi, a.x(m - 1));
    double total = 0.0;
    // Left of all atoms the atomic CDF is 0, to the right it is 1.
    total += segment_area(0.0, cdf, L, a.x(0));
    double c = 0.0;
    for (long k = 0; k + 1 < m; ++k) {
        c += a.p(k);
        total += segment_area(c, cdf, a.x(k), a.x(k + 1));
    }
    total += segment_area(1.0, cdf, a.x(m - 1), U);
    return total;
}

double empirical(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw invalid_input("empirical: sample sizes must match");
    if (a.empty()) throw invalid_input("empirical: empty sample");
    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) acc += std::abs(sa[i] - sb[i]);
    return acc / static_cast<double>(sa.size());
}

SlicedResult sliced(const Mat& pts_a, const Vec& prob_a, const Mat& pts_b, const Vec& prob_b,
                    int n_directions, std::uint64_t seed) {
    if (pts_a.cols() != pts_b.cols()) throw invalid_input("sliced: dimension mismatch");
    if (n_directions < 2) throw invalid_input("sliced: need at least 2 directions");
    const int d = static_cast<int>(pts_a.cols());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> vals;
    vals.reserve(n_directions);
    for (int k = 0; k < n_directions; ++k) {
        Vec dir(d);
        double nrm = 0.0;
        do {
            for (int j = 0; j < d; ++j) dir(j) = gauss(rng);
            nrm = dir.norm();
        } while (nrm < 1e-12);
        dir /= nrm;
        vals.push_back(discrete_discrete(project(pts_a, prob_a, dir), project(pts_b, prob_b, dir)));
    }
    const auto ms = stats::mean_se(vals);
    return SlicedResult{ms.mean, ms.se, n_directions};
}

}  // namespace steinq::w1
