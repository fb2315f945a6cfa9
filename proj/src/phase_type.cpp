#include "steinq/phase_type.hpp"

#include <cmath>
#include <sstream>

namespace steinq::ph {

namespace {
constexpr double kProbTol = 1e-10;  // tolerance for probability-vector checks
}

PhaseType PhaseType::erlang2(double theta) {
    PhaseType pht;
    pht.d = 2;
    pht.p = Vec::Zero(2);
    pht.p << 1.0, 0.0;
    pht.nu = Vec::Constant(2, theta);
    pht.P = Mat::Zero(2, 2);
    pht.P(0, 1) = 1.0;
    return pht;
}

PhaseType PhaseType::hyper2(double p1, double nu1, double nu2) {
    PhaseType pht;
    pht.d = 2;
    pht.p = Vec::Zero(2);
    pht.p << p1, 1.0 - p1;
    pht.nu = Vec::Zero(2);
    pht.nu << nu1, nu2;
    pht.P = Mat::Zero(2, 2);
    return pht;
}

PhaseType PhaseType::exponential(double mu) {
    PhaseType pht;
    pht.d = 1;
    pht.p = Vec::Constant(1, 1.0);
    pht.nu = Vec::Constant(1, mu);
    pht.P = Mat::Zero(1, 1);
    return pht;
}

ValidationReport validate(const PhaseType& pht) {
    auto fail = [](const std::string& msg) { return ValidationReport{false, msg}; };

    if (pht.d <= 0) return fail("phase count d must be positive");
    if (pht.p.size() != pht.d || pht.nu.size() != pht.d ||
        pht.P.rows() != pht.d || pht.P.cols() != pht.d)
        return fail("field dimensions do not match d");

    double psum = 0.0;
    for (int i = 0; i < pht.d; ++i) {
        if (pht.p(i) < 0.0) return fail("non-stochastic p: negative entry at phase " + std::to_string(i));
        psum += pht.p(i);
    }
    if (std::abs(psum - 1.0) > kProbTol)
        return fail("non-stochastic p: entries sum to " + std::to_string(psum));

    for (int i = 0; i < pht.d; ++i)
        if (!(pht.nu(i) > 0.0))
            return fail("zero or negative rate nu at phase " + std::to_string(i));

    for (int i = 0; i < pht.d; ++i) {
        if (pht.P(i, i) != 0.0)
            return fail("routing matrix has nonzero diagonal at phase " + std::to_string(i));
        double rowsum = 0.0;
        for (int j = 0; j < pht.d; ++j) {
            if (pht.P(i, j) < 0.0)
                return fail("routing matrix has negative entry");
            rowsum += pht.P(i, j);
        }
        if (rowsum > 1.0 + kProbTol)
            return fail("routing row " + std::to_string(i) + " sums to " + std::to_string(rowsum) + " > 1");
    }

    // Transience: (I - P) must be invertible, i.e. service completes a.s.
    Mat ImP = Mat::Identity(pht.d, pht.d) - pht.P;
    Eigen::FullPivLU<Mat> lu(ImP);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible())
        return fail("non-transient routing: (I - P) is singular");

    // No redundant phases: each phase must be enterable.
    for (int i = 0; i < pht.d; ++i) {
        bool reachable = pht.p(i) > 0.0;
        for (int j = 0; j < pht.d && !reachable; ++j) reachable = pht.P(j, i) > 0.0;
        if (!reachable) return fail("redundant phase " + std::to_string(i) + ": never entered");
    }

    return ValidationReport{};
}

DerivedParams derive(const PhaseType& pht) {
    ValidationReport rep = validate(pht);
    if (!rep.ok) throw invalid_input("derive: invalid phase type: " + rep.message);

    DerivedParams dp;
    const int d = pht.d;
    Mat ImP = Mat::Identity(d, d) - pht.P;
    dp.R = ImP.transpose() * pht.nu.asDiagonal();

    // gamma = mu R^{-1} p with mu = 1 / (e^T R^{-1} p); R is invertible because
    // (I - P) is and all nu_i > 0.
    Eigen::PartialPivLU<Mat> rlu(dp.R);
    Vec u = rlu.solve(pht.p);
    const double mean_service = u.sum();  // e^T R^{-1} p = mean service time
    if (!(mean_service > 0.0) || !std::isfinite(mean_service))
        throw numerical_error("derive: non-positive mean service time (internal)");
    dp.mu = 1.0 / mean_service;
    dp.gamma = dp.mu * u;

    // Sigma: see the header note. One-trial routing covariance H^k plus the
    // deterministic-jump part, weighted by the per-phase completion shares.
    Mat acc = Mat::Zero(d, d);
    for (int k = 0; k < d; ++k) {
        Vec row = pht.P.row(k).transpose();
        Mat Hk = Mat(row.asDiagonal()) - row * row.transpose();
        acc += dp.gamma(k) * pht.nu(k) * Hk;
    }
    Vec nu_gamma = pht.nu.cwiseProduct(dp.gamma);
    acc += ImP.transpose() * nu_gamma.asDiagonal() * ImP;
    dp.Sigma = Mat(pht.p.asDiagonal()) + acc / dp.mu;
    dp.Sigma = 0.5 * (dp.Sigma + dp.Sigma.transpose());  // symmetrize roundoff

    Eigen::LLT<Mat> llt(dp.Sigma);
    if (llt.info() != Eigen::Success)
        throw numerical_error("derive: Sigma is not positive definite (internal)");
    dp.sqrtSigma = llt.matrixL();

    return dp;
}

ServiceSample sample_service(const PhaseType& pht, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto draw_from = [&](const Vec& probs) {
        double u = unif(rng);
        double acc = 0.0;
        for (int i = 0; i < probs.size(); ++i) {
            acc += probs(i);
            if (u < acc) return i;
        }
        return -1;  // falls through to absorption for substochastic rows
    };

    ServiceSample s;
    int phase = draw_from(pht.p);
    if (phase < 0) phase = pht.d - 1;  // guard against roundoff on full rows
    while (true) {
        s.trace.push_back(phase);
        std::exponential_distribution<double> expo(pht.nu(phase));
        s.duration += expo(rng);
        int next = draw_from(pht.P.row(phase).transpose());
        if (next < 0) break;  // absorbed: service complete
        phase = next;
    }
    return s;
}

}  // namespace steinq::ph
