#include "steinq/system_params.hpp"

#include <algorithm>
#include <cmath>

namespace steinq {

std::pair<int, double> staffing(double lambda, double beta_target, double mu) {
    if (!(lambda > 0.0)) throw invalid_input("staffing: lambda must be positive");
    if (!(mu > 0.0)) throw invalid_input("staffing: mu must be positive");
    const double raw = (lambda + beta_target * std::sqrt(lambda)) / mu;
    int n = std::max(1, static_cast<int>(std::lround(raw)));
    const double beta_eff = (n * mu - lambda) / std::sqrt(lambda);
    return {n, beta_eff};
}

SystemParams make_system(double lambda, double beta_target, double alpha,
                         const ph::PhaseType& pht) {
    if (!(alpha > 0.0))
        throw invalid_input("make_system: abandonment rate alpha must be positive");
    SystemParams sp;
    sp.lambda = lambda;
    sp.alpha = alpha;
    sp.pht = pht;
    sp.dp = ph::derive(pht);
    auto [n, beta_eff] = staffing(lambda, beta_target, sp.dp.mu);
    sp.n = n;
    sp.beta_eff = beta_eff;
    sp.delta = 1.0 / std::sqrt(lambda);
    return sp;
}

}  // namespace steinq
