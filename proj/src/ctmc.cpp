#include "steinq/ctmc.hpp"

#include "steinq/stats.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace steinq::ctmc {

// -----------------------------------------------------------------------------
// StateSpace
// -----------------------------------------------------------------------------

namespace {

// Lexicographically ascending enumeration of {z >= 0 : e^T z = s}.
void enumerate_simplex(int d, int s, std::vector<int>& scratch, int pos, int remaining,
                       const std::function<void(const std::vector<int>&)>& emit) {
    if (pos == d - 1) {
        scratch[pos] = remaining;
        emit(scratch);
        return;
    }
    for (int v = 0; v <= remaining; ++v) {
        scratch[pos] = v;
        enumerate_simplex(d, s, scratch, pos + 1, remaining - v, emit);
    }
}

}  // namespace

std::uint64_t StateSpace::key(const int* zptr, long ell) const {
    // Exact packing (not a hash): collisions are impossible within the
    // documented ranges, so the lookup map keys identify states uniquely.
    std::uint64_t k = 0;
    switch (d_) {
        case 1:
            return (static_cast<std::uint64_t>(zptr[0]) << 48) | static_cast<std::uint64_t>(ell);
        case 2:
            return (static_cast<std::uint64_t>(zptr[0]) << 48) |
                   (static_cast<std::uint64_t>(zptr[1]) << 32) | static_cast<std::uint64_t>(ell);
        case 3:
            return (static_cast<std::uint64_t>(zptr[0]) << 48) |
                   (static_cast<std::uint64_t>(zptr[1]) << 32) |
                   (static_cast<std::uint64_t>(zptr[2]) << 16) | static_cast<std::uint64_t>(ell);
        default:
            // d >= 4: fold exactly via mixed-radix over (n+1) and the cap.
            for (int i = 0; i < d_; ++i) k = k * static_cast<std::uint64_t>(n_ + 1) + zptr[i];
            return k * static_cast<std::uint64_t>(cap_ + 1) + static_cast<std::uint64_t>(ell);
    }
}

StateSpace::StateSpace(int d, int n, long queue_cap) : d_(d), n_(n), cap_(queue_cap) {
    if (d <= 0 || n <= 0 || queue_cap < 1)
        throw invalid_input("StateSpace: need d > 0, n > 0, queue_cap >= 1");
    if (n > 65535) throw invalid_input("StateSpace: server count too large for packing");
    if ((d <= 2 && queue_cap > (1L << 31)) || (d >= 3 && queue_cap > 65535))
        throw invalid_input("StateSpace: queue cap too large for packing");
    // d >= 4 mixed-radix packing must fit 64 bits.
    if (d >= 4 && (d * std::log2(n + 1.0) + std::log2(queue_cap + 1.0)) > 63.0)
        throw invalid_input("StateSpace: state space too large to index");

    std::vector<int> scratch(d);
    auto push = [&](const std::vector<int>& z, long ell, int s) {
        const int idx = static_cast<int>(ell_.size());
        zdata_.insert(zdata_.end(), z.begin(), z.end());
        s_.push_back(s);
        ell_.push_back(ell);
        lookup_.emplace(key(z.data(), ell), idx);
    };

    // Lexicographic in (e^T z, z, ell): queue levels only exist at e^T z = n.
    for (int s = 0; s <= n; ++s) {
        enumerate_simplex(d, s, scratch, 0, s, [&](const std::vector<int>& z) {
            if (s < n) {
                push(z, 0, s);
            } else {
                for (long ell = 0; ell <= cap_; ++ell) push(z, ell, s);
            }
        });
        if (ell_.size() > 50'000'000)
            throw invalid_input("StateSpace: state space exceeds 50M states");
    }
    lookup_.rehash(ell_.size() * 2);
}

VecI StateSpace::zvec(int idx) const {
    VecI z(d_);
    for (int i = 0; i < d_; ++i) z(i) = zdata_[static_cast<std::size_t>(idx) * d_ + i];
    return z;
}

int StateSpace::index(const int* zptr, long ell) const {
    for (int i = 0; i < d_; ++i)
        if (zptr[i] < 0 || zptr[i] > n_) return -1;
    if (ell < 0 || ell > cap_) return -1;
    auto it = lookup_.find(key(zptr, ell));
    return it == lookup_.end() ? -1 : it->second;
}

// -----------------------------------------------------------------------------
// Generator assembly
// -----------------------------------------------------------------------------

Generator build_generator(const SystemParams& sp, long queue_cap) {
    const int d = sp.pht.d;
    Generator gen;
    gen.space = std::make_shared<StateSpace>(d, sp.n, queue_cap);
    gen.params = sp;
    const StateSpace& S = *gen.space;
    const int N = S.size();
    gen.out_rate.assign(N, 0.0);
    gen.dropped_rate.assign(N, 0.0);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(N) * (3 + 2 * d));

    std::vector<int> zbuf(d);
    // Departure probability per phase: 1 - sum_j P_ij (clamped at 0 for roundoff).
    std::vector<double> p_depart(d);
    for (int i = 0; i < d; ++i)
        p_depart[i] = std::max(0.0, 1.0 - sp.pht.P.row(i).sum());

    for (int from = 0; from < N; ++from) {
        const int s = S.in_service(from);
        const long ell = S.ell(from);
        double outflow = 0.0;

        auto add = [&](int to, double rate) {
            if (rate <= 0.0) return;
            trips.emplace_back(to, from, rate);  // building G^T directly
            outflow += rate;
        };
        auto load_z = [&] {
            for (int i = 0; i < d; ++i) zbuf[i] = S.z(from, i);
        };

        // Arrivals at rate lambda. With a free server the customer starts in
        // phase i w.p. p_i; with all servers busy it joins the queue (its
        // phase is not part of the reduced state).
        if (s < sp.n) {
            for (int i = 0; i < d; ++i) {
                if (sp.pht.p(i) <= 0.0) continue;
                load_z();
                zbuf[i] += 1;
                add(S.index(zbuf.data(), 0), sp.lambda * sp.pht.p(i));
            }
        } else if (ell < queue_cap) {
            load_z();
            add(S.index(zbuf.data(), ell + 1), sp.lambda);
        } else {
            gen.dropped_rate[from] = sp.lambda;  // reflected truncation
        }

        // Abandonment: each of the ell queued customers leaves at rate alpha.
        if (ell > 0) {
            load_z();
            add(S.index(zbuf.data(), ell - 1), sp.alpha * static_cast<double>(ell));
        }

        // Service-phase completions at rate nu_i z_i.
        for (int i = 0; i < d; ++i) {
            const int zi = S.z(from, i);
            if (zi == 0) continue;
            const double rate_i = sp.pht.nu(i) * zi;
            // In-service routing i -> j keeps (e^T z, ell).
            for (int j = 0; j < d; ++j) {
                if (sp.pht.P(i, j) <= 0.0) continue;
                load_z();
                zbuf[i] -= 1;
                zbuf[j] += 1;
                add(S.index(zbuf.data(), ell), rate_i * sp.pht.P(i, j));
            }
            // Departure: if the queue is nonempty the head-of-line customer
            // enters service with a fresh phase ~ p, else a server goes idle.
            if (p_depart[i] > 0.0) {
                if (ell > 0) {
                    for (int k = 0; k < d; ++k) {
                        if (sp.pht.p(k) <= 0.0) continue;
                        load_z();
                        zbuf[i] -= 1;
                        zbuf[k] += 1;
                        add(S.index(zbuf.data(), ell - 1), rate_i * p_depart[i] * sp.pht.p(k));
                    }
                } else {
                    load_z();
                    zbuf[i] -= 1;
                    add(S.index(zbuf.data(), 0), rate_i * p_depart[i]);
                }
            }
        }

        trips.emplace_back(from, from, -outflow);
        gen.out_rate[from] = outflow;
    }

    gen.GT.resize(N, N);
    gen.GT.setFromTriplets(trips.begin(), trips.end());
    gen.GT.makeCompressed();
    return gen;
}

// -----------------------------------------------------------------------------
// Stationary solvers
// -----------------------------------------------------------------------------

namespace {

// Pin the state expected to carry high probability: all servers busy with the
// in-service mix near gamma*n, empty queue. Pinning a high-mass state keeps
// the un-normalized solution's dynamic range representable.
int pick_pinned_state(const StateSpace& S, const SystemParams& sp) {
    const int d = S.dim();
    std::vector<int> ztarget(d);
    int acc = 0;
    for (int i = 0; i < d - 1; ++i) {
        ztarget[i] = static_cast<int>(std::lround(sp.dp.gamma(i) * sp.n));
        acc += ztarget[i];
    }
    ztarget[d - 1] = sp.n - acc;
    if (ztarget[d - 1] >= 0) {
        const int idx = S.index(ztarget.data(), 0);
        if (idx >= 0) return idx;
    }
    return S.size() / 2;
}

double residual_inf_norm(const Eigen::SparseMatrix<double>& GT, const Vec& pi) {
    return (GT * pi).cwiseAbs().maxCoeff();
}

StationaryPmf finish(const Generator& gen, Vec pi, double residual) {
    // Clamp solver noise on far-tail entries and renormalize.
    for (int i = 0; i < pi.size(); ++i)
        if (pi(i) < 0.0) pi(i) = 0.0;
    pi /= pi.sum();
    StationaryPmf out;
    out.space = gen.space;
    out.queue_cap = gen.space->queue_cap();
    out.prob = std::move(pi);
    out.residual = residual;
    double tail = 0.0;
    const StateSpace& S = *gen.space;
    for (int i = 0; i < S.size(); ++i)
        if (S.ell(i) == out.queue_cap) tail += out.prob(i);
    out.tail_bound = tail;
    return out;
}

bool solve_direct(const Generator& gen, double tol, StationaryPmf& out) {
    const int N = gen.space->size();
    const int k = pick_pinned_state(*gen.space, gen.params);

    // Balance equations GT pi = 0 with pi_k pinned to 1: solve the reduced
    // (N-1)-dimensional system A y = b, A = GT without row/col k, b = -GT(:,k).
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(gen.GT.nonZeros());
    Vec b = Vec::Zero(N - 1);
    for (int col = 0; col < gen.GT.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(gen.GT, col); it; ++it) {
            const int r = static_cast<int>(it.row());
            const int c = col;
            if (r == k) continue;
            const int rr = r > k ? r - 1 : r;
            if (c == k) {
                b(rr) -= it.value();
            } else {
                trips.emplace_back(rr, c > k ? c - 1 : c, it.value());
            }
        }
    }
    Eigen::SparseMatrix<double> A(N - 1, N - 1);
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) return false;
    Vec y = lu.solve(b);
    if (lu.info() != Eigen::Success) return false;
    // A couple of iterative-refinement sweeps tighten the balance residual.
    for (int pass = 0; pass < 2; ++pass) {
        Vec r = A * y - b;
        y -= lu.solve(r);
    }

    Vec pi(N);
    for (int i = 0; i < N; ++i) pi(i) = i == k ? 1.0 : y(i > k ? i - 1 : i);
    const double scale = pi.sum();
    pi /= scale;
    const double res = residual_inf_norm(gen.GT, pi);
    if (!std::isfinite(res) || res > tol) return false;
    out = finish(gen, std::move(pi), res);
    return true;
}

bool solve_power(const Generator& gen, double tol, long max_iters, StationaryPmf& out) {
    const int N = gen.space->size();
    const double Lambda =
        1.02 * *std::max_element(gen.out_rate.begin(), gen.out_rate.end()) + 1e-12;
    Vec v = Vec::Constant(N, 1.0 / N);
    double best = std::numeric_limits<double>::infinity();
    int stalls = 0;
    const int check_every = 100;
    for (long it = 1; it <= max_iters; ++it) {
        v += (gen.GT * v) / Lambda;  // one uniformized step: v <- (I + G/Lambda)^T v
        if (it % check_every == 0 || it == max_iters) {
            v /= v.sum();
            const double res = residual_inf_norm(gen.GT, v);
            if (res < tol) {
                out = finish(gen, std::move(v), res);
                return true;
            }
            // Stall detection: residual no longer contracting.
            if (res > 0.9995 * best) {
                if (++stalls >= 5) return false;
            } else {
                stalls = 0;
            }
            best = std::min(best, res);
        }
    }
    return false;
}

}  // namespace

StationaryPmf stationary(const Generator& gen, const SolveOptions& opt) {
    StationaryPmf out;
    switch (opt.method) {
        case SolveMethod::Direct:
            if (solve_direct(gen, opt.residual_tol, out)) return out;
            throw numerical_error("stationary: sparse direct solve failed to reach tolerance");
        case SolveMethod::Power:
            if (solve_power(gen, opt.residual_tol, opt.max_power_iters, out)) return out;
            throw numerical_error("stationary: power iteration did not converge within cap");
        case SolveMethod::Auto:
        default:
            if (solve_direct(gen, opt.residual_tol, out)) return out;
            if (solve_power(gen, opt.residual_tol, opt.max_power_iters, out)) return out;
            throw numerical_error("stationary: both direct and power solves failed");
    }
}

StationaryPmf solve_stationary(const SystemParams& sp, const SolveOptions& opt) {
    long cap = opt.initial_cap > 0
                   ? opt.initial_cap
                   : static_cast<long>(std::ceil(10.0 * std::sqrt(sp.lambda))) + 10;
    StationaryPmf pi;
    for (int round = 0; round <= opt.max_doublings; ++round) {
        Generator gen = build_generator(sp, cap);
        pi = stationary(gen, opt);
        if (pi.tail_bound < opt.queue_tail_tol) return pi;
        cap *= 2;
    }
    throw numerical_error("solve_stationary: queue cap doubling exhausted (tail bound " +
                          std::to_string(pi.tail_bound) + ")");
}

// -----------------------------------------------------------------------------
// Scaled law and moments
// -----------------------------------------------------------------------------

ScaledLaw scaled_system_law(const StationaryPmf& pi, const SystemParams& sp) {
    const StateSpace& S = *pi.space;
    const int d = S.dim();
    const int n = S.n_servers();
    const double delta = sp.delta;
    const Vec& gamma = sp.dp.gamma;
    ScaledLaw law;
    law.d = d;

    if (d == 1) {
        // x = delta (z + ell - n); consolidate on the total count t = z + ell.
        const long tmax = n + S.queue_cap();
        Vec mass = Vec::Zero(tmax + 1);
        for (int i = 0; i < S.size(); ++i) mass(S.z(i, 0) + S.ell(i)) += pi.prob(i);
        int atoms = (mass.array() > 0.0).count();
        law.points.resize(atoms, 1);
        law.prob.resize(atoms);
        int row = 0;
        for (long t = 0; t <= tmax; ++t) {
            if (mass(t) <= 0.0) continue;
            law.points(row, 0) = delta * (static_cast<double>(t) - gamma(0) * n);
            law.prob(row) = mass(t);
            ++row;
        }
        return law;
    }

    if (d == 2) {
        // Split the queue: q1 ~ Binomial(ell, p1). Consolidate on
        // (a, t) = (z1 + q1, e^T z + ell); then x = delta ((a, t - a) - gamma n).
        const long m = n + S.queue_cap() + 1;
        if (m * m > (1L << 26))
            throw invalid_input("scaled_system_law: lattice too large to consolidate");
        std::vector<double> mass(static_cast<std::size_t>(m) * m, 0.0);
        const double p1 = sp.pht.p(0);
        std::vector<std::vector<double>> binom(S.queue_cap() + 1);
        for (int i = 0; i < S.size(); ++i) {
            const long ell = S.ell(i);
            const long t = S.in_service(i) + ell;
            const long z1 = S.z(i, 0);
            const double w = pi.prob(i);
            if (w == 0.0) continue;
            if (ell == 0) {
                mass[static_cast<std::size_t>(z1) * m + t] += w;
                continue;
            }
            auto& pmf = binom[ell];
            if (pmf.empty()) {
                pmf.resize(ell + 1);
                for (long kq = 0; kq <= ell; ++kq) pmf[kq] = stats::binomial_pmf(kq, ell, p1);
            }
            for (long kq = 0; kq <= ell; ++kq)
                mass[static_cast<std::size_t>(z1 + kq) * m + t] += w * pmf[kq];
        }
        long atoms = 0;
        for (double v : mass)
            if (v > 0.0) ++atoms;
        law.points.resize(atoms, 2);
        law.prob.resize(atoms);
        long row = 0;
        for (long a = 0; a < m; ++a) {
            for (long t = 0; t < m; ++t) {
                const double v = mass[static_cast<std::size_t>(a) * m + t];
                if (v <= 0.0) continue;
                law.points(row, 0) = delta * (static_cast<double>(a) - gamma(0) * n);
                law.points(row, 1) = delta * (static_cast<double>(t - a) - gamma(1) * n);
                law.prob(row) = v;
                ++row;
            }
        }
        return law;
    }

    // d >= 3: recursive multinomial spread with hash-map consolidation.
    std::unordered_map<std::uint64_t, double> mass;
    std::vector<int> count(d);
    std::function<void(int, long, double, int)> spread = [&](int i, long rem, double w,
                                                             int state_idx) {
        if (w < 1e-300) return;
        if (i == d - 1) {
            count[i] = static_cast<int>(rem);
            std::uint64_t k = 0;
            for (int j = 0; j < d; ++j)
                k = (k << 16) | static_cast<std::uint64_t>(S.z(state_idx, j) + count[j]);
            mass[k] += w;
            return;
        }
        // Conditional split: count_i ~ Binomial(rem, p_i / (p_i + ... + p_d)).
        double tail_p = 0.0;
        for (int j = i; j < d; ++j) tail_p += sp.pht.p(j);
        const double pc = tail_p > 0.0 ? sp.pht.p(i) / tail_p : 0.0;
        for (long c = 0; c <= rem; ++c) {
            count[i] = static_cast<int>(c);
            spread(i + 1, rem - c, w * stats::binomial_pmf(c, rem, pc), state_idx);
        }
    };
    for (int idx = 0; idx < S.size(); ++idx) {
        if (pi.prob(idx) == 0.0) continue;
        spread(0, S.ell(idx), pi.prob(idx), idx);
    }
    law.points.resize(mass.size(), d);
    law.prob.resize(mass.size());
    long row = 0;
    for (const auto& [k, v] : mass) {
        for (int j = 0; j < d; ++j) {
            const int c = static_cast<int>((k >> (16 * (d - 1 - j))) & 0xFFFF);
            law.points(row, j) = delta * (c - gamma(j) * n);
        }
        law.prob(row) = v;
        ++row;
    }
    return law;
}

MomentTable moments(const ScaledLaw& law, int m) {
    if (m < 1) throw invalid_input("moments: order must be >= 1");
    MomentTable table;
    table.max_order = m;
    table.pos_part.assign(m, 0.0);
    table.abs_moment.assign(m, 0.0);

    // Enumerate exponent multi-indices with total degree in [1, m].
    std::vector<std::vector<int>> indices;
    std::vector<int> cur(law.d, 0);
    std::function<void(int, int)> gen = [&](int pos, int remaining) {
        if (pos == law.d) {
            int deg = 0;
            for (int e : cur) deg += e;
            if (deg >= 1) indices.push_back(cur);
            return;
        }
        for (int e = 0; e <= remaining; ++e) {
            cur[pos] = e;
            gen(pos + 1, remaining - e);
        }
        cur[pos] = 0;
    };
    gen(0, m);
    std::vector<double> acc(indices.size(), 0.0);

    // Per-atom coordinate power tables keep the inner loop multiplication-only.
    Mat pow_table(law.d, m + 1);
    for (long a = 0; a < law.prob.size(); ++a) {
        const double w = law.prob(a);
        double sum = 0.0, norm2 = 0.0;
        for (int j = 0; j < law.d; ++j) {
            const double xj = law.points(a, j);
            sum += xj;
            norm2 += xj * xj;
            pow_table(j, 0) = 1.0;
            for (int e = 1; e <= m; ++e) pow_table(j, e) = pow_table(j, e - 1) * xj;
        }
        for (std::size_t t = 0; t < indices.size(); ++t) {
            double prod = 1.0;
            for (int j = 0; j < law.d; ++j) prod *= pow_table(j, indices[t][j]);
            acc[t] += w * prod;
        }
        const double sp = pos_part(sum);
        const double nrm = std::sqrt(norm2);
        double spk = 1.0, nk = 1.0;
        for (int k = 0; k < m; ++k) {
            spk *= sp;
            nk *= nrm;
            table.pos_part[k] += w * spk;
            table.abs_moment[k] += w * nk;
        }
    }
    for (std::size_t t = 0; t < indices.size(); ++t) table.mixed[indices[t]] = acc[t];
    return table;
}

double mean_under(const ScaledLaw& law, const std::function<double(const Vec&)>& h) {
    double acc = 0.0;
    Vec x(law.d);
    for (long a = 0; a < law.prob.size(); ++a) {
        for (int j = 0; j < law.d; ++j) x(j) = law.points(a, j);
        acc += law.prob(a) * h(x);
    }
    return acc;
}

}  // namespace steinq::ctmc
