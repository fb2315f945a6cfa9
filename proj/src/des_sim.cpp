#include "steinq/des_sim.hpp"

#include "steinq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <queue>
#include <random>
#include <unordered_map>

namespace steinq::sim {

namespace {

// Tie-break order at equal times: arrivals, then completions, then
// abandonments; snapshots are taken after all events at the snapshot time.
enum EvKind : int { kArrival = 0, kCompletion = 1, kAbandon = 2 };

struct Event {
    double t = 0.0;
    int kind = 0;
    long payload = 0;  // completion: phase index; abandonment: customer id
    std::uint64_t seq = 0;
};

struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
        if (a.t != b.t) return a.t > b.t;
        if (a.kind != b.kind) return a.kind > b.kind;
        return a.seq > b.seq;
    }
};

struct QueuedCustomer {
    int phase = 0;
    double enqueued_at = 0.0;
};

void add_exposure(HazardTable& tab, double age, bool did_abandon) {
    const double w = tab.bin_width;
    const int nb = static_cast<int>(tab.exposure.size());
    for (int k = 0; k < nb; ++k) {
        const double lo = k * w;
        if (age <= lo) break;
        tab.exposure[k] += std::min(w, age - lo);
    }
    if (did_abandon) {
        const int bin = static_cast<int>(age / w);
        if (bin < nb) tab.abandons[bin] += 1;
    }
}

RepResult run_one(const SystemParams& sp, const SimConfig& cfg, double warmup, long n_snapshots,
                  std::uint64_t rep_seed) {
    const int d = sp.pht.d;
    std::mt19937_64 rng_arrival(derive_seed(rep_seed, 0));
    std::mt19937_64 rng_phase(derive_seed(rep_seed, 1));
    std::mt19937_64 rng_service(derive_seed(rep_seed, 2));
    std::mt19937_64 rng_patience(derive_seed(rep_seed, 3));

    std::exponential_distribution<double> interarrival(sp.lambda);
    std::exponential_distribution<double> patience(sp.alpha > 0.0 ? sp.alpha : 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int last_pos_phase = 0;
    for (int i = 0; i < d; ++i)
        if (sp.pht.p(i) > 0.0) last_pos_phase = i;

    auto service_time = [&](int phase) {
        return std::exponential_distribution<double>(sp.pht.nu(phase))(rng_service);
    };
    auto initial_phase = [&]() {
        double u = unif(rng_phase);
        for (int i = 0; i < d; ++i) {
            u -= sp.pht.p(i);
            if (u < 0.0) return i;
        }
        return last_pos_phase;  // guard against roundoff at u ~ 1
    };

    RepResult rep;
    rep.z.resize(n_snapshots, d);
    rep.q.resize(n_snapshots, d);
    rep.ell.resize(n_snapshots);
    const int hazard_bins = 30;
    rep.hazard.bin_width = sp.alpha > 0.0 ? 0.1 / sp.alpha : 1.0;
    rep.hazard.exposure.assign(hazard_bins, 0.0);
    rep.hazard.abandons.assign(hazard_bins, 0);

    std::priority_queue<Event, std::vector<Event>, EventLater> heap;
    std::uint64_t seq = 0;
    auto schedule = [&](double t, int kind, long payload) {
        heap.push(Event{t, kind, payload, seq++});
    };

    VecI z = VecI::Zero(d), q = VecI::Zero(d);
    int busy = 0;
    std::deque<long> fifo;                           // FCFS order of queued ids
    std::unordered_map<long, QueuedCustomer> queued;  // id -> record (erased on exit)
    long next_id = 0;
    double t_now = 0.0;

    auto begin_service = [&](int phase) {  // caller keeps `busy` consistent
        z(phase) += 1;
        schedule(t_now + service_time(phase), kCompletion, phase);
    };

    schedule(interarrival(rng_arrival), kArrival, 0);

    for (long snap = 0; snap < n_snapshots; ++snap) {
        const double t_snap = warmup + (snap + 1) * cfg.sample_interval;
        while (!heap.empty() && heap.top().t <= t_snap) {
            const Event ev = heap.top();
            heap.pop();
            t_now = ev.t;
            switch (ev.kind) {
                case kArrival: {
                    rep.arrived += 1;
                    const int ph = initial_phase();
                    if (busy < sp.n) {
                        busy += 1;
                        begin_service(ph);
                    } else {
                        const long id = next_id++;
                        fifo.push_back(id);
                        queued.emplace(id, QueuedCustomer{ph, t_now});
                        q(ph) += 1;
                        if (sp.alpha > 0.0) schedule(t_now + patience(rng_patience), kAbandon, id);
                    }
                    schedule(t_now + interarrival(rng_arrival), kArrival, 0);
                    break;
                }
                case kCompletion: {
                    const int i = static_cast<int>(ev.payload);
                    z(i) -= 1;
                    double u = unif(rng_phase);
                    int next_phase = -1;
                    for (int j = 0; j < d; ++j) {
                        u -= sp.pht.P(i, j);
                        if (u < 0.0) {
                            next_phase = j;
                            break;
                        }
                    }
                    if (next_phase >= 0) {
                        begin_service(next_phase);  // same customer, same server
                        break;
                    }
                    rep.served += 1;
                    // Departure: the head-of-line customer (skipping ids whose
                    // abandonment already fired) takes the server.
                    bool handed_over = false;
                    while (!fifo.empty()) {
                        const long id = fifo.front();
                        fifo.pop_front();
                        auto it = queued.find(id);
                        if (it == queued.end()) continue;
                        const int k = it->second.phase;
                        add_exposure(rep.hazard, t_now - it->second.enqueued_at, false);
                        queued.erase(it);
                        q(k) -= 1;
                        begin_service(k);
                        handed_over = true;
                        break;
                    }
                    if (!handed_over) busy -= 1;
                    break;
                }
                case kAbandon: {
                    auto it = queued.find(ev.payload);
                    if (it == queued.end()) break;  // entered service first
                    const int k = it->second.phase;
                    add_exposure(rep.hazard, t_now - it->second.enqueued_at, true);
                    queued.erase(it);
                    q(k) -= 1;
                    rep.abandoned += 1;
                    break;
                }
            }
        }
        for (int i = 0; i < d; ++i) {
            rep.z(snap, i) = z(i);
            rep.q(snap, i) = q(i);
        }
        rep.ell(snap) = q.sum();
    }
    return rep;
}

}  // namespace

SimResult simulate(const SystemParams& sp, const SimConfig& cfg) {
    if (cfg.sample_interval <= 0.0 || cfg.horizon <= 0.0)
        throw invalid_input("simulate: horizon and sample_interval must be positive");
    if (cfg.replications < 1) throw invalid_input("simulate: need at least one replication");
    const long n_snapshots = std::max(1L, std::lround(cfg.horizon / cfg.sample_interval));
    const double min_rate = sp.alpha > 0.0 ? std::min(sp.dp.mu, sp.alpha) : sp.dp.mu;
    const double warmup = cfg.warmup >= 0.0 ? cfg.warmup : std::max(100.0, 20.0 / min_rate);

    SimResult res;
    res.params = sp;
    res.config = cfg;
    res.config.warmup = warmup;  // report the resolved value
    res.reps.reserve(cfg.replications);
    for (int r = 0; r < cfg.replications; ++r)
        res.reps.push_back(run_one(sp, cfg, warmup, n_snapshots, derive_seed(cfg.seed, r)));
    return res;
}

Vec scaled_snapshot(const SystemParams& sp, const RepResult& rep, long row) {
    const int d = static_cast<int>(rep.z.cols());
    Vec x(d);
    for (int i = 0; i < d; ++i)
        x(i) = sp.delta *
               (static_cast<double>(rep.z(row, i) + rep.q(row, i)) - sp.dp.gamma(i) * sp.n);
    return x;
}

std::vector<double> rep_means(const SimResult& res, const std::function<double(const Vec&)>& h) {
    const int d = res.params.pht.d;
    std::vector<double> out;
    out.reserve(res.reps.size());
    Vec x(d);
    for (const RepResult& rep : res.reps) {
        double acc = 0.0;
        for (long row = 0; row < rep.ell.size(); ++row) {
            for (int i = 0; i < d; ++i)
                x(i) = res.params.delta * (static_cast<double>(rep.z(row, i) + rep.q(row, i)) -
                                           res.params.dp.gamma(i) * res.params.n);
            acc += h(x);
        }
        out.push_back(acc / static_cast<double>(rep.ell.size()));
    }
    return out;
}

SscReport ssc_conditional(const SimResult& res, long min_count) {
    const SystemParams& sp = res.params;
    const int d = sp.pht.d;
    const double p1 = sp.pht.p(0);
    SscReport rep;

    // Histogram of q_1 by queue length, pooled over replications; per-rep
    // componentwise means of w = delta q - p (e^T x)^+ = delta (q - p ell).
    std::map<long, std::vector<long>> hist;
    std::vector<std::vector<double>> w_rep_means(d);
    std::vector<double> all_dev, all_z1;
    for (const RepResult& r : res.reps) {
        Vec acc = Vec::Zero(d);
        for (long row = 0; row < r.ell.size(); ++row) {
            const long ell = r.ell(row);
            const long q1 = r.q(row, 0);
            for (int i = 0; i < d; ++i)
                acc(i) += sp.delta * (static_cast<double>(r.q(row, i)) -
                                      sp.pht.p(i) * static_cast<double>(ell));
            if (ell > 0) {
                auto& h = hist[ell];
                if (h.empty()) h.assign(ell + 1, 0);
                h[q1] += 1;
                all_dev.push_back(static_cast<double>(q1) - p1 * static_cast<double>(ell));
                all_z1.push_back(static_cast<double>(r.z(row, 0)));
            }
        }
        for (int i = 0; i < d; ++i)
            w_rep_means[i].push_back(acc(i) / static_cast<double>(r.ell.size()));
    }
    rep.mean_w.resize(d);
    rep.mean_w_se.resize(d);
    rep.mean_w_z.resize(d);
    for (int i = 0; i < d; ++i) {
        const auto ms = stats::mean_se(w_rep_means[i]);
        rep.mean_w(i) = ms.mean;
        rep.mean_w_se(i) = ms.se;
        rep.mean_w_z(i) = ms.se > 0.0 ? ms.mean / ms.se : (ms.mean == 0.0 ? 0.0 : 1e9);
    }
    rep.corr_q1_z1 = all_dev.size() > 2 ? stats::correlation(all_dev, all_z1) : 0.0;

    for (const auto& [ell, counts] : hist) {
        long total = 0;
        for (long c : counts) total += c;
        if (total < min_count) continue;
        std::vector<double> observed(counts.size()), expected(counts.size());
        for (std::size_t k = 0; k < counts.size(); ++k) {
            observed[k] = static_cast<double>(counts[k]);
            expected[k] =
                static_cast<double>(total) * stats::binomial_pmf(static_cast<long>(k), ell, p1);
        }
        const auto gof = stats::chi_square_gof(observed, expected, 5.0, 0);
        SscReport::Cell cell;
        cell.ell = ell;
        cell.count = total;
        cell.chi2 = gof.stat;
        cell.dof = gof.dof;
        cell.p_value = gof.p_value;
        rep.cells.push_back(cell);
    }
    return rep;
}

HazardCheck hazard_exponentiality(const SimResult& res, int max_bins) {
    HazardCheck out;
    if (res.reps.empty()) return out;
    const double w = res.reps[0].hazard.bin_width;
    const int nb =
        std::min<int>(max_bins, static_cast<int>(res.reps[0].hazard.exposure.size()));
    const double alpha = res.params.alpha;
    for (int k = 0; k < nb; ++k) {
        HazardCheck::Bin bin;
        bin.age_lo = k * w;
        bin.age_hi = (k + 1) * w;
        for (const RepResult& r : res.reps) {
            bin.exposure += r.hazard.exposure[k];
            bin.abandons += r.hazard.abandons[k];
        }
        const double expected = alpha * bin.exposure;
        bin.zscore = expected > 0.0
                         ? (static_cast<double>(bin.abandons) - expected) / std::sqrt(expected)
                         : 0.0;
        out.max_abs_z = std::max(out.max_abs_z, std::abs(bin.zscore));
        out.bins.push_back(bin);
    }
    return out;
}

MomentComparison compare_to_ctmc(const SimResult& res, const ctmc::ScaledLaw& law) {
    const int d = res.params.pht.d;
    MomentComparison cmp;
    std::vector<std::pair<std::string, std::function<double(const Vec&)>>> family;
    for (int i = 0; i < d; ++i) {
        family.emplace_back("x" + std::to_string(i + 1),
                            [i](const Vec& x) { return x(i); });
        family.emplace_back("x" + std::to_string(i + 1) + "^2",
                            [i](const Vec& x) { return x(i) * x(i); });
    }
    family.emplace_back("(e.x)+", [](const Vec& x) { return pos_part(x.sum()); });
    family.emplace_back("((e.x)+)^2", [](const Vec& x) {
        const double s = pos_part(x.sum());
        return s * s;
    });

    // A single replication gets a batch-means standard error from its snapshot
    // series; several replications use the spread of per-replication means.
    const bool single = res.reps.size() == 1;
    for (const auto& [name, h] : family) {
        stats::MeanSe ms;
        if (single) {
            const RepResult& rep = res.reps[0];
            std::vector<double> series;
            series.reserve(rep.ell.size());
            for (long row = 0; row < rep.ell.size(); ++row)
                series.push_back(h(scaled_snapshot(res.params, rep, row)));
            ms = stats::batch_means(series, 30);
        } else {
            ms = stats::mean_se(rep_means(res, h));
        }
        MomentComparison::Row row;
        row.name = name;
        row.sim_mean = ms.mean;
        row.sim_se = ms.se;
        row.exact = ctmc::mean_under(law, h);
        row.zscore = ms.se > 0.0 ? (ms.mean - row.exact) / ms.se
                                 : (ms.mean == row.exact ? 0.0 : 1e9);
        cmp.max_abs_z = std::max(cmp.max_abs_z, std::abs(row.zscore));
        cmp.rows.push_back(row);
    }
    return cmp;
}

}  // namespace steinq::sim
