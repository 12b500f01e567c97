#pragma once

#include <cstdint>
#include <vector>

#include "sbridge/bridge.hpp"
#include "sbridge/chain.hpp"
#include "sbridge/rng.hpp"

// Exact enumeration over X^{T+1}: dense path tables, relative-entropy
// decompositions, brute-force optimality sweeps and desk-scale Monte Carlo.

namespace sbridge {

inline constexpr double kPathSizeGuard = 1e7;

// Dense joint distribution over X^{T+1}; path index i_0 most significant.
struct PathTable {
    int T = 0;
    int n = 0;
    std::vector<double> w;

    std::size_t size() const { return w.size(); }

    std::size_t index(const std::vector<int>& path) const {
        std::size_t idx = 0;
        for (int s : path) idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(s);
        return idx;
    }

    std::vector<int> decode(std::size_t idx) const {
        std::vector<int> path(T + 1);
        for (int t = T; t >= 0; --t) {
            path[t] = static_cast<int>(idx % static_cast<std::size_t>(n));
            idx /= static_cast<std::size_t>(n);
        }
        return path;
    }

    double total_mass() const {
        double s = 0.0;
        for (double x : w) s += x;
        return s;
    }

    Vector marginal(int t) const {
        Vector m = Vector::Zero(n);
        for (std::size_t idx = 0; idx < w.size(); ++idx) {
            if (w[idx] == 0.0) continue;
            std::size_t div = 1;
            for (int s = T; s > t; --s) div *= static_cast<std::size_t>(n);
            m(static_cast<int>((idx / div) % static_cast<std::size_t>(n))) += w[idx];
        }
        return m;
    }

    // joint law of (X(t), X(t+1))
    Matrix pair_marginal(int t) const {
        Matrix m = Matrix::Zero(n, n);
        std::size_t div_next = 1;
        for (int s = T; s > t + 1; --s) div_next *= static_cast<std::size_t>(n);
        const std::size_t div = div_next * static_cast<std::size_t>(n);
        for (std::size_t idx = 0; idx < w.size(); ++idx) {
            if (w[idx] == 0.0) continue;
            int i = static_cast<int>((idx / div) % static_cast<std::size_t>(n));
            int j = static_cast<int>((idx / div_next) % static_cast<std::size_t>(n));
            m(i, j) += w[idx];
        }
        return m;
    }
};

namespace detail {

inline void check_path_size(int n, int T) {
    double size = 1.0;
    for (int t = 0; t <= T; ++t) size *= n;
    if (size > kPathSizeGuard) throw SizeError("path table exceeds size guard");
}

}  // namespace detail

// weight(i_0..i_T) = p0_{i_0} * prod_t p_{i_t i_{t+1}}(t)
inline PathTable enumerate_path_distribution(const ChainModel& chain) {
    chain.validate();
    const int T = chain.horizon();
    const int n = chain.num_states();
    detail::check_path_size(n, T);
    PathTable table;
    table.T = T;
    table.n = n;
    std::size_t total = 1;
    for (int t = 0; t <= T; ++t) total *= static_cast<std::size_t>(n);
    table.w.assign(total, 0.0);
    std::vector<int> path(T + 1);
    auto recurse = [&](auto&& self, int t, double weight) -> void {
        if (weight == 0.0) return;
        if (t == T) {
            table.w[table.index(path)] = weight;
            return;
        }
        for (int j = 0; j < n; ++j) {
            path[t + 1] = j;
            self(self, t + 1, weight * chain.transitions[t](path[t], j));
        }
    };
    for (int i = 0; i < n; ++i) {
        path[0] = i;
        recurse(recurse, 0, chain.initial(i));
    }
    return table;
}

// backward factorization: q(0)_{i_1 i_0} ... q(T-1)_{i_T i_{T-1}} * p_{i_T}(T)
inline PathTable enumerate_path_distribution_backward(const ChainModel& chain) {
    chain.validate();
    const int T = chain.horizon();
    const int n = chain.num_states();
    detail::check_path_size(n, T);
    const auto marginals = propagate_forward(chain);
    const auto kernels = reverse_kernels(chain);
    PathTable table;
    table.T = T;
    table.n = n;
    std::size_t total = 1;
    for (int t = 0; t <= T; ++t) total *= static_cast<std::size_t>(n);
    table.w.assign(total, 0.0);
    std::vector<int> path(T + 1);
    auto recurse = [&](auto&& self, int t, double weight) -> void {
        if (weight == 0.0) return;
        if (t == 0) {
            table.w[table.index(path)] = weight;
            return;
        }
        for (int i = 0; i < n; ++i) {
            path[t - 1] = i;
            // arbitrary rows only multiply a zero weight, any value is consistent
            self(self, t - 1, weight * kernels[t - 1].rows(path[t], i));
        }
    };
    for (int j = 0; j < n; ++j) {
        path[T] = j;
        recurse(recurse, T, marginals[T](j));
    }
    return table;
}

inline double path_relative_entropy(const PathTable& P, const PathTable& Q) {
    if (P.T != Q.T || P.n != Q.n)
        throw ModelError("path_relative_entropy: dimension mismatch");
    double d = 0.0;
    for (std::size_t idx = 0; idx < P.w.size(); ++idx) {
        if (P.w[idx] == 0.0) continue;
        if (Q.w[idx] <= 0.0) return kInf;
        d += P.w[idx] * std::log(P.w[idx] / Q.w[idx]);
    }
    return d < 0.0 ? 0.0 : d;
}

struct EntropyDecomposition {
    std::vector<double> transition_terms;  // one per step k
    double marginal_term = 0.0;            // endpoint (backward) / initial (forward)
    double total = 0.0;
    bool support_ok = true;
};

// Backward decomposition: sum_k sum_{i_k} D(q||q^pi) p_{i_k}(k) + D(p1||pi(T)).
inline EntropyDecomposition decompose_backward(const PathTable& P, const PathTable& Q) {
    if (P.T != Q.T || P.n != Q.n) throw ModelError("decompose_backward: dimension mismatch");
    EntropyDecomposition dec;
    const double direct = path_relative_entropy(P, Q);
    if (direct == kInf) {
        dec.support_ok = false;
        dec.total = kInf;
        return dec;
    }
    for (int k = 1; k <= P.T; ++k) {
        const Matrix jp = P.pair_marginal(k - 1);  // (i_{k-1}, i_k)
        const Matrix jq = Q.pair_marginal(k - 1);
        const Vector pk = P.marginal(k);
        const Vector qk = Q.marginal(k);
        double term = 0.0;
        for (int j = 0; j < P.n; ++j) {
            if (pk(j) == 0.0) continue;
            // reverse rows q_{j.}: joint / time-k marginal
            Vector pr = jp.col(j) / pk(j);
            Vector qr = jq.col(j) / qk(j);
            term += relative_entropy(pr, qr) * pk(j);
        }
        dec.transition_terms.push_back(term);
        dec.total += term;
    }
    dec.marginal_term = relative_entropy(P.marginal(P.T), Q.marginal(Q.T));
    dec.total += dec.marginal_term;
    return dec;
}

// Forward decomposition: D(p0||pi(0)) + sum_k sum_{i_k} D(p_{i_k.}||pi_{i_k.}) p_{i_k}(k).
inline EntropyDecomposition decompose_forward(const PathTable& P, const PathTable& Q) {
    if (P.T != Q.T || P.n != Q.n) throw ModelError("decompose_forward: dimension mismatch");
    EntropyDecomposition dec;
    const double direct = path_relative_entropy(P, Q);
    if (direct == kInf) {
        dec.support_ok = false;
        dec.total = kInf;
        return dec;
    }
    dec.marginal_term = relative_entropy(P.marginal(0), Q.marginal(0));
    dec.total = dec.marginal_term;
    for (int k = 0; k < P.T; ++k) {
        const Matrix jp = P.pair_marginal(k);
        const Matrix jq = Q.pair_marginal(k);
        const Vector pk = P.marginal(k);
        const Vector qk = Q.marginal(k);
        double term = 0.0;
        for (int i = 0; i < P.n; ++i) {
            if (pk(i) == 0.0) continue;
            Vector pr = jp.row(i).transpose() / pk(i);
            Vector qr = jq.row(i).transpose() / qk(i);
            term += relative_entropy(pr, qr) * pk(i);
        }
        dec.transition_terms.push_back(term);
        dec.total += term;
    }
    return dec;
}

struct OptimalityReport {
    int trials = 0;
    int violations = 0;
    double min_gap = kInf;       // min over trials of D(competitor) - D(candidate)
    double candidate_cost = 0.0;
};

namespace detail {

// random stochastic row supported where mask_row > 0
inline Vector random_row(Rng& rng, const Vector& mask_row) {
    Vector r = Vector::Zero(mask_row.size());
    double s = 0.0;
    for (Eigen::Index j = 0; j < mask_row.size(); ++j)
        if (mask_row(j) > 0.0) {
            r(j) = 0.05 + rng.uniform();
            s += r(j);
        }
    r /= s;
    return r;
}

}  // namespace detail

// MEP1 sweep: random reverse kernels with fixed final marginal p1.
inline OptimalityReport verify_mep1_optimality(const ChainModel& prior, const Vector& p1,
                                               const BridgeSolution& candidate, int trials,
                                               std::uint64_t seed) {
    const PathTable prior_table = enumerate_path_distribution(prior);
    const PathTable cand_table = enumerate_path_distribution(candidate.chain);
    const double cost = path_relative_entropy(cand_table, prior_table);
    const auto prior_kernels = reverse_kernels(prior);
    const int T = prior.horizon();
    const int n = prior.num_states();

    Rng rng(seed);
    OptimalityReport rep;
    rep.trials = trials;
    rep.candidate_cost = cost;
    std::vector<int> path(T + 1);
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<Matrix> q(T);
        for (int t = 0; t < T; ++t) {
            q[t].resize(n, n);
            for (int j = 0; j < n; ++j)
                q[t].row(j) = detail::random_row(rng, prior_kernels[t].rows.row(j)).transpose();
        }
        PathTable comp;
        comp.T = T;
        comp.n = n;
        comp.w.assign(prior_table.w.size(), 0.0);
        auto recurse = [&](auto&& self, int t, double weight) -> void {
            if (weight == 0.0) return;
            if (t == 0) {
                comp.w[comp.index(path)] = weight;
                return;
            }
            for (int i = 0; i < n; ++i) {
                path[t - 1] = i;
                self(self, t - 1, weight * q[t - 1](path[t], i));
            }
        };
        for (int j = 0; j < n; ++j) {
            path[T] = j;
            recurse(recurse, T, p1(j));
        }
        const double gap = path_relative_entropy(comp, prior_table) - cost;
        rep.min_gap = std::min(rep.min_gap, gap);
        if (gap < -1e-10) ++rep.violations;
    }
    return rep;
}

// MEP2 sweep: random forward kernels with fixed initial marginal p0.
inline OptimalityReport verify_mep2_optimality(const ChainModel& prior, const Vector& p0,
                                               const BridgeSolution& candidate, int trials,
                                               std::uint64_t seed) {
    const PathTable prior_table = enumerate_path_distribution(prior);
    const PathTable cand_table = enumerate_path_distribution(candidate.chain);
    const double cost = path_relative_entropy(cand_table, prior_table);
    const int T = prior.horizon();
    const int n = prior.num_states();

    Rng rng(seed);
    OptimalityReport rep;
    rep.trials = trials;
    rep.candidate_cost = cost;
    for (int trial = 0; trial < trials; ++trial) {
        ChainModel comp;
        comp.initial = p0;
        for (int t = 0; t < T; ++t) {
            Matrix P(n, n);
            for (int i = 0; i < n; ++i)
                P.row(i) = detail::random_row(rng, prior.transitions[t].row(i)).transpose();
            comp.transitions.push_back(P);
        }
        const double gap =
            path_relative_entropy(enumerate_path_distribution(comp), prior_table) - cost;
        rep.min_gap = std::min(rep.min_gap, gap);
        if (gap < -1e-10) ++rep.violations;
    }
    return rep;
}

// MEP3 sweep: multiplicative perturbations of the candidate transitions,
// endpoint-corrected back to (p0, p1) by re-solving the scaling problem.
inline OptimalityReport verify_mep3_optimality(const ChainModel& prior, const Vector& p0,
                                               const Vector& p1, const BridgeSolution& candidate,
                                               int trials, std::uint64_t seed,
                                               const SolverConfig& cfg = {}) {
    const PathTable prior_table = enumerate_path_distribution(prior);
    const PathTable cand_table = enumerate_path_distribution(candidate.chain);
    const double cost = path_relative_entropy(cand_table, prior_table);
    const int T = prior.horizon();
    const int n = prior.num_states();

    Rng rng(seed);
    OptimalityReport rep;
    rep.trials = trials;
    rep.candidate_cost = cost;
    for (int trial = 0; trial < trials; ++trial) {
        ChainModel perturbed;
        perturbed.initial = candidate.chain.initial;
        for (int t = 0; t < T; ++t) {
            Matrix P(n, n);
            for (int i = 0; i < n; ++i) {
                Vector row = candidate.chain.transitions[t].row(i).transpose();
                for (int j = 0; j < n; ++j)
                    if (row(j) > 0.0) row(j) *= std::exp(rng.uniform(-0.5, 0.5));
                P.row(i) = (row / row.sum()).transpose();
            }
            perturbed.transitions.push_back(P);
        }
        const BridgeSolution comp = mep3_bridge(perturbed, p0, p1, cfg);
        const double gap =
            path_relative_entropy(enumerate_path_distribution(comp.chain), prior_table) - cost;
        rep.min_gap = std::min(rep.min_gap, gap);
        if (gap < -1e-10) ++rep.violations;
    }
    return rep;
}

struct SampleBatch {
    int n = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<int>> paths;
};

// n i.i.d. trajectories plus the empirical path table.
inline SampleBatch sample_paths(const ChainModel& chain, int n, std::uint64_t seed,
                                PathTable* empirical = nullptr) {
    chain.validate();
    if (n < 1) throw ModelError("sample_paths: n must be >= 1");
    const int T = chain.horizon();
    SampleBatch batch;
    batch.n = n;
    batch.seed = seed;
    batch.paths.reserve(n);
    if (empirical) {
        detail::check_path_size(chain.num_states(), T);
        empirical->T = T;
        empirical->n = chain.num_states();
        std::size_t total = 1;
        for (int t = 0; t <= T; ++t) total *= static_cast<std::size_t>(chain.num_states());
        empirical->w.assign(total, 0.0);
    }
    Rng rng(seed);
    for (int r = 0; r < n; ++r) {
        std::vector<int> path(T + 1);
        path[0] = rng.sample_index(chain.initial);
        for (int t = 0; t < T; ++t)
            path[t + 1] = rng.sample_index(chain.transitions[t].row(path[t]).transpose());
        if (empirical) empirical->w[empirical->index(path)] += 1.0 / n;
        batch.paths.push_back(std::move(path));
    }
    return batch;
}

inline double total_variation(const Vector& p, const Vector& q) {
    return 0.5 * (p - q).cwiseAbs().sum();
}

struct SanovCell {
    int n = 0;
    long hits = 0;
    long replicates = 0;
    bool censored = false;  // no hits observed
    double empirical_rate = 0.0;  // -(1/n) log frequency
};

struct SanovDemo {
    double exponent = 0.0;  // computed large-deviation exponent
    std::vector<SanovCell> cells;
};

// Empirical decay rate of P(endpoint empirical marginal within TV radius
// delta of the target) along an n grid. Demonstrative output only.
inline SanovDemo sanov_demo(const ChainModel& chain, const Vector& target_marginal, double delta,
                            const std::vector<int>& n_grid, long replicates,
                            std::uint64_t seed) {
    chain.validate();
    const int T = chain.horizon();
    const int ns = chain.num_states();
    SanovDemo demo;
    demo.exponent = ld_exponent_mep1(chain, target_marginal);
    Rng root(seed);
    std::uint64_t rep_counter = 0;
    for (int n : n_grid) {
        SanovCell cell;
        cell.n = n;
        cell.replicates = replicates;
        for (long r = 0; r < replicates; ++r) {
            Rng rng = root.spawn(rep_counter++);
            Vector counts = Vector::Zero(ns);
            for (int s = 0; s < n; ++s) {
                int state = rng.sample_index(chain.initial);
                for (int t = 0; t < T; ++t)
                    state = rng.sample_index(chain.transitions[t].row(state).transpose());
                counts(state) += 1.0;
            }
            if (total_variation(counts / n, target_marginal) <= delta) ++cell.hits;
        }
        if (cell.hits == 0) {
            cell.censored = true;
        } else {
            cell.empirical_rate =
                -std::log(static_cast<double>(cell.hits) / static_cast<double>(replicates)) / n;
        }
        demo.cells.push_back(cell);
    }
    return demo;
}

}  // namespace sbridge
