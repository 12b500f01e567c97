#pragma once

#include <cstdint>
#include <vector>

#include "sbridge/path_oracle.hpp"
#include "sbridge/quantum.hpp"
#include "sbridge/reversal.hpp"

// Quantum path spaces: joint path weights, path-conditioned states, the
// backward weight representation and the QMEP1/QMEP2 solutions.

namespace sbridge {

// Initial state, TPCP step maps and per-time projector families.
struct QuantumPathModel {
    DensityMatrix sigma0;
    std::vector<KrausMap> maps;          // length T
    std::vector<Observable> observables;  // length T+1

    int horizon() const { return static_cast<int>(maps.size()); }
    int dim() const { return sigma0.dim(); }

    void validate(double tol = kPsdTol) const {
        sigma0.validate();
        if (maps.empty()) throw ModelError("qpath: horizon must be >= 1");
        if (observables.size() != maps.size() + 1)
            throw ModelError("qpath: need T+1 observables");
        const Eigen::Index n = sigma0.matrix.rows();
        for (const KrausMap& E : maps) {
            if (E.operators.empty() || E.dim() != n)
                throw ModelError("qpath: Kraus map dimension mismatch");
        }
        for (const Observable& X : observables) {
            CMatrix sum = CMatrix::Zero(n, n);
            for (const CMatrix& proj : X.projectors) sum += proj;
            if ((sum - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff() > tol)
                throw ModelError("qpath: projector family not complete");
        }
    }
};

// Dense joint distribution over index tuples (i_0..i_T), mixed radix with
// i_0 most significant.
struct WeightTable {
    std::vector<int> dims;  // m_0..m_T
    std::vector<double> w;

    std::size_t index(const std::vector<int>& path) const {
        std::size_t idx = 0;
        for (std::size_t t = 0; t < path.size(); ++t)
            idx = idx * static_cast<std::size_t>(dims[t]) + static_cast<std::size_t>(path[t]);
        return idx;
    }

    double total_mass() const {
        double s = 0.0;
        for (double x : w) s += x;
        return s;
    }

    Vector marginal(int t) const {
        Vector m = Vector::Zero(dims[t]);
        std::size_t div = 1;
        for (std::size_t s = dims.size() - 1; s > static_cast<std::size_t>(t); --s)
            div *= static_cast<std::size_t>(dims[s]);
        for (std::size_t idx = 0; idx < w.size(); ++idx)
            m(static_cast<int>((idx / div) % static_cast<std::size_t>(dims[t]))) += w[idx];
        return m;
    }
};

namespace detail {

inline std::size_t weight_table_size(const std::vector<int>& dims) {
    double guard = 1.0;
    std::size_t total = 1;
    for (int m : dims) {
        guard *= m;
        total *= static_cast<std::size_t>(m);
    }
    if (guard > kPathSizeGuard) throw SizeError("weight table exceeds size guard");
    return total;
}

inline std::vector<int> observable_dims(const QuantumPathModel& model) {
    std::vector<int> dims;
    for (const Observable& X : model.observables) dims.push_back(X.outcomes());
    return dims;
}

}  // namespace detail

// w(i_0..i_T) = trace(Pi_{i_T} E_{T-1}(... E_0(Pi_{i_0} sigma0 Pi_{i_0}) ...) Pi_{i_T})
inline WeightTable path_weights(const QuantumPathModel& model) {
    model.validate();
    WeightTable table;
    table.dims = detail::observable_dims(model);
    table.w.assign(detail::weight_table_size(table.dims), 0.0);
    const int T = model.horizon();
    std::vector<int> path(T + 1);
    auto recurse = [&](auto&& self, int t, const CMatrix& state) -> void {
        if (t == T) {
            double weight = state.trace().real();
            table.w[table.index(path)] = weight < 0.0 ? 0.0 : weight;
            return;
        }
        const CMatrix next = apply_schrodinger(model.maps[t], state);
        for (int i = 0; i < table.dims[t + 1]; ++i) {
            path[t + 1] = i;
            const CMatrix& proj = model.observables[t + 1].projectors[i];
            self(self, t + 1, proj * next * proj);
        }
    };
    for (int i = 0; i < table.dims[0]; ++i) {
        path[0] = i;
        const CMatrix& proj = model.observables[0].projectors[i];
        recurse(recurse, 0, proj * model.sigma0.matrix * proj);
    }
    return table;
}

// sigma-hat_0 = sum Pi sigma0 Pi;  sigma-hat_{t+1} = sum Pi E_t(sigma-hat_t) Pi.
struct ConditionedTrajectory {
    std::vector<DensityMatrix> states;  // sigma-hat_0..T
    std::vector<KrausMap> hat_maps;     // Kraus {Pi_i(t+1) M_k(t)}, TPCP
};

inline ConditionedTrajectory conditioned_trajectory(const QuantumPathModel& model) {
    model.validate();
    ConditionedTrajectory traj;
    traj.states.push_back(nonselective_measure(model.sigma0, model.observables[0]));
    for (int t = 0; t < model.horizon(); ++t) {
        KrausMap hat;
        for (const CMatrix& proj : model.observables[t + 1].projectors)
            for (const CMatrix& M : model.maps[t].operators)
                hat.operators.push_back(proj * M);
        traj.states.push_back({apply_schrodinger(hat, traj.states.back().matrix)});
        traj.hat_maps.push_back(std::move(hat));
    }
    return traj;
}

// Backward evaluation through the reversals of the conditioned maps; equals
// path_weights entrywise.
inline WeightTable backward_weights(const QuantumPathModel& model) {
    const ConditionedTrajectory traj = conditioned_trajectory(model);
    WeightTable table;
    table.dims = detail::observable_dims(model);
    table.w.assign(detail::weight_table_size(table.dims), 0.0);
    const int T = model.horizon();

    std::vector<KrausMap> reversals;
    for (int t = 0; t < T; ++t)
        reversals.push_back(t_rho(traj.hat_maps[t], traj.states[t]));

    std::vector<int> path(T + 1);
    auto recurse = [&](auto&& self, int t, const CMatrix& state) -> void {
        if (t == 0) {
            double weight = state.trace().real();
            table.w[table.index(path)] = weight < 0.0 ? 0.0 : weight;
            return;
        }
        const CMatrix prev = apply_schrodinger(reversals[t - 1], state);
        for (int i = 0; i < table.dims[t - 1]; ++i) {
            path[t - 1] = i;
            const CMatrix& proj = model.observables[t - 1].projectors[i];
            self(self, t - 1, proj * prev * proj);
        }
    };
    for (int i = 0; i < table.dims[T]; ++i) {
        path[T] = i;
        const CMatrix& proj = model.observables[T].projectors[i];
        recurse(recurse, T, proj * traj.states[T].matrix * proj);
    }
    return table;
}

inline double qpath_relative_entropy(const WeightTable& W1, const WeightTable& W2) {
    if (W1.dims != W2.dims) throw ModelError("qpath_relative_entropy: dimension mismatch");
    double d = 0.0;
    for (std::size_t idx = 0; idx < W1.w.size(); ++idx) {
        if (W1.w[idx] == 0.0) continue;
        if (W2.w[idx] <= 0.0) return kInf;
        d += W1.w[idx] * std::log(W1.w[idx] / W2.w[idx]);
    }
    return d < 0.0 ? 0.0 : d;
}

struct QPathDecomposition {
    double conditional_term = 0.0;
    double marginal_term = 0.0;
    double total = 0.0;
    bool support_ok = true;
};

// Conditioning on the final index: D(W1||W2) = conditional + D(final marginals).
inline QPathDecomposition decompose_qback(const WeightTable& W1, const WeightTable& W2) {
    if (W1.dims != W2.dims) throw ModelError("decompose_qback: dimension mismatch");
    QPathDecomposition dec;
    const double total = qpath_relative_entropy(W1, W2);
    if (total == kInf) {
        dec.support_ok = false;
        dec.total = kInf;
        return dec;
    }
    const int last = static_cast<int>(W1.dims.size()) - 1;
    const Vector m1 = W1.marginal(last);
    const Vector m2 = W2.marginal(last);
    dec.marginal_term = relative_entropy(m1, m2);
    const std::size_t mT = static_cast<std::size_t>(W1.dims[last]);
    for (std::size_t idx = 0; idx < W1.w.size(); ++idx) {
        if (W1.w[idx] == 0.0) continue;
        const int iT = static_cast<int>(idx % mT);
        // conditional ratio: (w1/m1) / (w2/m2)
        dec.conditional_term +=
            W1.w[idx] * std::log((W1.w[idx] / m1(iT)) / (W2.w[idx] / m2(iT)));
    }
    if (dec.conditional_term < 0.0 && dec.conditional_term > -1e-13)
        dec.conditional_term = 0.0;
    dec.total = dec.conditional_term + dec.marginal_term;
    return dec;
}

// Conditioning on the initial index.
inline QPathDecomposition decompose_qforward(const WeightTable& W1, const WeightTable& W2) {
    if (W1.dims != W2.dims) throw ModelError("decompose_qforward: dimension mismatch");
    QPathDecomposition dec;
    const double total = qpath_relative_entropy(W1, W2);
    if (total == kInf) {
        dec.support_ok = false;
        dec.total = kInf;
        return dec;
    }
    const Vector m1 = W1.marginal(0);
    const Vector m2 = W2.marginal(0);
    dec.marginal_term = relative_entropy(m1, m2);
    std::size_t block = 1;
    for (std::size_t t = 1; t < W1.dims.size(); ++t)
        block *= static_cast<std::size_t>(W1.dims[t]);
    for (std::size_t idx = 0; idx < W1.w.size(); ++idx) {
        if (W1.w[idx] == 0.0) continue;
        const int i0 = static_cast<int>(idx / block);
        dec.conditional_term +=
            W1.w[idx] * std::log((W1.w[idx] / m1(i0)) / (W2.w[idx] / m2(i0)));
    }
    if (dec.conditional_term < 0.0 && dec.conditional_term > -1e-13)
        dec.conditional_term = 0.0;
    dec.total = dec.conditional_term + dec.marginal_term;
    return dec;
}

struct QMep1Solution {
    QuantumPathModel model;               // solution process (maps augmented to TPCP)
    double cost = 0.0;                    // D(rho_bar_T || sigma-hat_T)
    std::vector<DensityMatrix> rho_hat;   // back-propagated constrained marginals
    ConditionedTrajectory prior_conditioned;
    std::vector<CMatrix> harmonic;        // Y_t = sigma-hat_t^{-1/2} rho-hat_t ...
    HarmonicResiduals harmonic_check;
    bool final_observable_replaced = false;
};

// Final conditioned state fixed: keep the prior's path-conditioned
// reverse-time mechanism and derive the forward operators
// F_{j,k}(t) = N_{t+1} (Pi_j(t+1) M_k(t)) N_t^+,  N_t = rho-hat_t^{1/2} sigma-hat_t^{-1/2}.
inline QMep1Solution qmep1_solve(const QuantumPathModel& prior, const DensityMatrix& rho_bar_T,
                                 double tol = kPsdTol) {
    prior.validate();
    rho_bar_T.validate();
    QMep1Solution sol;

    QuantumPathModel model = prior;
    const Observable& XT = model.observables.back();
    bool rank_one = true;
    for (const CMatrix& proj : XT.projectors)
        if (std::abs(proj.trace().real() - 1.0) > tol) rank_one = false;
    const bool commutes =
        (XT.matrix * rho_bar_T.matrix - rho_bar_T.matrix * XT.matrix).cwiseAbs().maxCoeff() <=
        1e-10;
    if (!rank_one || !commutes) {
        model.observables.back() = spectral_decompose_rank_one(rho_bar_T.matrix);
        sol.final_observable_replaced = true;
    }

    sol.prior_conditioned = conditioned_trajectory(model);
    const auto& sigma_hat = sol.prior_conditioned.states;
    const int T = model.horizon();

    // feasibility: supp(rho_bar_T) within supp(sigma-hat_T)
    sol.cost = quantum_relative_entropy(rho_bar_T, sigma_hat[T]);
    if (sol.cost == kInf)
        throw InfeasibleError("qmep1: supp(rho_bar_T) not contained in supp(sigma-hat_T)");

    // back-propagate through the prior's conditioned reversals
    sol.rho_hat.assign(T + 1, DensityMatrix{});
    sol.rho_hat[T] = rho_bar_T;
    for (int t = T - 1; t >= 0; --t) {
        const KrausMap rev = t_rho(sol.prior_conditioned.hat_maps[t], sigma_hat[t]);
        CMatrix back = apply_schrodinger(rev, sol.rho_hat[t + 1].matrix);
        back = 0.5 * (back + back.adjoint());
        sol.rho_hat[t] = DensityMatrix{back / back.trace().real()};
    }

    // forward operators via the symmetrized multiplicative transformation
    sol.model = model;
    sol.model.sigma0 = sol.rho_hat[0];
    sol.model.maps.clear();
    for (int t = 0; t < T; ++t) {
        const CMatrix Nn = psd_sqrt(sol.rho_hat[t + 1].matrix, tol) *
                           pinv_sqrt(sigma_hat[t + 1].matrix, tol);
        const CMatrix Np = psd_sqrt(sigma_hat[t].matrix, tol) *
                           pinv_sqrt(sol.rho_hat[t].matrix, tol);
        KrausMap F;
        for (const CMatrix& PM : sol.prior_conditioned.hat_maps[t].operators)
            F.operators.push_back(Nn * PM * Np);
        sol.model.maps.push_back(augment_to_tp(F, tol));
    }

    // space-time harmonic certificate
    for (int t = 0; t <= T; ++t) {
        const CMatrix isq = pinv_sqrt(sigma_hat[t].matrix, tol);
        sol.harmonic.push_back(isq * sol.rho_hat[t].matrix * isq);
    }
    sol.harmonic_check =
        quantum_harmonic_check(sol.harmonic, sol.prior_conditioned.hat_maps, 1e-10);
    return sol;
}

struct QMep2Solution {
    QuantumPathModel model;  // prior maps, initial state rho_bar_0
    double cost = 0.0;       // D(rho-hat_0 || sigma-hat_0)
    double bound = 0.0;      // D(rho_bar_0 || sigma_0), monotonicity bound
};

// Initial state fixed: the solution keeps the prior's forward maps; it does
// not depend on the interior observables.
inline QMep2Solution qmep2_solve(const QuantumPathModel& prior, const DensityMatrix& rho_bar_0,
                                 double degeneracy_tol = 1e-10) {
    prior.validate();
    rho_bar_0.validate();
    const Observable& X0 = prior.observables.front();
    if (X0.outcomes() != prior.dim())
        throw ModelError("qmep2: X_0 must have a non-degenerate spectrum");
    for (std::size_t a = 0; a < X0.eigenvalues.size(); ++a)
        for (std::size_t b = a + 1; b < X0.eigenvalues.size(); ++b)
            if (std::abs(X0.eigenvalues[a] - X0.eigenvalues[b]) <= degeneracy_tol)
                throw ModelError("qmep2: X_0 must have a non-degenerate spectrum");

    QMep2Solution sol;
    sol.model = prior;
    sol.model.sigma0 = rho_bar_0;
    const DensityMatrix rho_hat0 = nonselective_measure(rho_bar_0, X0);
    const DensityMatrix sigma_hat0 = nonselective_measure(prior.sigma0, X0);
    sol.cost = quantum_relative_entropy(rho_hat0, sigma_hat0);
    sol.bound = quantum_relative_entropy(rho_bar_0, prior.sigma0);
    return sol;
}

}  // namespace sbridge
