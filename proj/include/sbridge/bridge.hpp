#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sbridge/chain.hpp"

// Schroedinger-system solver and the three maximum-entropy bridge
// constructions with their multiplicative-functional representations.

namespace sbridge {

enum class ProblemKind { MEP1, MEP2, MEP3 };

// Potentials (phi, phihat) solving
//   phi(t)    = P(t) phi(t+1)
//   phihat(t+1) = P(t)^T phihat(t)
//   phi(0) .* phihat(0) = p0,  phi(T) .* phihat(T) = p1
// normalized so that max_i phi(T,i) = 1 (the c-scaling freedom).
struct HarmonicPair {
    Matrix phi;     // (T+1) x |X|
    Matrix phihat;  // (T+1) x |X|
};

struct SolverConfig {
    double tol = 1e-12;   // sup-norm change of phi(T) per sweep
    int max_iter = 100000;
};

struct SolverDiagnostics {
    int iterations = 0;
    double final_change = 0.0;
    double boundary_residual = 0.0;
    std::vector<std::string> warnings;
};

struct BridgeSolution {
    ProblemKind kind;
    ChainModel chain;                          // solved transitions, initial = p0-hat
    std::vector<Vector> marginals;             // p-hat(0..T)
    std::optional<HarmonicPair> pair;          // MEP3 only
    std::vector<std::vector<bool>> flagged;    // per (t, row): uniform filler row
    SolverDiagnostics diagnostics;
};

namespace detail {

inline Matrix step_kernel(const ChainModel& prior) {
    Matrix G = prior.transitions.front();
    for (size_t t = 1; t < prior.transitions.size(); ++t) G = G * prior.transitions[t];
    return G;
}

}  // namespace detail

// Fortet / iterative-proportional-fitting sweep on the endpoint potentials.
inline HarmonicPair solve_schrodinger_system(const ChainModel& prior, const Vector& p0,
                                             const Vector& p1, const SolverConfig& cfg = {},
                                             SolverDiagnostics* diag = nullptr) {
    prior.validate();
    const int T = prior.horizon();
    const Eigen::Index n = prior.initial.size();
    if (p0.size() != n || p1.size() != n)
        throw ModelError("schrodinger: endpoint dimension mismatch");
    const Matrix G = detail::step_kernel(prior);

    Vector phiT = (p1.array() > 0.0).cast<double>();
    Vector phi0(n), phihat0(n), phihatT(n);
    int iter = 0;
    double change = kInf;
    for (; iter < cfg.max_iter && change >= cfg.tol; ++iter) {
        phi0 = G * phiT;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (p0(i) > 0.0 && phi0(i) <= 0.0)
                throw InfeasibleError("schrodinger: p0 puts mass on a state with phi(0)=0");
            phihat0(i) = p0(i) > 0.0 ? p0(i) / phi0(i) : 0.0;
        }
        phihatT = G.transpose() * phihat0;
        Vector next(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (p1(j) > 0.0 && phihatT(j) <= 0.0)
                throw InfeasibleError("schrodinger: p1 puts mass on an unreachable state");
            next(j) = p1(j) > 0.0 ? p1(j) / phihatT(j) : 0.0;
        }
        next /= next.maxCoeff();
        change = (next - phiT).cwiseAbs().maxCoeff();
        phiT = next;
    }
    if (change >= cfg.tol)
        throw InfeasibleError("schrodinger: no convergence in " +
                              std::to_string(cfg.max_iter) + " sweeps, change " +
                              std::to_string(change));

    HarmonicPair pair;
    pair.phi = Matrix::Zero(T + 1, n);
    pair.phihat = Matrix::Zero(T + 1, n);
    pair.phi.row(T) = phiT.transpose();
    for (int t = T - 1; t >= 0; --t)
        pair.phi.row(t) = (prior.transitions[t] * pair.phi.row(t + 1).transpose()).transpose();
    for (Eigen::Index i = 0; i < n; ++i)
        pair.phihat(0, i) = p0(i) > 0.0 ? p0(i) / pair.phi(0, i) : 0.0;
    for (int t = 0; t < T; ++t)
        pair.phihat.row(t + 1) =
            (prior.transitions[t].transpose() * pair.phihat.row(t).transpose()).transpose();

    if (diag) {
        diag->iterations = iter;
        diag->final_change = change;
        double r0 = ((pair.phi.row(0).array() * pair.phihat.row(0).array()).matrix() -
                     p0.transpose()).cwiseAbs().maxCoeff();
        double rT = ((pair.phi.row(T).array() * pair.phihat.row(T).array()).matrix() -
                     p1.transpose()).cwiseAbs().maxCoeff();
        diag->boundary_residual = std::max(r0, rT);
    }
    return pair;
}

// p-hat_ij(t) = pi_ij(t) phi(t+1,j) / phi(t,i); rows at phi(t,i)=0 are
// unreachable under p0 and get a uniform filler row.
inline BridgeSolution mep3_bridge(const ChainModel& prior, const Vector& p0, const Vector& p1,
                                  const SolverConfig& cfg = {}) {
    BridgeSolution sol;
    sol.kind = ProblemKind::MEP3;
    sol.pair = solve_schrodinger_system(prior, p0, p1, cfg, &sol.diagnostics);
    const int T = prior.horizon();
    const Eigen::Index n = prior.initial.size();
    sol.chain.initial = p0;
    sol.flagged.assign(T, std::vector<bool>(n, false));
    for (int t = 0; t < T; ++t) {
        Matrix P(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (sol.pair->phi(t, i) > 0.0) {
                for (Eigen::Index j = 0; j < n; ++j)
                    P(i, j) = prior.transitions[t](i, j) * sol.pair->phi(t + 1, j) /
                              sol.pair->phi(t, i);
            } else {
                P.row(i).setConstant(1.0 / static_cast<double>(n));
                sol.flagged[t][i] = true;
            }
        }
        sol.chain.transitions.push_back(P);
    }
    sol.marginals = propagate_forward(sol.chain);
    return sol;
}

// Final marginal fixed: keep the prior's reverse-time mechanism.
inline BridgeSolution mep1_solution(const ChainModel& prior, const Vector& p1) {
    prior.validate();
    const int T = prior.horizon();
    const Eigen::Index n = prior.initial.size();
    if (p1.size() != n) throw ModelError("mep1: endpoint dimension mismatch");
    const auto pi = propagate_forward(prior);
    for (Eigen::Index j = 0; j < n; ++j)
        if (p1(j) > 0.0 && pi[T](j) <= 0.0)
            throw InfeasibleError("mep1: supp(p1) not contained in supp(pi(T))");

    BridgeSolution sol;
    sol.kind = ProblemKind::MEP1;
    sol.marginals.assign(T + 1, Vector());
    sol.marginals[T] = p1;
    std::vector<ReverseKernel> q(T);
    for (int t = T - 1; t >= 0; --t) {
        q[t] = reverse_kernel(prior, pi, t);
        sol.marginals[t] = q[t].rows.transpose() * sol.marginals[t + 1];
    }
    sol.chain.initial = sol.marginals[0];
    sol.flagged.assign(T, std::vector<bool>(n, false));
    for (int t = 0; t < T; ++t) {
        Matrix P(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (sol.marginals[t](i) > 0.0) {
                for (Eigen::Index j = 0; j < n; ++j)
                    P(i, j) = sol.marginals[t + 1](j) * q[t].rows(j, i) / sol.marginals[t](i);
            } else {
                P.row(i).setConstant(1.0 / static_cast<double>(n));
                sol.flagged[t][i] = true;
            }
        }
        sol.chain.transitions.push_back(P);
    }
    return sol;
}

// Initial marginal fixed: keep the prior's forward mechanism.
inline BridgeSolution mep2_solution(const ChainModel& prior, const Vector& p0) {
    prior.validate();
    const Eigen::Index n = prior.initial.size();
    if (p0.size() != n) throw ModelError("mep2: endpoint dimension mismatch");
    for (Eigen::Index i = 0; i < n; ++i)
        if (p0(i) > 0.0 && prior.initial(i) <= 0.0)
            throw InfeasibleError("mep2: supp(p0) not contained in supp(pi(0))");
    BridgeSolution sol;
    sol.kind = ProblemKind::MEP2;
    sol.chain.initial = p0;
    sol.chain.transitions = prior.transitions;
    sol.marginals = propagate_forward(sol.chain);
    sol.flagged.assign(prior.horizon(), std::vector<bool>(n, false));
    return sol;
}

enum class Feasibility {
    UniquenessGuaranteed,             // positive p1 and strictly positive T-step kernel
    SolvableNoUniquenessGuarantee,    // positivity hypothesis fails, kernel cannot block
    PossiblyInfeasible,               // zero pattern of the T-step kernel blocks transport
};

struct ExistenceDiagnosis {
    bool p1_positive = false;
    bool kernel_positive = false;
    Feasibility feasibility = Feasibility::PossiblyInfeasible;
    std::string message;
};

inline ExistenceDiagnosis existence_check(const ChainModel& prior,
                                          const std::optional<Vector>& p0, const Vector& p1) {
    prior.validate();
    const Matrix G = detail::step_kernel(prior);
    const Eigen::Index n = G.rows();
    ExistenceDiagnosis d;
    d.p1_positive = (p1.array() > 0.0).all();
    d.kernel_positive = (G.array() > 0.0).all();

    const Vector source = p0.value_or(prior.initial);
    bool blocked = false;
    for (Eigen::Index i = 0; i < n && !blocked; ++i) {
        if (source(i) <= 0.0) continue;
        double reach = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (p1(j) > 0.0) reach += G(i, j);
        if (reach <= 0.0) blocked = true;
    }
    for (Eigen::Index j = 0; j < n && !blocked; ++j) {
        if (p1(j) <= 0.0) continue;
        double reach = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (source(i) > 0.0) reach += G(i, j);
        if (reach <= 0.0) blocked = true;
    }

    if (blocked) {
        d.feasibility = Feasibility::PossiblyInfeasible;
        d.message = "zero pattern of the T-step kernel blocks transport";
    } else if (d.p1_positive && d.kernel_positive) {
        d.feasibility = Feasibility::UniquenessGuaranteed;
        d.message = "uniqueness guaranteed";
    } else {
        d.feasibility = Feasibility::SolvableNoUniquenessGuarantee;
        d.message = "solvable but uniqueness not guaranteed";
    }
    return d;
}

inline double ld_exponent_mep1(const ChainModel& prior, const Vector& p1) {
    const auto pi = propagate_forward(prior);
    return relative_entropy(p1, pi.back());
}

inline double ld_exponent_mep2(const ChainModel& prior, const Vector& p0) {
    return relative_entropy(p0, prior.initial);
}

// D(P-hat || Pi) from the solved potentials; invariant under phi -> c*phi.
inline double ld_exponent_mep3(const ChainModel& prior, const Vector& p0, const Vector& p1,
                               const HarmonicPair& pair) {
    const auto pi = propagate_forward(prior);
    const int T = prior.horizon();
    double v = 0.0;
    for (Eigen::Index i = 0; i < p0.size(); ++i)
        if (p0(i) > 0.0) v += p0(i) * std::log(p0(i) / (pi[0](i) * pair.phi(0, i)));
    for (Eigen::Index j = 0; j < p1.size(); ++j)
        if (p1(j) > 0.0) v += p1(j) * std::log(pair.phi(T, j));
    return v;
}

struct FactorizationReport {
    Matrix phi;   // forward space-time harmonic factor
    Matrix xi;    // reverse-time harmonic factor
    double max_identity_residual = 0.0;  // p-hat = phi .* xi .* pi
    HarmonicReport phi_harmonic;
    HarmonicReport xi_reverse_harmonic;
};

// p-hat_i(t) = phi(t,i) * xi(t,i) * pi_i(t): the marginal flow factorizes
// into a forward-harmonic and a reverse-harmonic multiplier.
inline FactorizationReport harmonic_factorization(const BridgeSolution& sol,
                                                  const ChainModel& prior,
                                                  double tol = 1e-10) {
    const auto pi = propagate_forward(prior);
    const int T = prior.horizon();
    const Eigen::Index n = prior.initial.size();
    for (int t = 0; t <= T; ++t)
        if (!(pi[t].array() > 0.0).all())
            throw ModelError("harmonic_factorization: prior marginals must be positive");

    FactorizationReport rep;
    rep.phi = Matrix::Ones(T + 1, n);
    rep.xi = Matrix::Ones(T + 1, n);
    switch (sol.kind) {
        case ProblemKind::MEP1:
            for (int t = 0; t <= T; ++t)
                for (Eigen::Index i = 0; i < n; ++i)
                    rep.phi(t, i) = sol.marginals[t](i) / pi[t](i);
            break;
        case ProblemKind::MEP2:
            for (int t = 0; t <= T; ++t)
                for (Eigen::Index i = 0; i < n; ++i)
                    rep.xi(t, i) = sol.marginals[t](i) / pi[t](i);
            break;
        case ProblemKind::MEP3:
            rep.phi = sol.pair->phi;
            for (int t = 0; t <= T; ++t)
                for (Eigen::Index i = 0; i < n; ++i)
                    rep.xi(t, i) = sol.pair->phihat(t, i) / pi[t](i);
            break;
    }
    for (int t = 0; t <= T; ++t)
        for (Eigen::Index i = 0; i < n; ++i) {
            double res = std::abs(sol.marginals[t](i) - rep.phi(t, i) * rep.xi(t, i) * pi[t](i));
            rep.max_identity_residual = std::max(rep.max_identity_residual, res);
        }
    rep.phi_harmonic = is_space_time_harmonic({rep.phi}, prior, tol);
    rep.xi_reverse_harmonic = is_reverse_harmonic({rep.xi}, prior, tol);
    return rep;
}

}  // namespace sbridge
