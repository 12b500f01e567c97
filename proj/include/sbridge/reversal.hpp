#pragma once

#include <vector>

#include "sbridge/quantum.hpp"

// Petz-type time reversal of quantum operations: the T_rho transformation,
// augmentation to trace preservation and verification of the reversal
// identities.

namespace sbridge {

struct ReversalResult {
    KrausMap map;                    // reversal Kraus operators
    std::vector<CMatrix> augmented;  // extra operators appended by augment_to_tp
    int rank_next = 0;               // rank of rho_{t+1}
    double pinv_cutoff = 0.0;
    double defect_before = 0.0;
    double defect_after = 0.0;
};

// Reversal Kraus operators K_k = rho_t^{1/2} M_k^dag rho_{t+1}^{-1/2} with
// rho_{t+1} = E(rho_t); the pseudoinverse handles rank deficiency.
inline ReversalResult petz_reversal(const KrausMap& E, const DensityMatrix& rho_t,
                                    double tol = kPsdTol) {
    if (E.dim() != rho_t.dim()) throw ModelError("petz_reversal: dimension mismatch");
    if (!E.is_quantum_operation(tol))
        throw ModelError("petz_reversal: map is not a quantum operation");
    const CMatrix rho_next = apply_schrodinger(E, rho_t.matrix);
    const CMatrix sq = psd_sqrt(rho_t.matrix, tol);

    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho_next, Eigen::EigenvaluesOnly);
    const double cutoff = static_cast<double>(rho_next.rows()) *
                          std::numeric_limits<double>::epsilon() *
                          std::max(es.eigenvalues().maxCoeff(), 0.0);
    const CMatrix isq = pinv_sqrt(rho_next, tol);

    ReversalResult res;
    res.pinv_cutoff = cutoff;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) > cutoff) ++res.rank_next;
    for (const CMatrix& M : E.operators) res.map.operators.push_back(sq * M.adjoint() * isq);
    res.defect_before = res.map.tp_defect_norm();
    res.defect_after = res.defect_before;
    return res;
}

// The map T_rho on quantum operations: E -> reversal of E at rho.
inline KrausMap t_rho(const KrausMap& E, const DensityMatrix& rho, double tol = kPsdTol) {
    return petz_reversal(E, rho, tol).map;
}

// Append psd_sqrt(tp_defect) so the map becomes trace preserving; the
// original operators are untouched.
inline KrausMap augment_to_tp(const KrausMap& Q, double tol = kPsdTol) {
    const CMatrix defect = Q.tp_defect();
    if (defect.cwiseAbs().maxCoeff() <= tol) return Q;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(defect, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol)
        throw ModelError("augment_to_tp: tp_defect is not PSD");
    KrausMap out = Q;
    out.operators.push_back(psd_sqrt(defect, tol));
    return out;
}

// Channel action on the full matrix basis |a><b|; used to compare maps
// independently of their Kraus presentation.
inline double channel_distance(const KrausMap& A, const KrausMap& B) {
    const Eigen::Index n = A.dim();
    if (B.dim() != n) throw ModelError("channel_distance: dimension mismatch");
    double d = 0.0;
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) {
            CMatrix basis = CMatrix::Zero(n, n);
            basis(a, b) = 1.0;
            d = std::max(d, (apply_schrodinger(A, basis) - apply_schrodinger(B, basis))
                                .cwiseAbs()
                                .maxCoeff());
        }
    return d;
}

// Channel action restricted to operators supported on proj.
inline double channel_distance_on_support(const KrausMap& A, const KrausMap& B,
                                          const CMatrix& proj) {
    const Eigen::Index n = A.dim();
    double d = 0.0;
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) {
            CMatrix basis = CMatrix::Zero(n, n);
            basis(a, b) = 1.0;
            basis = proj * basis * proj;
            d = std::max(d, (apply_schrodinger(A, basis) - apply_schrodinger(B, basis))
                                .cwiseAbs()
                                .maxCoeff());
        }
    return d;
}

struct ReversalReport {
    double recovery_residual = 0.0;     // || reversal(rho_{t+1}) - rho_t ||
    double consistency_residual = 0.0;  // double reversal vs E on supp(rho_t)
    double classical_residual = 0.0;    // forward vs backward joint probabilities
    bool ok = false;
};

// Checks the three reversal identities for E at rho_t.
inline ReversalReport verify_reversal(const KrausMap& E, const DensityMatrix& rho_t,
                                      double tol = 1e-10) {
    const CMatrix rho_next = apply_schrodinger(E, rho_t.matrix);
    const ReversalResult rev = petz_reversal(E, rho_t);

    ReversalReport rep;
    rep.recovery_residual =
        (apply_schrodinger(rev.map, rho_next) - rho_t.matrix).cwiseAbs().maxCoeff();

    // double reversal reproduces E on states supported in supp(rho_t)
    const KrausMap rev2 = t_rho(rev.map, DensityMatrix{rho_next / rho_next.trace().real()});
    rep.consistency_residual =
        channel_distance_on_support(rev2, E, support_projector(rho_t.matrix));

    // joint probabilities over the eigenprojector families of rho_t, rho_{t+1}
    const Observable Xt = spectral_decompose(rho_t.matrix);
    const Observable Xn = spectral_decompose(rho_next / rho_next.trace().real());
    for (const CMatrix& Pi : Xt.projectors)
        for (const CMatrix& Pj : Xn.projectors) {
            CMatrix fwd_in = Pi * rho_t.matrix * Pi;
            double forward = (Pj * apply_schrodinger(E, fwd_in) * Pj).trace().real();
            CMatrix bwd_in = Pj * rho_next * Pj;
            double backward = (Pi * apply_schrodinger(rev.map, bwd_in) * Pi).trace().real();
            rep.classical_residual =
                std::max(rep.classical_residual, std::abs(forward - backward));
        }

    rep.ok = rep.recovery_residual <= tol && rep.consistency_residual <= tol &&
             rep.classical_residual <= tol;
    return rep;
}

// Regression guard: the transposed ordering rho_{t+1}^{-1/2} M_k rho_t^{1/2}
// used as a forward sandwich; fails the recovery identity on generic
// non-commuting instances.
inline double transposed_ordering_recovery_residual(const KrausMap& E,
                                                    const DensityMatrix& rho_t) {
    const CMatrix rho_next = apply_schrodinger(E, rho_t.matrix);
    const CMatrix sq = psd_sqrt(rho_t.matrix);
    const CMatrix isq = pinv_sqrt(rho_next);
    KrausMap wrong;
    for (const CMatrix& M : E.operators) wrong.operators.push_back(isq * M * sq);
    return (apply_schrodinger(wrong, rho_next) - rho_t.matrix).cwiseAbs().maxCoeff();
}

struct ReverseHarmonicReport {
    std::vector<double> residuals;
    double max_residual = 0.0;
    bool ok = false;
};

// Y_t = sigma_t^{-1/2} rho_t sigma_t^{-1/2} propagates forward through the
// Heisenberg picture of the reversal of E_t at sigma_t.
inline ReverseHarmonicReport reverse_harmonic_verify(const std::vector<KrausMap>& maps,
                                                     const std::vector<DensityMatrix>& sigma,
                                                     const std::vector<DensityMatrix>& rho,
                                                     double tol = 1e-10) {
    if (sigma.size() != maps.size() + 1 || rho.size() != maps.size() + 1)
        throw ModelError("reverse_harmonic_verify: length mismatch");
    for (std::size_t t = 0; t < sigma.size(); ++t) {
        const CMatrix ker = CMatrix::Identity(sigma[t].dim(), sigma[t].dim()) -
                            support_projector(sigma[t].matrix);
        if ((ker * rho[t].matrix * ker).trace().real() > 1e-10)
            throw ModelError("reverse_harmonic_verify: supp(rho) exceeds supp(sigma)");
    }
    std::vector<CMatrix> Y(sigma.size());
    for (std::size_t t = 0; t < sigma.size(); ++t) {
        const CMatrix isq = pinv_sqrt(sigma[t].matrix);
        Y[t] = isq * rho[t].matrix * isq;
    }
    ReverseHarmonicReport rep;
    for (std::size_t t = 0; t < maps.size(); ++t) {
        const KrausMap rev = t_rho(maps[t], sigma[t]);
        const CMatrix pred = apply_heisenberg(rev, Y[t]);
        double res = hermitian_norm(Y[t + 1] - pred);
        rep.residuals.push_back(res);
        rep.max_residual = std::max(rep.max_residual, res);
    }
    rep.ok = rep.max_residual <= tol;
    return rep;
}

}  // namespace sbridge
