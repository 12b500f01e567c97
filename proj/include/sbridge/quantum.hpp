#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "sbridge/chain.hpp"  // error types, kInf

// Finite-dimensional quantum primitives: density matrices, spectral
// projector families, Kraus maps in both pictures, quantum relative entropy
// and PSD matrix functions.

namespace sbridge {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

inline constexpr double kHermTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;

inline bool is_hermitian(const CMatrix& M, double tol = kHermTol) {
    return M.rows() == M.cols() && (M - M.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

struct DensityMatrix {
    CMatrix matrix;

    int dim() const { return static_cast<int>(matrix.rows()); }

    void validate(double tol = kPsdTol) const {
        if (!is_hermitian(matrix, 1e-12))
            throw ModelError("density: not Hermitian");
        if (std::abs(matrix.trace().real() - 1.0) > 1e-10)
            throw ModelError("density: trace != 1");
        Eigen::SelfAdjointEigenSolver<CMatrix> es(matrix, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol)
            throw ModelError("density: negative eigenvalue beyond tolerance");
    }
};

// Hermitian observable with its grouped spectral projector family.
struct Observable {
    CMatrix matrix;
    std::vector<double> eigenvalues;    // ascending, degeneracies merged
    std::vector<CMatrix> projectors;    // orthogonal, complete

    int outcomes() const { return static_cast<int>(projectors.size()); }
};

struct KrausMap {
    std::vector<CMatrix> operators;

    int dim() const { return static_cast<int>(operators.front().rows()); }

    // I - sum M_k^dag M_k; ~0 for TPCP maps, PSD for quantum operations
    CMatrix tp_defect() const {
        const Eigen::Index n = operators.front().rows();
        CMatrix d = CMatrix::Identity(n, n);
        for (const CMatrix& M : operators) d -= M.adjoint() * M;
        return d;
    }

    double tp_defect_norm() const { return tp_defect().cwiseAbs().maxCoeff(); }

    bool is_trace_preserving(double tol = kPsdTol) const { return tp_defect_norm() <= tol; }

    // quantum operation check: defect PSD within tol
    bool is_quantum_operation(double tol = kPsdTol) const {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(tp_defect(), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff() >= -tol;
    }
};

// Eigenvalues within degeneracy_tol merged into a single projector.
inline Observable spectral_decompose(const CMatrix& H, double degeneracy_tol = 1e-10) {
    if (!is_hermitian(H, 1e-12))
        throw ModelError("spectral_decompose: input not Hermitian");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(H);
    Observable obs;
    obs.matrix = H;
    const Eigen::Index n = H.rows();
    Eigen::Index k = 0;
    while (k < n) {
        Eigen::Index start = k;
        double lambda = es.eigenvalues()(k);
        CMatrix proj = CMatrix::Zero(n, n);
        while (k < n && es.eigenvalues()(k) - lambda <= degeneracy_tol) {
            proj += es.eigenvectors().col(k) * es.eigenvectors().col(k).adjoint();
            ++k;
        }
        obs.eigenvalues.push_back(es.eigenvalues().segment(start, k - start).mean());
        obs.projectors.push_back(proj);
    }
    return obs;
}

// Rank-one spectral family (degenerate eigenspaces split along the
// eigenvector columns, in ascending eigenvalue order).
inline Observable spectral_decompose_rank_one(const CMatrix& H) {
    if (!is_hermitian(H, 1e-12))
        throw ModelError("spectral_decompose_rank_one: input not Hermitian");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(H);
    Observable obs;
    obs.matrix = H;
    for (Eigen::Index k = 0; k < H.rows(); ++k) {
        obs.eigenvalues.push_back(es.eigenvalues()(k));
        obs.projectors.push_back(es.eigenvectors().col(k) * es.eigenvectors().col(k).adjoint());
    }
    return obs;
}

// Schroedinger picture: rho -> sum_k M_k rho M_k^dag.
inline CMatrix apply_schrodinger(const KrausMap& E, const CMatrix& rho) {
    if (E.dim() != rho.rows()) throw ModelError("apply_schrodinger: dimension mismatch");
    CMatrix out = CMatrix::Zero(rho.rows(), rho.cols());
    for (const CMatrix& M : E.operators) out += M * rho * M.adjoint();
    return out;
}

// Heisenberg picture: X -> sum_k M_k^dag X M_k.
inline CMatrix apply_heisenberg(const KrausMap& E, const CMatrix& X) {
    if (E.dim() != X.rows()) throw ModelError("apply_heisenberg: dimension mismatch");
    CMatrix out = CMatrix::Zero(X.rows(), X.cols());
    for (const CMatrix& M : E.operators) out += M.adjoint() * X * M;
    return out;
}

inline bool is_projector(const CMatrix& P, double tol = kPsdTol) {
    return is_hermitian(P, tol) && (P * P - P).cwiseAbs().maxCoeff() <= tol;
}

// trace(Pi rho Pi), clipped to [0, 1].
inline double event_probability(const DensityMatrix& rho, const CMatrix& proj) {
    if (!is_projector(proj)) throw ModelError("event_probability: not a projector");
    double p = (proj * rho.matrix * proj).trace().real();
    if (p < 0.0 && p > -1e-12) p = 0.0;
    if (p > 1.0 && p < 1.0 + 1e-12) p = 1.0;
    if (p < 0.0 || p > 1.0) throw ModelError("event_probability: value outside [0,1]");
    return p;
}

struct ConditioningError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline DensityMatrix conditioned_state(const DensityMatrix& rho, const CMatrix& proj) {
    const double p = event_probability(rho, proj);
    if (p <= 0.0) throw ConditioningError("conditioned_state: zero-probability event");
    return {proj * rho.matrix * proj / p};
}

// measurement performed, outcome discarded
inline DensityMatrix nonselective_measure(const DensityMatrix& rho, const Observable& X) {
    CMatrix out = CMatrix::Zero(rho.dim(), rho.dim());
    for (const CMatrix& proj : X.projectors) out += proj * rho.matrix * proj;
    return {out};
}

namespace detail {

// Eigendecomposition with small negative eigenvalues clipped to zero.
inline void psd_eigen(const CMatrix& M, double tol, Eigen::VectorXd& evals, CMatrix& evecs) {
    if (!is_hermitian(M, 1e-10)) throw ModelError("psd: input not Hermitian");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(M);
    evals = es.eigenvalues();
    if (evals.minCoeff() < -tol) throw ModelError("psd: negative eigenvalue beyond tolerance");
    evals = evals.cwiseMax(0.0);
    evecs = es.eigenvectors();
}

}  // namespace detail

inline CMatrix psd_sqrt(const CMatrix& M, double tol = kPsdTol) {
    Eigen::VectorXd evals;
    CMatrix evecs;
    detail::psd_eigen(M, tol, evals, evecs);
    return evecs * evals.cwiseSqrt().asDiagonal() * evecs.adjoint();
}

// Moore-Penrose pseudoinverse square root; relative rank cutoff
// n * eps * lambda_max unless overridden.
inline CMatrix pinv_sqrt(const CMatrix& M, double tol = kPsdTol, double cutoff = -1.0) {
    Eigen::VectorXd evals;
    CMatrix evecs;
    detail::psd_eigen(M, tol, evals, evecs);
    if (cutoff < 0.0)
        cutoff = static_cast<double>(M.rows()) *
                 std::numeric_limits<double>::epsilon() * evals.maxCoeff();
    Eigen::VectorXd inv = evals;
    for (Eigen::Index i = 0; i < inv.size(); ++i)
        inv(i) = evals(i) > cutoff ? 1.0 / std::sqrt(evals(i)) : 0.0;
    return evecs * inv.asDiagonal() * evecs.adjoint();
}

// projector onto supp(M)
inline CMatrix support_projector(const CMatrix& M, double tol = kPsdTol, double cutoff = -1.0) {
    Eigen::VectorXd evals;
    CMatrix evecs;
    detail::psd_eigen(M, tol, evals, evecs);
    if (cutoff < 0.0)
        cutoff = static_cast<double>(M.rows()) *
                 std::numeric_limits<double>::epsilon() * std::max(evals.maxCoeff(), 1e-300);
    CMatrix proj = CMatrix::Zero(M.rows(), M.cols());
    for (Eigen::Index i = 0; i < evals.size(); ++i)
        if (evals(i) > cutoff) proj += evecs.col(i) * evecs.col(i).adjoint();
    return proj;
}

// trace(rho (log rho - log sigma)) on supp(sigma); +inf when supp(rho) is
// not contained in supp(sigma).
inline double quantum_relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma,
                                       double support_tol = 1e-9) {
    if (rho.dim() != sigma.dim())
        throw ModelError("quantum_relative_entropy: dimension mismatch");
    Eigen::SelfAdjointEigenSolver<CMatrix> er(rho.matrix);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(sigma.matrix);
    const Eigen::Index n = rho.dim();

    // support containment: rho puts no mass on ker(sigma)
    CMatrix ker_proj = CMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (es.eigenvalues()(i) <= support_tol * std::max(es.eigenvalues().maxCoeff(), 1.0))
            ker_proj += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
    if ((ker_proj * rho.matrix * ker_proj).trace().real() > support_tol) return kInf;

    double d = 0.0;
    // trace(rho log rho) over positive eigenvalues of rho
    for (Eigen::Index i = 0; i < n; ++i) {
        double lam = er.eigenvalues()(i);
        if (lam > support_tol) d += lam * std::log(lam);
    }
    // trace(rho log sigma) over supp(sigma)
    for (Eigen::Index i = 0; i < n; ++i) {
        double mu = es.eigenvalues()(i);
        if (mu > support_tol * std::max(es.eigenvalues().maxCoeff(), 1.0)) {
            double overlap =
                (es.eigenvectors().col(i).adjoint() * rho.matrix * es.eigenvectors().col(i))(0)
                    .real();
            d -= overlap * std::log(mu);
        }
    }
    return d < 0.0 ? 0.0 : d;
}

struct HarmonicResiduals {
    bool ok = false;
    std::vector<double> residuals;  // operator-norm residual per step
    double max_residual = 0.0;
};

// spectral norm of a Hermitian matrix
inline double hermitian_norm(const CMatrix& H) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(H, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Y_t = E_t(Y_{t+1}) in the Heisenberg picture, operator norm residuals.
inline HarmonicResiduals quantum_harmonic_check(const std::vector<CMatrix>& Y,
                                                const std::vector<KrausMap>& maps, double tol) {
    if (Y.size() != maps.size() + 1)
        throw ModelError("quantum_harmonic_check: length mismatch");
    HarmonicResiduals r;
    for (std::size_t t = 0; t < maps.size(); ++t) {
        CMatrix diff = Y[t] - apply_heisenberg(maps[t], Y[t + 1]);
        double res = hermitian_norm(diff);
        r.residuals.push_back(res);
        r.max_residual = std::max(r.max_residual, res);
    }
    r.ok = r.max_residual <= tol;
    return r;
}

}  // namespace sbridge
