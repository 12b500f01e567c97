#pragma once

// Random instance generators shared by the test suites. Everything is driven
// by the library Rng so runs are reproducible.

#include <vector>

#include "sbridge/chain.hpp"
#include "sbridge/quantum.hpp"
#include "sbridge/rng.hpp"

namespace testgen {

using namespace sbridge;

inline Vector random_prob(Rng& rng, int n, double floor = 0.05) {
    Vector p(n);
    for (int i = 0; i < n; ++i) p(i) = floor + rng.uniform();
    return p / p.sum();
}

inline Matrix random_stochastic(Rng& rng, int n, double floor = 0.05) {
    Matrix P(n, n);
    for (int i = 0; i < n; ++i) P.row(i) = random_prob(rng, n, floor).transpose();
    return P;
}

inline ChainModel random_chain(Rng& rng, int n, int T, double floor = 0.05) {
    ChainModel chain;
    chain.initial = random_prob(rng, n, floor);
    for (int t = 0; t < T; ++t) chain.transitions.push_back(random_stochastic(rng, n, floor));
    return chain;
}

inline CMatrix random_cmatrix(Rng& rng, int n) {
    CMatrix M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            M(i, j) = Complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    return M;
}

inline CMatrix random_hermitian(Rng& rng, int n) {
    CMatrix M = random_cmatrix(rng, n);
    return 0.5 * (M + M.adjoint());
}

inline DensityMatrix random_density(Rng& rng, int n) {
    CMatrix M = random_cmatrix(rng, n);
    CMatrix rho = M * M.adjoint();
    return {rho / rho.trace().real()};
}

// rank-deficient density of the given rank
inline DensityMatrix random_density_rank(Rng& rng, int n, int rank) {
    CMatrix M(n, rank);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < rank; ++j)
            M(i, j) = Complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    CMatrix rho = M * M.adjoint();
    return {rho / rho.trace().real()};
}

// random TPCP map with k Kraus operators (Stinespring column QR)
inline KrausMap random_tpcp(Rng& rng, int n, int k) {
    CMatrix stacked(n * k, n);
    for (int i = 0; i < n * k; ++i)
        for (int j = 0; j < n; ++j)
            stacked(i, j) = Complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    Eigen::HouseholderQR<CMatrix> qr(stacked);
    CMatrix Q = qr.householderQ() * CMatrix::Identity(n * k, n);
    KrausMap E;
    for (int b = 0; b < k; ++b) E.operators.push_back(Q.block(b * n, 0, n, n));
    return E;
}

inline CMatrix pauli_x() {
    CMatrix X(2, 2);
    X << 0, 1, 1, 0;
    return X;
}

inline CMatrix pauli_z() {
    CMatrix Z(2, 2);
    Z << 1, 0, 0, -1;
    return Z;
}

inline KrausMap bit_flip(double p) {
    KrausMap E;
    E.operators.push_back(std::sqrt(1.0 - p) * CMatrix::Identity(2, 2));
    E.operators.push_back(std::sqrt(p) * pauli_x());
    return E;
}

inline CMatrix plus_state() {
    CMatrix rho(2, 2);
    rho << 0.5, 0.5, 0.5, 0.5;
    return rho;
}

// Generic Sinkhorn scaling of a nonnegative kernel to prescribed row and
// column sums; independent oracle for the endpoint coupling.
inline Matrix sinkhorn_coupling(const Matrix& K, const Vector& row_sums,
                                const Vector& col_sums, int iters = 10000,
                                double tol = 1e-14) {
    Vector u = Vector::Ones(K.rows());
    Vector v = Vector::Ones(K.cols());
    for (int it = 0; it < iters; ++it) {
        Vector Kv = K * v;
        for (Eigen::Index i = 0; i < u.size(); ++i)
            u(i) = Kv(i) > 0.0 ? row_sums(i) / Kv(i) : 0.0;
        Vector Ku = K.transpose() * u;
        Vector v_next(v.size());
        for (Eigen::Index j = 0; j < v.size(); ++j)
            v_next(j) = Ku(j) > 0.0 ? col_sums(j) / Ku(j) : 0.0;
        double change = (v_next - v).cwiseAbs().maxCoeff();
        v = v_next;
        if (change < tol) break;
    }
    return u.asDiagonal() * K * v.asDiagonal();
}

}  // namespace testgen
