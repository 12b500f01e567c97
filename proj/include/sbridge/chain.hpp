#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

// Finite-state Markov chain kinematics: marginal propagation, reverse-time
// kernels, relative entropy and space-time harmonic checks.

namespace sbridge {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kStochTol = 1e-12;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool is_prob_vector(const Vector& p, double tol = kStochTol) {
    if (p.size() == 0) return false;
    if ((p.array() < -tol).any()) return false;
    return std::abs(p.sum() - 1.0) <= tol * static_cast<double>(p.size() + 1);
}

inline bool is_stochastic(const Matrix& P, double tol = kStochTol) {
    if (P.rows() == 0 || P.rows() != P.cols()) return false;
    if ((P.array() < -tol).any()) return false;
    for (Eigen::Index i = 0; i < P.rows(); ++i)
        if (std::abs(P.row(i).sum() - 1.0) > tol * static_cast<double>(P.cols() + 1))
            return false;
    return true;
}

// Initial distribution plus time-indexed transition matrices P(0..T-1).
struct ChainModel {
    Vector initial;
    std::vector<Matrix> transitions;

    int horizon() const { return static_cast<int>(transitions.size()); }
    int num_states() const { return static_cast<int>(initial.size()); }

    void validate(double tol = kStochTol) const {
        if (transitions.empty()) throw ModelError("chain: horizon must be >= 1");
        if (!is_prob_vector(initial, tol))
            throw ModelError("chain: initial distribution is not a probability vector");
        const Eigen::Index n = initial.size();
        for (const Matrix& P : transitions) {
            if (P.rows() != n || P.cols() != n)
                throw ModelError("chain: transition matrix dimension mismatch");
            if (!is_stochastic(P, tol))
                throw ModelError("chain: transition matrix is not stochastic");
        }
    }
};

// Reverse-time kernel at a fixed t; rows indexed by the later state j.
// Rows conditioned on a zero-probability state carry no information and are
// set uniform with the flag recorded.
struct ReverseKernel {
    Matrix rows;                       // rows(j, i) = q_ji(t)
    std::vector<bool> arbitrary_row;   // true where p_j(t+1) vanished
};

// h(t, i) on [0, T] x X, row per time.
struct SpaceTimeFunction {
    Matrix values;  // (T+1) x |X|

    double operator()(int t, int i) const { return values(t, i); }
};

struct HarmonicReport {
    bool ok = false;
    double max_residual = 0.0;
};

// p(t+1) = P(t)^T p(t), t = 0..T-1.  Returns all T+1 marginals.
inline std::vector<Vector> propagate_forward(const ChainModel& chain) {
    chain.validate();
    std::vector<Vector> out;
    out.reserve(chain.horizon() + 1);
    out.push_back(chain.initial);
    for (const Matrix& P : chain.transitions)
        out.push_back(P.transpose() * out.back());
    return out;
}

// q_ji(t) = p_i(t) p_ij(t) / p_j(t+1) wherever p_j(t+1) > 0.
inline ReverseKernel reverse_kernel(const ChainModel& chain,
                                    const std::vector<Vector>& marginals, int t) {
    if (t < 0 || t >= chain.horizon())
        throw ModelError("reverse_kernel: time index out of range");
    const Vector& p = marginals[t];
    const Vector& pn = marginals[t + 1];
    const Matrix& P = chain.transitions[t];
    const Eigen::Index n = p.size();

    ReverseKernel q;
    q.rows = Matrix::Zero(n, n);
    q.arbitrary_row.assign(n, false);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (pn(j) > 0.0) {
            for (Eigen::Index i = 0; i < n; ++i) q.rows(j, i) = p(i) * P(i, j) / pn(j);
        } else {
            q.rows.row(j).setConstant(1.0 / static_cast<double>(n));
            q.arbitrary_row[j] = true;
        }
    }
    return q;
}

inline ReverseKernel reverse_kernel(const ChainModel& chain, int t) {
    return reverse_kernel(chain, propagate_forward(chain), t);
}

inline std::vector<ReverseKernel> reverse_kernels(const ChainModel& chain) {
    const auto marginals = propagate_forward(chain);
    std::vector<ReverseKernel> out;
    out.reserve(chain.horizon());
    for (int t = 0; t < chain.horizon(); ++t)
        out.push_back(reverse_kernel(chain, marginals, t));
    return out;
}

// Kullback-Leibler divergence, natural log; +inf on support violation.
inline double relative_entropy(const Vector& p, const Vector& q) {
    if (p.size() != q.size())
        throw ModelError("relative_entropy: dimension mismatch");
    double d = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) == 0.0) continue;
        if (q(i) <= 0.0) return kInf;
        d += p(i) * std::log(p(i) / q(i));
    }
    return d < 0.0 ? 0.0 : d;  // guard round-off on p ~= q
}

// Backward equation residual: h(t,i) - sum_j p_ij(t) h(t+1,j).
inline HarmonicReport is_space_time_harmonic(const SpaceTimeFunction& h,
                                             const ChainModel& chain, double tol) {
    const int T = chain.horizon();
    if (h.values.rows() != T + 1 || h.values.cols() != chain.num_states())
        throw ModelError("is_space_time_harmonic: dimension mismatch");
    HarmonicReport r;
    for (int t = 0; t < T; ++t) {
        Vector pred = chain.transitions[t] * h.values.row(t + 1).transpose();
        double res = (h.values.row(t).transpose() - pred).cwiseAbs().maxCoeff();
        r.max_residual = std::max(r.max_residual, res);
    }
    r.ok = r.max_residual <= tol;
    return r;
}

// theta(t+1,j) = sum_i q_ji(t) theta(t,i), arbitrary rows excluded.
inline HarmonicReport is_reverse_harmonic(const SpaceTimeFunction& theta,
                                          const ChainModel& chain, double tol) {
    const int T = chain.horizon();
    if (theta.values.rows() != T + 1 || theta.values.cols() != chain.num_states())
        throw ModelError("is_reverse_harmonic: dimension mismatch");
    const auto kernels = reverse_kernels(chain);
    HarmonicReport r;
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < chain.num_states(); ++j) {
            if (kernels[t].arbitrary_row[j]) continue;
            double pred = kernels[t].rows.row(j).dot(theta.values.row(t));
            r.max_residual = std::max(r.max_residual, std::abs(theta.values(t + 1, j) - pred));
        }
    }
    r.ok = r.max_residual <= tol;
    return r;
}

struct MartingaleViolation {
    int t;
    std::vector<int> history;
    double expected;  // h(t, i_t)
    double actual;    // E[h(t+1, X(t+1)) | history]
};

struct MartingaleReport {
    bool ok = false;
    std::vector<MartingaleViolation> violations;
    double max_residual = 0.0;
};

// Exhaustive check that h(t, X(t)) is conditionally constant along every
// positive-probability partial trajectory.
inline MartingaleReport martingale_verify(const SpaceTimeFunction& h,
                                          const ChainModel& chain, double tol) {
    const int T = chain.horizon();
    const int n = chain.num_states();
    if (h.values.rows() != T + 1 || h.values.cols() != n)
        throw ModelError("martingale_verify: dimension mismatch");
    double paths = 1.0;
    for (int t = 0; t < T; ++t) paths *= n;
    if (paths > 1e6) throw SizeError("martingale_verify: |X|^T exceeds enumeration guard");

    MartingaleReport report;
    std::vector<int> history;
    // depth-first over partial trajectories with positive probability
    auto recurse = [&](auto&& self, int t, int state, double prob) -> void {
        history.push_back(state);
        if (t < T) {
            double cond = chain.transitions[t].row(state).dot(h.values.row(t + 1));
            double res = std::abs(cond - h.values(t, state));
            report.max_residual = std::max(report.max_residual, res);
            if (res > tol)
                report.violations.push_back({t, history, h.values(t, state), cond});
            for (int j = 0; j < n; ++j) {
                double pj = chain.transitions[t](state, j);
                if (prob * pj > 0.0) self(self, t + 1, j, prob * pj);
            }
        }
        history.pop_back();
    };
    for (int i = 0; i < n; ++i)
        if (chain.initial(i) > 0.0) recurse(recurse, 0, i, chain.initial(i));
    report.ok = report.violations.empty();
    return report;
}

}  // namespace sbridge
