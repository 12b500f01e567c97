#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "sbridge/bridge.hpp"
#include "sbridge/path_oracle.hpp"

using namespace sbridge;
using testgen::random_chain;
using testgen::random_prob;
using testgen::sinkhorn_coupling;

namespace {

ChainModel symmetric_chain(int T) {
    ChainModel chain;
    chain.initial = Vector(2);
    chain.initial << 0.5, 0.5;
    Matrix P(2, 2);
    P << 0.75, 0.25, 0.25, 0.75;
    for (int t = 0; t < T; ++t) chain.transitions.push_back(P);
    return chain;
}

Vector dirac(int n, int i) {
    Vector p = Vector::Zero(n);
    p(i) = 1.0;
    return p;
}

double schrodinger_residuals(const ChainModel& prior, const Vector& p0, const Vector& p1,
                             const HarmonicPair& pair) {
    const int T = prior.horizon();
    double r = 0.0;
    for (int t = 0; t < T; ++t) {
        r = std::max(r, (pair.phi.row(t).transpose() -
                         prior.transitions[t] * pair.phi.row(t + 1).transpose())
                            .cwiseAbs()
                            .maxCoeff());
        r = std::max(r, (pair.phihat.row(t + 1).transpose() -
                         prior.transitions[t].transpose() * pair.phihat.row(t).transpose())
                            .cwiseAbs()
                            .maxCoeff());
    }
    r = std::max(r, ((pair.phi.row(0).array() * pair.phihat.row(0).array()).matrix() -
                     p0.transpose())
                        .cwiseAbs()
                        .maxCoeff());
    r = std::max(r, ((pair.phi.row(T).array() * pair.phihat.row(T).array()).matrix() -
                     p1.transpose())
                        .cwiseAbs()
                        .maxCoeff());
    return r;
}

}  // namespace

TEST_CASE("schrodinger system") {
    SECTION("two-state Dirac-to-Dirac fixed point") {
        auto prior = symmetric_chain(2);
        Vector p0 = dirac(2, 0), p1 = dirac(2, 1);
        auto pair = solve_schrodinger_system(prior, p0, p1);
        // hand fixed point up to scaling: phi(2)=(0,8/3), phi(1)=(2/3,2),
        // phi(0)=(1,5/3), phihat(0)=(1,0); normalization max phi(2)=1
        CHECK(pair.phi(2, 0) == Catch::Approx(0.0).margin(1e-12));
        CHECK(pair.phi(2, 1) == Catch::Approx(1.0).margin(1e-12));
        CHECK(pair.phi(1, 0) / pair.phi(1, 1) == Catch::Approx(1.0 / 3.0).margin(1e-12));
        CHECK(pair.phi(0, 0) / pair.phi(0, 1) == Catch::Approx(3.0 / 5.0).margin(1e-12));
        CHECK(pair.phihat(0, 1) == Catch::Approx(0.0).margin(1e-12));
        CHECK(schrodinger_residuals(prior, p0, p1, pair) < 1e-10);
    }
    SECTION("prior marginals give the constant potential") {
        auto prior = symmetric_chain(3);
        auto pi = propagate_forward(prior);
        auto pair = solve_schrodinger_system(prior, pi[0], pi[3]);
        CHECK((pair.phi.array() - 1.0).cwiseAbs().maxCoeff() < 1e-10);
        for (int t = 0; t <= 3; ++t)
            CHECK((pair.phihat.row(t).transpose() - pi[t]).cwiseAbs().maxCoeff() < 1e-10);
    }
    SECTION("residuals small on random positive instances") {
        Rng rng(515);
        for (int rep = 0; rep < 25; ++rep) {
            auto prior = random_chain(rng, 2 + rep % 5, 1 + rep % 6);
            Vector p0 = random_prob(rng, prior.num_states());
            Vector p1 = random_prob(rng, prior.num_states());
            auto pair = solve_schrodinger_system(prior, p0, p1);
            CHECK(schrodinger_residuals(prior, p0, p1, pair) < 1e-10);
        }
    }
    SECTION("blocked transport is infeasible") {
        ChainModel prior;
        prior.initial = Vector(2);
        prior.initial << 0.5, 0.5;
        prior.transitions.push_back(Matrix::Identity(2, 2));
        SolverConfig cfg;
        cfg.max_iter = 500;
        CHECK_THROWS_AS(solve_schrodinger_system(prior, dirac(2, 0), dirac(2, 1), cfg),
                        InfeasibleError);
    }
}

TEST_CASE("two-endpoint bridge") {
    auto prior = symmetric_chain(2);
    Vector p0 = dirac(2, 0), p1 = dirac(2, 1);
    SECTION("hand example transitions and marginals") {
        auto sol = mep3_bridge(prior, p0, p1);
        CHECK(sol.chain.transitions[0](0, 0) == Catch::Approx(0.5).margin(1e-12));
        CHECK(sol.chain.transitions[0](0, 1) == Catch::Approx(0.5).margin(1e-12));
        CHECK(sol.chain.transitions[1](0, 1) == Catch::Approx(1.0).margin(1e-12));
        CHECK(sol.chain.transitions[1](1, 1) == Catch::Approx(1.0).margin(1e-12));
        CHECK((sol.marginals[0] - p0).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(sol.marginals[1](0) == Catch::Approx(0.5).margin(1e-12));
        CHECK(sol.marginals[1](1) == Catch::Approx(0.5).margin(1e-12));
        CHECK((sol.marginals[2] - p1).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("prior endpoints reproduce the prior") {
        auto pi = propagate_forward(prior);
        auto sol = mep3_bridge(prior, pi[0], pi[2]);
        for (int t = 0; t < 2; ++t)
            CHECK((sol.chain.transitions[t] - prior.transitions[t]).cwiseAbs().maxCoeff() <
                  1e-10);
    }
    SECTION("row sums are exact wherever phi is positive") {
        Rng rng(616);
        for (int rep = 0; rep < 20; ++rep) {
            auto pr = random_chain(rng, 3, 3);
            auto sol = mep3_bridge(pr, random_prob(rng, 3), random_prob(rng, 3));
            for (const Matrix& P : sol.chain.transitions)
                for (int i = 0; i < 3; ++i)
                    CHECK(std::abs(P.row(i).sum() - 1.0) < 1e-12);
        }
    }
    SECTION("endpoint swap gives the time-reversed bridge") {
        auto sol = mep3_bridge(prior, p0, p1);
        auto swapped = mep3_bridge(prior, p1, p0);
        auto marginals = propagate_forward(sol.chain);
        for (int s = 0; s < 2; ++s) {
            auto q = reverse_kernel(sol.chain, marginals, 1 - s);
            for (int j = 0; j < 2; ++j) {
                if (q.arbitrary_row[j]) continue;
                CHECK((q.rows.row(j) - swapped.chain.transitions[s].row(j))
                          .cwiseAbs()
                          .maxCoeff() < 1e-10);
            }
        }
    }
    SECTION("scaling the potentials leaves the transitions unchanged") {
        Rng rng(617);
        auto pr = random_chain(rng, 3, 2);
        Vector q0 = random_prob(rng, 3), q1 = random_prob(rng, 3);
        auto sol = mep3_bridge(pr, q0, q1);
        for (double c : {0.5, 2.0, 10.0}) {
            for (int t = 0; t < pr.horizon(); ++t) {
                Matrix P(3, 3);
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        P(i, j) = pr.transitions[t](i, j) * (c * sol.pair->phi(t + 1, j)) /
                                  (c * sol.pair->phi(t, i));
                CHECK((P - sol.chain.transitions[t]).cwiseAbs().maxCoeff() < 1e-12);
            }
        }
    }
    SECTION("endpoint coupling matches an independent Sinkhorn scaling") {
        Rng rng(618);
        for (int rep = 0; rep < 10; ++rep) {
            auto pr = random_chain(rng, 2 + rep % 4, 1 + rep % 4);
            const int n = pr.num_states();
            Vector q0 = random_prob(rng, n), q1 = random_prob(rng, n);
            auto pair = solve_schrodinger_system(pr, q0, q1);
            Matrix G = pr.transitions.front();
            for (std::size_t t = 1; t < pr.transitions.size(); ++t) G = G * pr.transitions[t];
            Vector u = pair.phihat.row(0).transpose();
            Vector v = pair.phi.row(pr.horizon()).transpose();
            Matrix M = u.asDiagonal() * G * v.asDiagonal();
            CHECK((M.rowwise().sum() - q0).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((M.colwise().sum().transpose() - q1).cwiseAbs().maxCoeff() < 1e-10);
            Matrix oracle = sinkhorn_coupling(G, q0, q1);
            CHECK((M - oracle).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("final-marginal problem") {
    SECTION("hand example") {
        auto prior = symmetric_chain(1);
        auto sol = mep1_solution(prior, dirac(2, 0));
        CHECK(sol.marginals[0](0) == Catch::Approx(0.75).margin(1e-12));
        CHECK(sol.marginals[0](1) == Catch::Approx(0.25).margin(1e-12));
        CHECK(sol.chain.transitions[0](0, 0) == Catch::Approx(1.0).margin(1e-12));
        CHECK(sol.chain.transitions[0](1, 0) == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("prior final marginal reproduces the prior") {
        auto prior = symmetric_chain(2);
        auto pi = propagate_forward(prior);
        auto sol = mep1_solution(prior, pi[2]);
        for (int t = 0; t < 2; ++t)
            CHECK((sol.chain.transitions[t] - prior.transitions[t]).cwiseAbs().maxCoeff() <
                  1e-12);
    }
    SECTION("reverse kernels equal the prior's") {
        Rng rng(717);
        for (int rep = 0; rep < 15; ++rep) {
            auto prior = random_chain(rng, 3, 3);
            Vector p1 = random_prob(rng, 3);
            auto sol = mep1_solution(prior, p1);
            auto qp = reverse_kernels(prior);
            auto qs = reverse_kernels(sol.chain);
            for (int t = 0; t < 3; ++t)
                for (int j = 0; j < 3; ++j) {
                    if (qs[t].arbitrary_row[j] || qp[t].arbitrary_row[j]) continue;
                    CHECK((qs[t].rows.row(j) - qp[t].rows.row(j)).cwiseAbs().maxCoeff() <
                          1e-11);
                }
        }
    }
    SECTION("cost equals the endpoint relative entropy") {
        auto prior = symmetric_chain(1);
        CHECK(ld_exponent_mep1(prior, dirac(2, 0)) ==
              Catch::Approx(std::log(2.0)).margin(1e-12));
        auto sol = mep1_solution(prior, dirac(2, 0));
        double direct = path_relative_entropy(enumerate_path_distribution(sol.chain),
                                              enumerate_path_distribution(prior));
        CHECK(direct == Catch::Approx(std::log(2.0)).margin(1e-12));
    }
    SECTION("support violation is infeasible") {
        ChainModel prior;
        prior.initial = dirac(2, 0);
        prior.transitions.push_back(Matrix::Identity(2, 2));
        CHECK_THROWS_AS(mep1_solution(prior, dirac(2, 1)), InfeasibleError);
    }
}

TEST_CASE("initial-marginal problem") {
    auto prior = symmetric_chain(1);
    SECTION("prior initial reproduces the prior") {
        auto sol = mep2_solution(prior, prior.initial);
        CHECK((sol.marginals[1] - propagate_forward(prior)[1]).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("hand example marginals and reverse-harmonic multiplier") {
        auto sol = mep2_solution(prior, dirac(2, 0));
        CHECK(sol.marginals[1](0) == Catch::Approx(0.75).margin(1e-12));
        CHECK(sol.marginals[1](1) == Catch::Approx(0.25).margin(1e-12));
        auto pi = propagate_forward(prior);
        SpaceTimeFunction theta{Matrix(2, 2)};
        for (int t = 0; t <= 1; ++t)
            for (int i = 0; i < 2; ++i) theta.values(t, i) = sol.marginals[t](i) / pi[t](i);
        CHECK(theta.values(0, 0) == Catch::Approx(2.0).margin(1e-12));
        CHECK(theta.values(1, 0) == Catch::Approx(1.5).margin(1e-12));
        CHECK(is_reverse_harmonic(theta, prior, 1e-12).ok);
    }
    SECTION("cost equals the initial relative entropy") {
        CHECK(ld_exponent_mep2(prior, dirac(2, 0)) ==
              Catch::Approx(std::log(2.0)).margin(1e-12));
        auto sol = mep2_solution(prior, dirac(2, 0));
        double direct = path_relative_entropy(enumerate_path_distribution(sol.chain),
                                              enumerate_path_distribution(prior));
        CHECK(direct == Catch::Approx(std::log(2.0)).margin(1e-12));
    }
}

TEST_CASE("existence diagnosis") {
    SECTION("positive kernel and positive endpoint") {
        auto prior = symmetric_chain(2);
        Vector p1(2);
        p1 << 0.3, 0.7;
        auto d = existence_check(prior, std::nullopt, p1);
        CHECK(d.feasibility == Feasibility::UniquenessGuaranteed);
    }
    SECTION("identity kernel blocks Dirac transport") {
        ChainModel prior;
        prior.initial = dirac(2, 0);
        prior.transitions.push_back(Matrix::Identity(2, 2));
        auto d = existence_check(prior, dirac(2, 0), dirac(2, 1));
        CHECK(d.feasibility == Feasibility::PossiblyInfeasible);
    }
    SECTION("Dirac endpoint weakens the uniqueness claim") {
        auto prior = symmetric_chain(2);
        auto d = existence_check(prior, std::nullopt, dirac(2, 1));
        CHECK(d.feasibility == Feasibility::SolvableNoUniquenessGuarantee);
    }
}

TEST_CASE("exponent formulas") {
    SECTION("zero at the prior's own marginals") {
        auto prior = symmetric_chain(2);
        auto pi = propagate_forward(prior);
        CHECK(ld_exponent_mep1(prior, pi[2]) == Catch::Approx(0.0).margin(1e-14));
        CHECK(ld_exponent_mep2(prior, pi[0]) == Catch::Approx(0.0).margin(1e-14));
    }
    SECTION("two-endpoint exponent equals exhaustive path entropy") {
        auto prior = symmetric_chain(2);
        Vector p0 = dirac(2, 0), p1 = dirac(2, 1);
        auto sol = mep3_bridge(prior, p0, p1);
        double formula = ld_exponent_mep3(prior, p0, p1, *sol.pair);
        double direct = path_relative_entropy(enumerate_path_distribution(sol.chain),
                                              enumerate_path_distribution(prior));
        CHECK(formula == Catch::Approx(direct).margin(1e-10));
    }
    SECTION("two-endpoint exponent on random instances, scale invariant") {
        Rng rng(818);
        for (int rep = 0; rep < 10; ++rep) {
            auto prior = random_chain(rng, 3, 3);
            Vector p0 = random_prob(rng, 3), p1 = random_prob(rng, 3);
            auto sol = mep3_bridge(prior, p0, p1);
            double formula = ld_exponent_mep3(prior, p0, p1, *sol.pair);
            double direct = path_relative_entropy(enumerate_path_distribution(sol.chain),
                                                  enumerate_path_distribution(prior));
            CHECK(formula == Catch::Approx(direct).margin(1e-10));
            HarmonicPair scaled = *sol.pair;
            scaled.phi *= 4.0;
            scaled.phihat /= 4.0;
            CHECK(ld_exponent_mep3(prior, p0, p1, scaled) ==
                  Catch::Approx(formula).margin(1e-10));
        }
    }
}

TEST_CASE("harmonic factorization") {
    auto prior1 = symmetric_chain(1);
    SECTION("final-marginal solution has trivial reverse factor") {
        auto sol = mep1_solution(prior1, dirac(2, 0));
        auto rep = harmonic_factorization(sol, prior1);
        CHECK((rep.xi.array() - 1.0).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(rep.phi(0, 0) == Catch::Approx(1.5).margin(1e-12));
        CHECK(rep.phi(0, 1) == Catch::Approx(0.5).margin(1e-12));
        CHECK(rep.phi(1, 0) == Catch::Approx(2.0).margin(1e-12));
        CHECK(rep.phi(1, 1) == Catch::Approx(0.0).margin(1e-12));
        CHECK(rep.max_identity_residual < 1e-12);
        CHECK(rep.phi_harmonic.ok);
    }
    SECTION("initial-marginal solution has trivial forward factor") {
        auto sol = mep2_solution(prior1, dirac(2, 0));
        auto rep = harmonic_factorization(sol, prior1);
        CHECK((rep.phi.array() - 1.0).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(rep.max_identity_residual < 1e-12);
        CHECK(rep.xi_reverse_harmonic.ok);
    }
    SECTION("two-endpoint factorization identity") {
        auto prior = symmetric_chain(2);
        auto sol = mep3_bridge(prior, dirac(2, 0), dirac(2, 1));
        auto rep = harmonic_factorization(sol, prior);
        CHECK(rep.max_identity_residual < 1e-10);
        CHECK(rep.phi_harmonic.ok);
    }
}
