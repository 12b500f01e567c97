// File-driven front end: parse a job file, dispatch to the owning solver and
// emit a machine-readable JSON report.
//
// Exit codes: 0 success, 1 parse/validation error, 2 infeasibility.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sbridge/bridge.hpp"
#include "sbridge/io.hpp"
#include "sbridge/path_oracle.hpp"
#include "sbridge/qpath.hpp"
#include "sbridge/reversal.hpp"

namespace fs = std::filesystem;
using namespace sbridge;

namespace {

Json solution_to_json(const BridgeSolution& sol) {
    Json j;
    j["initial"] = io_detail::dump_vector(sol.chain.initial);
    Json trans = Json::array();
    for (const Matrix& P : sol.chain.transitions) trans.push_back(io_detail::dump_matrix(P));
    j["transitions"] = trans;
    Json marg = Json::array();
    for (const Vector& m : sol.marginals) marg.push_back(io_detail::dump_vector(m));
    j["marginals"] = marg;
    Json flags = Json::array();
    for (const auto& row : sol.flagged) {
        Json f = Json::array();
        for (bool b : row) f.push_back(b);
        flags.push_back(f);
    }
    j["flagged_rows"] = flags;
    return j;
}

Json kraus_to_json(const KrausMap& E) {
    Json j = Json::array();
    for (const CMatrix& M : E.operators) j.push_back(io_detail::dump_cmatrix(M));
    return j;
}

const ParsedChain& as_chain(const ParsedModel& model) {
    if (!std::holds_alternative<ParsedChain>(model))
        throw ValidationError("job requires a chain model");
    return std::get<ParsedChain>(model);
}

const QuantumPathModel& as_quantum(const ParsedModel& model) {
    if (!std::holds_alternative<QuantumPathModel>(model))
        throw ValidationError("job requires a quantum model");
    return std::get<QuantumPathModel>(model);
}

Vector job_vector(const JobSpec& spec, const std::string& key) {
    return io_detail::parse_vector(io_detail::require(spec.raw, key, ""), "/" + key);
}

Json run_job(const JobSpec& spec, const ParsedModel& model) {
    Json report;
    report["version"] = "v1";
    report["kind"] = spec.kind;
    report["inputs"] = spec.raw;
    report["tolerances"] = {{"tol", spec.tol}, {"max_iter", spec.max_iter},
                            {"stochastic", kStochTol}};
    SolverConfig cfg{spec.tol, spec.max_iter};

    if (spec.kind == "mep1") {
        const ParsedChain& parsed = as_chain(model);
        const Vector p1 = job_vector(spec, "p1");
        BridgeSolution sol = mep1_solution(parsed.chain, p1);
        report["solution"] = solution_to_json(sol);
        report["entropy"] = {{"cost", ld_exponent_mep1(parsed.chain, p1)}};
        auto fact = harmonic_factorization(sol, parsed.chain);
        report["diagnostics"] = {{"factorization_residual", fact.max_identity_residual},
                                 {"phi_harmonic", fact.phi_harmonic.ok}};
    } else if (spec.kind == "mep2") {
        const ParsedChain& parsed = as_chain(model);
        const Vector p0 = job_vector(spec, "p0");
        BridgeSolution sol = mep2_solution(parsed.chain, p0);
        report["solution"] = solution_to_json(sol);
        report["entropy"] = {{"cost", ld_exponent_mep2(parsed.chain, p0)}};
        auto fact = harmonic_factorization(sol, parsed.chain);
        report["diagnostics"] = {{"factorization_residual", fact.max_identity_residual},
                                 {"xi_reverse_harmonic", fact.xi_reverse_harmonic.ok}};
    } else if (spec.kind == "mep3") {
        const ParsedChain& parsed = as_chain(model);
        const Vector p0 = job_vector(spec, "p0");
        const Vector p1 = job_vector(spec, "p1");
        BridgeSolution sol = mep3_bridge(parsed.chain, p0, p1, cfg);
        report["solution"] = solution_to_json(sol);
        report["entropy"] = {
            {"cost", ld_exponent_mep3(parsed.chain, p0, p1, *sol.pair)}};
        report["diagnostics"] = {{"iterations", sol.diagnostics.iterations},
                                 {"boundary_residual", sol.diagnostics.boundary_residual},
                                 {"final_change", sol.diagnostics.final_change}};
        auto diag = existence_check(parsed.chain, p0, p1);
        report["diagnostics"]["existence"] = diag.message;
    } else if (spec.kind == "enumerate") {
        const ParsedChain& parsed = as_chain(model);
        PathTable table = enumerate_path_distribution(parsed.chain);
        report["solution"] = {{"weights", table.w}, {"total_mass", table.total_mass()}};
        Json marg = Json::array();
        for (int t = 0; t <= table.T; ++t)
            marg.push_back(io_detail::dump_vector(table.marginal(t)));
        report["solution"]["marginals"] = marg;
    } else if (spec.kind == "verify") {
        const ParsedChain& parsed = as_chain(model);
        const std::string problem =
            io_detail::require(spec.raw, "problem", "").get<std::string>();
        const int trials = spec.raw.value("trials", 1000);
        OptimalityReport rep;
        if (problem == "mep1") {
            const Vector p1 = job_vector(spec, "p1");
            rep = verify_mep1_optimality(parsed.chain, p1, mep1_solution(parsed.chain, p1),
                                         trials, spec.seed);
        } else if (problem == "mep2") {
            const Vector p0 = job_vector(spec, "p0");
            rep = verify_mep2_optimality(parsed.chain, p0, mep2_solution(parsed.chain, p0),
                                         trials, spec.seed);
        } else if (problem == "mep3") {
            const Vector p0 = job_vector(spec, "p0");
            const Vector p1 = job_vector(spec, "p1");
            rep = verify_mep3_optimality(parsed.chain, p0, p1,
                                         mep3_bridge(parsed.chain, p0, p1, cfg), trials,
                                         spec.seed, cfg);
        } else {
            throw ValidationError("verify: unknown problem '" + problem + "'");
        }
        report["solution"] = {{"trials", rep.trials},
                              {"violations", rep.violations},
                              {"min_gap", rep.min_gap},
                              {"candidate_cost", rep.candidate_cost}};
    } else if (spec.kind == "sanov-demo") {
        const ParsedChain& parsed = as_chain(model);
        const Vector target = job_vector(spec, "target");
        const double delta = spec.raw.value("delta", 0.05);
        const long replicates = spec.raw.value("replicates", 100000L);
        std::vector<int> grid;
        for (const auto& n : io_detail::require(spec.raw, "n_grid", ""))
            grid.push_back(n.get<int>());
        SanovDemo demo = sanov_demo(parsed.chain, target, delta, grid, replicates, spec.seed);
        report["entropy"] = {{"exponent", demo.exponent}};
        Json cells = Json::array();
        for (const SanovCell& c : demo.cells)
            cells.push_back({{"n", c.n},
                             {"hits", c.hits},
                             {"replicates", c.replicates},
                             {"censored", c.censored},
                             {"empirical_rate", c.empirical_rate}});
        report["solution"] = {{"cells", cells}};
    } else if (spec.kind == "qreverse") {
        const QuantumPathModel& qm = as_quantum(model);
        const int step = spec.raw.value("step", 0);
        DensityMatrix rho = qm.sigma0;
        if (spec.raw.contains("rho"))
            rho.matrix =
                io_detail::parse_cmatrix(spec.raw["rho"], qm.dim(), "/rho");
        ReversalResult rev = petz_reversal(qm.maps.at(step), rho);
        KrausMap tp = augment_to_tp(rev.map);
        ReversalReport check = verify_reversal(qm.maps.at(step), rho);
        report["solution"] = {{"kraus", kraus_to_json(rev.map)},
                              {"kraus_tp", kraus_to_json(tp)}};
        report["diagnostics"] = {{"rank_next", rev.rank_next},
                                 {"pinv_cutoff", rev.pinv_cutoff},
                                 {"tp_defect", rev.defect_before},
                                 {"recovery_residual", check.recovery_residual},
                                 {"consistency_residual", check.consistency_residual},
                                 {"classical_residual", check.classical_residual}};
    } else if (spec.kind == "qmep1") {
        const QuantumPathModel& qm = as_quantum(model);
        DensityMatrix rho_bar;
        rho_bar.matrix =
            io_detail::parse_cmatrix(io_detail::require(spec.raw, "rho_bar", ""), qm.dim(),
                                     "/rho_bar");
        QMep1Solution sol = qmep1_solve(qm, rho_bar);
        Json maps = Json::array();
        for (const KrausMap& F : sol.model.maps) maps.push_back(kraus_to_json(F));
        report["solution"] = {{"initial", io_detail::dump_cmatrix(sol.model.sigma0.matrix)},
                              {"kraus", maps}};
        report["entropy"] = {{"cost", sol.cost}};
        report["diagnostics"] = {{"harmonic_residual", sol.harmonic_check.max_residual},
                                 {"final_observable_replaced", sol.final_observable_replaced}};
    } else if (spec.kind == "qmep2") {
        const QuantumPathModel& qm = as_quantum(model);
        DensityMatrix rho_bar;
        rho_bar.matrix =
            io_detail::parse_cmatrix(io_detail::require(spec.raw, "rho_bar", ""), qm.dim(),
                                     "/rho_bar");
        QMep2Solution sol = qmep2_solve(qm, rho_bar);
        Json maps = Json::array();
        for (const KrausMap& F : sol.model.maps) maps.push_back(kraus_to_json(F));
        report["solution"] = {{"initial", io_detail::dump_cmatrix(sol.model.sigma0.matrix)},
                              {"kraus", maps}};
        report["entropy"] = {{"cost", sol.cost}, {"bound", sol.bound}};
    } else {
        throw ValidationError("unknown job kind '" + spec.kind + "'");
    }
    return report;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Path-space maximum-entropy solver for Markov chains and quantum channels"};
    std::string job_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    std::optional<int> max_iter;
    app.add_option("--job", job_path, "job file (JSON, schema v1)")->required();
    app.add_option("--out", out_path, "report output file (default: job's output field)");
    app.add_option("--seed", seed, "override RNG seed");
    app.add_option("--tol", tol, "override solver tolerance");
    app.add_option("--max-iter", max_iter, "override solver iteration cap");
    CLI11_PARSE(app, argc, argv);

    try {
        JobSpec spec = parse_job_file(job_path);
        if (seed) spec.seed = *seed;
        if (tol) spec.tol = *tol;
        if (max_iter) spec.max_iter = *max_iter;
        if (!out_path.empty()) spec.output_path = out_path;

        // model path is resolved relative to the job file
        fs::path model_path(spec.model_path);
        if (model_path.is_relative())
            model_path = fs::path(job_path).parent_path() / model_path;
        ParsedModel model = parse_model_file(model_path.string());

        Json report = run_job(spec, model);
        if (spec.output_path.empty()) {
            std::cout << report.dump(2) << "\n";
        } else {
            std::ofstream out(spec.output_path);
            if (!out) throw ParseError("cannot open output file: " + spec.output_path);
            out << report.dump(2) << "\n";
        }
        return 0;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
