#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sbridge/chain.hpp"
#include "sbridge/qpath.hpp"
#include "sbridge/quantum.hpp"

// File formats: "v1" JSON schemas for chain and quantum models, job specs
// and canonical serialization. Complex numbers are [re, im] pairs; complex
// matrices are row-major arrays of pairs.

namespace sbridge {

using Json = nlohmann::ordered_json;

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace io_detail {

inline const Json& require(const Json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key))
        throw ParseError("missing field '" + key + "' at " + where);
    return j.at(key);
}

inline Vector parse_vector(const Json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError("expected array at " + where);
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ParseError("expected number at " + where + "/" +
                                                std::to_string(i));
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline Matrix parse_matrix(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ParseError("expected matrix rows at " + where);
    const std::size_t n = j.size();
    Matrix M(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!j[i].is_array() || j[i].size() != n)
            throw ParseError("expected square matrix at " + where + "/" + std::to_string(i));
        for (std::size_t k = 0; k < n; ++k)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                j[i][k].get<double>();
    }
    return M;
}

// row-major flat array of [re, im] pairs
inline CMatrix parse_cmatrix(const Json& j, int dim, const std::string& where) {
    if (!j.is_array() || j.size() != static_cast<std::size_t>(dim) * dim)
        throw ParseError("expected " + std::to_string(dim * dim) + " complex entries at " +
                         where);
    CMatrix M(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) {
            const Json& e = j[static_cast<std::size_t>(i) * dim + k];
            if (!e.is_array() || e.size() != 2)
                throw ParseError("expected [re, im] pair at " + where + "/" +
                                 std::to_string(i * dim + k));
            M(i, k) = Complex(e[0].get<double>(), e[1].get<double>());
        }
    return M;
}

inline Json dump_vector(const Vector& v) {
    Json j = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

inline Json dump_matrix(const Matrix& M) {
    Json j = Json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
        j.push_back(row);
    }
    return j;
}

inline Json dump_cmatrix(const CMatrix& M) {
    Json j = Json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index k = 0; k < M.cols(); ++k)
            j.push_back(Json::array({M(i, k).real(), M(i, k).imag()}));
    return j;
}

inline void check_version(const Json& j, const std::string& where) {
    if (require(j, "version", where).get<std::string>() != "v1")
        throw ParseError("unsupported schema version at " + where + "/version");
}

}  // namespace io_detail

struct ParsedChain {
    std::vector<std::string> states;  // external labels, index order
    ChainModel chain;
};

using ParsedModel = std::variant<ParsedChain, QuantumPathModel>;

inline ParsedChain parse_chain_model(const Json& j) {
    using namespace io_detail;
    check_version(j, "");
    ParsedChain out;
    const Json& states = require(j, "states", "");
    for (const auto& s : states) out.states.push_back(s.get<std::string>());
    const int T = require(j, "T", "").get<int>();
    out.chain.initial = parse_vector(require(j, "initial", ""), "/initial");
    if (out.chain.initial.size() != static_cast<Eigen::Index>(out.states.size()))
        throw ValidationError("initial length does not match states at /initial");
    if (!is_prob_vector(out.chain.initial))
        throw ValidationError("invariant 'prob-vector' violated at /initial");
    const Json& transitions = require(j, "transitions", "");
    if (static_cast<int>(transitions.size()) != T)
        throw ValidationError("invariant 'horizon' violated at /transitions: expected " +
                              std::to_string(T) + " matrices");
    for (std::size_t t = 0; t < transitions.size(); ++t) {
        const std::string where = "/transitions/" + std::to_string(t);
        Matrix P = parse_matrix(transitions[t], where);
        if (P.rows() != out.chain.initial.size())
            throw ValidationError("invariant 'dimension' violated at " + where);
        for (Eigen::Index i = 0; i < P.rows(); ++i) {
            if ((P.row(i).array() < -kStochTol).any() ||
                std::abs(P.row(i).sum() - 1.0) > kStochTol * (P.cols() + 1))
                throw ValidationError("invariant 'row-sum' violated at " + where + "/" +
                                      std::to_string(i));
        }
        out.chain.transitions.push_back(P);
    }
    return out;
}

inline QuantumPathModel parse_quantum_model(const Json& j) {
    using namespace io_detail;
    check_version(j, "");
    QuantumPathModel model;
    const int dim = require(j, "dim", "").get<int>();
    model.sigma0.matrix = parse_cmatrix(require(j, "sigma0", ""), dim, "/sigma0");
    try {
        model.sigma0.validate();
    } catch (const ModelError& e) {
        throw ValidationError(std::string("invariant 'density' violated at /sigma0: ") +
                              e.what());
    }
    const Json& kraus = require(j, "kraus", "");
    for (std::size_t t = 0; t < kraus.size(); ++t) {
        KrausMap E;
        for (std::size_t k = 0; k < kraus[t].size(); ++k)
            E.operators.push_back(parse_cmatrix(
                kraus[t][k], dim, "/kraus/" + std::to_string(t) + "/" + std::to_string(k)));
        if (!E.is_quantum_operation())
            throw ValidationError("invariant 'quantum-operation' violated at /kraus/" +
                                  std::to_string(t));
        model.maps.push_back(std::move(E));
    }
    const Json& obs = require(j, "observables", "");
    for (std::size_t t = 0; t < obs.size(); ++t) {
        const std::string where = "/observables/" + std::to_string(t);
        CMatrix H = parse_cmatrix(obs[t], dim, where);
        if (!is_hermitian(H))
            throw ValidationError("invariant 'hermitian' violated at " + where);
        model.observables.push_back(spectral_decompose(H));
    }
    try {
        model.validate();
    } catch (const ModelError& e) {
        throw ValidationError(std::string("invariant violated: ") + e.what());
    }
    return model;
}

inline ParsedModel parse_model(const Json& j) {
    const std::string type = io_detail::require(j, "type", "").get<std::string>();
    if (type == "chain") return parse_chain_model(j);
    if (type == "quantum") return parse_quantum_model(j);
    throw ParseError("unknown model type '" + type + "' at /type");
}

inline ParsedModel parse_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw ParseError("malformed JSON in " + path + ": " + e.what());
    }
    return parse_model(j);
}

// Canonical serialization (round-trips through parse_chain_model).
inline Json dump_chain_model(const ParsedChain& parsed) {
    using namespace io_detail;
    Json j;
    j["version"] = "v1";
    j["type"] = "chain";
    j["states"] = parsed.states;
    j["T"] = parsed.chain.horizon();
    j["initial"] = dump_vector(parsed.chain.initial);
    Json trans = Json::array();
    for (const Matrix& P : parsed.chain.transitions) trans.push_back(dump_matrix(P));
    j["transitions"] = trans;
    return j;
}

struct JobSpec {
    std::string kind;
    std::string model_path;
    Json raw;  // full job document for kind-specific fields
    std::uint64_t seed = 0;
    double tol = 1e-12;
    int max_iter = 100000;
    std::string output_path;
};

inline JobSpec parse_job_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open job file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw ParseError("malformed JSON in " + path + ": " + e.what());
    }
    io_detail::check_version(j, "");
    JobSpec spec;
    spec.kind = io_detail::require(j, "kind", "").get<std::string>();
    spec.model_path = io_detail::require(j, "model", "").get<std::string>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("tol")) spec.tol = j["tol"].get<double>();
    if (j.contains("max_iter")) spec.max_iter = j["max_iter"].get<int>();
    if (j.contains("output")) spec.output_path = j["output"].get<std::string>();
    spec.raw = j;
    return spec;
}

}  // namespace sbridge
