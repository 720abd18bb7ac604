#pragma once

/// \file cdds/io.hpp
/// \brief JSON system descriptions and certificates.
///
/// A system file looks like
///
///     {
///       "dimensions": {"n": 1, "nu": 1, "m": 1, "q": 1, "d": 1},
///       "delay": 0.5,
///       "matrices": {"a1": [[0]], "a2": [[-1]], "a4": [[1]], "c1": [[1]], "d1": [[1]], ...},
///       "kernel": {"m_mat": [[0]], "f0": [1]},
///       "supply": {"preset": "hinf", "gamma": 10},
///       "simulation": {"x0": [1], "phi": [1]}
///     }
///
/// Matrices are nested rows or a flat row-major list. Zero-sized matrices may
/// be omitted. Every number may also be a string holding a decimal or a
/// rational "p/q". The kernel may be omitted when d = 1 (f == 1).

#include "cdds/blockmat.hpp"
#include "cdds/kernel.hpp"
#include "cdds/model.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cdds {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

/// Malformed input; `field` is a dotted path into the document.
class InputError : public std::runtime_error {
public:
    InputError(std::string field, const std::string& message)
        : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
    [[nodiscard]] const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct SimulationSetup {
    Vec x0;
    Vec phi;  ///< constant initial function
};

struct SystemDescription {
    CddsModel model;
    std::optional<SupplyRate> supply;
    SimulationSetup simulation;
};

namespace detail {

inline double parse_decimal(const std::string& text, const std::string& field) {
    double v = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    while (begin < end && *begin == ' ') ++begin;
    while (end > begin && end[-1] == ' ') --end;
    if (begin < end && *begin == '+') ++begin;
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end) throw InputError(field, "not a number: \"" + text + "\"");
    return v;
}

}  // namespace detail

/// Number literal: JSON number, decimal string or rational string "p/q".
inline double parse_number(const Json& j, const std::string& field) {
    if (j.is_number()) return j.get<double>();
    if (!j.is_string()) throw InputError(field, "expected a number");
    const auto s = j.get<std::string>();
    const auto slash = s.find('/');
    double v = 0.0;
    if (slash == std::string::npos) {
        v = detail::parse_decimal(s, field);
    } else {
        const double num = detail::parse_decimal(s.substr(0, slash), field);
        const double den = detail::parse_decimal(s.substr(slash + 1), field);
        if (den == 0.0) throw InputError(field, "zero denominator");
        v = num / den;
    }
    if (!std::isfinite(v)) throw InputError(field, "non-finite number");
    return v;
}

inline Mat parse_matrix(const Json& j, Index rows, Index cols, const std::string& field) {
    if (!j.is_array()) throw InputError(field, "expected an array");
    Mat out(rows, cols);
    const bool nested = !j.empty() && j.front().is_array();
    if (nested) {
        if (static_cast<Index>(j.size()) != rows) {
            throw InputError(field, "expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
        }
        for (Index i = 0; i < rows; ++i) {
            const auto& row = j[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
                throw InputError(field, "row " + std::to_string(i) + " must have " + std::to_string(cols) + " entries");
            }
            for (Index c = 0; c < cols; ++c) {
                out(i, c) = parse_number(row[static_cast<std::size_t>(c)],
                                         field + "[" + std::to_string(i) + "][" + std::to_string(c) + "]");
            }
        }
        return out;
    }
    if (static_cast<Index>(j.size()) != rows * cols) {
        throw InputError(field, "expected " + std::to_string(rows) + "x" + std::to_string(cols) + " = " +
                                    std::to_string(rows * cols) + " entries, got " + std::to_string(j.size()));
    }
    for (Index i = 0; i < rows; ++i) {
        for (Index c = 0; c < cols; ++c) {
            const auto k = static_cast<std::size_t>(i * cols + c);
            out(i, c) = parse_number(j[k], field + "[" + std::to_string(k) + "]");
        }
    }
    return out;
}

inline Vec parse_vector(const Json& j, Index size, const std::string& field) {
    if (!j.is_array()) throw InputError(field, "expected an array");
    if (static_cast<Index>(j.size()) != size) {
        throw InputError(field, "expected " + std::to_string(size) + " entries, got " + std::to_string(j.size()));
    }
    Vec v(size);
    for (Index i = 0; i < size; ++i) {
        v(i) = parse_number(j[static_cast<std::size_t>(i)], field + "[" + std::to_string(i) + "]");
    }
    return v;
}

namespace detail {

inline const Json& require(const Json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw InputError(path, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) throw InputError(path.empty() ? key : path + "." + key, "missing field");
    return *it;
}

inline Index parse_dim(const Json& dims, const char* key) {
    const Json& v = require(dims, key, "dimensions");
    const std::string field = std::string("dimensions.") + key;
    if (!v.is_number_integer()) throw InputError(field, "expected a non-negative integer");
    const auto value = v.get<long long>();
    if (value < 0 || value > 1000) throw InputError(field, "out of range");
    return static_cast<Index>(value);
}

inline SupplyRate parse_supply(const Json& j, Index m, Index q) {
    if (!j.is_object()) throw InputError("supply", "expected an object");
    if (j.contains("preset")) {
        const Json& preset = j["preset"];
        if (!preset.is_string() || preset.get<std::string>() != "hinf") {
            throw InputError("supply.preset", "only \"hinf\" is known");
        }
        const double gamma = parse_number(require(j, "gamma", "supply"), "supply.gamma");
        if (!(gamma > 0.0)) throw InputError("supply.gamma", "must be positive");
        return supply_hinf(gamma, m, q);
    }
    const Mat j1 = m > 0 ? parse_matrix(require(j, "j1", "supply"), m, m, "supply.j1") : Mat(0, 0);
    const Mat j2 = m * q > 0 ? parse_matrix(require(j, "j2", "supply"), m, q, "supply.j2") : Mat::Zero(m, q);
    const Mat j3 = q > 0 ? parse_matrix(require(j, "j3", "supply"), q, q, "supply.j3") : Mat(0, 0);
    if (max_abs(j1 - j1.transpose()) > 1e-12 * (1.0 + max_abs(j1))) throw InputError("supply.j1", "not symmetric");
    if (max_abs(j3 - j3.transpose()) > 1e-12 * (1.0 + max_abs(j3))) throw InputError("supply.j3", "not symmetric");
    try {
        return {SymMat(j1), j2, SymMat(j3)};
    } catch (const std::exception& e) {
        throw InputError("supply.j1", e.what());
    }
}

}  // namespace detail

/// Parses and validates a system description. Throws InputError naming the
/// offending field.
inline SystemDescription parse_system(const Json& doc) {
    using detail::require;
    if (!doc.is_object()) throw InputError("", "system file must be a JSON object");
    const Json& dims = require(doc, "dimensions", "");
    const Index n = detail::parse_dim(dims, "n");
    const Index nu = detail::parse_dim(dims, "nu");
    const Index m = detail::parse_dim(dims, "m");
    const Index q = detail::parse_dim(dims, "q");
    const Index d = dims.contains("d") ? detail::parse_dim(dims, "d") : 1;
    if (n < 1) throw InputError("dimensions.n", "must be >= 1");
    if (nu < 1) throw InputError("dimensions.nu", "must be >= 1");
    if (d < 1) throw InputError("dimensions.d", "must be >= 1");
    const double r = parse_number(require(doc, "delay", ""), "delay");
    if (!(r > 0.0)) throw InputError("delay", "must be positive");

    DelayKernel kernel = DelayKernel::constant(r);
    if (doc.contains("kernel")) {
        const Json& k = doc["kernel"];
        kernel.m_mat = parse_matrix(require(k, "m_mat", "kernel"), d, d, "kernel.m_mat");
        kernel.f0 = parse_vector(require(k, "f0", "kernel"), d, "kernel.f0");
    } else if (d != 1) {
        throw InputError("kernel", "missing field (required when d > 1)");
    }

    SystemDescription out;
    CddsModel& s = out.model;
    s = make_model(n, nu, m, q, kernel);
    const Json& mats = require(doc, "matrices", "");
    if (!mats.is_object()) throw InputError("matrices", "expected an object");
    const Index rho = nu * d;
    struct Slot {
        const char* name;
        Mat* dst;
        Index rows, cols;
    };
    const Slot slots[] = {{"a1", &s.a1, n, n},  {"a2", &s.a2, n, nu}, {"a3", &s.a3, n, rho},  {"a4", &s.a4, nu, n},
                          {"a5", &s.a5, nu, nu}, {"c1", &s.c1, m, n},  {"c2", &s.c2, m, nu},  {"c3", &s.c3, m, rho},
                          {"d1", &s.d1, n, q},  {"d2", &s.d2, m, q}};
    for (const auto& slot : slots) {
        const std::string field = std::string("matrices.") + slot.name;
        if (!mats.contains(slot.name)) {
            if (slot.rows * slot.cols == 0) continue;
            throw InputError(field, "missing field (expected " + std::to_string(slot.rows) + "x" +
                                        std::to_string(slot.cols) + ")");
        }
        *slot.dst = parse_matrix(mats[slot.name], slot.rows, slot.cols, field);
    }
    for (const auto& [key, value] : mats.items()) {
        bool known = false;
        for (const auto& slot : slots) known = known || key == slot.name;
        if (!known) throw InputError("matrices." + key, "unknown matrix");
    }
    const auto problems = validate(s);
    if (!problems.empty()) {
        const auto& v = problems.front();
        const bool is_matrix = v.field.size() == 2 && (v.field[0] == 'a' || v.field[0] == 'c' || v.field[0] == 'd');
        throw InputError(is_matrix ? "matrices." + v.field : v.field, v.message);
    }

    if (doc.contains("supply")) out.supply = detail::parse_supply(doc["supply"], m, q);

    out.simulation.x0 = Vec::Zero(n);
    out.simulation.phi = Vec::Zero(nu);
    if (doc.contains("simulation")) {
        const Json& sim = doc["simulation"];
        if (sim.contains("x0")) out.simulation.x0 = parse_vector(sim["x0"], n, "simulation.x0");
        if (sim.contains("phi")) out.simulation.phi = parse_vector(sim["phi"], nu, "simulation.phi");
    }
    return out;
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("", "cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw InputError("", path + ": " + e.what());
    }
}

inline SystemDescription load_system(const std::string& path) { return parse_system(read_json_file(path)); }

inline Json matrix_to_json(const Mat& a) {
    Json rows = Json::array();
    for (Index i = 0; i < a.rows(); ++i) {
        Json row = Json::array();
        for (Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Doubles are written in shortest round-trip form (at most 17 significant
/// digits), so a parsed certificate is bit-identical to the original.
inline OrderedJson certificate_to_json(const Certificate& cert, std::uint64_t model_hash_value) {
    char hash[24];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(model_hash_value));
    OrderedJson j;
    j["theorem"] = cert.theorem;
    j["model_hash"] = hash;
    j["margin"] = cert.margin;
    j["p"] = matrix_to_json(cert.p.mat());
    j["s"] = matrix_to_json(cert.s.mat());
    j["u"] = matrix_to_json(cert.u.mat());
    if (cert.y) j["y"] = matrix_to_json(*cert.y);
    return j;
}

inline Certificate certificate_from_json(const Json& j, const CddsModel& model) {
    using detail::require;
    Certificate c;
    const Index np = model.n + model.rho();
    const Json& th = require(j, "theorem", "");
    if (!th.is_number_integer() || (th.get<int>() != 1 && th.get<int>() != 2)) {
        throw InputError("theorem", "expected 1 or 2");
    }
    c.theorem = th.get<int>();
    if (j.contains("margin")) c.margin = parse_number(j["margin"], "margin");
    const Mat p = parse_matrix(require(j, "p", ""), np, np, "p");
    const Mat s = parse_matrix(require(j, "s", ""), model.nu, model.nu, "s");
    const Mat u = parse_matrix(require(j, "u", ""), model.nu, model.nu, "u");
    for (const auto& [name, x] : {std::pair<const char*, const Mat*>{"p", &p}, {"s", &s}, {"u", &u}}) {
        if (max_abs(*x - x->transpose()) > 1e-12 * (1.0 + max_abs(*x))) throw InputError(name, "not symmetric");
    }
    c.p = SymMat(p);
    c.s = SymMat(s);
    c.u = SymMat(u);
    if (j.contains("y")) {
        const Json& y = j["y"];
        if (!y.is_array() || y.empty() || !y.front().is_array()) throw InputError("y", "expected nested rows");
        c.y = parse_matrix(y, static_cast<Index>(y.size()), model.n, "y");
    }
    return c;
}

/// FNV-1a over the certificate's matrices.
inline std::string certificate_digest(const Certificate& cert) {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&h](const Mat& x) {
        const Index dims[2] = {x.rows(), x.cols()};
        const auto* b = reinterpret_cast<const unsigned char*>(dims);
        for (std::size_t i = 0; i < sizeof(dims); ++i) h = (h ^ b[i]) * 1099511628211ULL;
        b = reinterpret_cast<const unsigned char*>(x.data());
        for (std::size_t i = 0; i < sizeof(double) * static_cast<std::size_t>(x.size()); ++i) {
            h = (h ^ b[i]) * 1099511628211ULL;
        }
    };
    feed(cert.p.mat());
    feed(cert.s.mat());
    feed(cert.u.mat());
    if (cert.y) feed(*cert.y);
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace cdds
