// SPDX-License-Identifier: Apache-2.0
//
// deteq: deterministic equivalents for multi-hop relay and double-scattering channels
// Copyright (C) 2026 The deteq authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "channel_sim.hpp"
#include "error.hpp"
#include "mac.hpp"
#include "monte_carlo.hpp"
#include "relay.hpp"
#include "setups.hpp"

namespace deteq::experiment {

using json = nlohmann::json;

enum class Model { relay, mac, rayleigh_product };
enum class Units { nats, bits };
enum class Format { csv, json };

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNonConvergence = 3;

struct Grid {
    std::string variable;
    std::vector<double> values;
};

struct McSpec {
    int trials = 0;
    std::uint64_t seed = 0;
};

struct WaterfillSpec {
    std::vector<double> budgets;
    double eps = 1e-8;
};

struct OutputSpec {
    std::string path;
    Format format = Format::csv;
};

// Relay budgets are rho_k = rho_scale[k] * rho_0, with rho_0 taken from the sweep.
struct RelaySpec {
    std::vector<int> dims;
    std::vector<double> alphas;
    std::vector<double> rho_scale;
    int max_hops = 8;

    RelayConfig at(double rho0) const {
        RelayConfig cfg;
        cfg.dims = dims;
        cfg.alphas = alphas;
        cfg.max_hops = max_hops;
        for (double s : rho_scale)
            cfg.rhos.push_back(s * rho0);
        return cfg;
    }
};

struct RayleighSpec {
    int N = 0, S = 0, K = 0;
};

struct ExperimentSpec {
    Model model = Model::relay;
    RelaySpec relay;
    MacConfig mac;
    RayleighSpec rayleigh;
    Grid sweep;
    std::optional<McSpec> mc;
    std::optional<WaterfillSpec> waterfill;
    OutputSpec output;
    Units units = Units::nats;
};

// Command-line overrides applied on top of a spec.
struct RunOptions {
    std::optional<Units> units;
    std::optional<double> tol;
    std::optional<int> max_iter;
    int threads = 0;
};

// ---------------------------------------------------------------------------
// Parsing and validation

class Diagnostics {
public:
    void error(const std::string &path, const std::string &msg) { errors_.push_back(path + ": " + msg); }
    bool ok() const { return errors_.empty(); }
    const std::vector<std::string> &errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

namespace detail {

inline std::string join(const std::string &base, const std::string &key) {
    return base.empty() ? key : base + "." + key;
}

inline std::string index(const std::string &base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

inline std::optional<double> number(const json &obj, const std::string &key, const std::string &path,
                                    Diagnostics &d, bool required = true) {
    if (!obj.contains(key)) {
        if (required)
            d.error(join(path, key), "missing required number");
        return std::nullopt;
    }
    const json &v = obj.at(key);
    if (!v.is_number()) {
        d.error(join(path, key), "expected a number");
        return std::nullopt;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        d.error(join(path, key), "must be finite");
        return std::nullopt;
    }
    return x;
}

inline std::optional<long long> integer(const json &obj, const std::string &key, const std::string &path,
                                        Diagnostics &d, bool required = true) {
    if (!obj.contains(key)) {
        if (required)
            d.error(join(path, key), "missing required integer");
        return std::nullopt;
    }
    const json &v = obj.at(key);
    if (!v.is_number_integer()) {
        d.error(join(path, key), "expected an integer");
        return std::nullopt;
    }
    return v.get<long long>();
}

inline std::optional<std::vector<double>> number_list(const json &obj, const std::string &key,
                                                      const std::string &path, Diagnostics &d) {
    if (!obj.contains(key)) {
        d.error(join(path, key), "missing required list of numbers");
        return std::nullopt;
    }
    const json &v = obj.at(key);
    if (!v.is_array()) {
        d.error(join(path, key), "expected a list of numbers");
        return std::nullopt;
    }
    std::vector<double> out;
    bool good = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
            d.error(index(join(path, key), i), "expected a finite number");
            good = false;
            continue;
        }
        out.push_back(v[i].get<double>());
    }
    return good ? std::optional(out) : std::nullopt;
}

inline std::optional<std::string> text(const json &obj, const std::string &key, const std::string &path,
                                       Diagnostics &d, bool required = true) {
    if (!obj.contains(key)) {
        if (required)
            d.error(join(path, key), "missing required string");
        return std::nullopt;
    }
    if (!obj.at(key).is_string()) {
        d.error(join(path, key), "expected a string");
        return std::nullopt;
    }
    return obj.at(key).get<std::string>();
}

inline const json *object(const json &obj, const std::string &key, const std::string &path, Diagnostics &d,
                          bool required = true) {
    if (!obj.contains(key)) {
        if (required)
            d.error(join(path, key), "missing required object");
        return nullptr;
    }
    if (!obj.at(key).is_object()) {
        d.error(join(path, key), "expected an object");
        return nullptr;
    }
    return &obj.at(key);
}

// Matrix descriptors:
//   {"type": "G", "phi": <rad> | "phi_over_pi": <x>, "d": <spacing>, "n": <size>}
//   {"type": "identity", "n": <size>, "scale": <optional factor>}
//   {"type": "diag", "values": [...]}
//   {"type": "dense", "re": [[...]], "im": [[...]] (optional)}
inline std::optional<ComplexMatrix> matrix(const json &j, const std::string &path, Diagnostics &d) {
    if (!j.is_object()) {
        d.error(path, "expected a matrix descriptor object");
        return std::nullopt;
    }
    const auto type = text(j, "type", path, d);
    if (!type)
        return std::nullopt;
    if (*type == "G") {
        std::optional<double> phi;
        if (j.contains("phi_over_pi")) {
            if (auto x = number(j, "phi_over_pi", path, d))
                phi = *x * std::numbers::pi;
        } else {
            phi = number(j, "phi", path, d);
        }
        const auto dd = number(j, "d", path, d);
        const auto n = integer(j, "n", path, d);
        if (n && *n < 1)
            d.error(join(path, "n"), "must be >= 1");
        if (!phi || !dd || !n || *n < 1)
            return std::nullopt;
        return correlation_matrix_G(*phi, *dd, static_cast<int>(*n));
    }
    if (*type == "identity") {
        const auto n = integer(j, "n", path, d);
        const auto scale = number(j, "scale", path, d, false);
        if (n && *n < 1)
            d.error(join(path, "n"), "must be >= 1");
        if (!n || *n < 1)
            return std::nullopt;
        return ComplexMatrix::Identity(*n, *n) * scale.value_or(1.0);
    }
    if (*type == "diag") {
        const auto v = number_list(j, "values", path, d);
        if (!v)
            return std::nullopt;
        if (v->empty()) {
            d.error(join(path, "values"), "must not be empty");
            return std::nullopt;
        }
        ComplexMatrix m = ComplexMatrix::Zero(static_cast<Index>(v->size()), static_cast<Index>(v->size()));
        for (std::size_t i = 0; i < v->size(); ++i)
            m(static_cast<Index>(i), static_cast<Index>(i)) = (*v)[i];
        return m;
    }
    if (*type == "dense") {
        const auto rows = [&](const std::string &key, bool required) -> std::optional<std::vector<std::vector<double>>> {
            if (!j.contains(key)) {
                if (required)
                    d.error(join(path, key), "missing required list of rows");
                return std::nullopt;
            }
            const json &v = j.at(key);
            if (!v.is_array() || v.empty()) {
                d.error(join(path, key), "expected a nonempty list of rows");
                return std::nullopt;
            }
            std::vector<std::vector<double>> out;
            for (std::size_t r = 0; r < v.size(); ++r) {
                Diagnostics local;
                const json wrapper = {{"row", v[r]}};
                auto row = number_list(wrapper, "row", index(join(path, key), r), local);
                if (!local.ok()) {
                    for (const auto &e : local.errors())
                        d.error(index(join(path, key), r), e.substr(e.find(": ") + 2));
                    return std::nullopt;
                }
                out.push_back(*row);
            }
            return out;
        };
        const auto re = rows("re", true);
        const auto im = rows("im", false);
        if (!re)
            return std::nullopt;
        const std::size_t r = re->size(), c = re->front().size();
        for (std::size_t i = 0; i < r; ++i)
            if ((*re)[i].size() != c) {
                d.error(index(join(path, "re"), i), "rows must have equal length");
                return std::nullopt;
            }
        if (im && (im->size() != r || std::any_of(im->begin(), im->end(), [&](const auto &x) { return x.size() != c; }))) {
            d.error(join(path, "im"), "must have the same shape as re");
            return std::nullopt;
        }
        ComplexMatrix m(static_cast<Index>(r), static_cast<Index>(c));
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t k = 0; k < c; ++k)
                m(static_cast<Index>(i), static_cast<Index>(k)) = {(*re)[i][k], im ? (*im)[i][k] : 0.0};
        return m;
    }
    d.error(join(path, "type"), "unknown matrix type '" + *type + "' (expected G, identity, diag or dense)");
    return std::nullopt;
}

inline void parse_relay(const json &cfg, ExperimentSpec &spec, Diagnostics &d) {
    const std::string p = "config";
    if (auto dims = number_list(cfg, "dims", p, d)) {
        for (std::size_t i = 0; i < dims->size(); ++i) {
            const double v = (*dims)[i];
            if (v != std::floor(v))
                d.error(index("config.dims", i), "antenna counts must be integers");
            spec.relay.dims.push_back(static_cast<int>(v));
        }
    }
    if (auto a = number_list(cfg, "alphas", p, d))
        spec.relay.alphas = *a;
    if (auto r = number_list(cfg, "rho_scale", p, d))
        spec.relay.rho_scale = *r;
    if (auto cap = integer(cfg, "max_hops", p, d, false))
        spec.relay.max_hops = static_cast<int>(*cap);

    // Semantic checks are delegated to RelayConfig with a unit source budget.
    const RelayConfig probe = spec.relay.at(1.0);
    const int K = probe.hops();
    if (K > probe.max_hops) {
        d.error("config.alphas", std::to_string(K) + " hops exceed the recursion cap config.max_hops = " +
                                     std::to_string(probe.max_hops) + " (raise config.max_hops to allow deeper chains)");
    }
    for (const auto &v : probe.violations()) {
        if (v.rfind("hops:", 0) == 0)
            continue;
        const std::string field = v.substr(0, v.find(':'));
        std::string msg = v.substr(v.find(':') + 2);
        std::string path = "config." + field;
        if (field.rfind("rhos", 0) == 0) {
            path = "config.rho_scale" + field.substr(4);
            if (msg.find("expected") != std::string::npos)
                msg = "expected one budget factor per hop (" + std::to_string(K) + ")";
        }
        d.error(path, msg);
    }
}

inline void parse_mac(const json &cfg, ExperimentSpec &spec, Diagnostics &d) {
    const std::string p = "config";
    spec.mac.rho = number(cfg, "rho", p, d, false).value_or(1.0);
    if (!cfg.contains("transmitters") || !cfg.at("transmitters").is_array() || cfg.at("transmitters").empty()) {
        d.error("config.transmitters", "expected a nonempty list of transmitters");
        return;
    }
    const json &list = cfg.at("transmitters");
    bool complete = true;
    for (std::size_t k = 0; k < list.size(); ++k) {
        const std::string tp = index("config.transmitters", k);
        const json &t = list[k];
        if (!t.is_object()) {
            d.error(tp, "expected an object with R, S, T, Q");
            complete = false;
            continue;
        }
        Transmitter tx;
        bool good = true;
        for (const char *key : {"R", "S", "T", "Q"}) {
            if (!t.contains(key)) {
                d.error(join(tp, key), "missing required matrix");
                good = false;
                continue;
            }
            auto m = matrix(t.at(key), join(tp, key), d);
            if (!m) {
                good = false;
                continue;
            }
            const std::string k2 = key;
            if (k2 == "R")
                tx.R = *m;
            else if (k2 == "T")
                tx.T = *m;
            else if (k2 == "Q")
                tx.Q = *m;
            else {
                if (m->rows() != m->cols()) {
                    d.error(join(tp, "S"), "matrix is not square (" + std::to_string(m->rows()) + "x" +
                                               std::to_string(m->cols()) + ")");
                    good = false;
                } else if (!is_hermitian(*m, 1e-10)) {
                    d.error(join(tp, "S"), "matrix is not Hermitian");
                    good = false;
                } else {
                    tx.s = scatterer_spectrum(*m);
                    const RealVector raw = hermitian_eigenvalues(*m);
                    if (raw.minCoeff() < -1e-10 * raw.cwiseAbs().maxCoeff()) {
                        d.error(join(tp, "S"), "matrix is not positive semidefinite");
                        good = false;
                    }
                }
            }
        }
        complete = complete && good;
        spec.mac.tx.push_back(std::move(tx));
    }
    if (!complete)
        return;
    for (const auto &v : spec.mac.violations()) {
        const std::string field = v.substr(0, v.find(':'));
        d.error("config." + field, v.substr(v.find(':') + 2));
    }
}

inline void parse_rayleigh(const json &cfg, ExperimentSpec &spec, Diagnostics &d) {
    const auto get = [&](const char *key) {
        const auto v = integer(cfg, key, "config", d);
        if (v && *v < 1)
            d.error(join("config", key), "must be >= 1");
        return static_cast<int>(v.value_or(0));
    };
    spec.rayleigh.N = get("N");
    spec.rayleigh.S = get("S");
    spec.rayleigh.K = get("K");
}

} // namespace detail

struct ParseResult {
    std::optional<ExperimentSpec> spec;
    std::vector<std::string> errors;
};

inline ParseResult parse_spec(const json &root) {
    Diagnostics d;
    ExperimentSpec spec;
    if (!root.is_object()) {
        d.error("(root)", "expected a JSON object");
        return {std::nullopt, d.errors()};
    }
    const auto model = detail::text(root, "model", "", d);
    if (model) {
        if (*model == "relay")
            spec.model = Model::relay;
        else if (*model == "mac")
            spec.model = Model::mac;
        else if (*model == "rayleigh-product")
            spec.model = Model::rayleigh_product;
        else
            d.error("model", "unknown model '" + *model + "' (expected relay, mac or rayleigh-product)");
    }

    if (const json *cfg = detail::object(root, "config", "", d)) {
        if (model == "relay")
            detail::parse_relay(*cfg, spec, d);
        else if (model == "mac")
            detail::parse_mac(*cfg, spec, d);
        else if (model == "rayleigh-product")
            detail::parse_rayleigh(*cfg, spec, d);
    }

    if (const json *sw = detail::object(root, "sweep", "", d)) {
        const std::string expected = spec.model == Model::relay ? "rho0_db" : "rho_db";
        if (auto var = detail::text(*sw, "variable", "sweep", d)) {
            spec.sweep.variable = *var;
            if (model && *var != expected)
                d.error("sweep.variable", "expected '" + expected + "' for model " + *model);
        }
        if (sw->contains("values")) {
            if (auto v = detail::number_list(*sw, "values", "sweep", d))
                spec.sweep.values = *v;
        } else {
            const auto start = detail::number(*sw, "start", "sweep", d);
            const auto stop = detail::number(*sw, "stop", "sweep", d);
            const auto step = detail::number(*sw, "step", "sweep", d);
            if (step && !(*step > 0.0))
                d.error("sweep.step", "must be > 0");
            else if (start && stop && step) {
                const long long count = static_cast<long long>(std::floor((*stop - *start) / *step + 1e-9)) + 1;
                for (long long i = 0; i < count && i < 100000; ++i)
                    spec.sweep.values.push_back(*start + static_cast<double>(i) * *step);
            }
        }
        if (spec.sweep.values.empty())
            d.error("sweep", "grid is empty");
        for (std::size_t i = 1; i < spec.sweep.values.size(); ++i)
            if (!(spec.sweep.values[i] > spec.sweep.values[i - 1])) {
                d.error(detail::index("sweep.values", i), "grid must be strictly increasing");
                break;
            }
    }

    if (const json *mc = detail::object(root, "mc", "", d, false)) {
        McSpec m;
        if (auto t = detail::integer(*mc, "trials", "mc", d)) {
            if (*t < 2)
                d.error("mc.trials", "must be >= 2");
            m.trials = static_cast<int>(*t);
        }
        if (mc->contains("seed")) {
            const json &seed = mc->at("seed");
            if (seed.is_number_unsigned())
                m.seed = seed.get<std::uint64_t>();
            else if (seed.is_number_integer() && seed.get<long long>() >= 0)
                m.seed = static_cast<std::uint64_t>(seed.get<long long>());
            else
                d.error("mc.seed", "expected a nonnegative integer");
        }
        spec.mc = m;
    }

    if (const json *wf = detail::object(root, "waterfill", "", d, false)) {
        if (spec.model != Model::mac)
            d.error("waterfill", "only supported for model mac");
        WaterfillSpec w;
        if (auto b = detail::number_list(*wf, "budgets", "waterfill", d)) {
            w.budgets = *b;
            for (std::size_t i = 0; i < b->size(); ++i)
                if (!((*b)[i] > 0.0))
                    d.error(detail::index("waterfill.budgets", i), "must be > 0");
            if (spec.model == Model::mac && !spec.mac.tx.empty() && b->size() != spec.mac.tx.size())
                d.error("waterfill.budgets", "expected one budget per transmitter (" +
                                                 std::to_string(spec.mac.tx.size()) + ")");
        }
        if (auto e = detail::number(*wf, "eps", "waterfill", d, false)) {
            if (!(*e > 0.0))
                d.error("waterfill.eps", "must be > 0");
            w.eps = *e;
        }
        spec.waterfill = w;
    }

    if (const json *out = detail::object(root, "output", "", d)) {
        if (auto path = detail::text(*out, "path", "output", d))
            spec.output.path = *path;
        if (auto fmt = detail::text(*out, "format", "output", d, false)) {
            if (*fmt == "csv")
                spec.output.format = Format::csv;
            else if (*fmt == "json")
                spec.output.format = Format::json;
            else
                d.error("output.format", "expected csv or json");
        }
    }

    if (auto units = detail::text(root, "units", "", d, false)) {
        if (*units == "nats")
            spec.units = Units::nats;
        else if (*units == "bits")
            spec.units = Units::bits;
        else
            d.error("units", "expected nats or bits");
    }

    for (auto it = root.begin(); it != root.end(); ++it) {
        static const char *known[] = {"model", "config", "sweep", "mc", "waterfill", "output", "units", "description"};
        if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known))
            d.error(it.key(), "unknown field");
    }

    if (!d.ok())
        return {std::nullopt, d.errors()};
    return {spec, {}};
}

inline ParseResult parse_spec_text(const std::string &text) {
    try {
        return parse_spec(json::parse(text));
    } catch (const json::parse_error &e) {
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        return {std::nullopt, {"line " + std::to_string(line) + ": JSON syntax error: " + e.what()}};
    }
}

// ---------------------------------------------------------------------------
// Result tables

using Cell = std::variant<std::monostate, long long, double, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    json extra = json::object();
};

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string to_csv(const Table &t) {
    std::ostringstream os;
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto &row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i)
                os << ',';
            std::visit(
                [&](const auto &v) {
                    using V = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<V, long long>)
                        os << v;
                    else if constexpr (std::is_same_v<V, double>)
                        os << format_number(v);
                    else if constexpr (std::is_same_v<V, std::string>)
                        os << v;
                },
                row[i]);
        }
        os << '\n';
    }
    return os.str();
}

inline json to_json(const Table &t) {
    json rows = json::array();
    for (const auto &row : t.rows) {
        json r = json::object();
        for (std::size_t i = 0; i < row.size(); ++i)
            std::visit(
                [&](const auto &v) {
                    using V = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<V, std::monostate>)
                        r[t.columns[i]] = nullptr;
                    else
                        r[t.columns[i]] = v;
                },
                row[i]);
        rows.push_back(std::move(r));
    }
    json out = t.extra;
    out["columns"] = t.columns;
    out["rows"] = std::move(rows);
    return out;
}

// ---------------------------------------------------------------------------
// Runners

// Thrown when a solver fails at a specific grid point.
class GridPointFailure : public Error {
public:
    GridPointFailure(const std::string &where, const NonConvergence &cause)
        : Error("solver did not converge at " + where + ": " + cause.what()) {}
};

namespace detail {

inline double info_unit(Units u) { return u == Units::bits ? 1.0 / std::numbers::ln2 : 1.0; }

inline void append_mc(std::vector<Cell> &row, const std::optional<McSpec> &mc, const McReport *rep, double unit) {
    if (!mc)
        return;
    if (!rep) {
        row.insert(row.end(), {std::monostate{}, std::monostate{}, std::monostate{}, std::monostate{}});
        return;
    }
    row.push_back(rep->mean * unit);
    row.push_back(rep->stddev * unit);
    row.push_back(rep->std_error * unit);
    row.push_back(static_cast<long long>(rep->trials));
}

inline std::vector<std::string> mc_columns(const std::optional<McSpec> &mc) {
    if (!mc)
        return {};
    return {"mc_mean", "mc_std", "mc_stderr", "trials"};
}

template <class F>
auto at_grid_point(const std::string &where, F &&f) {
    try {
        return f();
    } catch (const NonConvergence &e) {
        throw GridPointFailure(where, e);
    }
}

inline FundamentalOptions fundamental_options(const RunOptions &o) {
    FundamentalOptions f;
    if (o.tol)
        f.tol = *o.tol;
    if (o.max_iter)
        f.max_iter = *o.max_iter;
    return f;
}

inline RelayOptions relay_options(const RunOptions &o) {
    RelayOptions r;
    if (o.tol)
        r.tol = *o.tol;
    if (o.max_iter)
        r.max_iter = *o.max_iter;
    return r;
}

} // namespace detail

// Rows (rho0_db, hop, deteq[, mc...]) with values normalized as (n_k / n_0) I_k.
inline Table run_relay(const ExperimentSpec &spec, const RunOptions &opt = {}) {
    Table t;
    t.columns = {"rho0_db", "hop", "deteq"};
    for (const auto &c : detail::mc_columns(spec.mc))
        t.columns.push_back(c);
    const Units units = opt.units.value_or(spec.units);
    const double unit = detail::info_unit(units);
    const RelayOptions ropt = detail::relay_options(opt);
    for (double db : spec.sweep.values) {
        const RelayConfig cfg = spec.relay.at(setups::db_to_linear(db));
        const int K = cfg.hops();
        std::vector<McReport> mc;
        if (spec.mc) {
            mc = ergodic_mc_vector(
                [&](Rng &rng) {
                    const RelayRealization r = sample_relay(cfg, rng);
                    std::vector<double> v;
                    for (int k = 1; k <= K; ++k)
                        v.push_back(relay_mutual_info_exact(r, k, K) * cfg.dim(k) / cfg.dim(0));
                    return v;
                },
                spec.mc->trials, spec.mc->seed, opt.threads);
        }
        for (int k = 1; k <= K; ++k) {
            const double de = detail::at_grid_point("rho0_db=" + format_number(db) + " hop=" + std::to_string(k),
                                                    [&] { return scaled_mutual_info_deteq(k, cfg, ropt); });
            std::vector<Cell> row{db, static_cast<long long>(k), de * unit};
            detail::append_mc(row, spec.mc, spec.mc ? &mc[static_cast<std::size_t>(k - 1)] : nullptr, unit);
            t.rows.push_back(std::move(row));
        }
    }
    t.extra["model"] = "relay";
    t.extra["units"] = units == Units::bits ? "bits" : "nats";
    return t;
}

namespace detail {

// Exact mutual information and MMSE sum rate of one realization for each covariance set.
inline std::vector<double> mac_exact_metrics(const std::vector<ComplexMatrix> &h,
                                             const std::vector<std::vector<TransmitEigenmodes>> &modes,
                                             const std::vector<std::vector<ComplexMatrix>> &covariances, double rho) {
    std::vector<double> out;
    const double N = static_cast<double>(h.front().rows());
    for (std::size_t c = 0; c < covariances.size(); ++c) {
        out.push_back(mac_mutual_info_exact(h, covariances[c], rho));
        std::vector<ComplexMatrix> eff;
        for (std::size_t k = 0; k < h.size(); ++k)
            eff.push_back(effective_channel(h[k], modes[c][k].U, modes[c][k].p));
        double rate = 0.0;
        for (const auto &g : mac_mmse_sinr_exact_all(eff, rho))
            rate += g.array().log1p().sum();
        out.push_back(rate / N);
    }
    return out;
}

} // namespace detail

// Rows (rho_db, metric, precoder, deteq[, mc...]); precoder "given" uses the configured Q_k,
// "optimal" the water-filling covariances.
inline Table run_mac(const ExperimentSpec &spec, const RunOptions &opt = {}) {
    Table t;
    t.columns = {"rho_db", "metric", "precoder", "deteq"};
    for (const auto &c : detail::mc_columns(spec.mc))
        t.columns.push_back(c);
    const Units units = opt.units.value_or(spec.units);
    const double unit = detail::info_unit(units);
    const FundamentalOptions fopt = detail::fundamental_options(opt);
    json wf_echo = json::array();
    for (double db : spec.sweep.values) {
        const std::string where = "rho_db=" + format_number(db);
        MacConfig cfg = spec.mac;
        cfg.rho = setups::db_to_linear(db);
        std::vector<std::pair<std::string, MacConfig>> variants{{"given", cfg}};
        if (spec.waterfill) {
            WaterfillOptions wopt;
            wopt.inner = fopt;
            const WaterfillResult wf = detail::at_grid_point(
                where, [&] { return waterfill_optimal_Q(cfg, spec.waterfill->budgets, spec.waterfill->eps, wopt); });
            variants.emplace_back("optimal", wf.apply(cfg));
            json point = {{"rho_db", db}, {"iterations", wf.iterations}};
            json txs = json::array();
            for (std::size_t k = 0; k < wf.p.size(); ++k) {
                const RealVector &p = wf.p[k];
                txs.push_back({{"budget", spec.waterfill->budgets[k]},
                               {"sum_power", p.sum() / static_cast<double>(p.size())},
                               {"p", std::vector<double>(p.data(), p.data() + p.size())},
                               {"mu", wf.mu(static_cast<Index>(k))},
                               {"g", wf.g(static_cast<Index>(k))}});
            }
            point["transmitters"] = std::move(txs);
            wf_echo.push_back(std::move(point));
        }

        std::vector<McReport> mc;
        if (spec.mc) {
            std::vector<std::vector<TransmitEigenmodes>> modes;
            std::vector<std::vector<ComplexMatrix>> covs;
            for (const auto &[name, c] : variants) {
                std::vector<TransmitEigenmodes> m;
                std::vector<ComplexMatrix> q;
                for (const auto &tx : c.tx) {
                    m.push_back(codiagonalize(tx.T, tx.Q));
                    q.push_back(tx.Q);
                }
                modes.push_back(std::move(m));
                covs.push_back(std::move(q));
            }
            const DoubleScatteringSampler sampler(cfg);
            mc = ergodic_mc_vector(
                [&](Rng &rng) { return detail::mac_exact_metrics(sampler.sample(rng), modes, covs, cfg.rho); },
                spec.mc->trials, spec.mc->seed, opt.threads);
        }

        for (std::size_t v = 0; v < variants.size(); ++v) {
            const MacConfig &c = variants[v].second;
            const FundamentalSolution sol = detail::at_grid_point(where, [&] { return solve_fundamental(c, fopt); });
            const double info = mutual_info_deteq(c, sol);
            const double rate = sum_rate_deteq(c, sol);
            std::vector<Cell> r1{db, std::string("mutual_info"), variants[v].first, info * unit};
            detail::append_mc(r1, spec.mc, spec.mc ? &mc[2 * v] : nullptr, unit);
            t.rows.push_back(std::move(r1));
            std::vector<Cell> r2{db, std::string("sum_rate"), variants[v].first, rate * unit};
            detail::append_mc(r2, spec.mc, spec.mc ? &mc[2 * v + 1] : nullptr, unit);
            t.rows.push_back(std::move(r2));
        }
    }
    t.extra["model"] = "mac";
    t.extra["units"] = units == Units::bits ? "bits" : "nats";
    if (spec.waterfill)
        t.extra["waterfill"] = std::move(wf_echo);
    return t;
}

// Rows (rho_db, metric, deteq[, mc...]) for metric in gbar, mutual_info, sinr.
inline Table run_rayleigh(const ExperimentSpec &spec, const RunOptions &opt = {}) {
    Table t;
    t.columns = {"rho_db", "metric", "deteq"};
    for (const auto &c : detail::mc_columns(spec.mc))
        t.columns.push_back(c);
    const Units units = opt.units.value_or(spec.units);
    const double unit = detail::info_unit(units);
    const auto &rp = spec.rayleigh;
    for (double db : spec.sweep.values) {
        const double rho = setups::db_to_linear(db);
        const RayleighProductResult r = rayleigh_product_closed_form(rp.N, rp.S, rp.K, rho);
        std::vector<McReport> mc;
        if (spec.mc) {
            const MacConfig cfg = rayleigh_product_config(rp.N, rp.S, rp.K, rho);
            const DoubleScatteringSampler sampler(cfg);
            std::vector<ComplexMatrix> q(static_cast<std::size_t>(rp.K), ComplexMatrix::Identity(rp.N, rp.N));
            mc = ergodic_mc_vector(
                [&](Rng &rng) {
                    const auto h = sampler.sample(rng);
                    const auto g = mac_mmse_sinr_exact_all(h, rho);
                    double mean_sinr = 0.0;
                    for (const auto &x : g)
                        mean_sinr += x.mean();
                    return std::vector<double>{mac_mutual_info_exact(h, q, rho), mean_sinr / rp.K};
                },
                spec.mc->trials, spec.mc->seed, opt.threads);
        }
        std::vector<Cell> g{db, std::string("gbar"), r.gbar};
        detail::append_mc(g, spec.mc, nullptr, 1.0);
        t.rows.push_back(std::move(g));
        std::vector<Cell> i{db, std::string("mutual_info"), r.ibar * unit};
        detail::append_mc(i, spec.mc, spec.mc ? &mc[0] : nullptr, unit);
        t.rows.push_back(std::move(i));
        std::vector<Cell> s{db, std::string("sinr"), r.gamma};
        detail::append_mc(s, spec.mc, spec.mc ? &mc[1] : nullptr, 1.0);
        t.rows.push_back(std::move(s));
    }
    t.extra["model"] = "rayleigh-product";
    t.extra["units"] = units == Units::bits ? "bits" : "nats";
    return t;
}

inline Table run_spec(const ExperimentSpec &spec, const RunOptions &opt = {}) {
    switch (spec.model) {
    case Model::relay:
        return run_relay(spec, opt);
    case Model::mac:
        return run_mac(spec, opt);
    case Model::rayleigh_product:
        return run_rayleigh(spec, opt);
    }
    throw InvalidConfig("unknown model");
}

inline std::string render(const Table &t, Format f) { return f == Format::csv ? to_csv(t) : to_json(t).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// File-level entry points returning process exit codes

namespace detail {

inline std::optional<std::string> read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return std::nullopt;
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline bool write_file(const std::string &path, const std::string &content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        return false;
    out << content;
    return static_cast<bool>(out);
}

} // namespace detail

inline int validate_file(const std::string &path, std::ostream &out) {
    const auto text = detail::read_file(path);
    if (!text) {
        out << "error: cannot read " << path << "\n";
        return kExitIo;
    }
    const ParseResult r = parse_spec_text(*text);
    if (!r.spec) {
        out << path << ": " << r.errors.size() << " problem(s)\n";
        for (const auto &e : r.errors)
            out << "  " << e << "\n";
        return kExitInvalid;
    }
    out << path << ": ok\n";
    return kExitOk;
}

inline int run_file(const std::string &path, const RunOptions &opt, std::ostream &out) {
    const auto text = detail::read_file(path);
    if (!text) {
        out << "error: cannot read " << path << "\n";
        return kExitIo;
    }
    const ParseResult r = parse_spec_text(*text);
    if (!r.spec) {
        out << path << ": " << r.errors.size() << " problem(s)\n";
        for (const auto &e : r.errors)
            out << "  " << e << "\n";
        return kExitInvalid;
    }
    try {
        const Table t = run_spec(*r.spec, opt);
        if (!detail::write_file(r.spec->output.path, render(t, r.spec->output.format))) {
            out << "error: cannot write " << r.spec->output.path << "\n";
            return kExitIo;
        }
        out << "wrote " << t.rows.size() << " rows to " << r.spec->output.path << "\n";
        return kExitOk;
    } catch (const GridPointFailure &e) {
        out << "error: " << e.what() << "\n";
        return kExitNonConvergence;
    } catch (const InvalidConfig &e) {
        out << "error: " << e.what() << "\n";
        return kExitInvalid;
    }
}

// ---------------------------------------------------------------------------
// Figure reproduction

inline ExperimentSpec four_hop_chain_spec(int trials, std::uint64_t seed) {
    ExperimentSpec s;
    s.model = Model::relay;
    const RelayConfig base = setups::four_hop_chain(1.0);
    s.relay.dims = base.dims;
    s.relay.alphas = base.alphas;
    s.relay.rho_scale = base.rhos;
    s.sweep.variable = "rho0_db";
    for (int db = -10; db <= 30; db += 5)
        s.sweep.values.push_back(db);
    if (trials >= 2)
        s.mc = McSpec{trials, seed};
    return s;
}

// Multi-keyhole sweep: rows (scatterers, rho_db, deteq[, mc...]).
inline Table run_keyhole_figure(int trials, std::uint64_t seed, const RunOptions &opt = {}) {
    Table t;
    t.columns = {"scatterers", "rho_db", "deteq"};
    const std::optional<McSpec> mc = trials >= 2 ? std::optional(McSpec{trials, seed}) : std::nullopt;
    for (const auto &c : detail::mc_columns(mc))
        t.columns.push_back(c);
    const double unit = detail::info_unit(opt.units.value_or(Units::nats));
    const FundamentalOptions fopt = detail::fundamental_options(opt);
    for (int scatterers : {1, 2, 3, 4, 100}) {
        for (int db = 0; db <= 30; db += 5) {
            const MacConfig cfg = setups::multi_keyhole(scatterers, setups::db_to_linear(db));
            const double de = detail::at_grid_point(
                "scatterers=" + std::to_string(scatterers) + " rho_db=" + std::to_string(db),
                [&] { return mutual_info_deteq(cfg, fopt); });
            std::vector<Cell> row{static_cast<long long>(scatterers), static_cast<double>(db), de * unit};
            if (mc) {
                const DoubleScatteringSampler sampler(cfg);
                const std::vector<ComplexMatrix> q{cfg.tx.front().Q};
                const McReport rep = ergodic_mc(
                    [&](Rng &rng) { return mac_mutual_info_exact(sampler.sample(rng), q, cfg.rho); }, mc->trials,
                    mc->seed, opt.threads);
                detail::append_mc(row, mc, &rep, unit);
            }
            t.rows.push_back(std::move(row));
        }
    }
    t.extra["model"] = "multi-keyhole";
    return t;
}

inline ExperimentSpec three_user_spec(int trials, std::uint64_t seed) {
    ExperimentSpec s;
    s.model = Model::mac;
    s.mac = setups::three_user_correlated(1.0);
    s.sweep.variable = "rho_db";
    for (int db = -10; db <= 30; db += 5)
        s.sweep.values.push_back(db);
    s.waterfill = WaterfillSpec{setups::three_user_budgets(), 1e-8};
    if (trials >= 2)
        s.mc = McSpec{trials, seed};
    return s;
}

// Writes <out_dir>/<which>.csv (and fig4.json with the water-filling echo).
inline int reproduce_figure(const std::string &which, int trials, std::uint64_t seed, const std::string &out_dir,
                            const RunOptions &opt, std::ostream &log) {
    try {
        Table t;
        if (which == "fig2")
            t = run_relay(four_hop_chain_spec(trials, seed), opt);
        else if (which == "fig3")
            t = run_keyhole_figure(trials, seed, opt);
        else if (which == "fig4")
            t = run_mac(three_user_spec(trials, seed), opt);
        else {
            log << "error: unknown figure '" << which << "' (expected fig2, fig3 or fig4)\n";
            return kExitInvalid;
        }
        const std::string csv = (std::filesystem::path(out_dir) / (which + ".csv")).string();
        if (!detail::write_file(csv, to_csv(t))) {
            log << "error: cannot write " << csv << "\n";
            return kExitIo;
        }
        log << "wrote " << t.rows.size() << " rows to " << csv << "\n";
        if (which == "fig4") {
            const std::string js = (std::filesystem::path(out_dir) / "fig4.json").string();
            if (!detail::write_file(js, to_json(t).dump(2) + "\n")) {
                log << "error: cannot write " << js << "\n";
                return kExitIo;
            }
            log << "wrote " << js << "\n";
        }
        return kExitOk;
    } catch (const GridPointFailure &e) {
        log << "error: " << e.what() << "\n";
        return kExitNonConvergence;
    }
}

} // namespace deteq::experiment
