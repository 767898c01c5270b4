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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"

namespace deteq {

// K-hop amplify-and-forward chain. Hop k (1-based) maps n_{k-1} antennas to n_k.
struct RelayConfig {
    std::vector<int> dims;       // n_0 .. n_K
    std::vector<double> alphas;  // alpha_1 .. alpha_K
    std::vector<double> rhos;    // rho_0 .. rho_{K-1}
    int max_hops = 8;

    int hops() const { return static_cast<int>(alphas.size()); }
    int dim(int k) const { return dims.at(static_cast<std::size_t>(k)); }
    double alpha(int k) const { return alphas.at(static_cast<std::size_t>(k - 1)); }
    double rho(int k) const { return rhos.at(static_cast<std::size_t>(k)); }
    // c_k = n_{k-1} / n_k
    double ratio(int k) const { return static_cast<double>(dim(k - 1)) / dim(k); }

    std::vector<std::string> violations() const {
        std::vector<std::string> out;
        const int K = hops();
        if (K < 1)
            out.emplace_back("alphas: at least one hop is required");
        if (static_cast<int>(dims.size()) != K + 1)
            out.emplace_back("dims: expected " + std::to_string(K + 1) + " entries, got " +
                             std::to_string(dims.size()));
        if (static_cast<int>(rhos.size()) != K)
            out.emplace_back("rhos: expected " + std::to_string(K) + " entries, got " +
                             std::to_string(rhos.size()));
        for (std::size_t i = 0; i < dims.size(); ++i)
            if (dims[i] < 1)
                out.emplace_back("dims[" + std::to_string(i) + "]: must be >= 1");
        for (std::size_t i = 0; i < alphas.size(); ++i)
            if (!(alphas[i] >= 0.0) || !std::isfinite(alphas[i]))
                out.emplace_back("alphas[" + std::to_string(i) + "]: must be finite and >= 0");
        for (std::size_t i = 0; i < rhos.size(); ++i)
            if (!(rhos[i] >= 0.0) || !std::isfinite(rhos[i]))
                out.emplace_back("rhos[" + std::to_string(i) + "]: must be finite and >= 0");
        if (K > max_hops)
            out.emplace_back("hops: " + std::to_string(K) + " exceeds the recursion cap max_hops = " +
                             std::to_string(max_hops));
        return out;
    }

    void validate() const {
        const auto v = violations();
        if (v.empty())
            return;
        std::string msg = "invalid relay configuration:";
        for (const auto &s : v)
            msg += "\n  " + s;
        throw InvalidConfig(msg);
    }
};

// Limits of the power normalizations, indexed from the source (index 0).
struct BetaBar {
    std::vector<double> values;

    double operator[](int k) const { return values.at(static_cast<std::size_t>(k)); }
    int size() const { return static_cast<int>(values.size()); }

    // Same normalizations with the source silenced.
    BetaBar without_source() const {
        BetaBar b = *this;
        if (!b.values.empty())
            b.values[0] = 0.0;
        return b;
    }
};

struct RelayOptions {
    double tol = 1e-12;
    int max_iter = 10000;
    int damping_after = 100;
    double damping = 0.5;
};

struct SolverStats {
    long long map_evaluations = 0;
    int max_iterations = 0;
    double max_step = 0.0;
};

struct RelayDeteqResult {
    int hop = 0;
    double ebar = 0.0;  // e_{k-1}(1) under the full normalizations
    double jbar = 0.0;  // J_k(1) under the full normalizations
    double ibar = 0.0;
    int iterations = 0;
    double max_residual = 0.0;
};

inline BetaBar asymptotic_betas(const RelayConfig &cfg) {
    BetaBar b;
    const int K = cfg.hops();
    b.values.resize(static_cast<std::size_t>(K));
    b.values[0] = cfg.rho(0);
    for (int k = 1; k < K; ++k)
        b.values[static_cast<std::size_t>(k)] = cfg.rho(k) / (1.0 + cfg.alpha(k) * cfg.rho(k - 1));
    return b;
}

inline double e0_closed_form(double x, double beta0, double alpha1, double c1) {
    const double y = x * alpha1 * beta0;
    const double b = y * (1.0 - c1) + c1;
    const double disc = b * b + 4.0 * y * c1 * c1;
    // Rationalized root avoids cancellation when y * c1 is small.
    if (b > 0.0)
        return 2.0 * y * c1 * c1 / (b + std::sqrt(disc));
    return 0.5 * (-b + std::sqrt(disc));
}

inline double m0_closed_form(double x, double beta0, double alpha1, double c1) {
    if (x <= 0.0)
        return 0.0;
    const double e = e0_closed_form(x, beta0, alpha1, c1);
    return c1 / (alpha1 * beta0 / (c1 + e) + 1.0 / x) + (1.0 - c1) * x;
}

namespace detail {

inline void check_level(int k, const BetaBar &beta, const RelayConfig &cfg, const char *who) {
    if (k < 0 || k + 1 > cfg.hops() || k >= beta.size())
        throw InvalidConfig(std::string(who) + ": level " + std::to_string(k) + " outside the chain");
}

} // namespace detail

inline double ebar_k(int k, double x, const BetaBar &beta, const RelayConfig &cfg, const RelayOptions &opt = {},
                     std::optional<double> start = std::nullopt, SolverStats *stats = nullptr);

inline double mbar_k(int k, double x, const BetaBar &beta, const RelayConfig &cfg, const RelayOptions &opt = {},
                     SolverStats *stats = nullptr) {
    detail::check_level(k, beta, cfg, "mbar_k");
    if (x <= 0.0)
        return 0.0;
    if (k == 0)
        return m0_closed_form(x, beta[0], cfg.alpha(1), cfg.ratio(1));
    const double c = cfg.ratio(k + 1);
    return x * c / (c + ebar_k(k, x, beta, cfg, opt, std::nullopt, stats));
}

// Right-hand side of the fixed point defining e_k (k >= 1), evaluated at a trial value e.
inline double ebar_map(int k, double x, double e, const BetaBar &beta, const RelayConfig &cfg,
                       const RelayOptions &opt = {}, SolverStats *stats = nullptr) {
    detail::check_level(k, beta, cfg, "ebar_map");
    const double c = cfg.ratio(k + 1);
    const double y = x * cfg.alpha(k + 1) * beta[k];
    if (y <= 0.0)
        return 0.0;
    if (stats)
        ++stats->map_evaluations;
    const double m = mbar_k(k - 1, y / (c + y + e), beta, cfg, opt, stats);
    return c * (c + e) - c * (c + e) * (c + e) / y * m;
}

inline double ebar_k(int k, double x, const BetaBar &beta, const RelayConfig &cfg, const RelayOptions &opt,
                     std::optional<double> start, SolverStats *stats) {
    detail::check_level(k, beta, cfg, "ebar_k");
    if (x <= 0.0)
        return 0.0;
    if (k == 0)
        return e0_closed_form(x, beta[0], cfg.alpha(1), cfg.ratio(1));
    if (beta[k] <= 0.0 || cfg.alpha(k + 1) <= 0.0)
        return 0.0;

    double e = start.value_or(0.0);
    double step = 0.0;
    for (int it = 1; it <= opt.max_iter; ++it) {
        const double f = ebar_map(k, x, e, beta, cfg, opt, stats);
        const double next = it > opt.damping_after ? opt.damping * e + (1.0 - opt.damping) * f : f;
        step = std::abs(next - e);
        e = next;
        if (step <= opt.tol) {
            if (stats) {
                stats->max_iterations = std::max(stats->max_iterations, it);
                stats->max_step = std::max(stats->max_step, step);
            }
            return e;
        }
    }
    throw NonConvergence("ebar_k: level " + std::to_string(k) + " at x = " + std::to_string(x), opt.max_iter,
                         step);
}

// Log-det functional J_k(x) for k = 1..K.
inline double jbar_k(int k, double x, const BetaBar &beta, const RelayConfig &cfg, const RelayOptions &opt = {},
                     SolverStats *stats = nullptr) {
    if (k < 1 || k > cfg.hops() || k > beta.size())
        throw InvalidConfig("jbar_k: hop " + std::to_string(k) + " outside the chain");
    if (x <= 0.0)
        return 0.0;
    const double c = cfg.ratio(k);
    const double y = x * cfg.alpha(k) * beta[k - 1];
    const double e = ebar_k(k - 1, x, beta, cfg, opt, std::nullopt, stats);
    double j = c * std::log1p(y / (c + e)) + std::log1p(e / c) - e / (c + e);
    if (k > 1)
        j += c * jbar_k(k - 1, y / (c + y + e), beta, cfg, opt, stats);
    return j;
}

// Normalized mutual information at the output of hop k.
inline RelayDeteqResult mutual_info_deteq(int k, const RelayConfig &cfg, const RelayOptions &opt = {}) {
    cfg.validate();
    if (k < 1 || k > cfg.hops())
        throw InvalidConfig("mutual_info_deteq: hop " + std::to_string(k) + " outside 1.." +
                            std::to_string(cfg.hops()));
    const BetaBar beta = asymptotic_betas(cfg);
    const BetaBar silent = beta.without_source();
    SolverStats stats;
    RelayDeteqResult r;
    r.hop = k;
    r.ebar = ebar_k(k - 1, 1.0, beta, cfg, opt, std::nullopt, &stats);
    r.jbar = jbar_k(k, 1.0, beta, cfg, opt, &stats);
    const double jsilent = jbar_k(k, 1.0, silent, cfg, opt, &stats);
    r.ibar = (r.jbar - jsilent) / cfg.hops();
    r.iterations = stats.max_iterations;
    r.max_residual = stats.max_step;
    return r;
}

// (n_k / n_0) * I_k, the normalization used when comparing hops.
inline double scaled_mutual_info_deteq(int k, const RelayConfig &cfg, const RelayOptions &opt = {}) {
    return mutual_info_deteq(k, cfg, opt).ibar * cfg.dim(k) / cfg.dim(0);
}

} // namespace deteq
