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
#include <numbers>
#include <vector>

#include "channel_sim.hpp"
#include "mac.hpp"
#include "relay.hpp"

namespace deteq::setups {

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

// Four-hop chain with 4-8-12-8-4 antennas; relay budgets track the source budget.
// `scale` multiplies every antenna count.
inline RelayConfig four_hop_chain(double rho0, int scale = 1) {
    RelayConfig cfg;
    cfg.dims = {4 * scale, 8 * scale, 12 * scale, 8 * scale, 4 * scale};
    cfg.alphas = {1.0, 0.7, 0.5, 0.7};
    cfg.rhos = {rho0, 0.7 * rho0, 0.5 * rho0, 0.7 * rho0};
    return cfg;
}

// Single user, four receive and four transmit antennas, `scatterers` uncorrelated scatterers.
inline MacConfig multi_keyhole(int scatterers, double rho, int antennas = 4) {
    MacConfig cfg;
    cfg.rho = rho;
    const ComplexMatrix eye = ComplexMatrix::Identity(antennas, antennas);
    cfg.tx.push_back({eye, RealVector::Ones(scatterers), eye, eye});
    return cfg;
}

inline constexpr double kSpacing = 0.25;
inline constexpr double kScattererSpacing = 50.0;

// Three users, N = 4 receive antennas, 11 scatterers, 3 transmit antennas each,
// uniform power 1/n_k per antenna. `scale` multiplies every dimension.
inline MacConfig three_user_correlated(double rho, int scale = 1) {
    const int N = 4 * scale, S = 11 * scale, n = 3 * scale;
    const double phis[] = {std::numbers::pi / 4, std::numbers::pi / 2, std::numbers::pi};
    const RealVector s = scatterer_spectrum(correlation_matrix_G(std::numbers::pi / 8, kScattererSpacing, S));
    MacConfig cfg;
    cfg.rho = rho;
    for (double phi : phis) {
        const ComplexMatrix T = correlation_matrix_G(phi, kSpacing, n);
        cfg.tx.push_back({correlation_matrix_G(phi, kSpacing, N), s, T, ComplexMatrix::Identity(n, n) / n});
    }
    return cfg;
}

inline std::vector<double> three_user_budgets(int scale = 1) {
    const double p = 1.0 / (3 * scale);
    return {p, p, p};
}

} // namespace deteq::setups
