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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "deteq/channel_sim.hpp"
#include "deteq/linalg.hpp"
#include "deteq/relay.hpp"
#include "deteq/setups.hpp"

namespace {

using deteq::BetaBar;
using deteq::ComplexMatrix;
using deteq::RelayConfig;

const double kGolden = (std::sqrt(5.0) - 1.0) / 2.0;

// Single-matrix fixed point with white correlation: e = c y (c + e) / (y + c + e).
double single_matrix_residual(double e, double y, double c) { return e - c * y * (c + e) / (y + c + e); }

// Covariance R_k built with the limiting normalizations instead of the realized ones.
std::vector<ComplexMatrix> chain_with_betabar(const RelayConfig &cfg, const BetaBar &beta, int upto,
                                              deteq::Rng &rng) {
    std::vector<ComplexMatrix> r{ComplexMatrix::Identity(cfg.dim(0), cfg.dim(0))};
    for (int k = 1; k <= upto; ++k) {
        const ComplexMatrix h = deteq::sample_standard_complex_gaussian(cfg.dim(k), cfg.dim(k - 1), rng);
        ComplexMatrix next = ComplexMatrix::Identity(cfg.dim(k), cfg.dim(k));
        next += cfg.alpha(k) * beta[k - 1] / cfg.dim(k - 1) * h * r.back() * h.adjoint();
        r.push_back(0.5 * (next + next.adjoint()));
    }
    return r;
}

TEST(AsymptoticBetas, ZeroPathLossKeepsBudgets) {
    RelayConfig cfg = deteq::setups::four_hop_chain(2.0);
    cfg.alphas = {0.0, 0.0, 0.0, 0.0};
    const BetaBar b = deteq::asymptotic_betas(cfg);
    ASSERT_EQ(b.size(), 4);
    for (int k = 0; k < 4; ++k)
        EXPECT_DOUBLE_EQ(b[k], cfg.rho(k));
}

TEST(AsymptoticBetas, FourHopChainAtUnitSnr) {
    const BetaBar b = deteq::asymptotic_betas(deteq::setups::four_hop_chain(1.0));
    EXPECT_DOUBLE_EQ(b[0], 1.0);
    EXPECT_NEAR(b[1], 0.35, 1e-15);
}

TEST(AsymptoticBetas, SingleHopHasOnlySource) {
    RelayConfig cfg{{3, 5}, {0.8}, {2.5}};
    const BetaBar b = deteq::asymptotic_betas(cfg);
    ASSERT_EQ(b.size(), 1);
    EXPECT_DOUBLE_EQ(b[0], 2.5);
}

TEST(AsymptoticBetas, RealizedNormalizationAtLargeDimension) {
    const RelayConfig cfg = deteq::setups::four_hop_chain(1.0, 32);
    const BetaBar b = deteq::asymptotic_betas(cfg);
    deteq::Rng rng(11);
    double acc = 0.0;
    constexpr int reps = 10;
    for (int i = 0; i < reps; ++i)
        acc += deteq::sample_relay(cfg, rng).beta[1];
    EXPECT_NEAR(acc / reps, b[1], 0.01 * b[1]);
}

TEST(ClosedForms, SilentSourceGivesZero) {
    for (double x : {0.1, 1.0, 50.0})
        EXPECT_NEAR(deteq::e0_closed_form(x, 0.0, 0.7, 1.5), 0.0, 1e-15);
}

TEST(ClosedForms, GoldenRatioCase) {
    const double e = deteq::e0_closed_form(1.0, 1.0, 1.0, 1.0);
    EXPECT_NEAR(e, kGolden, 1e-15);
    EXPECT_LT(std::abs(single_matrix_residual(e, 1.0, 1.0)), 1e-12);
    EXPECT_NEAR(deteq::m0_closed_form(1.0, 1.0, 1.0, 1.0), 1.0 / (1.0 / (1.0 + kGolden) + 1.0), 1e-15);
}

TEST(ClosedForms, SubstituteBackResidual) {
    deteq::Rng rng(12);
    for (int i = 0; i < 500; ++i) {
        const double x = std::exp(rng.uniform(-5.0, 5.0));
        const double beta = std::exp(rng.uniform(-5.0, 5.0));
        const double alpha = rng.uniform(0.05, 2.0);
        const double c = std::exp(rng.uniform(-2.0, 2.0));
        const double e = deteq::e0_closed_form(x, beta, alpha, c);
        EXPECT_GE(e, 0.0);
        EXPECT_LT(std::abs(single_matrix_residual(e, x * alpha * beta, c)), 1e-10 * (1.0 + e));
        const double m = deteq::m0_closed_form(x, beta, alpha, c);
        EXPECT_GT(m, 0.0);
        EXPECT_LE(m, x * (1.0 + 1e-12));
    }
}

TEST(ClosedForms, StieltjesLimits) {
    EXPECT_NEAR(deteq::m0_closed_form(3.0, 0.0, 1.0, 1.0), 3.0, 1e-15);
    EXPECT_LT(deteq::m0_closed_form(1e-9, 2.0, 1.0, 0.5), 1e-8);
}

TEST(ClosedForms, ResolventTraceAtLargeDimension) {
    constexpr int n = 512;
    deteq::Rng rng(13);
    const ComplexMatrix h = deteq::sample_standard_complex_gaussian(n, n, rng);
    const ComplexMatrix a = h * h.adjoint() / double(n) + ComplexMatrix::Identity(n, n);
    const double m_emp = a.llt().solve(ComplexMatrix::Identity(n, n)).trace().real() / n;
    EXPECT_NEAR(m_emp, deteq::m0_closed_form(1.0, 1.0, 1.0, 1.0), 0.02 * m_emp);
}

TEST(ClosedForms, LogDetAtLargeDimension) {
    constexpr int n = 512;
    deteq::Rng rng(14);
    const ComplexMatrix h = deteq::sample_standard_complex_gaussian(n, n, rng);
    const double j_emp = deteq::logdet_hpd(ComplexMatrix::Identity(n, n) + h * h.adjoint() / double(n)) / n;
    const RelayConfig cfg{{n, n}, {1.0}, {1.0}};
    const double expected = std::log1p(1.0 / (1.0 + kGolden)) + std::log1p(kGolden) - kGolden / (1.0 + kGolden);
    const double j = deteq::jbar_k(1, 1.0, deteq::asymptotic_betas(cfg), cfg);
    EXPECT_NEAR(j, expected, 1e-14);
    EXPECT_NEAR(j_emp, j, 0.02 * j);
}

TEST(Ebar, SilentStageIsExact) {
    RelayConfig cfg = deteq::setups::four_hop_chain(10.0);
    BetaBar b = deteq::asymptotic_betas(cfg);
    b.values[2] = 0.0;
    deteq::SolverStats stats;
    EXPECT_EQ(deteq::ebar_k(2, 1.0, b, cfg, {}, std::nullopt, &stats), 0.0);
    EXPECT_EQ(stats.map_evaluations, 0);
    EXPECT_EQ(deteq::mbar_k(2, 1.7, b, cfg), 1.7);
}

TEST(Ebar, FrozenValuesFourHopChain) {
    // Reference values from an independent implementation of the nested recursion.
    const RelayConfig cfg = deteq::setups::four_hop_chain(10.0);
    const BetaBar b = deteq::asymptotic_betas(cfg);
    EXPECT_NEAR(deteq::ebar_k(1, 1.0, b, cfg), 0.407721501527, 1e-9);
    EXPECT_NEAR(deteq::ebar_k(2, 1.0, b, cfg), 1.269825809729, 1e-9);
    EXPECT_NEAR(deteq::ebar_k(3, 1.0, b, cfg), 4.555694715881, 1e-9);
    EXPECT_NEAR(deteq::mbar_k(1, 1.0, b, cfg), 0.620508198436, 1e-9);
    EXPECT_NEAR(deteq::mbar_k(2, 1.0, b, cfg), 0.541550300647, 1e-9);
    EXPECT_NEAR(deteq::mbar_k(3, 1.0, b, cfg), 0.305078269608, 1e-9);
    EXPECT_NEAR(deteq::jbar_k(2, 1.0, b, cfg), 0.905414286039, 1e-9);
}

TEST(Ebar, ResidualAfterConvergence) {
    const RelayConfig cfg = deteq::setups::four_hop_chain(10.0);
    const BetaBar b = deteq::asymptotic_betas(cfg);
    for (int k = 1; k <= 3; ++k)
        for (double x : {0.1, 1.0, 10.0}) {
            const double e = deteq::ebar_k(k, x, b, cfg);
            EXPECT_GT(e, 0.0);
            EXPECT_LE(std::abs(deteq::ebar_map(k, x, e, b, cfg) - e), 1e-10) << "k=" << k << " x=" << x;
        }
}

TEST(Ebar, UniqueAcrossRandomStarts) {
    const RelayConfig cfg = deteq::setups::four_hop_chain(10.0);
    const BetaBar b = deteq::asymptotic_betas(cfg);
    deteq::Rng rng(15);
    for (int k = 1; k <= 3; ++k) {
        const double ref = deteq::ebar_k(k, 1.0, b, cfg);
        for (int i = 0; i < 20; ++i) {
            const double start = std::exp(rng.uniform(-4.0, 4.0));
            EXPECT_NEAR(deteq::ebar_k(k, 1.0, b, cfg, {}, start), ref, 1e-8);
        }
    }
}

TEST(Ebar, LevelZeroIsClosedForm) {
    const RelayConfig cfg = deteq::setups::four_hop_chain(3.0);
    const BetaBar b = deteq::asymptotic_betas(cfg);
    for (double x : {0.01, 0.5, 2.0, 40.0})
        EXPECT_NEAR(deteq::ebar_k(0, x, b, cfg), deteq::e0_closed_form(x, b[0], cfg.alpha(1), cfg.ratio(1)), 1e-12);
}

TEST(Ebar, MatchesResolventAtLargeDimension) {
    // n_0 = 512: one realization of (1/n_2) tr(alpha_2 beta_1 H_2 R_1 H_2^H / n_1 + I/x)^{-1}.
    const RelayConfig cfg = deteq::setups::four_hop_chain(10.0, 128);
    const BetaBar b = deteq::asymptotic_betas(cfg);
    deteq::Rng rng(16);
    const auto r = chain_with_betabar(cfg, b, 2, rng);
    const double m_emp = r[2].llt().solve(ComplexMatrix::Identity(cfg.dim(2), cfg.dim(2))).trace().real() /
                         cfg.dim(2);
    const double m = deteq::mbar_k(1, 1.0, b, cfg);
    EXPECT_NEAR(m_emp, m, 0.02 * m);
    const double c = cfg.ratio(2);
    const double e_emp = c * (1.0 / m_emp - 1.0);
    const double e = deteq::ebar_k(1, 1.0, b, cfg);
    EXPECT_NEAR(e_emp, e, 0.02 * e);
}

TEST(Mbar, IncreasingInX) {
    const RelayConfig cfg = deteq::setups::four_hop_chain(10.0);
    const BetaBar b = deteq::asymptotic_betas(cfg);
    for (int k = 0; k <= 3; ++k) {
        double prev = 0.0;
        for (double x = 0.1; x <= 10.0 + 1e-9; x += 0.1) {
            const double m = deteq::mbar_k(k, x, b, cfg);
            EXPECT_GT(m, prev);
            EXPECT_GT(m, 0.0);
            prev = m;
        }
    }
}

TEST(Jbar, SilentChainIsZero) {
    RelayConfig cfg = deteq::setups::four_hop_chain(10.0);
    BetaBar b;
    b.values = {0.0, 0.0, 0.0, 0.0};
    for (int k = 1; k <= 4; ++k)
        EXPECT_NEAR(deteq::jbar_k(k, 1.0, b, cfg), 0.0, 1e-15);
}

TEST(Jbar, TwoHopsAtLargeDimension) {
    const RelayConfig cfg = deteq::setups::four_hop_chain(10.0, 32);
    const BetaBar b = deteq::asymptotic_betas(cfg);
    deteq::Rng rng(17);
    double acc = 0.0;
    constexpr int reps = 4;
    for (int i = 0; i < reps; ++i) {
        const auto r = chain_with_betabar(cfg, b, 2, rng);
        acc += deteq::logdet_hpd(r[2]) / cfg.dim(2);
    }
    const double j = deteq::jbar_k(2, 1.0, b, cfg);
    EXPECT_NEAR(acc / reps, j, 0.02 * j);
}

TEST(MutualInfo, SilentSource) {
    RelayConfig cfg = deteq::setups::four_hop_chain(10.0);
    cfg.rhos[0] = 0.0;
    for (int k = 1; k <= 4; ++k)
        EXPECT_NEAR(deteq::mutual_info_deteq(k, cfg).ibar, 0.0, 1e-14);
}

TEST(MutualInfo, FirstHopIsScaledJ) {
    const RelayConfig cfg = deteq::setups::four_hop_chain(10.0);
    const auto r = deteq::mutual_info_deteq(1, cfg);
    EXPECT_NEAR(r.ibar, r.jbar / cfg.hops(), 1e-15);
}

TEST(MutualInfo, FrozenValuesFourHopChain) {
    const double expected[3][4] = {{0.247183582488, 0.088597597087, 0.014158205478, 0.002369387149},
                                   {0.695115523416, 0.447999520422, 0.212896972390, 0.100317011371},
                                   {1.250341623461, 0.976002792376, 0.645158310318, 0.400532027580}};
    const double dbs[3] = {0.0, 10.0, 20.0};
    for (int i = 0; i < 3; ++i) {
        const RelayConfig cfg = deteq::setups::four_hop_chain(deteq::setups::db_to_linear(dbs[i]));
        for (int k = 1; k <= 4; ++k)
            EXPECT_NEAR(deteq::scaled_mutual_info_deteq(k, cfg), expected[i][k - 1], 1e-9);
    }
}

TEST(MutualInfo, NondecreasingInSnrAndNonincreasingInHop) {
    std::vector<double> prev(4, 0.0);
    for (double db = -10.0; db <= 30.0; db += 2.5) {
        const RelayConfig cfg = deteq::setups::four_hop_chain(deteq::setups::db_to_linear(db));
        double hop_prev = 1e300;
        for (int k = 1; k <= 4; ++k) {
            const auto r = deteq::mutual_info_deteq(k, cfg);
            EXPECT_GE(r.ibar, 0.0);
            EXPECT_GE(r.ibar, prev[k - 1]) << "db=" << db << " k=" << k;
            prev[k - 1] = r.ibar;
            const double scaled = r.ibar * cfg.dim(k) / cfg.dim(0);
            EXPECT_LE(scaled, hop_prev);
            hop_prev = scaled;
        }
    }
}

TEST(RelayConfig, ValidationListsEveryProblem) {
    RelayConfig cfg{{4, 0, 4}, {1.0, -0.5}, {-1.0}};
    const auto v = cfg.violations();
    EXPECT_EQ(v.size(), 4u);
    EXPECT_THROW(cfg.validate(), deteq::InvalidConfig);
}

TEST(RelayConfig, RecursionCap) {
    RelayConfig cfg;
    cfg.dims.assign(13, 4);
    cfg.alphas.assign(12, 1.0);
    cfg.rhos.assign(12, 1.0);
    EXPECT_THROW(cfg.validate(), deteq::InvalidConfig);
    cfg.max_hops = 12;
    EXPECT_NO_THROW(cfg.validate());
}

TEST(RelayOptions, IterationCapRaisesNonConvergence) {
    const RelayConfig cfg = deteq::setups::four_hop_chain(1000.0);
    const BetaBar b = deteq::asymptotic_betas(cfg);
    deteq::RelayOptions opt;
    opt.max_iter = 2;
    EXPECT_THROW(deteq::ebar_k(2, 1.0, b, cfg, opt), deteq::NonConvergence);
}

} // namespace
