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
#include <complex>
#include <numbers>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"
#include "mac.hpp"
#include "relay.hpp"
#include "rng.hpp"

namespace deteq {

// One draw of the relay chain. R[0] = I and R[k] is the covariance of the hop-k output
// with the noise already added.
struct RelayRealization {
    std::vector<ComplexMatrix> H;     // H[k-1] is n_k x n_{k-1}
    std::vector<double> beta;         // beta_0 .. beta_{K-1}
    std::vector<ComplexMatrix> R;     // R_0 .. R_K
    std::vector<double> alphas;       // alpha_1 .. alpha_K
    std::vector<int> dims;            // n_0 .. n_K
};

namespace detail {

inline ComplexMatrix relay_step(const ComplexMatrix &H, const ComplexMatrix &prev, double gain) {
    ComplexMatrix r = ComplexMatrix::Identity(H.rows(), H.rows());
    r.noalias() += gain * (H * prev * H.adjoint());
    return 0.5 * (r + r.adjoint());
}

} // namespace detail

inline RelayRealization sample_relay(const RelayConfig &cfg, Rng &rng) {
    cfg.validate();
    const int K = cfg.hops();
    RelayRealization out;
    out.alphas = cfg.alphas;
    out.dims = cfg.dims;
    out.R.push_back(ComplexMatrix::Identity(cfg.dim(0), cfg.dim(0)));
    for (int k = 1; k <= K; ++k) {
        const ComplexMatrix &prev = out.R.back();
        const double b = k == 1 ? cfg.rho(0) : cfg.rho(k - 1) / (prev.trace().real() / cfg.dim(k - 1));
        out.beta.push_back(b);
        out.H.push_back(sample_standard_complex_gaussian(cfg.dim(k), cfg.dim(k - 1), rng));
        out.R.push_back(detail::relay_step(out.H.back(), prev, cfg.alpha(k) * b / cfg.dim(k - 1)));
    }
    return out;
}

// Exact normalized mutual information of hop k for one realization.
inline double relay_mutual_info_exact(const RelayRealization &real, int k, int K) {
    if (k < 1 || k > static_cast<int>(real.H.size()) || K < 1)
        throw InvalidConfig("relay_mutual_info_exact: hop outside the realization");
    // Chain with the source silenced; relays keep their realized normalizations.
    ComplexMatrix silent = ComplexMatrix::Identity(real.dims[1], real.dims[1]);
    for (int i = 2; i <= k; ++i) {
        const double gain = real.alphas[static_cast<std::size_t>(i - 1)] * real.beta[static_cast<std::size_t>(i - 1)] /
                            real.dims[static_cast<std::size_t>(i - 1)];
        silent = detail::relay_step(real.H[static_cast<std::size_t>(i - 1)], silent, gain);
    }
    const double nk = real.dims[static_cast<std::size_t>(k)];
    return (logdet_hpd(real.R[static_cast<std::size_t>(k)]) - logdet_hpd(silent)) / (K * nk);
}

// Two-hop mutual information written directly in terms of H_1, H_2.
inline double relay_two_hop_direct(const RelayRealization &real, int K) {
    if (real.H.size() < 2)
        throw InvalidConfig("relay_two_hop_direct: realization has fewer than two hops");
    const ComplexMatrix &h1 = real.H[0];
    const ComplexMatrix &h2 = real.H[1];
    const double n0 = real.dims[0], n1 = real.dims[1], n2 = real.dims[2];
    const double a1 = real.alphas[0], a2 = real.alphas[1];
    const double b0 = real.beta[0], b1 = real.beta[1];
    const ComplexMatrix noise = ComplexMatrix::Identity(h2.rows(), h2.rows()) + (a2 * b1 / n1) * h2 * h2.adjoint();
    const ComplexMatrix signal = (a2 * b1 * a1 * b0 / (n1 * n0)) * h2 * h1 * h1.adjoint() * h2.adjoint();
    Eigen::LLT<ComplexMatrix> llt(noise);
    const ComplexMatrix m = ComplexMatrix::Identity(h2.rows(), h2.rows()) + llt.solve(signal);
    const Eigen::PartialPivLU<ComplexMatrix> lu(m);
    double acc = 0.0;
    for (Index i = 0; i < m.rows(); ++i)
        acc += std::log(std::abs(lu.matrixLU()(i, i)));
    return acc / (K * n2);
}

// Uniform-linear-array correlation generator with angular spread phi and spacing d.
inline ComplexMatrix correlation_matrix_G(double phi, double d, int n) {
    if (n < 1)
        throw InvalidConfig("correlation_matrix_G: n must be >= 1");
    if (n == 1)
        return ComplexMatrix::Ones(1, 1);
    ComplexMatrix g = ComplexMatrix::Zero(n, n);
    for (int jj = 0; jj < n; ++jj) {
        const double j = jj - 0.5 * (n - 1);
        const double angle = std::sin(j * phi / (1.0 - n));
        ComplexVector a(n);
        for (int k = 0; k < n; ++k)
            a(k) = std::polar(1.0, 2.0 * std::numbers::pi * d * k * angle);
        g += a * a.adjoint();
    }
    g /= static_cast<double>(n);
    return 0.5 * (g + g.adjoint());
}

// Draws H_k = R^{1/2} W_1 S^{1/2} W_2 T^{1/2} / sqrt(N_k n_k); square roots are computed once.
class DoubleScatteringSampler {
public:
    explicit DoubleScatteringSampler(const MacConfig &cfg) {
        cfg.validate();
        for (const auto &t : cfg.tx) {
            Factors f;
            f.r_half = herm_sqrt(t.R);
            f.s_half = t.s.cwiseMax(0.0).cwiseSqrt();
            f.t_half = herm_sqrt(t.T);
            f.scale = 1.0 / std::sqrt(static_cast<double>(t.scatterers()) * t.antennas());
            factors_.push_back(std::move(f));
        }
    }

    std::vector<ComplexMatrix> sample(Rng &rng) const {
        std::vector<ComplexMatrix> h;
        h.reserve(factors_.size());
        for (const auto &f : factors_) {
            const Index N = f.r_half.rows(), S = f.s_half.size(), n = f.t_half.rows();
            const ComplexMatrix w1 = sample_standard_complex_gaussian(N, S, rng);
            const ComplexMatrix w2 = sample_standard_complex_gaussian(S, n, rng);
            h.push_back(f.scale * (f.r_half * (w1 * f.s_half.asDiagonal()) * w2 * f.t_half));
        }
        return h;
    }

    // Z_k = R^{1/2} W_1 S^{1/2} / sqrt(N_k)
    std::vector<ComplexMatrix> sample_inner(Rng &rng) const {
        std::vector<ComplexMatrix> z;
        for (const auto &f : factors_) {
            const ComplexMatrix w1 = sample_standard_complex_gaussian(f.r_half.rows(), f.s_half.size(), rng);
            z.push_back(f.r_half * w1 * f.s_half.asDiagonal() / std::sqrt(static_cast<double>(f.s_half.size())));
        }
        return z;
    }

private:
    struct Factors {
        ComplexMatrix r_half;
        RealVector s_half;
        ComplexMatrix t_half;
        double scale = 1.0;
    };
    std::vector<Factors> factors_;
};

inline std::vector<ComplexMatrix> sample_double_scattering(const MacConfig &cfg, Rng &rng) {
    return DoubleScatteringSampler(cfg).sample(rng);
}

// (1/N) log det(I + rho sum_k H_k Q_k H_k^H)
inline double mac_mutual_info_exact(const std::vector<ComplexMatrix> &H, const std::vector<ComplexMatrix> &Q,
                                    double rho) {
    if (H.empty() || H.size() != Q.size())
        throw InvalidConfig("mac_mutual_info_exact: H and Q must be nonempty lists of equal length");
    const Index N = H.front().rows();
    ComplexMatrix a = ComplexMatrix::Identity(N, N);
    for (std::size_t k = 0; k < H.size(); ++k)
        a.noalias() += rho * (H[k] * Q[k] * H[k].adjoint());
    return logdet_hpd(0.5 * (a + a.adjoint())) / static_cast<double>(N);
}

// H_k U_k diag(sqrt(p_k)): the channel seen by the independent streams of transmitter k.
inline ComplexMatrix effective_channel(const ComplexMatrix &H, const ComplexMatrix &U, const RealVector &p) {
    return H * U * p.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

// MMSE output SINR of stream j of transmitter k; H holds effective channels.
inline double mac_mmse_sinr_exact(const std::vector<ComplexMatrix> &H, int k, int j, double rho) {
    const Index N = H.at(static_cast<std::size_t>(k)).rows();
    const ComplexVector h = H[static_cast<std::size_t>(k)].col(j);
    ComplexMatrix b = ComplexMatrix::Identity(N, N) / rho;
    for (const auto &hi : H)
        b.noalias() += hi * hi.adjoint();
    b.noalias() -= h * h.adjoint();
    Eigen::LLT<ComplexMatrix> llt(0.5 * (b + b.adjoint()));
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("mac_mmse_sinr_exact: interference matrix is not positive definite");
    return h.dot(llt.solve(h)).real();
}

// All stream SINRs at once: with A = sum H H^H + I/rho and q = h^H A^{-1} h, gamma = q / (1 - q).
inline std::vector<RealVector> mac_mmse_sinr_exact_all(const std::vector<ComplexMatrix> &H, double rho) {
    const Index N = H.front().rows();
    ComplexMatrix a = ComplexMatrix::Identity(N, N) / rho;
    for (const auto &hi : H)
        a.noalias() += hi * hi.adjoint();
    Eigen::LLT<ComplexMatrix> llt(0.5 * (a + a.adjoint()));
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("mac_mmse_sinr_exact_all: receive matrix is not positive definite");
    std::vector<RealVector> out;
    for (const auto &hi : H) {
        const ComplexMatrix x = llt.solve(hi);
        RealVector g(hi.cols());
        for (Index j = 0; j < hi.cols(); ++j) {
            const double q = hi.col(j).dot(x.col(j)).real();
            g(j) = q / (1.0 - q);
        }
        out.push_back(g);
    }
    return out;
}

} // namespace deteq
