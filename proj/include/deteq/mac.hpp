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
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"

namespace deteq {

// One transmitter of the double-scattering multiple-access channel.
struct Transmitter {
    ComplexMatrix R;  // N x N receive correlation
    RealVector s;     // eigenvalues of the scatterer correlation (length N_k)
    ComplexMatrix T;  // n_k x n_k transmit correlation
    ComplexMatrix Q;  // n_k x n_k input covariance

    int scatterers() const { return static_cast<int>(s.size()); }
    int antennas() const { return static_cast<int>(T.rows()); }
};

struct MacConfig {
    std::vector<Transmitter> tx;
    double rho = 1.0;

    int users() const { return static_cast<int>(tx.size()); }
    int receive_dim() const { return tx.empty() ? 0 : static_cast<int>(tx.front().R.rows()); }

    std::vector<std::string> violations() const {
        std::vector<std::string> out;
        if (tx.empty())
            out.emplace_back("transmitters: at least one transmitter is required");
        if (!(rho > 0.0) || !std::isfinite(rho))
            out.emplace_back("rho: must be finite and > 0");
        const Index N = tx.empty() ? 0 : tx.front().R.rows();
        const auto check_psd = [&](const ComplexMatrix &a, const std::string &name, Index dim) {
            if (a.rows() != a.cols()) {
                out.emplace_back(name + ": matrix is not square (" + std::to_string(a.rows()) + "x" +
                                 std::to_string(a.cols()) + ")");
                return;
            }
            if (a.rows() != dim) {
                out.emplace_back(name + ": expected dimension " + std::to_string(dim) + ", got " +
                                 std::to_string(a.rows()));
                return;
            }
            if (!a.allFinite()) {
                out.emplace_back(name + ": entries must be finite");
                return;
            }
            if (!is_hermitian(a, 1e-10)) {
                out.emplace_back(name + ": matrix is not Hermitian");
                return;
            }
            const RealVector w = hermitian_eigenvalues(a);
            const double scale = w.size() ? w.cwiseAbs().maxCoeff() : 0.0;
            if (w.size() && w.minCoeff() < -1e-10 * scale)
                out.emplace_back(name + ": matrix is not positive semidefinite");
        };
        for (std::size_t k = 0; k < tx.size(); ++k) {
            const auto &t = tx[k];
            const std::string p = "transmitters[" + std::to_string(k) + "].";
            if (N < 1)
                out.emplace_back(p + "R: receive dimension must be >= 1");
            check_psd(t.R, p + "R", N);
            if (t.s.size() < 1)
                out.emplace_back(p + "S: at least one scatterer is required");
            for (Index j = 0; j < t.s.size(); ++j)
                if (!(t.s(j) >= 0.0) || !std::isfinite(t.s(j))) {
                    out.emplace_back(p + "S: eigenvalues must be finite and >= 0");
                    break;
                }
            if (t.T.rows() < 1)
                out.emplace_back(p + "T: at least one transmit antenna is required");
            else
                check_psd(t.T, p + "T", t.T.rows());
            check_psd(t.Q, p + "Q", t.T.rows());
        }
        return out;
    }

    void validate() const {
        const auto v = violations();
        if (v.empty())
            return;
        std::string msg = "invalid MAC configuration:";
        for (const auto &s : v)
            msg += "\n  " + s;
        throw InvalidConfig(msg);
    }
};

// Eigenvalues of a full scatterer correlation matrix, clamped at zero.
inline RealVector scatterer_spectrum(const ComplexMatrix &S) {
    if (S.rows() != S.cols())
        throw InvalidConfig("scatterer_spectrum: matrix is not square");
    return hermitian_eigenvalues(S).cwiseMax(0.0);
}

// T^{1/2} Q T^{1/2}
inline ComplexMatrix effective_transmit(const Transmitter &t) {
    const ComplexMatrix h = herm_sqrt(t.T);
    ComplexMatrix m = h * t.Q * h;
    return 0.5 * (m + m.adjoint());
}

struct FundamentalOptions {
    double tol = 1e-12;
    int max_iter = 100000;
    double delta_floor = 1e-300;
};

struct FundamentalStart {
    RealVector gbar, g, delta;
};

struct FundamentalSolution {
    RealVector g, gbar, delta;
    int iterations = 0;
    double residual = 0.0;
};

namespace detail {

// Quantities the fixed-point sweeps read repeatedly.
struct PreparedMac {
    int K = 0;
    int N = 0;
    double rho = 1.0;
    std::vector<ComplexMatrix> R;
    std::vector<RealVector> s;
    std::vector<RealVector> tau;  // eigenvalues of T^{1/2} Q T^{1/2}
    std::vector<double> n, Nk;

    explicit PreparedMac(const MacConfig &cfg) {
        cfg.validate();
        K = cfg.users();
        N = cfg.receive_dim();
        rho = cfg.rho;
        for (const auto &t : cfg.tx) {
            R.push_back(t.R);
            s.push_back(t.s);
            tau.push_back(hermitian_eigenvalues(effective_transmit(t)).cwiseMax(0.0));
            n.push_back(static_cast<double>(t.antennas()));
            Nk.push_back(static_cast<double>(t.scatterers()));
        }
    }

    double gbar_of(int k, double g) const {
        return (tau[k].array() / (g * tau[k].array() + 1.0)).sum() / n[k];
    }
    double g_of(int k, double gbar, double delta) const {
        return (s[k].array() * delta / (1.0 + gbar * s[k].array() * delta)).sum() / n[k];
    }
    // g / delta written without the division
    double g_over_delta(int k, double gbar, double delta) const {
        return (s[k].array() / (1.0 + gbar * s[k].array() * delta)).sum() / n[k];
    }
    // (sum_i coef_i R_i + I / rho), coef_i = (n_i / N_i) gbar_i (g_i / delta_i)
    ComplexMatrix receive_matrix(const std::vector<double> &coef) const {
        ComplexMatrix m = ComplexMatrix::Identity(N, N) / rho;
        for (int i = 0; i < K; ++i)
            m += (n[i] / Nk[i] * coef[static_cast<std::size_t>(i)]) * R[i];
        return m;
    }
    RealVector deltas_from(const ComplexMatrix &m) const {
        Eigen::LLT<ComplexMatrix> llt(m);
        if (llt.info() != Eigen::Success)
            throw NotPositiveDefinite("fundamental equations: receive matrix is not positive definite");
        RealVector d(K);
        for (int k = 0; k < K; ++k)
            d(k) = trace_solve(llt, R[k]).real() / Nk[k];
        return d;
    }
};

} // namespace detail

// Largest absolute mismatch over the 3K fundamental equations at a candidate solution.
inline double fundamental_residual(const MacConfig &cfg, const FundamentalSolution &sol) {
    const detail::PreparedMac sys(cfg);
    double r = 0.0;
    std::vector<double> coef(static_cast<std::size_t>(sys.K));
    for (int k = 0; k < sys.K; ++k) {
        r = std::max(r, std::abs(sys.gbar_of(k, sol.g(k)) - sol.gbar(k)));
        r = std::max(r, std::abs(sys.g_of(k, sol.gbar(k), sol.delta(k)) - sol.g(k)));
        coef[static_cast<std::size_t>(k)] = sol.gbar(k) * sol.g(k) / sol.delta(k);
    }
    const RealVector d = sys.deltas_from(sys.receive_matrix(coef));
    for (int k = 0; k < sys.K; ++k)
        r = std::max(r, std::abs(d(k) - sol.delta(k)));
    return r;
}

namespace detail {

inline FundamentalSolution solve_prepared(const PreparedMac &sys, const FundamentalOptions &opt,
                                          const std::optional<FundamentalStart> &start) {
    const int K = sys.K;
    RealVector gbar = RealVector::Ones(K), g = RealVector::Ones(K), delta = RealVector::Ones(K);
    if (start) {
        if (start->gbar.size() != K || start->g.size() != K || start->delta.size() != K)
            throw InvalidConfig("solve_fundamental: start vectors must have one entry per transmitter");
        gbar = start->gbar;
        g = start->g;
        delta = start->delta.cwiseMax(opt.delta_floor);
    }
    std::vector<double> coef(static_cast<std::size_t>(K));
    double step = 0.0;
    for (int it = 1; it <= opt.max_iter; ++it) {
        step = 0.0;
        for (int k = 0; k < K; ++k) {
            const double v = sys.gbar_of(k, g(k));
            step = std::max(step, std::abs(v - gbar(k)));
            gbar(k) = v;
        }
        for (int k = 0; k < K; ++k) {
            const double v = sys.g_of(k, gbar(k), delta(k));
            step = std::max(step, std::abs(v - g(k)));
            g(k) = v;
        }
        for (int k = 0; k < K; ++k)
            coef[static_cast<std::size_t>(k)] = gbar(k) * sys.g_over_delta(k, gbar(k), delta(k));
        const RealVector d = sys.deltas_from(sys.receive_matrix(coef)).cwiseMax(opt.delta_floor);
        step = std::max(step, (d - delta).cwiseAbs().maxCoeff());
        delta = d;
        if (step <= opt.tol) {
            if (delta.minCoeff() <= opt.delta_floor)
                throw NonConvergence("solve_fundamental: delta collapsed to the division floor", it, step);
            FundamentalSolution sol;
            sol.gbar = gbar;
            sol.g = g;
            sol.delta = delta;
            sol.iterations = it;
            return sol;
        }
    }
    throw NonConvergence("solve_fundamental", opt.max_iter, step);
}

} // namespace detail

inline FundamentalSolution solve_fundamental(const MacConfig &cfg, const FundamentalOptions &opt = {},
                                             const std::optional<FundamentalStart> &start = std::nullopt) {
    if (!(opt.tol > 0.0))
        throw InvalidConfig("solve_fundamental: tol must be > 0");
    const detail::PreparedMac sys(cfg);
    FundamentalSolution sol = detail::solve_prepared(sys, opt, start);
    sol.residual = fundamental_residual(cfg, sol);
    return sol;
}

namespace detail {

// Solves the pair (gbar_k, g_k) for a fixed delta_k by bisection on gbar.
struct ScalarPair {
    double gbar = 0.0;
    double g = 0.0;
};

inline ScalarPair solve_pair_given_delta(const PreparedMac &sys, int k, double delta) {
    double lo = 0.0, hi = sys.tau[static_cast<std::size_t>(k)].sum() / sys.n[static_cast<std::size_t>(k)];
    if (hi <= 0.0)
        return {0.0, sys.g_of(k, 0.0, delta)};
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        const double f = mid - sys.gbar_of(k, sys.g_of(k, mid, delta));
        if (f < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double gbar = 0.5 * (lo + hi);
    return {gbar, sys.g_of(k, gbar, delta)};
}

} // namespace detail

// Fixed-point map in the delta variables: each (gbar_k, g_k) is eliminated given delta_k,
// then the receive-side trace equation produces the next delta.
inline RealVector interference_map(const MacConfig &cfg, const RealVector &delta) {
    const detail::PreparedMac sys(cfg);
    if (delta.size() != sys.K)
        throw InvalidConfig("interference_map: one delta per transmitter is required");
    std::vector<double> coef(static_cast<std::size_t>(sys.K));
    for (int k = 0; k < sys.K; ++k) {
        const detail::ScalarPair p = detail::solve_pair_given_delta(sys, k, delta(k));
        coef[static_cast<std::size_t>(k)] = p.gbar * sys.g_over_delta(k, p.gbar, delta(k));
    }
    return sys.deltas_from(sys.receive_matrix(coef));
}

struct MutualInfoTerms {
    double receive = 0.0;
    double scatter = 0.0;
    double transmit = 0.0;
    double coupling = 0.0;

    double total() const { return receive + scatter + transmit + coupling; }
};

inline MutualInfoTerms mutual_info_terms(const MacConfig &cfg, const FundamentalSolution &sol) {
    const detail::PreparedMac sys(cfg);
    MutualInfoTerms t;
    ComplexMatrix m = ComplexMatrix::Identity(sys.N, sys.N);
    for (int k = 0; k < sys.K; ++k)
        m += (sys.rho * sys.n[k] / sys.Nk[k] * sol.gbar(k) * sol.g(k) / sol.delta(k)) * sys.R[k];
    t.receive = logdet_hpd(m) / sys.N;
    for (int k = 0; k < sys.K; ++k) {
        t.scatter += (sol.gbar(k) * sol.delta(k) * sys.s[k].array()).log1p().sum() / sys.N;
        t.transmit += (sol.g(k) * sys.tau[k].array()).log1p().sum() / sys.N;
        t.coupling -= 2.0 * sys.n[k] * sol.g(k) * sol.gbar(k) / sys.N;
    }
    return t;
}

inline double mutual_info_deteq(const MacConfig &cfg, const FundamentalSolution &sol) {
    return mutual_info_terms(cfg, sol).total();
}

inline double mutual_info_deteq(const MacConfig &cfg, const FundamentalOptions &opt = {}) {
    return mutual_info_deteq(cfg, solve_fundamental(cfg, opt));
}

// Shared eigenbasis of a commuting pair T, Q: T = U diag(t) U^H, Q = U diag(p) U^H.
struct TransmitEigenmodes {
    ComplexMatrix U;
    RealVector t;
    RealVector p;
};

inline TransmitEigenmodes codiagonalize(const ComplexMatrix &T, const ComplexMatrix &Q) {
    if (T.rows() != T.cols() || Q.rows() != Q.cols() || T.rows() != Q.rows())
        throw NotCodiagonalizable("codiagonalize: T and Q must be square of equal size");
    const Index n = T.rows();
    const double nt = spectral_norm(T), nq = spectral_norm(Q);
    const auto off_diag = [](const ComplexMatrix &a) {
        ComplexMatrix b = a;
        b.diagonal().setZero();
        return b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
    };
    TransmitEigenmodes out;
    if (off_diag(T) <= 1e-12 * (1.0 + nt) && off_diag(Q) <= 1e-12 * (1.0 + nq)) {
        out.U = ComplexMatrix::Identity(n, n);
        out.t = T.diagonal().real();
        out.p = Q.diagonal().real();
        return out;
    }
    if (spectral_norm(T * Q - Q * T) > 1e-10 * (1.0 + nt * nq))
        throw NotCodiagonalizable("codiagonalize: T and Q do not commute");
    // A generic combination separates eigenvalues shared by one of the two factors.
    const double c = 0.7548776662466927 * (nt + 1.0) / (nq + 1.0);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(T + c * Q);
    out.U = es.eigenvectors();
    const ComplexMatrix td = out.U.adjoint() * T * out.U;
    const ComplexMatrix qd = out.U.adjoint() * Q * out.U;
    if (off_diag(td) > 1e-8 * (1.0 + nt) || off_diag(qd) > 1e-8 * (1.0 + nq))
        throw NotCodiagonalizable("codiagonalize: no common eigenbasis found");
    out.t = td.diagonal().real();
    out.p = qd.diagonal().real();
    return out;
}

// Per-stream SINR approximation of the linear MMSE receiver, gamma_{k,j} = p_{k,j} t_{k,j} g_k.
inline std::vector<RealVector> mmse_sinr_deteq(const MacConfig &cfg, const FundamentalSolution &sol) {
    std::vector<RealVector> out;
    for (int k = 0; k < cfg.users(); ++k) {
        const auto &t = cfg.tx[static_cast<std::size_t>(k)];
        const TransmitEigenmodes m = codiagonalize(t.T, t.Q);
        out.push_back((m.p.array() * m.t.array() * sol.g(k)).matrix());
    }
    return out;
}

inline std::vector<RealVector> mmse_sinr_deteq(const MacConfig &cfg, const FundamentalOptions &opt = {}) {
    return mmse_sinr_deteq(cfg, solve_fundamental(cfg, opt));
}

inline double sum_rate_deteq(const MacConfig &cfg, const FundamentalSolution &sol) {
    double r = 0.0;
    for (const auto &g : mmse_sinr_deteq(cfg, sol))
        r += g.array().log1p().sum();
    return r / cfg.receive_dim();
}

inline double sum_rate_deteq(const MacConfig &cfg, const FundamentalOptions &opt = {}) {
    return sum_rate_deteq(cfg, solve_fundamental(cfg, opt));
}

// Power loading max(0, mu - 1/(g t_j)) meeting (1/n) sum_j p_j = budget.
struct WaterLevel {
    double mu = 0.0;
    RealVector p;
};

inline WaterLevel water_level(const RealVector &t, double g, double budget) {
    const Index n = t.size();
    WaterLevel w;
    w.p = RealVector::Zero(n);
    std::vector<double> inv(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    double max_inv = 0.0;
    int support = 0;
    for (Index j = 0; j < n; ++j)
        if (t(j) > 0.0 && g > 0.0) {
            inv[static_cast<std::size_t>(j)] = 1.0 / (g * t(j));
            max_inv = std::max(max_inv, inv[static_cast<std::size_t>(j)]);
            ++support;
        }
    if (support == 0 || !(budget > 0.0))
        return w;
    const double total = budget * static_cast<double>(n);
    const auto loaded = [&](double mu) {
        double acc = 0.0;
        for (double v : inv)
            acc += std::max(0.0, mu - v);
        return acc;
    };
    double lo = 0.0, hi = total / support + max_inv;
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        if (loaded(mid) < total)
            lo = mid;
        else
            hi = mid;
        if (std::abs(loaded(hi) - total) <= 1e-12 * (1.0 + total))
            break;
    }
    // Exact level on the active set found by bisection.
    std::vector<bool> active(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j)
        active[static_cast<std::size_t>(j)] = inv[static_cast<std::size_t>(j)] < hi;
    double mu = 0.0;
    for (;;) {
        double sum_inv = 0.0;
        int count = 0;
        for (Index j = 0; j < n; ++j)
            if (active[static_cast<std::size_t>(j)]) {
                sum_inv += inv[static_cast<std::size_t>(j)];
                ++count;
            }
        mu = (total + sum_inv) / count;
        bool changed = false;
        for (Index j = 0; j < n; ++j)
            if (active[static_cast<std::size_t>(j)] && inv[static_cast<std::size_t>(j)] >= mu && count > 1) {
                active[static_cast<std::size_t>(j)] = false;
                changed = true;
            }
        if (!changed)
            break;
    }
    w.mu = mu;
    for (Index j = 0; j < n; ++j)
        if (active[static_cast<std::size_t>(j)])
            w.p(j) = mu - inv[static_cast<std::size_t>(j)];
    return w;
}

struct WaterfillOptions {
    int max_outer = 500;
    FundamentalOptions inner{};
};

struct WaterfillResult {
    std::vector<ComplexMatrix> U;
    std::vector<RealVector> t;
    std::vector<RealVector> p;
    RealVector mu;
    RealVector g;               // the g_k that produced the final loading
    std::vector<ComplexMatrix> Q;
    int iterations = 0;

    // The configuration with every Q_k replaced by the optimized covariance.
    MacConfig apply(MacConfig cfg) const {
        for (std::size_t k = 0; k < cfg.tx.size(); ++k)
            cfg.tx[k].Q = Q[k];
        return cfg;
    }
};

inline WaterfillResult waterfill_optimal_Q(const MacConfig &cfg, const std::vector<double> &budgets, double eps,
                                           const WaterfillOptions &opt = {}) {
    cfg.validate();
    const int K = cfg.users();
    if (static_cast<int>(budgets.size()) != K)
        throw InvalidConfig("waterfill_optimal_Q: one budget per transmitter is required");
    for (double b : budgets)
        if (!(b > 0.0))
            throw InvalidConfig("waterfill_optimal_Q: budgets must be > 0");
    if (!(eps > 0.0))
        throw InvalidConfig("waterfill_optimal_Q: eps must be > 0");

    WaterfillResult r;
    r.mu = RealVector::Zero(K);
    r.g = RealVector::Zero(K);
    for (const auto &t : cfg.tx) {
        Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(t.T);
        r.U.push_back(es.eigenvectors());
        r.t.push_back(es.eigenvalues().cwiseMax(0.0));
    }
    for (int k = 0; k < K; ++k)
        r.p.push_back(RealVector::Constant(cfg.tx[static_cast<std::size_t>(k)].antennas(),
                                           budgets[static_cast<std::size_t>(k)]));

    const auto covariances = [&] {
        std::vector<ComplexMatrix> q;
        for (int k = 0; k < K; ++k) {
            const auto &u = r.U[static_cast<std::size_t>(k)];
            q.push_back(u * r.p[static_cast<std::size_t>(k)].asDiagonal() * u.adjoint());
        }
        return q;
    };

    MacConfig work = cfg;
    std::optional<FundamentalStart> warm;
    double step = 0.0;
    for (int it = 1; it <= opt.max_outer; ++it) {
        const auto q = covariances();
        for (int k = 0; k < K; ++k)
            work.tx[static_cast<std::size_t>(k)].Q = q[static_cast<std::size_t>(k)];
        const FundamentalSolution sol = detail::solve_prepared(detail::PreparedMac(work), opt.inner, warm);
        warm = FundamentalStart{sol.gbar, sol.g, sol.delta};
        step = 0.0;
        for (int k = 0; k < K; ++k) {
            const WaterLevel w = water_level(r.t[static_cast<std::size_t>(k)], sol.g(k),
                                             budgets[static_cast<std::size_t>(k)]);
            step = std::max(step, (w.p - r.p[static_cast<std::size_t>(k)]).cwiseAbs().maxCoeff());
            r.p[static_cast<std::size_t>(k)] = w.p;
            r.mu(k) = w.mu;
            r.g(k) = sol.g(k);
        }
        if (step <= eps) {
            r.iterations = it;
            r.Q = covariances();
            return r;
        }
    }
    throw NonConvergence("waterfill_optimal_Q", opt.max_outer, step);
}

// Uncorrelated product channel: N_k = S, n_k = N, all correlations and precoders identity.
inline MacConfig rayleigh_product_config(int N, int S, int K, double rho) {
    if (N < 1 || S < 1 || K < 1)
        throw InvalidConfig("rayleigh_product_config: N, S, K must be >= 1");
    MacConfig cfg;
    cfg.rho = rho;
    for (int k = 0; k < K; ++k)
        cfg.tx.push_back({ComplexMatrix::Identity(N, N), RealVector::Ones(S), ComplexMatrix::Identity(N, N),
                          ComplexMatrix::Identity(N, N)});
    return cfg;
}

struct RayleighProductResult {
    double gbar = 0.0;
    double ibar = 0.0;
    double gamma = 0.0;
};

inline RayleighProductResult rayleigh_product_closed_form(int N, int S, int K, double rho) {
    if (N < 1 || S < 1 || K < 1)
        throw InvalidConfig("rayleigh_product_closed_form: N, S, K must be >= 1");
    if (!(rho > 0.0))
        throw InvalidConfig("rayleigh_product_closed_form: rho must be > 0");
    const double sn = static_cast<double>(S) / N;
    const double ik = 1.0 / K;
    const double snk = sn * ik;
    const double lo = 1.0 - std::min(ik, sn);
    const double gb = solve_cubic_in_interval(1.0, -(2.0 - sn - ik), 1.0 - sn - ik + snk * (1.0 + 1.0 / rho),
                                              -snk / rho, lo, 1.0);
    RayleighProductResult r;
    r.gbar = gb;
    r.ibar = std::log1p(rho / snk * gb * (gb + sn - 1.0)) - K * sn * std::log1p((gb - 1.0) / sn) -
             K * std::log(gb) - 2.0 * K * (1.0 - gb);
    r.gamma = (1.0 - gb) / gb;
    return r;
}

struct KroneckerResult {
    double value = 0.0;
    RealVector ebar, e;
    int iterations = 0;
};

// Deterministic equivalent for H_k = Z_k W_k Ttilde_k^{1/2} / sqrt(n_k) with deterministic Z_k.
inline KroneckerResult kronecker_deteq(const std::vector<ComplexMatrix> &Z, const std::vector<ComplexMatrix> &Ttilde,
                                       double rho, const FundamentalOptions &opt = {}) {
    const int K = static_cast<int>(Z.size());
    if (K < 1 || static_cast<int>(Ttilde.size()) != K)
        throw InvalidConfig("kronecker_deteq: Z and Ttilde must be nonempty lists of equal length");
    if (!(rho > 0.0))
        throw InvalidConfig("kronecker_deteq: rho must be > 0");
    const Index N = Z.front().rows();
    std::vector<ComplexMatrix> zz;
    std::vector<RealVector> tau;
    std::vector<double> n;
    for (int k = 0; k < K; ++k) {
        if (Z[static_cast<std::size_t>(k)].rows() != N)
            throw InvalidConfig("kronecker_deteq: all Z_k need the same row count");
        const ComplexMatrix &z = Z[static_cast<std::size_t>(k)];
        zz.push_back(z * z.adjoint());
        tau.push_back(hermitian_eigenvalues(Ttilde[static_cast<std::size_t>(k)]).cwiseMax(0.0));
        n.push_back(static_cast<double>(Ttilde[static_cast<std::size_t>(k)].rows()));
    }
    RealVector ebar = RealVector::Ones(K), e = RealVector::Ones(K);
    double step = 0.0;
    for (int it = 1; it <= opt.max_iter; ++it) {
        step = 0.0;
        for (int k = 0; k < K; ++k) {
            const double v = (tau[k].array() / (e(k) * tau[k].array() + 1.0)).sum() / n[k];
            step = std::max(step, std::abs(v - ebar(k)));
            ebar(k) = v;
        }
        ComplexMatrix m = ComplexMatrix::Identity(N, N) / rho;
        for (int k = 0; k < K; ++k)
            m += ebar(k) * zz[static_cast<std::size_t>(k)];
        Eigen::LLT<ComplexMatrix> llt(m);
        for (int k = 0; k < K; ++k) {
            const double v = trace_solve(llt, zz[static_cast<std::size_t>(k)]).real() / n[k];
            step = std::max(step, std::abs(v - e(k)));
            e(k) = v;
        }
        if (step <= opt.tol) {
            KroneckerResult r;
            r.ebar = ebar;
            r.e = e;
            r.iterations = it;
            ComplexMatrix a = ComplexMatrix::Identity(N, N);
            for (int k = 0; k < K; ++k)
                a += rho * ebar(k) * zz[static_cast<std::size_t>(k)];
            r.value = logdet_hpd(a) / N;
            for (int k = 0; k < K; ++k)
                r.value += ((e(k) * tau[k].array()).log1p().sum() - n[k] * e(k) * ebar(k)) / N;
            return r;
        }
    }
    throw NonConvergence("kronecker_deteq", opt.max_iter, step);
}

} // namespace deteq
