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
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "error.hpp"
#include "rng.hpp"

namespace deteq {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

// Entries drawn in row-major order, one standard complex Gaussian each.
inline ComplexMatrix sample_standard_complex_gaussian(Index rows, Index cols, Rng &rng) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("sample_standard_complex_gaussian: dimensions must be positive");
    ComplexMatrix x(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            x(i, j) = rng.standard_complex_gaussian();
    return x;
}

inline double spectral_norm(const ComplexMatrix &a) {
    if (a.size() == 0)
        return 0.0;
    Eigen::JacobiSVD<ComplexMatrix> svd(a);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

// max_{i,j} |A_ij - conj(A_ji)|
inline double hermitian_defect(const ComplexMatrix &a) {
    if (a.rows() != a.cols())
        return std::numeric_limits<double>::infinity();
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const ComplexMatrix &a, double tol = 1e-12) {
    if (a.rows() != a.cols())
        return false;
    return hermitian_defect(a) <= tol * (1.0 + spectral_norm(a));
}

// Ascending eigenvalues of a Hermitian matrix (lower triangle is read).
inline RealVector hermitian_eigenvalues(const ComplexMatrix &a) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

// Natural-log determinant of a Hermitian positive definite matrix via Cholesky.
inline double logdet_hpd(const ComplexMatrix &a) {
    if (a.rows() != a.cols())
        throw NotPositiveDefinite("logdet_hpd: matrix is not square");
    Eigen::LLT<ComplexMatrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("logdet_hpd: Cholesky factorization failed");
    const auto &l = llt.matrixLLT();
    double acc = 0.0;
    for (Index i = 0; i < l.rows(); ++i) {
        const double d = l(i, i).real();
        if (!(d > 0.0))
            throw NotPositiveDefinite("logdet_hpd: non-positive pivot");
        acc += std::log(d);
    }
    return 2.0 * acc;
}

// Hermitian PSD square root. Eigenvalues down to -1e-10 * ||A|| are clamped to 0.
inline ComplexMatrix herm_sqrt(const ComplexMatrix &a) {
    if (a.rows() != a.cols())
        throw NotPsd("herm_sqrt: matrix is not square");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a);
    if (es.info() != Eigen::Success)
        throw NotPsd("herm_sqrt: eigendecomposition failed");
    const RealVector &w = es.eigenvalues();
    const double norm = w.size() ? w.cwiseAbs().maxCoeff() : 0.0;
    RealVector root(w.size());
    for (Index i = 0; i < w.size(); ++i) {
        if (w(i) < -1e-10 * norm)
            throw NotPsd("herm_sqrt: eigenvalue " + std::to_string(w(i)) + " below clamp threshold");
        root(i) = std::sqrt(std::max(w(i), 0.0));
    }
    const ComplexMatrix &v = es.eigenvectors();
    ComplexMatrix b = v * root.asDiagonal() * v.adjoint();
    return 0.5 * (b + b.adjoint());
}

// tr(A^{-1} B) for A given by its Cholesky factorization.
inline std::complex<double> trace_solve(const Eigen::LLT<ComplexMatrix> &a, const ComplexMatrix &b) {
    return a.solve(b).trace();
}

// The unique root of c3 x^3 + c2 x^2 + c1 x + c0 in [lo, hi), located by a sign scan
// over a uniform grid and refined by bisection.
inline double solve_cubic_in_interval(double c3, double c2, double c1, double c0, double lo, double hi) {
    if (!(hi > lo))
        throw NoRootInInterval("solve_cubic_in_interval: empty interval");
    const auto p = [&](double x) { return ((c3 * x + c2) * x + c1) * x + c0; };
    constexpr int kGrid = 4096;
    const double h = (hi - lo) / kGrid;

    int roots = 0;
    double bracket_lo = lo, bracket_hi = lo;
    bool exact = false;
    double prev_x = lo;
    double prev = p(lo);
    if (prev == 0.0) {
        ++roots;
        exact = true;
        bracket_lo = bracket_hi = lo;
    }
    for (int i = 1; i <= kGrid; ++i) {
        const double x = (i == kGrid) ? hi : lo + i * h;
        const double v = p(x);
        if (v == 0.0) {
            if (i < kGrid) {
                ++roots;
                exact = true;
                bracket_lo = bracket_hi = x;
            }
        } else if (prev != 0.0 && ((prev < 0.0) != (v < 0.0))) {
            ++roots;
            exact = false;
            bracket_lo = prev_x;
            bracket_hi = x;
        }
        prev = v;
        prev_x = x;
    }
    if (roots != 1)
        throw NoRootInInterval("solve_cubic_in_interval: found " + std::to_string(roots) +
                               " sign changes in [" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
    if (exact)
        return bracket_lo;

    double a = bracket_lo, b = bracket_hi;
    const bool neg_at_a = p(a) < 0.0;
    for (int it = 0; it < 400 && b - a > 0.0; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b)
            break;
        const double v = p(m);
        if (v == 0.0)
            return m;
        if ((v < 0.0) == neg_at_a)
            a = m;
        else
            b = m;
    }
    return std::abs(p(a)) <= std::abs(p(b)) ? a : b;
}

} // namespace deteq
