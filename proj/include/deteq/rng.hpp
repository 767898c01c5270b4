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
#include <cstdint>
#include <numbers>
#include <random>

namespace deteq {

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used only to derive seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seedable random source with a fully specified output stream.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++ standard,
// seeded with splitmix64(seed). Uniforms take the top 53 bits of one engine
// draw. A standard complex Gaussian consumes exactly two engine draws
// (u1, u2) and returns sqrt(-ln u1) * exp(i 2 pi u2), so real and imaginary
// parts are independent N(0, 1/2). Nothing here goes through
// std::normal_distribution, whose algorithm is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

    // Independent stream for trial `index` of an experiment seeded with `seed`.
    static Rng for_stream(std::uint64_t seed, std::uint64_t index) {
        return Rng(seed ^ splitmix64(index + 1));
    }

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on (0, 1].
    double uniform_open0() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::complex<double> standard_complex_gaussian() {
        const double u1 = uniform_open0();
        const double u2 = uniform();
        const double r = std::sqrt(-std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(theta), r * std::sin(theta)};
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace deteq
