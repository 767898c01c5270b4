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
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace deteq {

struct McReport {
    double mean = 0.0;
    double stddev = 0.0;     // sample standard deviation
    double std_error = 0.0;  // stddev / sqrt(trials)
    int trials = 0;
    std::uint64_t seed = 0;
};

// Worker count: DETEQ_THREADS if set to a positive integer, otherwise the hardware concurrency.
inline int worker_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char *env = std::getenv("DETEQ_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0)
            n = v;
    }
    return std::max(n, 1);
}

inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double acc = 0.0;
        for (double x : v)
            acc += x;
        return acc;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline McReport summarize(std::span<const double> samples, std::uint64_t seed) {
    McReport r;
    r.trials = static_cast<int>(samples.size());
    r.seed = seed;
    if (samples.empty())
        return r;
    r.mean = pairwise_sum(samples) / static_cast<double>(samples.size());
    if (samples.size() > 1) {
        std::vector<double> sq(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i)
            sq[i] = (samples[i] - r.mean) * (samples[i] - r.mean);
        r.stddev = std::sqrt(pairwise_sum(sq) / static_cast<double>(samples.size() - 1));
        r.std_error = r.stddev / std::sqrt(static_cast<double>(samples.size()));
    }
    return r;
}

// Runs metric(rng) for trials t = 0..trials-1, each on its own stream Rng::for_stream(seed, t).
// The metric returns a fixed-length std::vector<double>; one report per component.
// Results depend only on (seed, trials), not on how trials are spread over workers.
template <class Metric>
std::vector<McReport> ergodic_mc_vector(const Metric &metric, int trials, std::uint64_t seed, int threads = 0) {
    if (trials < 2)
        throw InvalidConfig("ergodic_mc: at least two trials are required");
    const int workers = std::clamp(threads > 0 ? threads : worker_count(), 1, trials);
    std::vector<std::vector<double>> values(static_cast<std::size_t>(trials));
    std::exception_ptr failure;
    std::mutex failure_mutex;

    const auto work = [&](int w) {
        try {
            for (int t = w; t < trials; t += workers) {
                Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(t));
                values[static_cast<std::size_t>(t)] = metric(rng);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure)
                failure = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(work, w);
    }
    if (failure)
        std::rethrow_exception(failure);

    const std::size_t width = values.front().size();
    std::vector<McReport> out;
    std::vector<double> column(static_cast<std::size_t>(trials));
    for (std::size_t c = 0; c < width; ++c) {
        for (std::size_t t = 0; t < values.size(); ++t) {
            if (values[t].size() != width)
                throw InvalidConfig("ergodic_mc: metric returned vectors of different lengths");
            column[t] = values[t][c];
        }
        out.push_back(summarize(column, seed));
    }
    return out;
}

template <class Metric>
McReport ergodic_mc(const Metric &metric, int trials, std::uint64_t seed, int threads = 0) {
    const auto wrapped = [&metric](Rng &rng) { return std::vector<double>{static_cast<double>(metric(rng))}; };
    return ergodic_mc_vector(wrapped, trials, seed, threads).front();
}

} // namespace deteq
