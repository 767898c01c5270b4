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

#include <stdexcept>
#include <string>

namespace deteq {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class NotPsd : public Error {
public:
    using Error::Error;
};

class NoRootInInterval : public Error {
public:
    using Error::Error;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

class NotCodiagonalizable : public Error {
public:
    using Error::Error;
};

// A fixed-point or outer loop hit its iteration cap.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string &what, int iterations, double last_step)
        : Error(what + " (iterations=" + std::to_string(iterations) +
                ", last step=" + std::to_string(last_step) + ")"),
          iterations_(iterations), last_step_(last_step) {}

    int iterations() const noexcept { return iterations_; }
    double last_step() const noexcept { return last_step_; }

private:
    int iterations_;
    double last_step_;
};

} // namespace deteq
