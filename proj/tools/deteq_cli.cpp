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

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "deteq/experiment.hpp"

namespace ex = deteq::experiment;

int main(int argc, char **argv) {
    CLI::App app{"Deterministic equivalents for multi-hop relay and double-scattering MIMO channels"};
    app.require_subcommand(1);

    std::string units;
    std::optional<double> tol;
    std::optional<int> max_iter;
    app.add_option("--units", units, "Report information in nats or bits (overrides the spec)")
        ->check(CLI::IsMember({"nats", "bits"}));
    app.add_option("--tol", tol, "Fixed-point tolerance")->check(CLI::PositiveNumber);
    app.add_option("--max-iter", max_iter, "Fixed-point iteration cap")->check(CLI::PositiveNumber);

    std::string spec_path;
    auto *run = app.add_subcommand("run", "Evaluate an experiment spec and write its output");
    run->add_option("spec", spec_path, "Experiment spec (JSON)")->required();

    std::string check_path;
    auto *validate = app.add_subcommand("validate", "Check an experiment spec and list every problem");
    validate->add_option("spec", check_path, "Experiment spec (JSON)")->required();

    std::string figure;
    int trials = 10000;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    auto *fig = app.add_subcommand("figure", "Regenerate a reference figure as CSV");
    fig->add_option("name", figure, "fig2, fig3 or fig4")->required()->check(CLI::IsMember({"fig2", "fig3", "fig4"}));
    fig->add_option("--trials", trials, "Monte Carlo trials per grid point (0 disables simulation)")
        ->check(CLI::NonNegativeNumber);
    fig->add_option("--seed", seed, "Master seed");
    fig->add_option("--out", out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ex::kExitInvalid;
    }

    ex::RunOptions opt;
    if (!units.empty())
        opt.units = units == "bits" ? ex::Units::bits : ex::Units::nats;
    opt.tol = tol;
    opt.max_iter = max_iter;

    if (*validate)
        return ex::validate_file(check_path, std::cout);
    if (*run)
        return ex::run_file(spec_path, opt, std::cerr);
    return ex::reproduce_figure(figure, trials, seed, out_dir, opt, std::cerr);
}
