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
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "deteq/experiment.hpp"

namespace ex = deteq::experiment;
using ex::json;

namespace {

json relay_spec(int trials = 0) {
    json j = {{"model", "relay"},
              {"config", {{"dims", {4, 8, 12, 8, 4}}, {"alphas", {1.0, 0.7, 0.5, 0.7}}, {"rho_scale", {1.0, 0.7, 0.5, 0.7}}}},
              {"sweep", {{"variable", "rho0_db"}, {"start", 0}, {"stop", 20}, {"step", 10}}},
              {"output", {{"path", "relay.csv"}, {"format", "csv"}}}};
    if (trials > 0)
        j["mc"] = {{"trials", trials}, {"seed", 11}};
    return j;
}

json rayleigh_spec() {
    return {{"model", "rayleigh-product"},
            {"config", {{"N", 6}, {"S", 3}, {"K", 2}}},
            {"sweep", {{"variable", "rho_db"}, {"values", {-10, 0, 10, 20}}}},
            {"output", {{"path", "rp.csv"}}}};
}

json keyhole_spec() {
    const json eye4 = {{"type", "identity"}, {"n", 4}};
    return {{"model", "mac"},
            {"config",
             {{"transmitters",
               {{{"R", eye4}, {"S", {{"type", "identity"}, {"n", 2}}}, {"T", eye4}, {"Q", eye4}}}}}},
            {"sweep", {{"variable", "rho_db"}, {"values", {0, 10}}}},
            {"output", {{"path", "kh.json"}, {"format", "json"}}}};
}

ex::ExperimentSpec parse_ok(const json &j) {
    const auto r = ex::parse_spec(j);
    EXPECT_TRUE(r.spec.has_value()) << (r.errors.empty() ? "" : r.errors.front());
    return *r.spec;
}

bool mentions(const std::vector<std::string> &errors, const std::string &needle) {
    for (const auto &e : errors)
        if (e.find(needle) != std::string::npos)
            return true;
    return false;
}

class TempDir {
public:
    TempDir() : path_(std::filesystem::temp_directory_path() / ("deteq_test_" + std::to_string(::getpid()))) {
        std::filesystem::create_directories(path_);
        old_ = std::filesystem::current_path();
        std::filesystem::current_path(path_);
    }
    ~TempDir() {
        std::filesystem::current_path(old_);
        std::filesystem::remove_all(path_);
    }
    std::string write(const std::string &name, const std::string &content) const {
        std::ofstream(path_ / name) << content;
        return (path_ / name).string();
    }

private:
    std::filesystem::path path_, old_;
};

} // namespace

TEST(ExperimentSpec, SweepExpandsInclusiveRange) {
    const auto spec = parse_ok(relay_spec());
    EXPECT_EQ(spec.sweep.values, (std::vector<double>{0, 10, 20}));
    EXPECT_EQ(spec.units, ex::Units::nats);
}

TEST(ExperimentSpec, ReportsEveryViolationWithItsPath) {
    json j = relay_spec();
    j["config"]["alphas"] = {1.0, -0.7, 0.5, 0.7};
    j["config"]["dims"][2] = 0;
    j["sweep"] = {{"variable", "rho0_db"}, {"values", {0, 10, 5}}};
    j["output"]["format"] = "xml";
    j["units"] = "hartleys";
    const auto r = ex::parse_spec(j);
    ASSERT_FALSE(r.spec);
    EXPECT_TRUE(mentions(r.errors, "config.alphas[1]"));
    EXPECT_TRUE(mentions(r.errors, "config.dims[2]"));
    EXPECT_TRUE(mentions(r.errors, "sweep.values[2]"));
    EXPECT_TRUE(mentions(r.errors, "output.format"));
    EXPECT_TRUE(mentions(r.errors, "units"));
    EXPECT_GE(r.errors.size(), 5u);
}

TEST(ExperimentSpec, HopCountAboveCapCitesTheLimit) {
    json j = relay_spec();
    std::vector<int> dims(13, 2);
    std::vector<double> ones(12, 1.0);
    j["config"]["dims"] = dims;
    j["config"]["alphas"] = ones;
    j["config"]["rho_scale"] = ones;
    const auto r = ex::parse_spec(j);
    ASSERT_FALSE(r.spec);
    EXPECT_TRUE(mentions(r.errors, "config.max_hops = 8"));

    j["config"]["max_hops"] = 12;
    EXPECT_TRUE(ex::parse_spec(j).spec.has_value());
}

TEST(ExperimentSpec, MacMatrixProblemsNameTheField) {
    json j = keyhole_spec();
    j["config"]["transmitters"][0]["R"] = {{"type", "dense"}, {"re", {{1.0, 2.0}, {0.0, 1.0}}}};
    j["config"]["transmitters"][0]["Q"] = {{"type", "diag"}, {"values", {1.0, -1.0, 0.0, 0.0}}};
    const auto r = ex::parse_spec(j);
    ASSERT_FALSE(r.spec);
    EXPECT_TRUE(mentions(r.errors, "config.transmitters[0].R"));
    EXPECT_TRUE(mentions(r.errors, "config.transmitters[0].Q"));
}

TEST(ExperimentSpec, UnknownFieldsAndWrongSweepVariableAreRejected) {
    json j = rayleigh_spec();
    j["sweep"]["variable"] = "rho0_db";
    j["extra"] = 1;
    const auto r = ex::parse_spec(j);
    ASSERT_FALSE(r.spec);
    EXPECT_TRUE(mentions(r.errors, "sweep.variable"));
    EXPECT_TRUE(mentions(r.errors, "extra: unknown field"));
}

TEST(ExperimentSpec, SyntaxErrorReportsLine) {
    const auto r = ex::parse_spec_text("{\n  \"model\": \"relay\",\n  \"config\": {,\n}");
    ASSERT_FALSE(r.spec);
    ASSERT_EQ(r.errors.size(), 1u);
    EXPECT_EQ(r.errors.front().rfind("line 3:", 0), 0u) << r.errors.front();
}

TEST(ExperimentRun, RelayRowsAreNonnegativeAndShrinkAlongTheChain) {
    const ex::Table t = ex::run_spec(parse_ok(relay_spec()));
    EXPECT_EQ(t.columns, (std::vector<std::string>{"rho0_db", "hop", "deteq"}));
    ASSERT_EQ(t.rows.size(), 12u);
    for (std::size_t p = 0; p < 3; ++p) {
        double prev = INFINITY;
        for (std::size_t k = 0; k < 4; ++k) {
            const double v = std::get<double>(t.rows[4 * p + k][2]);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, prev);
            prev = v;
        }
    }
    EXPECT_NEAR(std::get<double>(t.rows[4][2]), 0.695115523416, 1e-9);
}

TEST(ExperimentRun, CsvIsByteIdenticalAcrossRuns) {
    const auto spec = parse_ok(relay_spec(200));
    const std::string a = ex::to_csv(ex::run_spec(spec));
    const std::string b = ex::to_csv(ex::run_spec(spec));
    EXPECT_EQ(a, b);
    EXPECT_NE(a.find("rho0_db,hop,deteq,mc_mean,mc_std,mc_stderr,trials\n"), std::string::npos);
}

TEST(ExperimentRun, BitsAreNatsOverLn2) {
    const auto spec = parse_ok(rayleigh_spec());
    ex::RunOptions bits;
    bits.units = ex::Units::bits;
    const ex::Table n = ex::run_spec(spec);
    const ex::Table b = ex::run_spec(spec, bits);
    ASSERT_EQ(n.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < n.rows.size(); ++i) {
        const double vn = std::get<double>(n.rows[i][2]);
        const double vb = std::get<double>(b.rows[i][2]);
        if (std::get<std::string>(n.rows[i][1]) == "mutual_info")
            EXPECT_DOUBLE_EQ(vb, vn / std::numbers::ln2);
        else
            EXPECT_DOUBLE_EQ(vb, vn);
    }
}

TEST(ExperimentRun, RayleighProductPassesTheClosedFormThrough) {
    const ex::Table t = ex::run_spec(parse_ok(rayleigh_spec()));
    ASSERT_EQ(t.rows.size(), 12u);
    const auto ref = deteq::rayleigh_product_closed_form(6, 3, 2, 10.0);
    EXPECT_EQ(std::get<double>(t.rows[6][2]), ref.gbar);
    EXPECT_EQ(std::get<double>(t.rows[7][2]), ref.ibar);
    EXPECT_EQ(std::get<double>(t.rows[8][2]), ref.gamma);
}

TEST(ExperimentRun, WaterfillEchoMeetsEveryBudget) {
    json j = keyhole_spec();
    j["waterfill"] = {{"budgets", {1.0}}};
    const ex::Table t = ex::run_spec(parse_ok(j));
    const json out = ex::to_json(t);
    ASSERT_TRUE(out.contains("waterfill"));
    ASSERT_EQ(out["waterfill"].size(), 2u);
    for (const auto &point : out["waterfill"])
        for (const auto &tx : point["transmitters"]) {
            EXPECT_EQ(tx["budget"].get<double>(), 1.0);
            EXPECT_NEAR(tx["sum_power"].get<double>(), 1.0, 1e-9);
        }
    // given and optimal precoders for both metrics at each grid point
    EXPECT_EQ(out["rows"].size(), 8u);
}

TEST(ExperimentFiles, ExitCodes) {
    TempDir dir;
    std::ostringstream log;
    EXPECT_EQ(ex::run_file("does-not-exist.json", {}, log), ex::kExitIo);

    json bad = relay_spec();
    bad["config"]["alphas"] = {1.0};
    const std::string bad_path = dir.write("bad.json", bad.dump());
    EXPECT_EQ(ex::validate_file(bad_path, log), ex::kExitInvalid);
    EXPECT_EQ(ex::run_file(bad_path, {}, log), ex::kExitInvalid);

    const std::string good_path = dir.write("good.json", relay_spec().dump());
    EXPECT_EQ(ex::validate_file(good_path, log), ex::kExitOk);
    EXPECT_EQ(ex::run_file(good_path, {}, log), ex::kExitOk);
    EXPECT_TRUE(std::filesystem::exists("relay.csv"));

    ex::RunOptions starved;
    starved.max_iter = 1;
    std::ostringstream failure;
    EXPECT_EQ(ex::run_file(good_path, starved, failure), ex::kExitNonConvergence);
    EXPECT_NE(failure.str().find("rho0_db=0"), std::string::npos) << failure.str();
}
