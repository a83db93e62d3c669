// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include "mnv/bench.hpp"
#include "mnv/model.hpp"
#include "mnv/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace mnv;

namespace {

bool has_violation(const ValidationReport& r, const std::string& needle)
{
    return std::any_of(r.violations.begin(), r.violations.end(),
                       [&](const std::string& v) { return v.find(needle) != std::string::npos; });
}

// Direct forward pass of the small example net, written out by hand.
double fig1_output(double x1, double x2, double h)
{
    const double y1 = std::max(0.0, -x1 + x2);
    const double y2 = std::max(0.0, x1 + x2);
    return std::max(0.0, y1 - y2 + h);
}

} // namespace

TEST_CASE("fig1 policy matches the hand-written forward pass")
{
    const auto s = bench::make_fig1();
    REQUIRE(validate_system(s).ok());
    CHECK(s.state_dim() == 3);
    CHECK(s.action_dim() == 1);
    CHECK(s.hidden_dim() == 1);
    CHECK(s.disturbance_dim() == 2);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        const double x1 = u(rng), x2 = u(rng), h = u(rng);
        const auto out = eval_agents(s, std::vector<double>{ x1, x2, 0.0 }, std::vector<double>{ h });
        CHECK(out.action[0] == doctest::Approx(fig1_output(x1, x2, h)));
        CHECK(out.hidden[0] == doctest::Approx(fig1_output(x1, x2, h)));
    }
    const auto zero = eval_agents(s, std::vector<double>{ 1.0, 0.0, 0.0 }, std::vector<double>{ 0.0 });
    CHECK(zero.action[0] == 0.0);
}

TEST_CASE("step relation applies the matching piece")
{
    const auto s = bench::make_fig1();
    const auto succ = step_relation(s, std::vector<double>{ 0.5, 0.5, 0.0 }, std::vector<double>{ 2.0 },
                                    std::vector<double>{ 0.25, 0.75 });
    REQUIRE(succ.size() == 1);
    CHECK(succ[0].x == Vector{ 0.25, 0.75, 2.0 });

    // Two half-line pieces meeting at 0: both fire on the boundary.
    SystemSpec two = bench::make_scalar_linear(1.0, -1.0, 1.0, 1.0, "two");
    two.transition.pieces.clear();
    TransitionPiece lo, hi;
    lo.guard = Polytope{ 1, { { { 1.0 }, milp::Relation::le, 0.0 } }, std::nullopt };
    lo.A = Matrix{ { 1.0 } };
    lo.d = { -1.0 };
    hi.guard = Polytope{ 1, { { { -1.0 }, milp::Relation::le, 0.0 } }, std::nullopt };
    hi.A = Matrix{ { 1.0 } };
    hi.d = { 1.0 };
    two.transition.pieces = { lo, hi };
    REQUIRE(validate_system(two).ok());
    CHECK(step_relation(two, Vector{ 0.0 }, Vector{}, Vector{}).size() == 2);
    const auto neg = step_relation(two, Vector{ -0.5 }, Vector{}, Vector{});
    REQUIRE(neg.size() == 1);
    CHECK(neg[0].piece == 0);
    CHECK(neg[0].x[0] == doctest::Approx(-1.5));
}

TEST_CASE("validation reports structural problems")
{
    SUBCASE("hidden init width")
    {
        auto s = bench::make_fig1();
        s.agents[0].policy.hidden_init = Box({ 0, 0 }, { 0, 0 });
        const auto r = validate_system(s);
        CHECK_FALSE(r.ok());
        CHECK(has_violation(r, "hidden_init"));
        CHECK_THROWS_AS(require_valid(s), DimensionError);
    }
    SUBCASE("initial set outside the state box")
    {
        auto s = bench::make_scalar_linear(1.0, 2.0, 2.0, 1.0, "out");
        s.state_box = Box({ 0.0 }, { 1.0 });
        const auto r = validate_system(s);
        CHECK_FALSE(r.ok());
        CHECK(has_violation(r, "initial"));
    }
    SUBCASE("empty initial set")
    {
        auto s = bench::make_scalar_linear(1.0, 0.0, 1.0, 1.0, "empty");
        s.initial_states.constraints.push_back({ { 1.0 }, milp::Relation::le, -0.5 });
        CHECK(has_violation(validate_system(s), "empty"));
    }
    SUBCASE("transition matrix shape")
    {
        auto s = bench::make_fig1();
        s.transition.pieces[0].A = Matrix(2, 3, 0.0);
        CHECK(has_violation(validate_system(s), "A"));
    }
    SUBCASE("layer chain")
    {
        auto s = bench::make_fig1();
        std::get<AffineLayer>(s.agents[0].policy.layers[0]).W = Matrix(2, 3, 1.0);
        CHECK_FALSE(validate_system(s).ok());
    }
    SUBCASE("action box width")
    {
        auto s = bench::make_fig1();
        s.agents[0].action_box = Box({ 0, 0 }, { 1, 1 });
        CHECK(has_violation(validate_system(s), "action_box"));
    }
    SUBCASE("infinite state box")
    {
        auto s = bench::make_fig1();
        s.state_box.upper[2] = milp::inf;
        CHECK_FALSE(validate_system(s).ok());
    }
    SUBCASE("builtins are valid")
    {
        for (const auto& n : bench::builtin_names()) {
            CAPTURE(n);
            CHECK(validate_system(bench::builtin(n)).ok());
        }
    }
}

TEST_CASE("state names resolve")
{
    const auto s = bench::make_fig1();
    CHECK(s.state_index("z") == 2u);
    CHECK(s.state_index("x[1]") == 1u);
    CHECK_FALSE(s.state_index("x[7]").has_value());
    CHECK_FALSE(s.state_index("nope").has_value());
    CHECK(s.state_name(0) == "x1");
}

TEST_CASE("json round trip preserves the system")
{
    for (const auto& name : bench::builtin_names()) {
        CAPTURE(name);
        const auto s = bench::builtin(name);
        const auto back = system_from_json(system_to_json(s));
        CHECK(back == s);
        CHECK(system_to_json(back) == system_to_json(s));
    }
}

TEST_CASE("json loader rejects malformed documents")
{
    auto doc = system_to_json(bench::make_fig1());
    SUBCASE("missing key")
    {
        doc.erase("transition");
        CHECK_THROWS_AS(system_from_json(doc), ModelFormatError);
    }
    SUBCASE("bad layer type")
    {
        doc["agents"][0]["policy"]["layers"][0]["type"] = "conv";
        CHECK_THROWS_AS(system_from_json(doc), ModelFormatError);
    }
    SUBCASE("bad relation")
    {
        doc["initial_states"]["constraints"] = nlohmann::json::array(
            { { { "c", { 1, 0, 0 } }, { "rel", "!=" }, { "rhs", 0 } } });
        CHECK_THROWS_AS(system_from_json(doc), ModelFormatError);
    }
}

TEST_CASE("replay residual of simulated paths")
{
    for (const auto& name : bench::builtin_names()) {
        CAPTURE(name);
        const auto s = bench::builtin(name);
        const auto p = bench::simulate(s, 8, bench::SimOptions::with_seed(11));
        CHECK(p.length() == 9);
        CHECK(replay_residual(s, p) <= 1e-9);
        auto bad = p;
        bad.steps[3].x[0] += 0.5;
        CHECK(replay_residual(s, bad) >= 0.1);
        const auto back = path_from_json(path_to_json(p));
        CHECK(replay_residual(s, back) <= 1e-9);
    }
}

TEST_CASE("totality sampling")
{
    CHECK(sample_totality_gaps(bench::make_fig1(), 500, 1) == 0);
    CHECK(sample_totality_gaps(bench::builtin("pendulum"), 500, 1) == 0);
    CHECK(sample_totality_gaps(bench::builtin("cartpole"), 500, 1) == 0);
    auto s = bench::make_scalar_linear(1.0, 0.0, 1.0, 1.0, "partial");
    s.transition.pieces[0].guard = Polytope{ 1, { { { 1.0 }, milp::Relation::le, 0.0 } }, std::nullopt };
    const auto gaps = sample_totality_gaps(s, 1000, 2);
    CHECK(gaps > 350);
    CHECK(gaps < 650);
}
