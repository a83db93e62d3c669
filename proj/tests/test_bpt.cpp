// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include "mnv/bench.hpp"
#include "mnv/bpt.hpp"

#include <random>

using namespace mnv;

namespace {

TransitionPiece shift_piece(double by)
{
    TransitionPiece p;
    p.guard = Polytope::universe(1);
    p.A = Matrix{ { 1.0 } };
    p.d = { by };
    return p;
}

} // namespace

TEST_CASE("affine propagation")
{
    const Box in({ 0, 0 }, { 1, 1 });
    const auto out = bpt::propagate_affine(in, Matrix{ { -1, 1 }, { 1, 1 } }, Vector{ 0, 0 });
    CHECK(out == Box({ -1, 0 }, { 1, 2 }));
    CHECK(bpt::propagate_affine(in, Matrix::identity(2), Vector{ 0, 0 }) == in);
    CHECK_THROWS_AS(bpt::propagate_affine(in, Matrix(1, 3, 1.0), Vector{ 0 }), DimensionError);

    // Sampled points map inside, and the bounds are attained at vertices.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix W(3, 4);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            W(r, c) = u(rng);
    const Vector b{ 0.5, -0.25, 0.0 };
    const Box box({ -1, 0, 2, -3 }, { 1, 0.5, 2.5, 3 });
    const Box img = bpt::propagate_affine(box, W, b);
    for (int i = 0; i < 1000; ++i) {
        Vector x(4);
        for (std::size_t j = 0; j < 4; ++j)
            x[j] = box.lower[j] + (box.upper[j] - box.lower[j]) * 0.5 * (u(rng) + 1.0);
        Vector y(3);
        for (std::size_t r = 0; r < 3; ++r)
            y[r] = dot(std::vector<double>{ W(r, 0), W(r, 1), W(r, 2), W(r, 3) }, x) + b[r];
        CHECK(img.contains(y, 1e-12));
    }
    for (std::size_t r = 0; r < 3; ++r) {
        double best = -1e300, worst = 1e300;
        for (int mask = 0; mask < 16; ++mask) {
            double v = b[r];
            for (std::size_t j = 0; j < 4; ++j)
                v += W(r, j) * ((mask >> j) & 1 ? box.upper[j] : box.lower[j]);
            best = std::max(best, v);
            worst = std::min(worst, v);
        }
        CHECK(img.upper[r] == doctest::Approx(best));
        CHECK(img.lower[r] == doctest::Approx(worst));
    }
}

TEST_CASE("relu propagation")
{
    CHECK(bpt::propagate_relu(Box({ -2, 1, -3 }, { -1, 2, 4 })) == Box({ 0, 1, 0 }, { 0, 2, 4 }));
    CHECK(bpt::propagate_relu(Box({ -1 }, { 1 })) == Box({ 0 }, { 1 }));
    CHECK(bpt::propagate_relu(Box({ 2 }, { 3 })) == Box({ 2 }, { 3 }));
    CHECK(bpt::propagate_relu(Box({ -3 }, { -1 })) == Box({ 0 }, { 0 }));
}

TEST_CASE("transition propagation")
{
    TransitionRelation rel;
    rel.pieces = { shift_piece(1.0) };
    CHECK(bpt::propagate_transition(Box({ 0 }, { 1 }), rel, 1) == Box({ 1 }, { 2 }));
    rel.pieces = { shift_piece(1.0), shift_piece(-1.0) };
    std::vector<bool> active;
    CHECK(bpt::propagate_transition(Box({ 0 }, { 1 }), rel, 1, &active) == Box({ -1 }, { 2 }));
    CHECK(active == std::vector<bool>{ true, true });

    // Guards clip the box: x <= 0.25 takes +1 on [0, 0.25] only.
    rel.pieces[0].guard = Polytope{ 1, { { { 1.0 }, milp::Relation::le, 0.25 } }, std::nullopt };
    rel.pieces[1].guard = Polytope{ 1, { { { -1.0 }, milp::Relation::le, -0.25 } }, std::nullopt };
    CHECK(bpt::propagate_transition(Box({ 0 }, { 1 }), rel, 1) == Box({ -0.75 }, { 1.25 }));
    rel.pieces[0].guard = Polytope{ 1, { { { -1.0 }, milp::Relation::le, -5.0 } }, std::nullopt };
    rel.pieces[1].guard = rel.pieces[0].guard;
    CHECK_THROWS_AS(bpt::propagate_transition(Box({ 0 }, { 1 }), rel, 1), bpt::TotalityGap);

    // A single identity piece returns the x-projection of the (x, a) box.
    TransitionRelation id;
    TransitionPiece pc;
    pc.guard = Polytope::universe(3);
    pc.A = Matrix::identity(2);
    pc.d = { 0, 0 };
    id.pieces = { pc };
    CHECK(bpt::propagate_transition(Box({ -1, 2, 5 }, { 0, 3, 6 }), id, 2) == Box({ -1, 2 }, { 0, 3 }));
}

TEST_CASE("pendulum transition box contains the true Euler step")
{
    const bench::PendulumParams p;
    const auto s = bench::make_pendulum(p, 8, bench::random_policy(0, { 2, 3, 1 }, 0, 0.0));
    const double k1 = 3 * p.g / (2 * p.l), k2 = 3 / (p.m * p.l * p.l);
    const Box xa({ 0.0, -1.0, -0.5 }, { 0.5, 1.0, 0.5 });
    const Box hull = bpt::propagate_transition(xa, s.transition, 2);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double th = 0.5 * u(rng), thd = -1.0 + 2 * u(rng), a = -0.5 + u(rng);
        const double thd2 = thd + p.dt * (k1 * std::sin(th) + k2 * a);
        const Vector next{ th + p.dt * thd2, thd2 };
        CHECK(hull.contains(next, 1e-12));
    }
}

TEST_CASE("fig1 z bounds grow by one per step")
{
    const auto s = bench::make_fig1();
    const auto trace = bpt::bpt_run(s, 3);
    REQUIRE(trace.depth() == 3);
    REQUIRE(trace.steps.size() == 3);
    for (std::size_t t = 0; t <= 3; ++t) {
        const Box x = trace.state_box(t);
        CHECK(x.lower[2] == doctest::Approx(0.0));
        CHECK(x.upper[2] == doctest::Approx(static_cast<double>(t)));
        CHECK(trace.hidden_box(t).upper[0] == doctest::Approx(static_cast<double>(t)));
    }
    // Two ReLU units plus the ReLU recurrent unit per step.
    CHECK(trace.steps[0].relu_pre.size() == 3);
    CHECK(trace.steps[0].relu_pre[0] == Interval{ -1, 1 });
    CHECK(trace.steps[0].relu_pre[1] == Interval{ 0, 2 });
    CHECK(trace.steps[0].relu_pre[2] == Interval{ -2, 1 });
    CHECK(trace.steps[0].action == Box({ 0 }, { 1 }));
}

TEST_CASE("bounds contain sampled runs")
{
    for (const char* name : { "fig1", "pendulum", "cartpole", "contracting", "period2", "pendulum:seed=3,hidden=6" }) {
        CAPTURE(name);
        const auto s = bench::builtin(name);
        const auto trace = bpt::bpt_run(s, 10);
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            const auto p = bench::simulate(s, 10, bench::SimOptions::with_seed(seed));
            for (std::size_t t = 0; t <= 10; ++t)
                CHECK(trace.boxes[t].contains(p.joint(t), 1e-9));
        }
    }
}

TEST_CASE("bound traces extend consistently")
{
    const auto s = bench::builtin("pendulum");
    const auto long_trace = bpt::bpt_run(s, 10);
    auto short_trace = bpt::bpt_run(s, 5);
    for (std::size_t t = 0; t <= 5; ++t)
        CHECK(short_trace.boxes[t] == long_trace.boxes[t]);
    bpt::extend(s, short_trace, 10);
    CHECK(short_trace.boxes == long_trace.boxes);
    // Boxes only widen: each step contains the image of a point box.
    const auto id = bench::builtin("identity");
    const auto fix = bpt::bpt_run(id, 6);
    for (const auto& b : fix.boxes)
        CHECK(b == Box({ -1 }, { 1 }));
}

TEST_CASE("initial box from a general polytope")
{
    auto s = bench::make_scalar_linear(1.0, 0.0, 1.0, 4.0, "tri");
    s.state_box = Box({ -4, -4 }, { 4, 4 });
    s.transition.pieces[0].A = Matrix::identity(2);
    s.transition.pieces[0].d = { 0, 0 };
    s.transition.pieces[0].guard = Polytope::universe(2);
    s.initial_states = Polytope{ 2,
                                 { { { 1, 1 }, milp::Relation::le, 1 },
                                   { { -1, 0 }, milp::Relation::le, 0 },
                                   { { 0, -1 }, milp::Relation::le, 0 } },
                                 std::nullopt };
    s.state_names = { "p", "q" };
    REQUIRE(validate_system(s).ok());
    const Box b = bpt::initial_box(s);
    CHECK(b.lower[0] == doctest::Approx(0.0));
    CHECK(b.upper[0] == doctest::Approx(1.0));
    CHECK(b.upper[1] == doctest::Approx(1.0));
    s.initial_states.constraints.push_back({ { 1, 0 }, milp::Relation::le, -1 });
    CHECK_THROWS_AS(bpt::initial_box(s), DimensionError);
}

TEST_CASE("next-atom checks on bounds")
{
    const auto trace = bpt::bpt_run(bench::make_fig1(), 3);
    // z <= 3 at step 3 holds on the whole box.
    CHECK(bpt::check_next_atom_bpt(trace, 3, { { 0, 0, 1, 0 }, 3.0, false }) == ltl::Verdict3::True);
    // z <= 1 at step 3 is not decided by bounds.
    CHECK(bpt::check_next_atom_bpt(trace, 3, { { 0, 0, 1, 0 }, 1.0, false }) == ltl::Verdict3::Unknown);
    // z <= -1 fails on the whole box, still reported as Unknown.
    CHECK(bpt::check_next_atom_bpt(trace, 1, { { 0, 0, 1, 0 }, -1.0, false }) == ltl::Verdict3::Unknown);
    // negation of z <= -1
    CHECK(bpt::check_next_atom_bpt(trace, 1, { { 0, 0, 1, 0 }, -1.0, false }, false) == ltl::Verdict3::True);
    CHECK_THROWS_AS(bpt::check_next_atom_bpt(trace, 4, { { 0, 0, 1, 0 }, 1.0, false }), std::out_of_range);
    // The vacuous atom 0.x <= 1 holds everywhere.
    for (std::size_t t = 0; t <= 3; ++t)
        CHECK(bpt::check_next_atom_bpt(trace, t, { { 0, 0, 0 }, 1.0, false }) == ltl::Verdict3::True);
}
