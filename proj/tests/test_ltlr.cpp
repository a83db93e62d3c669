// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include "mnv/ltlr.hpp"

#include <functional>
#include <random>

using namespace mnv;
using namespace mnv::ltl;

namespace {

const StateSpace space2{ 2, { "a", "b" } };

Formula atom(std::map<std::string, double> c, double d, bool strict = false)
{
    return make_atom(Atom{ std::move(c), d, strict });
}

// p := a <= 0, q := b <= 0; Boolean traces map true -> 0, false -> 1.
const Formula p = atom({ { "a", 1.0 } }, 0.0);
const Formula q = atom({ { "b", 1.0 } }, 0.0);

std::vector<Vector> boolean_trace(unsigned bits, std::size_t len)
{
    std::vector<Vector> tr;
    for (std::size_t i = 0; i < len; ++i)
        tr.push_back({ (bits >> (2 * i)) & 1U ? 0.0 : 1.0, (bits >> (2 * i + 1)) & 1U ? 0.0 : 1.0 });
    return tr;
}

bool bit_p(unsigned bits, std::size_t i) { return (bits >> (2 * i)) & 1U; }
bool bit_q(unsigned bits, std::size_t i) { return (bits >> (2 * i + 1)) & 1U; }

struct Gen
{
    std::mt19937_64 rng;
    bool allow_unbounded = false;

    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

    Formula random_atom()
    {
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        std::map<std::string, double> c;
        if (pick(3) != 0)
            c["a"] = pick(2) ? std::round(4 * u(rng)) / 4 : u(rng);
        if (pick(2) != 0)
            c["b"] = pick(2) ? 1.0 : u(rng);
        return atom(c, pick(2) ? std::round(u(rng)) : u(rng), pick(4) == 0);
    }

    Formula formula(int depth)
    {
        if (depth == 0 || pick(5) == 0)
            return random_atom();
        const int choices = allow_unbounded ? 13 : 9;
        const int k = pick(4);
        switch (pick(choices)) {
        case 0: return negation(formula(depth - 1));
        case 1: return conjunction({ formula(depth - 1), formula(depth - 1) });
        case 2: return disjunction({ formula(depth - 1), formula(depth - 1), formula(depth - 1) });
        case 3: return next(1 + k, formula(depth - 1));
        case 4: return bounded_always(k, formula(depth - 1));
        case 5: return bounded_eventually(k, formula(depth - 1));
        case 6: return bounded_until(k, formula(depth - 1), formula(depth - 1));
        case 7: return bounded_release(k, formula(depth - 1), formula(depth - 1));
        case 8: return conjunction({ formula(depth - 1), formula(depth - 1) });
        case 9: return always(formula(depth - 1));
        case 10: return eventually(formula(depth - 1));
        case 11: return until(formula(depth - 1), formula(depth - 1));
        default: return release(formula(depth - 1), formula(depth - 1));
        }
    }
};

std::vector<Vector> random_trace(std::mt19937_64& rng, std::size_t len)
{
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<Vector> tr;
    for (std::size_t i = 0; i < len; ++i)
        tr.push_back({ std::round(2 * u(rng)) / 2, u(rng) });
    return tr;
}

} // namespace

TEST_CASE("parse: documented shapes")
{
    SUBCASE("next power")
    {
        const Formula f = parse("X^3 (z <= 2)");
        REQUIRE(f.op() == Op::next);
        CHECK(f.k() == 3);
        CHECK(f.child() == atom({ { "z", 1.0 } }, 2.0));
    }
    SUBCASE("always of a band")
    {
        const Formula f = parse("G (1*x[0] <= 1 & -1*x[0] <= 1)");
        REQUIRE(f.op() == Op::always);
        REQUIRE(f.child().op() == Op::conjunction);
        CHECK(f.child().child(0) == atom({ { "x[0]", 1.0 } }, 1.0));
        CHECK(f.child().child(1) == atom({ { "x[0]", -1.0 } }, 1.0));
    }
    SUBCASE(">= is normalised to <=")
    {
        const Formula f = parse("F (y >= 0.9)");
        REQUIRE(f.op() == Op::eventually);
        CHECK(f.child() == atom({ { "y", -1.0 } }, -0.9));
    }
    SUBCASE("strict comparisons")
    {
        CHECK(parse("x > 1") == atom({ { "x", 1.0 } }, 1.0, true));
        CHECK(parse("x < 1") == atom({ { "x", -1.0 } }, -1.0, true));
        CHECK(parse("2*x + 1 <= y - 3") == atom({ { "x", 2.0 }, { "y", -1.0 } }, -4.0));
        CHECK(parse("x*3 <= 0") == atom({ { "x", 3.0 } }, 0.0));
    }
    SUBCASE("precedence and associativity")
    {
        const Formula a = parse("a <= 0 | b <= 0 & a <= 1");
        REQUIRE(a.op() == Op::disjunction);
        CHECK(a.child(1).op() == Op::conjunction);
        const Formula u = parse("a <= 0 U b <= 0 U a <= 1");
        REQUIRE(u.op() == Op::until);
        CHECK(u.child(1).op() == Op::until);
        const Formula g = parse("G a <= 0 U b <= 0");
        REQUIRE(g.op() == Op::until);
        CHECK(g.child(0).op() == Op::always);
        const Formula bu = parse("a <= 0 U<=2 b <= 0 & a <= 3");
        REQUIRE(bu.op() == Op::conjunction);
        CHECK(bu.child(0).op() == Op::bounded_until);
        CHECK(bu.child(0).k() == 2);
        CHECK(parse("G<=4 F<=1 a <= 0").child().op() == Op::bounded_eventually);
        CHECK(parse("true") == make_true());
        CHECK(parse("false") == make_false());
    }
}

TEST_CASE("parse: errors carry line and column")
{
    try {
        (void)parse("G (x <= 1 &\n   y <=)");
        FAIL("expected a parse error");
    }
    catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(e.column() == 8);
    }
    CHECK_THROWS_AS((void)parse("x <= 1 )"), ParseError);
    CHECK_THROWS_AS((void)parse("X^0 (x <= 1)"), ParseError);
    CHECK_THROWS_AS((void)parse("x $ 1"), ParseError);
    CHECK_THROWS_AS((void)parse("(x <= 1"), ParseError);
    CHECK_THROWS_AS((void)parse("G<=1.5 (x <= 1)"), ParseError);
}

TEST_CASE("print/parse round trip on random formulas")
{
    Gen g{ std::mt19937_64(1), true };
    for (int i = 0; i < 1000; ++i) {
        const Formula f = g.formula(6);
        const std::string text = print(f);
        const Formula back = parse(text);
        CHECK_MESSAGE(back == f, text);
    }
}

TEST_CASE("to_nnf: dualities")
{
    const Formula a = atom({ { "a", 2.0 } }, 1.0);
    CHECK(to_nnf(negation(next(1, a))) == next(1, atom({ { "a", 2.0 } }, 1.0, true)));
    CHECK(to_nnf(negation(negation(a))) == a);
    CHECK(to_nnf(negation(always(a))) == eventually(atom({ { "a", 2.0 } }, 1.0, true)));
    CHECK(to_nnf(negation(until(p, q))) == release(make_atom(p.atom().negated()), make_atom(q.atom().negated())));
    CHECK(is_nnf(to_nnf(parse("!(G (a <= 0) | !(F<=2 (b <= 1) U<=1 a > 3))"))));
}

TEST_CASE("to_nnf: not-always equals eventually-not on every length-3 lasso")
{
    // p over two valuations; enumerate all 2^3 traces and all loop points.
    const Formula f = negation(always(p));
    const Formula g = to_nnf(f);
    CHECK(g == eventually(make_atom(p.atom().negated())));
    for (unsigned bits = 0; bits < 8; ++bits) {
        std::vector<Vector> tr;
        for (std::size_t i = 0; i < 3; ++i)
            tr.push_back({ (bits >> i) & 1U ? 0.0 : 1.0, 0.0 });
        for (std::size_t loop = 0; loop < 3; ++loop) {
            const bool oracle = !((bits & 7U) == 7U); // some step where p fails
            CHECK(eval_on_lasso(f, tr, loop, space2) == oracle);
            CHECK(eval_on_lasso(g, tr, loop, space2) == oracle);
        }
    }
}

TEST_CASE("expand_bounded: identities")
{
    CHECK(expand_bounded(bounded_eventually(2, p)) == disjunction({ next(1, p), next(2, p) }));
    CHECK(expand_bounded(bounded_until(0, p, q)) == q);
    Options zero;
    zero.include_step_zero = true;
    CHECK(expand_bounded(bounded_always(1, p), zero) == conjunction({ p, next(1, p) }));
    CHECK(expand_bounded(bounded_always(0, p)) == make_true());
    CHECK(expand_bounded(bounded_eventually(0, p)) == make_false());
    CHECK_THROWS_AS((void)expand_bounded(always(p)), std::invalid_argument);
}

TEST_CASE("expand_bounded: release and until against quantifier oracles on all Boolean traces")
{
    const int k = 3;
    const Formula rel = bounded_release(k, p, q);
    const Formula unt = bounded_until(k, p, q);
    const Formula rel_x = expand_bounded(rel);
    const Formula unt_x = expand_bounded(unt);
    for (unsigned bits = 0; bits < 256; ++bits) {
        const auto tr = boolean_trace(bits, 4);
        // release: every j <= k has q_j or some earlier p_l
        bool rel_oracle = true;
        for (int j = 0; j <= k; ++j) {
            bool earlier_p = false;
            for (int l = 0; l < j; ++l)
                earlier_p = earlier_p || bit_p(bits, static_cast<std::size_t>(l));
            rel_oracle = rel_oracle && (bit_q(bits, static_cast<std::size_t>(j)) || earlier_p);
        }
        bool unt_oracle = false;
        for (int j = 0; j <= k && !unt_oracle; ++j) {
            bool prefix = true;
            for (int l = 0; l < j; ++l)
                prefix = prefix && bit_p(bits, static_cast<std::size_t>(l));
            unt_oracle = prefix && bit_q(bits, static_cast<std::size_t>(j));
        }
        CHECK(eval_on_path(rel, tr, space2) == rel_oracle);
        CHECK(eval_on_path(rel_x, tr, space2) == rel_oracle);
        CHECK(eval_on_path(unt, tr, space2) == unt_oracle);
        CHECK(eval_on_path(unt_x, tr, space2) == unt_oracle);
        // duality between the two bounded operators
        CHECK(eval_on_path(to_nnf(negation(unt)), tr, space2) == !unt_oracle);
    }
}

TEST_CASE("bounded until with k = 2 matches the truncated unbounded clause on all 2^6 traces")
{
    const Formula f = bounded_until(2, p, q);
    for (unsigned bits = 0; bits < 64; ++bits) {
        const auto tr = boolean_trace(bits, 3);
        bool oracle = false;
        for (std::size_t j = 0; j <= 2; ++j) {
            if (bit_q(bits, j)) {
                oracle = true;
                break;
            }
            if (!bit_p(bits, j))
                break;
        }
        CHECK(eval_on_path(f, tr, space2) == oracle);
    }
}

TEST_CASE("to_nnf and expand_bounded preserve concrete semantics")
{
    Gen g{ std::mt19937_64(2), false };
    std::mt19937_64 rng(3);
    for (bool zero : { false, true }) {
        Options opt;
        opt.include_step_zero = zero;
        for (int i = 0; i < 500; ++i) {
            const Formula f = g.formula(4);
            const auto tr = random_trace(rng, static_cast<std::size_t>(horizon(f, opt) + 1));
            const bool v = eval_on_path(f, tr, space2, opt);
            const Formula n = to_nnf(f);
            CHECK(is_nnf(n));
            CHECK(eval_on_path(n, tr, space2, opt) == v);
            CHECK(eval_on_path(expand_bounded(n, opt), tr, space2, opt) == v);
            CHECK(eval_on_path(expand_bounded(f, opt), tr, space2, opt) == v);
        }
    }
}

TEST_CASE("to_nnf preserves lasso semantics of unbounded formulas")
{
    Gen g{ std::mt19937_64(4), true };
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
        const Formula f = g.formula(3);
        const auto tr = random_trace(rng, 4);
        const std::size_t loop = static_cast<std::size_t>(i % 4);
        CHECK(eval_on_lasso(to_nnf(f), tr, loop, space2) == eval_on_lasso(f, tr, loop, space2));
        CHECK(eval_on_lasso(to_nnf(negation(f)), tr, loop, space2) == !eval_on_lasso(f, tr, loop, space2));
    }
}

TEST_CASE("flatten_next")
{
    SUBCASE("next over a conjunction")
    {
        const Skeleton s = flatten_next(next(1, conjunction({ p, q })));
        REQUIRE(s.leaves.size() == 2);
        CHECK(s.nodes[s.root].kind == Skeleton::Kind::conjunction);
        CHECK(s.leaves[0] == Leaf{ 1, p.atom(), true });
        CHECK(s.leaves[1] == Leaf{ 1, q.atom(), true });
    }
    SUBCASE("lone atom")
    {
        const Skeleton s = flatten_next(p);
        REQUIRE(s.leaves.size() == 1);
        CHECK(s.leaves[0].step == 0);
        CHECK(s.nodes[s.root].kind == Skeleton::Kind::leaf);
    }
    SUBCASE("nested next inside a disjunction")
    {
        const Skeleton s = flatten_next(next(2, disjunction({ p, next(1, q) })));
        REQUIRE(s.leaves.size() == 2);
        CHECK(s.nodes[s.root].kind == Skeleton::Kind::disjunction);
        CHECK(s.leaves[0].step == 2);
        CHECK(s.leaves[1].step == 3);
        CHECK(s.has_disjunction());
    }
    SUBCASE("shared leaves are deduplicated")
    {
        const Skeleton s = flatten_next(conjunction({ next(1, p), disjunction({ next(1, p), q }) }));
        CHECK(s.leaves.size() == 2);
    }
    SUBCASE("agrees with concrete evaluation on random traces")
    {
        Gen g{ std::mt19937_64(6), false };
        std::mt19937_64 rng(7);
        for (int i = 0; i < 100; ++i) {
            const Formula f = to_nnf(g.formula(4));
            const Skeleton s = flatten_next(f);
            const auto tr = random_trace(rng, static_cast<std::size_t>(horizon(f) + 1));
            std::vector<Verdict3> vals;
            for (const auto& leaf : s.leaves)
                vals.push_back(resolve(leaf.atom, space2).holds(tr[static_cast<std::size_t>(leaf.step)])
                                   ? Verdict3::True
                                   : Verdict3::False);
            const bool expected = eval_on_path(f, tr, space2);
            CHECK(eval_skeleton(s, vals) == (expected ? Verdict3::True : Verdict3::False));
        }
    }
}

TEST_CASE("eval_on_path: examples")
{
    const StateSpace one{ 1, { "x" } };
    CHECK(eval_on_path(parse("x <= 1"), { { 0.5 } }, one));
    const StateSpace fig{ 3, { "x1", "x2", "z" } };
    const std::vector<Vector> run{ { 1, 0, 0 }, { 1, 0, 0 }, { 1, 0, 0 } };
    CHECK(eval_on_path(parse("X^2 (z <= 2)"), run, fig));
    CHECK_THROWS_AS((void)eval_on_path(parse("X^3 (z <= 2)"), run, fig), std::out_of_range);
    CHECK_THROWS_AS((void)eval_on_path(parse("G (z <= 2)"), run, fig), std::invalid_argument);
    CHECK_THROWS_AS((void)eval_on_path(parse("w <= 2"), run, fig), ResolveError);
}

TEST_CASE("eval_on_lasso: unbounded operators on a period-2 orbit")
{
    const StateSpace one{ 1, { "x" } };
    const std::vector<Vector> orbit{ { 1.0 }, { -1.0 } };
    CHECK_FALSE(eval_on_lasso(parse("F (x >= 5)"), orbit, 0, one));
    CHECK(eval_on_lasso(parse("G (x <= 1 & x >= -1)"), orbit, 0, one));
    CHECK(eval_on_lasso(parse("G F (x <= -1)"), orbit, 0, one));
    CHECK_FALSE(eval_on_lasso(parse("x >= 0 U x >= 5"), orbit, 0, one));
    CHECK(eval_on_lasso(parse("x >= 5 R x <= 1"), orbit, 0, one));
}

TEST_CASE("eval_on_boxes: examples")
{
    const StateSpace fig{ 3, { "x1", "x2", "z" } };
    auto zbox = [](double hi) { return Box({ 0, 0, 0 }, { 1, 1, hi }); };
    const std::vector<Box> boxes{ zbox(0), zbox(1), zbox(2), zbox(3) };
    CHECK(eval_on_boxes(parse("X^2 (z <= 2)"), boxes, fig) == Verdict3::True);
    CHECK(eval_on_boxes(parse("X^3 (z <= 2)"), boxes, fig) == Verdict3::Unknown);
    const StateSpace one{ 1, { "x" } };
    CHECK(eval_on_boxes(parse("x <= -1"), { Box({ 0 }, { 1 }) }, one) == Verdict3::False);
    CHECK(eval_on_boxes(parse("x > 1"), { Box({ 0 }, { 1 }) }, one) == Verdict3::False);
    CHECK(eval_on_boxes(parse("x > -0.5"), { Box({ 0 }, { 1 }) }, one) == Verdict3::True);
    CHECK(eval_on_boxes(parse("0*x <= 1"), { Box({ -5 }, { 5 }) }, one) == Verdict3::True);
}

TEST_CASE("eval_on_boxes: soundness and monotonicity")
{
    Gen g{ std::mt19937_64(8), false };
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int definite = 0;
    for (int i = 0; i < 300; ++i) {
        const Formula f = g.formula(3);
        const std::size_t len = static_cast<std::size_t>(horizon(f) + 1);
        std::vector<Box> boxes;
        for (std::size_t t = 0; t < len; ++t) {
            Vector lo{ u(rng), u(rng) };
            Vector hi{ lo[0] + unit(rng), lo[1] + 0.5 * unit(rng) };
            boxes.emplace_back(lo, hi);
        }
        const Verdict3 v = eval_on_boxes(f, boxes, space2);
        if (v != Verdict3::Unknown)
            ++definite;
        // shrink every box towards a random interior point
        std::vector<Box> inner;
        for (const auto& b : boxes) {
            Vector lo = b.lower, hi = b.upper;
            for (std::size_t j = 0; j < 2; ++j) {
                const double m = lo[j] + unit(rng) * (hi[j] - lo[j]);
                lo[j] = m - 0.3 * (m - lo[j]);
                hi[j] = m + 0.3 * (hi[j] - m);
            }
            inner.emplace_back(lo, hi);
        }
        const Verdict3 vi = eval_on_boxes(f, inner, space2);
        if (v != Verdict3::Unknown)
            CHECK(vi == v);
        for (int s = 0; s < 100 && v != Verdict3::Unknown; ++s) {
            std::vector<Vector> tr;
            for (const auto& b : boxes)
                tr.push_back({ b.lower[0] + unit(rng) * (b.upper[0] - b.lower[0]),
                               b.lower[1] + unit(rng) * (b.upper[1] - b.lower[1]) });
            CHECK(eval_on_path(f, tr, space2) == (v == Verdict3::True));
        }
    }
    CHECK(definite > 50);
}

TEST_CASE("Kleene connectives")
{
    using V = Verdict3;
    const V all[] = { V::False, V::True, V::Unknown };
    for (V a : all)
        for (V b : all) {
            CHECK(kleene_and(a, b) == kleene_and(b, a));
            CHECK(kleene_not(kleene_and(a, b)) == kleene_or(kleene_not(a), kleene_not(b)));
        }
    CHECK(kleene_and(V::True, V::Unknown) == V::Unknown);
    CHECK(kleene_and(V::False, V::Unknown) == V::False);
    CHECK(kleene_or(V::True, V::Unknown) == V::True);
    CHECK(kleene_or(V::False, V::Unknown) == V::Unknown);
    CHECK(kleene_not(V::Unknown) == V::Unknown);
}

TEST_CASE("structural queries")
{
    CHECK(is_bounded(parse("X (a <= 0) & G<=3 (b <= 1)")));
    CHECK_FALSE(is_bounded(parse("F (a <= 0)")));
    CHECK(is_state_predicate(parse("!(a <= 0) | b <= 1")));
    CHECK_FALSE(is_state_predicate(parse("X (a <= 0)")));
    CHECK(horizon(parse("X^2 (a <= 0 U<=3 X (b <= 0))")) == 6);
    CHECK(variables(parse("a + 2*b <= 0 & c <= 1")) == std::vector<std::string>{ "a", "b", "c" });
    CHECK(print(parse("0 <= 0")) == "0 <= 0");
    CHECK(print(parse("F (y >= 0.9)")) == "F (-y <= -0.9)");
}
