// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Test-only references over whole systems: a random small-system generator
// and extreme values of the reachable set by enumerating every activation
// pattern and piece choice, one LP per combination (pruned on infeasible
// prefixes). Uses the model types and the LP solver only.
#pragma once

#include "mnv/bench.hpp"
#include "mnv/milp.hpp"
#include "mnv/model.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace mnv::testing {

struct SmallSystem
{
    SystemSpec spec;
    std::size_t depth = 1;
    std::size_t relus_per_step = 0;
};

/// One agent with a 1- or 2-unit ReLU layer (optionally a 1-unit recurrent
/// ReLU layer), one or two pieces split on x0, 1-D disturbance. Depth keeps
/// the total activation count at or below `max_relus`.
inline SmallSystem random_small_system(std::uint64_t seed, std::size_t max_relus = 12)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const std::size_t nx = 1 + rng() % 2;
    const std::size_t hidden = 1 + rng() % 2;
    const std::size_t rec = rng() % 2;
    SmallSystem out;
    out.relus_per_step = hidden + rec;
    const std::size_t max_depth = std::min<std::size_t>(4, max_relus / out.relus_per_step);
    out.depth = 1 + rng() % max_depth;

    auto& s = out.spec;
    s.name = "random";
    s.state_box = Box::uniform(nx, -100.0, 100.0);
    Vector lo(nx), hi(nx);
    for (std::size_t j = 0; j < nx; ++j) {
        lo[j] = 0.5 * u(rng);
        hi[j] = lo[j] + 0.2 + 0.5 * (u(rng) + 1.0);
    }
    s.initial_states = Polytope::from_box(Box(lo, hi));
    if (nx == 2 && rng() % 2)
        s.initial_states.constraints.push_back({ { 1.0, 1.0 }, milp::Relation::le, hi[0] + lo[1] });
    AgentSpec ag;
    ag.name = "pi";
    ag.observation = { Matrix::identity(nx), Vector(nx, 0.0) };
    ag.policy = bench::random_policy(seed * 7919 + 1, { nx, hidden, 1 }, rec, 1.5);
    ag.policy.hidden_init = Box::uniform(rec, -0.2, 0.3);
    ag.action_box = Box({ -10 }, { 10 });
    s.agents.push_back(ag);
    s.transition.disturbance_box = Box({ -0.1 }, { 0.05 + 0.1 * (u(rng) + 1.0) });
    const std::size_t pieces = 1 + rng() % 2;
    const double cut = 0.3 * u(rng);
    for (std::size_t p = 0; p < pieces; ++p) {
        TransitionPiece pc;
        pc.A = Matrix(nx, nx);
        pc.B = Matrix(nx, 1);
        pc.C = Matrix(nx, 1);
        pc.d = Vector(nx);
        for (std::size_t i = 0; i < nx; ++i) {
            for (std::size_t j = 0; j < nx; ++j)
                pc.A(i, j) = 0.7 * u(rng);
            pc.B(i, 0) = u(rng);
            pc.C(i, 0) = u(rng);
            pc.d[i] = 0.3 * u(rng);
        }
        Vector g(nx + 2, 0.0);
        g[0] = p == 0 ? 1.0 : -1.0;
        pc.guard = pieces == 1 ? Polytope::universe(nx + 2)
                               : Polytope{ nx + 2, { { g, milp::Relation::le, p == 0 ? cut + 0.05 : -cut } }, std::nullopt };
        s.transition.pieces.push_back(std::move(pc));
    }
    s.hidden_box = Box::uniform(rec, -100.0, 100.0);
    return out;
}

namespace detail {

struct PathVars
{
    std::vector<int> x;
    std::vector<int> h;
};

inline int free_var(milp::Instance& inst)
{
    return inst.add_continuous(-milp::inf, milp::inf);
}

inline std::vector<milp::LinExpr> apply(const Matrix& W, std::span<const double> b,
                                        const std::vector<milp::LinExpr>& in)
{
    std::vector<milp::LinExpr> out(W.rows());
    for (std::size_t r = 0; r < W.rows(); ++r) {
        milp::LinExpr e(r < b.size() ? b[r] : 0.0);
        for (std::size_t c = 0; c < W.cols(); ++c)
            e += W(r, c) * in[c];
        out[r] = e;
    }
    return out;
}

inline std::size_t relu_units(const SystemSpec& s)
{
    std::size_t n = 0;
    for (const auto& ag : s.agents) {
        std::size_t width = ag.observation.d.size();
        for (const auto& l : ag.policy.layers) {
            if (const auto* a = std::get_if<AffineLayer>(&l))
                width = a->W.rows();
            else if (std::holds_alternative<ReluLayer>(l))
                n += width;
            else {
                const auto& r = std::get<RecurrentLayer>(l);
                width = r.width();
                n += r.activation == Activation::relu ? width : 0;
            }
        }
    }
    return n;
}

// Adds one step with every ReLU fixed by `mask` and the given piece.
inline PathVars add_fixed_step(milp::Instance& inst, const SystemSpec& s, const PathVars& cur, std::uint64_t mask,
                               std::size_t piece)
{
    std::size_t unit = 0;
    auto fixed_relu = [&](const milp::LinExpr& pre) {
        const bool on = (mask >> unit++) & 1U;
        const int y = free_var(inst);
        if (on) {
            inst.add_eq(milp::LinExpr::var(y) - pre, 0.0);
            inst.add_ge(pre, 0.0);
        }
        else {
            inst.add_eq(milp::LinExpr::var(y), 0.0);
            inst.add_le(pre, 0.0);
        }
        return y;
    };
    std::vector<milp::LinExpr> xs;
    for (int id : cur.x)
        xs.push_back(milp::LinExpr::var(id));
    PathVars next;
    std::vector<int> a_ids;
    std::size_t h_off = 0;
    for (const auto& ag : s.agents) {
        auto v = apply(ag.observation.C, ag.observation.d, xs);
        for (const auto& l : ag.policy.layers) {
            if (const auto* a = std::get_if<AffineLayer>(&l))
                v = apply(a->W, a->b, v);
            else if (std::holds_alternative<ReluLayer>(l)) {
                for (auto& e : v)
                    e = milp::LinExpr::var(fixed_relu(e));
            }
            else {
                const auto& r = std::get<RecurrentLayer>(l);
                std::vector<milp::LinExpr> hv;
                for (std::size_t j = 0; j < r.width(); ++j)
                    hv.push_back(milp::LinExpr::var(cur.h[h_off + j]));
                auto pre = apply(r.W_in, r.b, v);
                const auto ph = apply(r.W_h, {}, hv);
                v.clear();
                for (std::size_t j = 0; j < pre.size(); ++j) {
                    pre[j] += ph[j];
                    int id;
                    if (r.activation == Activation::relu)
                        id = fixed_relu(pre[j]);
                    else {
                        id = free_var(inst);
                        inst.add_eq(milp::LinExpr::var(id) - pre[j], 0.0);
                    }
                    next.h.push_back(id);
                    v.push_back(milp::LinExpr::var(id));
                }
                h_off += r.width();
            }
        }
        for (auto& e : v) {
            const int id = free_var(inst);
            inst.add_eq(milp::LinExpr::var(id) - e, 0.0);
            a_ids.push_back(id);
        }
    }
    std::vector<int> w_ids;
    const Box& wb = s.transition.disturbance_box;
    for (std::size_t j = 0; j < wb.dim(); ++j)
        w_ids.push_back(inst.add_continuous(wb.lower[j], wb.upper[j]));
    std::vector<int> xaw = cur.x;
    xaw.insert(xaw.end(), a_ids.begin(), a_ids.end());
    xaw.insert(xaw.end(), w_ids.begin(), w_ids.end());
    const auto& pc = s.transition.pieces[piece];
    // Box part of the guard as explicit rows so free variables stay free.
    Polytope g = pc.guard;
    if (g.box) {
        for (std::size_t j = 0; j < g.dim; ++j) {
            Vector e(g.dim, 0.0);
            e[j] = 1.0;
            if (std::isfinite(g.box->upper[j]))
                g.constraints.push_back({ e, milp::Relation::le, g.box->upper[j] });
            e[j] = -1.0;
            if (std::isfinite(g.box->lower[j]))
                g.constraints.push_back({ e, milp::Relation::le, -g.box->lower[j] });
        }
        g.box.reset();
    }
    g.add_to(inst, xaw);
    for (std::size_t i = 0; i < s.state_dim(); ++i) {
        milp::LinExpr e(pc.d[i]);
        for (std::size_t j = 0; j < s.state_dim() && !pc.A.empty(); ++j)
            e.add(cur.x[j], pc.A(i, j));
        for (std::size_t j = 0; j < a_ids.size() && !pc.B.empty(); ++j)
            e.add(a_ids[j], pc.B(i, j));
        for (std::size_t j = 0; j < w_ids.size() && !pc.C.empty(); ++j)
            e.add(w_ids[j], pc.C(i, j));
        const int id = free_var(inst);
        inst.add_eq(milp::LinExpr::var(id) - e, 0.0);
        next.x.push_back(id);
    }
    return next;
}

inline void enumerate(const milp::Instance& inst, const SystemSpec& s, const PathVars& cur, std::size_t t,
                      std::size_t target, std::size_t coord, milp::Sense sense, std::optional<double>& best,
                      std::size_t& lps)
{
    ++lps;
    if (milp::solve_lp(inst).status != milp::Status::optimal)
        return;
    if (t == target) {
        milp::Instance q = inst;
        const int id = coord < cur.x.size() ? cur.x[coord] : cur.h[coord - cur.x.size()];
        q.set_objective(milp::LinExpr::var(id), sense);
        const auto r = milp::solve_lp(q);
        if (r.status != milp::Status::optimal)
            return;
        const double v = *r.objective_value;
        if (!best || (sense == milp::Sense::maximize ? v > *best : v < *best))
            best = v;
        return;
    }
    const std::size_t units = relu_units(s);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{ 1 } << units); ++mask)
        for (std::size_t p = 0; p < s.transition.pieces.size(); ++p) {
            milp::Instance next = inst;
            const auto nv = add_fixed_step(next, s, cur, mask, p);
            enumerate(next, s, nv, t + 1, target, coord, sense, best, lps);
        }
}

} // namespace detail

/// Extreme of joint coordinate `coord` of (x, h) over all runs reaching step t.
inline std::optional<double> brute_force_extreme(const SystemSpec& s, std::size_t t, std::size_t coord,
                                                 milp::Sense sense, std::size_t* lp_count = nullptr)
{
    milp::Instance inst;
    detail::PathVars start;
    for (std::size_t j = 0; j < s.state_dim(); ++j)
        start.x.push_back(detail::free_var(inst));
    Polytope init = s.initial_states;
    if (init.box) {
        for (std::size_t j = 0; j < s.state_dim(); ++j) {
            Vector e(s.state_dim(), 0.0);
            e[j] = 1.0;
            init.constraints.push_back({ e, milp::Relation::le, init.box->upper[j] });
            e[j] = -1.0;
            init.constraints.push_back({ e, milp::Relation::le, -init.box->lower[j] });
        }
        init.box.reset();
    }
    init.add_to(inst, start.x);
    const Box h0 = s.hidden_init();
    for (std::size_t j = 0; j < h0.dim(); ++j)
        start.h.push_back(inst.add_continuous(h0.lower[j], h0.upper[j]));
    std::optional<double> best;
    std::size_t lps = 0;
    detail::enumerate(inst, s, start, 0, t, coord, sense, best, lps);
    if (lp_count)
        *lp_count = lps;
    return best;
}

} // namespace mnv::testing
