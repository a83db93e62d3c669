// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "mnv/bpt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace mnv::bpt {

Box propagate_affine(const Box& input, const Matrix& W, std::span<const double> b)
{
    if (W.cols() != input.dim())
        throw DimensionError("propagate_affine: matrix has " + std::to_string(W.cols()) + " columns, box has dimension " +
                             std::to_string(input.dim()));
    Vector lo(W.rows()), hi(W.rows());
    for (std::size_t r = 0; r < W.rows(); ++r) {
        double l = 0.0, h = 0.0;
        for (std::size_t c = 0; c < W.cols(); ++c) {
            const double w = W(r, c);
            if (w == 0.0)
                continue;
            const double a = w * input.lower[c];
            const double z = w * input.upper[c];
            l += std::min(a, z);
            h += std::max(a, z);
        }
        const double bias = r < b.size() ? b[r] : 0.0;
        lo[r] = l + bias;
        hi[r] = h + bias;
    }
    return Box(std::move(lo), std::move(hi));
}

Box propagate_relu(const Box& input)
{
    Box out = input;
    for (std::size_t j = 0; j < out.dim(); ++j) {
        out.lower[j] = std::max(0.0, out.lower[j]);
        out.upper[j] = std::max(0.0, out.upper[j]);
    }
    return out;
}

namespace {

Box add(const Box& a, const Box& b)
{
    Box out = a;
    for (std::size_t j = 0; j < out.dim(); ++j) {
        out.lower[j] += b.lower[j];
        out.upper[j] += b.upper[j];
    }
    return out;
}

// Image of a matrix over a box; an empty matrix contributes nothing.
Box image(const Matrix& M, const Box& in, std::size_t rows)
{
    if (M.empty())
        return Box::uniform(rows, 0.0, 0.0);
    return propagate_affine(in, M, {});
}

// Shrinks the (x, a, w) box with the guard's single-variable rows and box.
// Returns false when the guard cannot hold anywhere on the box.
bool clip_to_guard(const Polytope& guard, Box& b)
{
    if (guard.box)
        for (std::size_t j = 0; j < b.dim(); ++j) {
            b.lower[j] = std::max(b.lower[j], guard.box->lower[j]);
            b.upper[j] = std::min(b.upper[j], guard.box->upper[j]);
        }
    for (const auto& c : guard.constraints) {
        std::size_t nz = 0, at = 0;
        for (std::size_t j = 0; j < c.c.size(); ++j)
            if (c.c[j] != 0.0) {
                ++nz;
                at = j;
            }
        if (nz != 1)
            continue;
        const double bound = c.rhs / c.c[at];
        const bool upper = c.c[at] > 0;
        if (c.rel == milp::Relation::eq || upper)
            b.upper[at] = std::min(b.upper[at], bound);
        if (c.rel == milp::Relation::eq || !upper)
            b.lower[at] = std::max(b.lower[at], bound);
    }
    for (std::size_t j = 0; j < b.dim(); ++j) {
        if (b.lower[j] > b.upper[j] + 1e-12)
            return false;
        if (b.lower[j] > b.upper[j])
            b.lower[j] = b.upper[j] = 0.5 * (b.lower[j] + b.upper[j]);
    }
    return true;
}

bool guard_feasible(const Polytope& guard, const Box& b)
{
    if (guard.constraints.empty())
        return true;
    milp::Instance inst;
    std::vector<int> ids;
    for (std::size_t j = 0; j < b.dim(); ++j)
        ids.push_back(inst.add_continuous(b.lower[j], b.upper[j]));
    guard.add_to(inst, ids);
    return milp::solve_lp(inst).status == milp::Status::optimal;
}

} // namespace

Box propagate_transition(const Box& xa_box, const TransitionRelation& rel, std::size_t state_dim,
                         std::vector<bool>* active)
{
    const Box xaw = concat(xa_box, rel.disturbance_box);
    const std::size_t na = xa_box.dim() - state_dim;
    const std::size_t nw = rel.disturbance_box.dim();
    std::optional<Box> hull;
    if (active)
        active->assign(rel.pieces.size(), false);
    for (std::size_t p = 0; p < rel.pieces.size(); ++p) {
        const auto& pc = rel.pieces[p];
        Box clipped = xaw;
        if (!clip_to_guard(pc.guard, clipped) || !guard_feasible(pc.guard, clipped))
            continue;
        if (active)
            (*active)[p] = true;
        Box img = Box(pc.d, pc.d);
        img = add(img, image(pc.A, clipped.slice(0, state_dim), state_dim));
        img = add(img, image(pc.B, clipped.slice(state_dim, na), state_dim));
        img = add(img, image(pc.C, clipped.slice(state_dim + na, nw), state_dim));
        hull = hull ? hull->hull(img) : img;
    }
    if (!hull)
        throw TotalityGap("no transition piece can fire from the current bounds");
    return *hull;
}

StepResult IntervalPropagator::step(const SystemSpec& spec, const Box& xh) const
{
    const std::size_t nx = spec.state_dim();
    const Box xbox = xh.slice(0, nx);
    StepResult res;
    auto& det = res.detail;
    Box action;
    Box hidden_next;
    std::size_t h_offset = nx;
    for (const auto& ag : spec.agents) {
        Box v = ag.observation.C.empty() ? Box(ag.observation.d, ag.observation.d)
                                          : propagate_affine(xbox, ag.observation.C, ag.observation.d);
        det.observation.push_back(v);
        det.layer_inputs.emplace_back();
        for (const auto& layer : ag.policy.layers) {
            det.layer_inputs.back().push_back(v);
            if (const auto* a = std::get_if<AffineLayer>(&layer)) {
                v = propagate_affine(v, a->W, a->b);
            }
            else if (std::holds_alternative<ReluLayer>(layer)) {
                for (std::size_t j = 0; j < v.dim(); ++j)
                    det.relu_pre.push_back(v.interval(j));
                v = propagate_relu(v);
            }
            else {
                const auto& r = std::get<RecurrentLayer>(layer);
                const Box h = xh.slice(h_offset, r.width());
                Box pre = add(propagate_affine(v, r.W_in, r.b), propagate_affine(h, r.W_h, {}));
                if (r.activation == Activation::relu) {
                    for (std::size_t j = 0; j < pre.dim(); ++j)
                        det.relu_pre.push_back(pre.interval(j));
                    pre = propagate_relu(pre);
                }
                v = pre;
                hidden_next = concat(hidden_next, v);
                h_offset += r.width();
            }
        }
        action = concat(action, v);
    }
    det.action = action;
    const Box x_next = propagate_transition(concat(xbox, action), spec.transition, nx, &det.piece_active);
    res.next = concat(x_next, hidden_next);
    return res;
}

Box initial_box(const SystemSpec& spec)
{
    const auto& p = spec.initial_states;
    const std::size_t n = spec.state_dim();
    Box xbox;
    if (p.constraints.empty() && p.box)
        xbox = *p.box;
    else {
        milp::Instance inst;
        std::vector<int> ids;
        for (std::size_t j = 0; j < n; ++j)
            ids.push_back(inst.add_continuous(-milp::inf, milp::inf));
        p.add_to(inst, ids);
        Vector lo(n), hi(n);
        for (std::size_t j = 0; j < n; ++j) {
            for (int side = 0; side < 2; ++side) {
                inst.set_objective(milp::LinExpr::var(ids[j]), side == 0 ? milp::Sense::minimize : milp::Sense::maximize);
                const auto r = milp::solve_lp(inst);
                if (r.status == milp::Status::infeasible)
                    throw DimensionError("initial_states is empty");
                if (r.status != milp::Status::optimal)
                    throw DimensionError("initial_states is unbounded along " + spec.state_name(j));
                (side == 0 ? lo : hi)[j] = *r.objective_value;
            }
            if (lo[j] > hi[j])
                lo[j] = hi[j];
        }
        xbox = Box(lo, hi);
    }
    return concat(xbox, spec.hidden_init());
}

void extend(const SystemSpec& spec, BoundsTrace& trace, std::size_t depth, const Options& options)
{
    static const IntervalPropagator interval;
    const StepPropagator& prop = options.propagator ? *options.propagator : interval;
    const auto start = std::chrono::steady_clock::now();
    if (trace.boxes.empty()) {
        trace.state_dim = spec.state_dim();
        trace.hidden_dim = spec.hidden_dim();
        trace.boxes.push_back(options.start_box ? *options.start_box : initial_box(spec));
        if (trace.boxes.front().dim() != trace.state_dim + trace.hidden_dim)
            throw DimensionError("start box has dimension " + std::to_string(trace.boxes.front().dim()) +
                                 ", expected " + std::to_string(trace.state_dim + trace.hidden_dim));
    }
    while (trace.depth() < depth) {
        auto r = prop.step(spec, trace.boxes.back());
        trace.boxes.push_back(std::move(r.next));
        trace.steps.push_back(std::move(r.detail));
    }
    trace.wall_ms +=
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

BoundsTrace bpt_run(const SystemSpec& spec, std::size_t depth, const Options& options)
{
    BoundsTrace t;
    extend(spec, t, depth, options);
    return t;
}

ltl::Verdict3 check_next_atom_bpt(const BoundsTrace& trace, std::size_t step, const ltl::LinearAtom& atom,
                                  bool positive)
{
    if (step > trace.depth())
        throw std::out_of_range("check_next_atom_bpt: step " + std::to_string(step) + " beyond trace depth " +
                                std::to_string(trace.depth()));
    ltl::Verdict3 v = ltl::atom_on_box(atom, trace.boxes[step]);
    if (!positive)
        v = ltl::kleene_not(v);
    return v == ltl::Verdict3::True ? v : ltl::Verdict3::Unknown;
}

} // namespace mnv::bpt
