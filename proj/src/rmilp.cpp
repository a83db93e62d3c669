// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "mnv/rmilp.hpp"

#include <algorithm>
#include <cmath>

namespace mnv::rmilp {

using milp::LinExpr;

namespace {

// Bound padding so float rounding in the propagated boxes never cuts off a
// reachable point.
double pad_lo(double v)
{
    return v - 1e-9 * (1.0 + std::abs(v));
}

double pad_hi(double v)
{
    return v + 1e-9 * (1.0 + std::abs(v));
}

std::string ix(const char* base, std::size_t t, std::size_t j)
{
    return std::string(base) + std::to_string(t) + "_" + std::to_string(j);
}

Interval expr_range(const milp::Instance& inst, const LinExpr& e)
{
    Interval r{ e.constant(), e.constant() };
    for (const auto& [id, c] : e.terms()) {
        const auto& v = inst.vars()[static_cast<std::size_t>(id)];
        const double a = c * v.lower, b = c * v.upper;
        r.lo += std::min(a, b);
        r.hi += std::max(a, b);
    }
    return r;
}

void require_finite(Interval r, const std::string& what)
{
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi))
        throw EncodingError("no finite bound for " + what);
}

std::vector<LinExpr> affine(const Matrix& W, std::span<const double> b, const std::vector<LinExpr>& in)
{
    std::vector<LinExpr> out(W.rows());
    for (std::size_t r = 0; r < W.rows(); ++r) {
        LinExpr e(r < b.size() ? b[r] : 0.0);
        for (std::size_t c = 0; c < W.cols(); ++c)
            if (W(r, c) != 0.0)
                e += W(r, c) * in[c];
        out[r] = std::move(e);
    }
    return out;
}

std::vector<LinExpr> as_exprs(const std::vector<int>& ids)
{
    std::vector<LinExpr> out;
    out.reserve(ids.size());
    for (int id : ids)
        out.push_back(LinExpr::var(id));
    return out;
}

std::vector<int> add_block(milp::Instance& inst, const Box& b, const char* base, std::size_t t)
{
    std::vector<int> ids;
    for (std::size_t j = 0; j < b.dim(); ++j)
        ids.push_back(inst.add_continuous(pad_lo(b.lower[j]), pad_hi(b.upper[j]), ix(base, t, j)));
    return ids;
}

// Rows c.v <= rhs of a guard over the (x, a, w) block, box bounds included.
std::vector<std::pair<Vector, double>> guard_rows(const Polytope& g)
{
    std::vector<std::pair<Vector, double>> rows;
    for (const auto& c : g.constraints) {
        rows.emplace_back(c.c, c.rhs);
        if (c.rel == milp::Relation::eq) {
            Vector neg = c.c;
            for (auto& v : neg)
                v = -v;
            rows.emplace_back(std::move(neg), -c.rhs);
        }
    }
    if (g.box)
        for (std::size_t j = 0; j < g.dim; ++j) {
            Vector e(g.dim, 0.0);
            if (std::isfinite(g.box->upper[j])) {
                e[j] = 1.0;
                rows.emplace_back(e, g.box->upper[j]);
            }
            if (std::isfinite(g.box->lower[j])) {
                e[j] = -1.0;
                rows.emplace_back(e, -g.box->lower[j]);
            }
        }
    return rows;
}

LinExpr piece_image(const TransitionPiece& pc, std::size_t j, const StepVars& sv)
{
    LinExpr e(pc.d[j]);
    auto acc = [&](const Matrix& m, const std::vector<int>& ids) {
        if (m.empty())
            return;
        for (std::size_t c = 0; c < ids.size(); ++c)
            if (m(j, c) != 0.0)
                e.add(ids[c], m(j, c));
    };
    acc(pc.A, sv.x);
    acc(pc.B, sv.a);
    acc(pc.C, sv.w);
    return e;
}

void encode_initial(UnrolledEncoding& enc)
{
    const auto& spec = *enc.spec;
    auto& inst = enc.instance;
    const Box& b0 = enc.hints.boxes.at(0);
    StepVars sv;
    sv.x = add_block(inst, b0.slice(0, spec.state_dim()), "x", 0);
    sv.h = add_block(inst, b0.slice(spec.state_dim(), spec.hidden_dim()), "h", 0);
    if (enc.options.start_box) {
        // The start box is a hard constraint, not a padded hint.
        const Box& sb = *enc.options.start_box;
        std::vector<int> ids = sv.x;
        ids.insert(ids.end(), sv.h.begin(), sv.h.end());
        for (std::size_t j = 0; j < ids.size(); ++j) {
            auto& v = inst.vars()[static_cast<std::size_t>(ids[j])];
            v.lower = sb.lower[j];
            v.upper = sb.upper[j];
        }
    }
    else {
        spec.initial_states.add_to(inst, sv.x);
        const Box hi = spec.hidden_init();
        for (std::size_t j = 0; j < hi.dim(); ++j) {
            auto& v = inst.vars()[static_cast<std::size_t>(sv.h[j])];
            v.lower = std::max(v.lower, hi.lower[j]);
            v.upper = std::min(v.upper, hi.upper[j]);
        }
    }
    enc.steps.push_back(std::move(sv));
    enc.vars_at_depth.push_back(inst.num_vars());
    enc.rows_at_depth.push_back(inst.constraints().size());
}

// Encodes the transition from step t to t + 1.
void encode_step(UnrolledEncoding& enc, std::size_t t)
{
    const auto& spec = *enc.spec;
    auto& inst = enc.instance;
    const auto& det = enc.hints.steps.at(t);
    const Box& next = enc.hints.boxes.at(t + 1);
    const bool split = enc.options.split;
    StepVars& cur = enc.steps[t];
    const std::size_t nx = spec.state_dim();

    std::vector<int> h_next;
    std::vector<LinExpr> action;
    std::size_t unit = 0;
    std::size_t h_offset = 0;
    const Box next_h = next.slice(nx, spec.hidden_dim());

    auto relu_unit = [&](const LinExpr& pre, Interval post_box) {
        Interval b = det.relu_pre.at(unit);
        const Interval er = expr_range(inst, pre);
        b = { std::max(b.lo, er.lo), std::min(b.hi, er.hi) };
        if (b.lo > b.hi)
            b.lo = b.hi = 0.5 * (b.lo + b.hi);
        require_finite(b, "ReLU unit " + std::to_string(unit) + " at step " + std::to_string(t));
        ReluGadget g;
        g.step = t;
        g.unit = unit;
        g.bounds = b;
        double low = std::max({ 0.0, pad_lo(std::max(b.lo, 0.0)), post_box.lo });
        double up = std::min(pad_hi(std::max(b.hi, 0.0)), post_box.hi);
        if (low > up)
            low = up = std::max(0.0, 0.5 * (low + up));
        g.post = inst.add_continuous(low, up, ix("r", t, unit));
        if (split && b.lo >= 0.0) {
            g.mode = GadgetMode::identity;
            inst.add_eq(LinExpr::var(g.post) - pre, 0.0, ix("ri", t, unit));
        }
        else if (split && b.hi <= 0.0) {
            g.mode = GadgetMode::zero;
            inst.vars()[static_cast<std::size_t>(g.post)].lower = 0.0;
            inst.vars()[static_cast<std::size_t>(g.post)].upper = 0.0;
            // pre <= 0 holds on the bounds already
        }
        else
            g.binary = encode_relu_big_m(inst, pre, g.post, { pad_lo(b.lo), pad_hi(b.hi) }, ix("", t, unit));
        enc.relus.push_back(g);
        ++unit;
        return g.post;
    };

    for (const auto& ag : spec.agents) {
        std::vector<LinExpr> v = ag.observation.C.empty()
                                     ? std::vector<LinExpr>{}
                                     : affine(ag.observation.C, ag.observation.d, as_exprs(cur.x));
        if (ag.observation.C.empty())
            for (double d : ag.observation.d)
                v.emplace_back(d);
        for (const auto& layer : ag.policy.layers) {
            if (const auto* a = std::get_if<AffineLayer>(&layer)) {
                v = affine(a->W, a->b, v);
            }
            else if (std::holds_alternative<ReluLayer>(layer)) {
                std::vector<LinExpr> out;
                for (const auto& pre : v)
                    out.push_back(LinExpr::var(relu_unit(pre, { 0.0, milp::inf })));
                v = std::move(out);
            }
            else {
                const auto& r = std::get<RecurrentLayer>(layer);
                const std::vector<int> hs(cur.h.begin() + static_cast<std::ptrdiff_t>(h_offset),
                                          cur.h.begin() + static_cast<std::ptrdiff_t>(h_offset + r.width()));
                auto pre = affine(r.W_in, r.b, v);
                const auto hv = affine(r.W_h, {}, as_exprs(hs));
                std::vector<LinExpr> out;
                for (std::size_t j = 0; j < pre.size(); ++j) {
                    pre[j] += hv[j];
                    const std::size_t k = h_offset + j;
                    const Interval hb{ pad_lo(next_h.lower[k]), pad_hi(next_h.upper[k]) };
                    int id;
                    if (r.activation == Activation::relu) {
                        id = relu_unit(pre[j], hb);
                    }
                    else {
                        id = inst.add_continuous(hb.lo, hb.hi, ix("h", t + 1, k));
                        inst.add_eq(LinExpr::var(id) - pre[j], 0.0, ix("hr", t, k));
                    }
                    h_next.push_back(id);
                    out.push_back(LinExpr::var(id));
                }
                v = std::move(out);
                h_offset += r.width();
            }
        }
        for (auto& e : v)
            action.push_back(std::move(e));
    }

    cur.a.clear();
    for (std::size_t j = 0; j < action.size(); ++j) {
        const Interval er = expr_range(inst, action[j]);
        const double lo = std::max(pad_lo(det.action.lower[j]), er.lo);
        const double hi = std::min(pad_hi(det.action.upper[j]), er.hi);
        const int id = inst.add_continuous(std::min(lo, hi), std::max(lo, hi), ix("a", t, j));
        inst.add_eq(LinExpr::var(id) - action[j], 0.0, ix("ad", t, j));
        cur.a.push_back(id);
    }
    cur.w = add_block(inst, spec.transition.disturbance_box, "w", t);

    StepVars nxt;
    nxt.x = add_block(inst, next.slice(0, nx), "x", t + 1);
    nxt.h = h_next;

    std::vector<std::size_t> candidates;
    for (std::size_t p = 0; p < spec.transition.pieces.size(); ++p)
        if (!split || det.piece_active.at(p))
            candidates.push_back(p);
    cur.selectors.assign(spec.transition.pieces.size(), -1);
    cur.fixed_piece = -1;
    std::vector<int> xaw = cur.x;
    xaw.insert(xaw.end(), cur.a.begin(), cur.a.end());
    xaw.insert(xaw.end(), cur.w.begin(), cur.w.end());

    if (candidates.size() == 1) {
        const std::size_t p = candidates.front();
        const auto& pc = spec.transition.pieces[p];
        cur.fixed_piece = static_cast<int>(p);
        pc.guard.add_to(inst, xaw);
        for (std::size_t j = 0; j < nx; ++j)
            inst.add_eq(LinExpr::var(nxt.x[j]) - piece_image(pc, j, cur), 0.0, ix("xu", t, j));
    }
    else {
        LinExpr onehot;
        for (std::size_t p : candidates) {
            const int s = inst.add_binary(ix("s", t, p));
            cur.selectors[p] = s;
            onehot.add(s, 1.0);
        }
        inst.add_eq(onehot, 1.0, "pick" + std::to_string(t));
        for (std::size_t p : candidates) {
            const auto& pc = spec.transition.pieces[p];
            const int s = cur.selectors[p];
            std::size_t row = 0;
            for (const auto& [c, rhs] : guard_rows(pc.guard)) {
                LinExpr e;
                for (std::size_t j = 0; j < c.size(); ++j)
                    if (c[j] != 0.0)
                        e.add(xaw[j], c[j]);
                const Interval r = expr_range(inst, e);
                require_finite(r, "guard row of piece " + std::to_string(p) + " at step " + std::to_string(t));
                const double m = r.hi - rhs;
                if (m <= 0.0)
                    continue;
                // c.v <= rhs + m (1 - s)
                inst.add_le(e + LinExpr::var(s, m), rhs + m, ix("g", t, p) + "_" + std::to_string(row++));
            }
            for (std::size_t j = 0; j < nx; ++j) {
                const LinExpr e = LinExpr::var(nxt.x[j]) - piece_image(pc, j, cur);
                const Interval r = expr_range(inst, e);
                require_finite(r, "update of piece " + std::to_string(p) + " at step " + std::to_string(t));
                // r.lo (1 - s) <= e <= r.hi (1 - s)
                inst.add_le(e + LinExpr::var(s, r.hi), r.hi, ix("u", t, p) + "_" + std::to_string(j));
                inst.add_ge(e + LinExpr::var(s, r.lo), r.lo, ix("l", t, p) + "_" + std::to_string(j));
            }
        }
    }
    enc.steps.push_back(std::move(nxt));
    enc.vars_at_depth.push_back(inst.num_vars());
    enc.rows_at_depth.push_back(inst.constraints().size());
}

} // namespace

int encode_relu_big_m(milp::Instance& inst, const LinExpr& pre, int post, Interval b, const std::string& name)
{
    require_finite(b, "ReLU pre-activation" + (name.empty() ? std::string{} : " " + name));
    if (b.lo > b.hi)
        throw EncodingError("empty ReLU bounds");
    const double lo = std::min(b.lo, 0.0);
    const double hi = std::max(b.hi, 0.0);
    const int d = inst.add_binary("d" + name);
    const LinExpr y = LinExpr::var(post);
    inst.add_ge(y - pre, 0.0);
    inst.add_ge(y, 0.0);
    // y <= pre - lo (1 - d)
    inst.add_le(y - pre - LinExpr::var(d, lo), -lo);
    // y <= hi d
    inst.add_le(y - LinExpr::var(d, hi), 0.0);
    return d;
}

std::size_t UnrolledEncoding::num_binaries() const
{
    std::size_t n = 0;
    for (const auto& v : instance.vars())
        n += v.kind == milp::VarKind::binary;
    return n;
}

std::size_t UnrolledEncoding::binaries_in_step(std::size_t t) const
{
    std::size_t n = 0;
    for (std::size_t id = vars_at_depth.at(t); id < vars_at_depth.at(t + 1); ++id)
        n += instance.vars()[id].kind == milp::VarKind::binary;
    return n;
}

milp::Instance UnrolledEncoding::prefix(std::size_t t) const
{
    if (t > depth())
        throw std::out_of_range("encoding prefix " + std::to_string(t) + " beyond depth " + std::to_string(depth()));
    milp::Instance out;
    for (std::size_t i = 0; i < vars_at_depth[t]; ++i) {
        const auto& v = instance.vars()[i];
        out.add_var(v.kind, v.lower, v.upper, v.name);
    }
    for (std::size_t i = 0; i < rows_at_depth[t]; ++i) {
        const auto& c = instance.constraints()[i];
        out.add_constraint(c.expr, c.rel, c.rhs, c.name);
    }
    return out;
}

UnrolledEncoding build_constraints(const SystemSpec& spec, std::size_t t, const bpt::BoundsTrace* hints,
                                   const Options& options)
{
    require_valid(spec);
    UnrolledEncoding enc;
    enc.spec = std::make_shared<const SystemSpec>(spec);
    enc.options = options;
    bpt::Options bo;
    bo.start_box = options.start_box;
    if (hints) {
        enc.hints = *hints;
        if (enc.hints.depth() < t)
            bpt::extend(spec, enc.hints, t, bo);
    }
    else
        enc.hints = bpt::bpt_run(spec, t, bo);
    encode_initial(enc);
    for (std::size_t s = 0; s < t; ++s)
        encode_step(enc, s);
    return enc;
}

void extend(UnrolledEncoding& enc, std::size_t depth)
{
    if (depth <= enc.depth())
        return;
    bpt::Options bo;
    bo.start_box = enc.options.start_box;
    bpt::extend(*enc.spec, enc.hints, depth, bo);
    for (std::size_t s = enc.depth(); s < depth; ++s)
        encode_step(enc, s);
}

UnrolledEncoding apply_adaptive_splitting(const UnrolledEncoding& enc, const bpt::BoundsTrace& hints)
{
    Options o = enc.options;
    o.split = true;
    return build_constraints(*enc.spec, enc.depth(), &hints, o);
}

Path extract_path(const UnrolledEncoding& enc, std::size_t t, std::span<const double> point)
{
    const auto& spec = *enc.spec;
    auto read = [&](const std::vector<int>& ids) {
        Vector v;
        v.reserve(ids.size());
        for (int id : ids)
            v.push_back(point[static_cast<std::size_t>(id)]);
        return v;
    };
    Path p;
    for (std::size_t s = 0; s <= t; ++s) {
        const auto& sv = enc.steps.at(s);
        PathStep st;
        st.x = read(sv.x);
        st.h = read(sv.h);
        if (s < t) {
            st.a = read(sv.a);
            st.w = read(sv.w);
            st.piece = sv.fixed_piece;
            for (std::size_t q = 0; q < sv.selectors.size(); ++q)
                if (sv.selectors[q] >= 0 && point[static_cast<std::size_t>(sv.selectors[q])] > 0.5)
                    st.piece = static_cast<int>(q);
        }
        else
            st.a = eval_agents(spec, st.x, st.h).action;
        p.steps.push_back(std::move(st));
    }
    return p;
}

namespace {

milp::Result solve_checked(const milp::Instance& inst, const milp::Options& solver, milp::Stats* stats)
{
    auto r = milp::solve_milp(inst, solver);
    if (stats)
        *stats += r.stats;
    if (r.status == milp::Status::bound_limit)
        throw SolverLimit("MILP node limit reached (" + std::to_string(r.stats.nodes) + " nodes)");
    if (r.status == milp::Status::unbounded)
        throw EncodingError("encoding is unbounded; state boxes must be finite");
    return r;
}

} // namespace

AtomCheck verify_next_atom_rmilp(const UnrolledEncoding& enc, std::size_t step, const ltl::LinearAtom& atom,
                                 bool positive, const milp::Options& solver, bool full_depth)
{
    if (step > enc.depth())
        throw std::out_of_range("atom step " + std::to_string(step) + " beyond encoding depth " +
                                std::to_string(enc.depth()));
    const auto& xs = enc.steps[step].x;
    if (atom.c.size() > xs.size())
        throw DimensionError("atom has more coefficients than state coordinates");
    // Effective claim: c.x <= d (upper) or c.x > d (lower).
    const bool upper = positive != atom.strict;
    LinExpr obj;
    for (std::size_t j = 0; j < atom.c.size(); ++j)
        if (atom.c[j] != 0.0)
            obj.add(xs[j], atom.c[j]);
    const std::size_t depth = full_depth ? enc.depth() : step;
    auto inst = enc.prefix(depth);
    inst.set_objective(obj, upper ? milp::Sense::maximize : milp::Sense::minimize);
    AtomCheck out;
    const auto r = solve_checked(inst, solver, &out.stats);
    if (r.status == milp::Status::infeasible) {
        out.value = ltl::Verdict3::True;
        return out;
    }
    const double v = *r.objective_value;
    out.extreme = v;
    const bool holds = upper ? v <= atom.d + verdict_tol : v > atom.d - verdict_tol;
    if (holds) {
        out.value = ltl::Verdict3::True;
        return out;
    }
    out.value = ltl::Verdict3::False;
    out.witness = extract_path(enc, depth, *r.point);
    return out;
}

std::optional<double> optimize_coordinate(const UnrolledEncoding& enc, std::size_t t, std::size_t coord,
                                          milp::Sense sense, const milp::Options& solver, milp::Stats* stats)
{
    if (t > enc.depth())
        throw std::out_of_range("step " + std::to_string(t) + " beyond encoding depth " + std::to_string(enc.depth()));
    const auto& sv = enc.steps[t];
    if (coord >= sv.x.size() + sv.h.size())
        throw std::out_of_range("coordinate " + std::to_string(coord) + " out of range");
    const int id = coord < sv.x.size() ? sv.x[coord] : sv.h[coord - sv.x.size()];
    auto inst = enc.prefix(t);
    inst.set_objective(LinExpr::var(id), sense);
    const auto r = solve_checked(inst, solver, stats);
    if (r.status == milp::Status::infeasible)
        return std::nullopt;
    return *r.objective_value;
}

} // namespace mnv::rmilp
