// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "mnv/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

namespace mnv {

namespace {

double violation(const LinearConstraint& c, std::span<const double> v)
{
    const double lhs = dot(c.c, v);
    if (c.rel == milp::Relation::eq)
        return std::abs(lhs - c.rhs);
    return std::max(0.0, lhs - c.rhs);
}

double polytope_violation(const Polytope& p, std::span<const double> v)
{
    double worst = 0.0;
    for (const auto& c : p.constraints)
        worst = std::max(worst, violation(c, v));
    if (p.box)
        for (std::size_t j = 0; j < v.size(); ++j)
            worst = std::max({ worst, p.box->lower[j] - v[j], v[j] - p.box->upper[j] });
    return worst;
}

double box_violation(const Box& b, std::span<const double> v)
{
    double worst = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j)
        worst = std::max({ worst, b.lower[j] - v[j], v[j] - b.upper[j] });
    return worst;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        return std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        worst = std::max(worst, std::abs(a[j] - b[j]));
    return worst;
}

bool all_finite(std::span<const double> v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool all_finite(const Matrix& m)
{
    for (std::size_t r = 0; r < m.rows(); ++r)
        if (!all_finite(m.row(r)))
            return false;
    return true;
}

Vector activate(Vector v, Activation act)
{
    if (act == Activation::relu)
        for (auto& x : v)
            x = std::max(0.0, x);
    return v;
}

// Builds an LP over a fresh block of free variables constrained by `p`.
milp::Instance polytope_lp(const Polytope& p, std::vector<int>& ids)
{
    milp::Instance inst;
    ids.clear();
    for (std::size_t j = 0; j < p.dim; ++j)
        ids.push_back(inst.add_continuous(-milp::inf, milp::inf));
    p.add_to(inst, ids);
    return inst;
}

void check_polytope(const Polytope& p, std::size_t dim, const std::string& what, std::vector<std::string>& out)
{
    if (p.dim != dim) {
        out.push_back(what + ": dimension " + std::to_string(p.dim) + ", expected " + std::to_string(dim));
        return;
    }
    if (p.box && p.box->dim() != dim)
        out.push_back(what + ": box dimension " + std::to_string(p.box->dim()) + ", expected " + std::to_string(dim));
    for (std::size_t i = 0; i < p.constraints.size(); ++i) {
        const auto& c = p.constraints[i];
        if (c.c.size() != dim)
            out.push_back(what + ": constraint " + std::to_string(i) + " has " + std::to_string(c.c.size()) +
                          " coefficients, expected " + std::to_string(dim));
        else if (!all_finite(c.c) || !std::isfinite(c.rhs))
            out.push_back(what + ": constraint " + std::to_string(i) + " has non-finite entries");
    }
}

void check_matrix(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& what,
                  std::vector<std::string>& out)
{
    // An empty matrix stands for a zero block of the expected shape.
    if (m.rows() == 0 && m.cols() == 0 && (rows == 0 || cols == 0))
        return;
    if (m.rows() != rows || m.cols() != cols) {
        std::ostringstream os;
        os << what << ": shape " << m.rows() << "x" << m.cols() << ", expected " << rows << "x" << cols;
        out.push_back(os.str());
    }
    else if (!all_finite(m))
        out.push_back(what + ": non-finite entries");
}

} // namespace

bool LinearConstraint::satisfied(std::span<const double> v, double tol) const
{
    return violation(*this, v) <= tol;
}

Polytope Polytope::from_box(const Box& b)
{
    return Polytope{ b.dim(), {}, b };
}

bool Polytope::contains(std::span<const double> v, double tol) const
{
    return v.size() == dim && polytope_violation(*this, v) <= tol;
}

void Polytope::add_to(milp::Instance& inst, std::span<const int> ids) const
{
    if (ids.size() != dim)
        throw DimensionError("polytope of dimension " + std::to_string(dim) + " applied to " +
                             std::to_string(ids.size()) + " variables");
    for (const auto& c : constraints) {
        milp::LinExpr e;
        for (std::size_t j = 0; j < dim; ++j)
            if (c.c[j] != 0.0)
                e.add(ids[j], c.c[j]);
        inst.add_constraint(std::move(e), c.rel, c.rhs);
    }
    if (box)
        for (std::size_t j = 0; j < dim; ++j) {
            auto& v = inst.vars()[static_cast<std::size_t>(ids[j])];
            v.lower = std::max(v.lower, box->lower[j]);
            v.upper = std::min(v.upper, box->upper[j]);
        }
}

Vector TransitionPiece::apply(std::span<const double> x, std::span<const double> a,
                              std::span<const double> w) const
{
    Vector out = d;
    auto acc = [&out](const Matrix& m, std::span<const double> v) {
        if (m.empty())
            return;
        const Vector y = m.apply(v);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += y[i];
    };
    acc(A, x);
    acc(B, a);
    acc(C, w);
    return out;
}

std::size_t PolicySpec::hidden_dim() const
{
    std::size_t n = 0;
    for (const auto& l : layers)
        if (const auto* r = std::get_if<RecurrentLayer>(&l))
            n += r->width();
    return n;
}

std::vector<std::size_t> PolicySpec::layer_widths(std::size_t input_dim) const
{
    std::vector<std::size_t> out;
    std::size_t w = input_dim;
    for (const auto& l : layers) {
        if (const auto* a = std::get_if<AffineLayer>(&l))
            w = a->W.rows();
        else if (const auto* r = std::get_if<RecurrentLayer>(&l))
            w = r->width();
        out.push_back(w);
    }
    return out;
}

Vector ObservationMap::apply(std::span<const double> x) const
{
    Vector out = C.empty() ? Vector(d.size(), 0.0) : C.apply(x);
    for (std::size_t i = 0; i < out.size() && i < d.size(); ++i)
        out[i] += d[i];
    return out;
}

std::size_t SystemSpec::action_dim() const
{
    std::size_t n = 0;
    for (const auto& a : agents)
        n += a.action_box.dim();
    return n;
}

std::size_t SystemSpec::hidden_dim() const
{
    std::size_t n = 0;
    for (const auto& a : agents)
        n += a.policy.hidden_dim();
    return n;
}

Box SystemSpec::hidden_init() const
{
    Box out;
    for (const auto& a : agents)
        out = concat(out, a.policy.hidden_init);
    return out;
}

Box SystemSpec::action_box() const
{
    Box out;
    for (const auto& a : agents)
        out = concat(out, a.action_box);
    return out;
}

std::optional<std::size_t> SystemSpec::state_index(const std::string& name) const
{
    for (std::size_t i = 0; i < state_names.size(); ++i)
        if (state_names[i] == name)
            return i;
    if (name.size() >= 4 && name.rfind("x[", 0) == 0 && name.back() == ']') {
        const std::string digits = name.substr(2, name.size() - 3);
        if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            const auto i = static_cast<std::size_t>(std::stoull(digits));
            if (i < state_dim())
                return i;
        }
    }
    return std::nullopt;
}

std::string SystemSpec::state_name(std::size_t i) const
{
    if (i < state_names.size() && !state_names[i].empty())
        return state_names[i];
    return "x[" + std::to_string(i) + "]";
}

ValidationReport validate_system(const SystemSpec& spec)
{
    ValidationReport rep;
    auto& out = rep.violations;
    const std::size_t nx = spec.state_dim();
    const std::size_t nw = spec.disturbance_dim();
    const std::size_t na = spec.action_dim();

    if (nx == 0)
        out.push_back("state_box: empty state space");
    if (!all_finite(spec.state_box.lower) || !all_finite(spec.state_box.upper))
        out.push_back("state_box: bounds must be finite");
    if (!spec.state_names.empty()) {
        if (spec.state_names.size() != nx)
            out.push_back("state_names: " + std::to_string(spec.state_names.size()) + " names for " +
                          std::to_string(nx) + " coordinates");
        std::set<std::string> seen(spec.state_names.begin(), spec.state_names.end());
        if (seen.size() != spec.state_names.size())
            out.push_back("state_names: duplicate names");
    }

    // initial states
    const std::size_t before = out.size();
    check_polytope(spec.initial_states, nx, "initial_states", out);
    if (out.size() == before && nx > 0 && spec.state_box.dim() == nx) {
        std::vector<int> ids;
        auto inst = polytope_lp(spec.initial_states, ids);
        if (milp::solve_lp(inst).status == milp::Status::infeasible)
            out.push_back("initial_states: empty set");
        else {
            for (std::size_t j = 0; j < nx; ++j) {
                for (int side = 0; side < 2; ++side) {
                    // maximise the gap past the state box on this side
                    inst.set_objective(milp::LinExpr::var(ids[j], side == 0 ? 1.0 : -1.0), milp::Sense::maximize);
                    auto r = milp::solve_lp(inst);
                    const double limit = side == 0 ? spec.state_box.upper[j] : -spec.state_box.lower[j];
                    if (r.status == milp::Status::unbounded)
                        out.push_back("initial_states: unbounded in coordinate " + spec.state_name(j));
                    else if (r.status == milp::Status::optimal && *r.objective_value > limit + 1e-9) {
                        std::ostringstream os;
                        os << "initial_states: not contained in state_box along " << spec.state_name(j) << " (gap "
                           << (*r.objective_value - limit) << ")";
                        out.push_back(os.str());
                    }
                }
            }
        }
    }

    // agents
    for (std::size_t i = 0; i < spec.agents.size(); ++i) {
        const auto& ag = spec.agents[i];
        const std::string tag = "agents[" + std::to_string(i) + "]";
        const std::size_t obs_dim = ag.observation.d.size();
        check_matrix(ag.observation.C, obs_dim, nx, tag + ".observation.C", out);
        std::size_t w = obs_dim;
        for (std::size_t l = 0; l < ag.policy.layers.size(); ++l) {
            const std::string lt = tag + ".policy.layers[" + std::to_string(l) + "]";
            const auto& layer = ag.policy.layers[l];
            if (const auto* a = std::get_if<AffineLayer>(&layer)) {
                if (a->W.cols() != w)
                    out.push_back(lt + ": input width " + std::to_string(a->W.cols()) + ", expected " +
                                  std::to_string(w));
                if (a->b.size() != a->W.rows())
                    out.push_back(lt + ": bias length " + std::to_string(a->b.size()) + ", expected " +
                                  std::to_string(a->W.rows()));
                if (!all_finite(a->W) || !all_finite(a->b))
                    out.push_back(lt + ": non-finite weights");
                w = a->W.rows();
            }
            else if (const auto* r = std::get_if<RecurrentLayer>(&layer)) {
                const std::size_t n = r->width();
                if (r->W_h.cols() != n)
                    out.push_back(lt + ": W_h must be square");
                if (r->W_in.rows() != n || r->W_in.cols() != w)
                    out.push_back(lt + ": W_in shape " + std::to_string(r->W_in.rows()) + "x" +
                                  std::to_string(r->W_in.cols()) + ", expected " + std::to_string(n) + "x" +
                                  std::to_string(w));
                if (r->b.size() != n)
                    out.push_back(lt + ": bias length " + std::to_string(r->b.size()) + ", expected " +
                                  std::to_string(n));
                if (!all_finite(r->W_in) || !all_finite(r->W_h) || !all_finite(r->b))
                    out.push_back(lt + ": non-finite weights");
                w = n;
            }
        }
        if (ag.policy.hidden_init.dim() != ag.policy.hidden_dim())
            out.push_back(tag + ".policy.hidden_init: dimension " + std::to_string(ag.policy.hidden_init.dim()) +
                          ", expected " + std::to_string(ag.policy.hidden_dim()) + " (total recurrent width)");
        if (ag.action_box.dim() != w)
            out.push_back(tag + ".action_box: dimension " + std::to_string(ag.action_box.dim()) +
                          ", policy output width " + std::to_string(w));
    }

    // transition
    const auto& tr = spec.transition;
    if (tr.pieces.empty())
        out.push_back("transition: no pieces");
    if (!all_finite(tr.disturbance_box.lower) || !all_finite(tr.disturbance_box.upper))
        out.push_back("transition.disturbance_box: bounds must be finite");
    for (std::size_t p = 0; p < tr.pieces.size(); ++p) {
        const auto& pc = tr.pieces[p];
        const std::string tag = "transition.pieces[" + std::to_string(p) + "]";
        check_matrix(pc.A, nx, nx, tag + ".A", out);
        check_matrix(pc.B, nx, na, tag + ".B", out);
        check_matrix(pc.C, nx, nw, tag + ".C", out);
        if (pc.d.size() != nx)
            out.push_back(tag + ".d: length " + std::to_string(pc.d.size()) + ", expected " + std::to_string(nx));
        const std::size_t gb = out.size();
        check_polytope(pc.guard, nx + na + nw, tag + ".guard", out);
        if (out.size() == gb) {
            std::vector<int> ids;
            auto inst = polytope_lp(pc.guard, ids);
            if (milp::solve_lp(inst).status == milp::Status::infeasible)
                out.push_back(tag + ".guard: empty");
        }
    }

    if (spec.hidden_box && spec.hidden_box->dim() != spec.hidden_dim())
        out.push_back("hidden_box: dimension " + std::to_string(spec.hidden_box->dim()) + ", expected " +
                      std::to_string(spec.hidden_dim()));
    return rep;
}

void require_valid(const SystemSpec& spec)
{
    auto rep = validate_system(spec);
    if (rep.ok())
        return;
    std::string msg = "invalid system";
    for (const auto& v : rep.violations)
        msg += "\n  " + v;
    throw DimensionError(msg);
}

PolicyOutput eval_policy_step(const PolicySpec& policy, std::span<const double> obs, std::span<const double> hidden)
{
    if (hidden.size() != policy.hidden_dim())
        throw DimensionError("hidden state has length " + std::to_string(hidden.size()) + ", policy expects " +
                             std::to_string(policy.hidden_dim()));
    Vector v(obs.begin(), obs.end());
    Vector h_next;
    std::size_t offset = 0;
    for (const auto& layer : policy.layers) {
        if (const auto* a = std::get_if<AffineLayer>(&layer)) {
            if (a->W.cols() != v.size())
                throw DimensionError("affine layer expects input width " + std::to_string(a->W.cols()) + ", got " +
                                     std::to_string(v.size()));
            Vector y = a->W.apply(v);
            for (std::size_t i = 0; i < y.size(); ++i)
                y[i] += a->b[i];
            v = std::move(y);
        }
        else if (std::holds_alternative<ReluLayer>(layer)) {
            v = activate(std::move(v), Activation::relu);
        }
        else {
            const auto& r = std::get<RecurrentLayer>(layer);
            if (r.W_in.cols() != v.size())
                throw DimensionError("recurrent layer expects input width " + std::to_string(r.W_in.cols()) +
                                     ", got " + std::to_string(v.size()));
            const auto h = hidden.subspan(offset, r.width());
            Vector y = r.W_in.apply(v);
            const Vector yh = r.W_h.apply(h);
            for (std::size_t i = 0; i < y.size(); ++i)
                y[i] += yh[i] + r.b[i];
            v = activate(std::move(y), r.activation);
            h_next.insert(h_next.end(), v.begin(), v.end());
            offset += r.width();
        }
    }
    return { std::move(v), std::move(h_next) };
}

JointOutput eval_agents(const SystemSpec& spec, std::span<const double> x, std::span<const double> h)
{
    JointOutput out;
    std::size_t offset = 0;
    for (const auto& ag : spec.agents) {
        const std::size_t hd = ag.policy.hidden_dim();
        if (offset + hd > h.size())
            throw DimensionError("joint hidden state too short");
        const Vector obs = ag.observation.apply(x);
        auto r = eval_policy_step(ag.policy, obs, h.subspan(offset, hd));
        out.action.insert(out.action.end(), r.action.begin(), r.action.end());
        out.hidden.insert(out.hidden.end(), r.hidden.begin(), r.hidden.end());
        offset += hd;
    }
    if (offset != h.size())
        throw DimensionError("joint hidden state has length " + std::to_string(h.size()) + ", expected " +
                             std::to_string(offset));
    return out;
}

std::vector<Successor> step_relation(const SystemSpec& spec, std::span<const double> x, std::span<const double> a,
                                     std::span<const double> w, double tol)
{
    if (x.size() != spec.state_dim() || a.size() != spec.action_dim() || w.size() != spec.disturbance_dim())
        throw DimensionError("step_relation: argument dimensions do not match the system");
    const Vector xaw = concat(concat(x, a), w);
    std::vector<Successor> out;
    for (std::size_t p = 0; p < spec.transition.pieces.size(); ++p) {
        const auto& pc = spec.transition.pieces[p];
        if (pc.guard.contains(xaw, tol))
            out.push_back({ p, pc.apply(x, a, w) });
    }
    return out;
}

std::vector<Vector> Path::states() const
{
    std::vector<Vector> out;
    out.reserve(steps.size());
    for (const auto& s : steps)
        out.push_back(s.x);
    return out;
}

double replay_residual(const SystemSpec& spec, const Path& path)
{
    if (path.steps.empty())
        return 0.0;
    const auto& first = path.steps.front();
    if (first.x.size() != spec.state_dim() || first.h.size() != spec.hidden_dim())
        return std::numeric_limits<double>::infinity();
    double worst = polytope_violation(spec.initial_states, first.x);
    worst = std::max(worst, box_violation(spec.hidden_init(), first.h));
    for (std::size_t t = 0; t < path.steps.size(); ++t) {
        const auto& s = path.steps[t];
        if (s.x.size() != spec.state_dim() || s.h.size() != spec.hidden_dim())
            return std::numeric_limits<double>::infinity();
        const auto out = eval_agents(spec, s.x, s.h);
        if (!s.a.empty())
            worst = std::max(worst, max_abs_diff(out.action, s.a));
        if (t + 1 == path.steps.size())
            break;
        const auto& next = path.steps[t + 1];
        worst = std::max(worst, max_abs_diff(out.hidden, next.h));
        if (s.piece < 0 || static_cast<std::size_t>(s.piece) >= spec.transition.pieces.size() ||
            s.w.size() != spec.disturbance_dim())
            return std::numeric_limits<double>::infinity();
        worst = std::max(worst, box_violation(spec.transition.disturbance_box, s.w));
        const auto& pc = spec.transition.pieces[static_cast<std::size_t>(s.piece)];
        worst = std::max(worst, polytope_violation(pc.guard, concat(concat(s.x, out.action), s.w)));
        worst = std::max(worst, max_abs_diff(pc.apply(s.x, out.action, s.w), next.x));
    }
    return worst;
}

std::size_t sample_totality_gaps(const SystemSpec& spec, std::size_t samples, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto draw = [&](const Box& b) {
        Vector v(b.dim());
        for (std::size_t j = 0; j < b.dim(); ++j)
            v[j] = b.lower[j] + u(rng) * (b.upper[j] - b.lower[j]);
        return v;
    };
    const Box abox = spec.action_box();
    std::size_t gaps = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const Vector x = draw(spec.state_box);
        const Vector a = draw(abox);
        const Vector w = draw(spec.transition.disturbance_box);
        if (step_relation(spec, x, a, w).empty())
            ++gaps;
    }
    return gaps;
}

} // namespace mnv
