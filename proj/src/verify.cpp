// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "mnv/verify.hpp"

#include "mnv/bench.hpp"
#include "mnv/rmilp.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <thread>

namespace mnv::verify {

using ltl::Verdict3;
using milp::LinExpr;

std::string to_string(Method m)
{
    switch (m) {
    case Method::bounded: return "bounded";
    case Method::bpmc: return "bpmc";
    case Method::lasso: return "lasso";
    case Method::invariant: return "invariant";
    }
    return "?";
}

std::string to_string(Engine e)
{
    switch (e) {
    case Engine::none: return "none";
    case Engine::bpt: return "bpt";
    case Engine::rmilp: return "rmilp";
    }
    return "?";
}

std::string to_string(Shape s)
{
    switch (s) {
    case Shape::release: return "release";
    case Shape::always: return "always";
    case Shape::until: return "until";
    case Shape::eventually: return "eventually";
    }
    return "?";
}

std::string to_string(Side s)
{
    return s == Side::satisfy ? "satisfy" : "falsify";
}

std::optional<Method> method_from_string(const std::string& s)
{
    for (Method m : { Method::bounded, Method::bpmc, Method::lasso, Method::invariant })
        if (to_string(m) == s)
            return m;
    return std::nullopt;
}

bool applicable(Method m, Shape s, Side side)
{
    // Columns: release, always, until, eventually.
    static constexpr bool bpmc[2][4] = { { true, false, true, true }, { true, true, true, false } };
    static constexpr bool lasso[2][4] = { { false, false, false, false }, { true, false, true, true } };
    static constexpr bool inv[2][4] = { { true, true, false, false }, { false, false, true, true } };
    const auto r = static_cast<std::size_t>(side == Side::falsify);
    const auto c = static_cast<std::size_t>(s);
    switch (m) {
    case Method::bpmc: return bpmc[r][c];
    case Method::lasso: return lasso[r][c];
    case Method::invariant: return inv[r][c];
    case Method::bounded: return false;
    }
    return false;
}

void Stats::add(const milp::Stats& s)
{
    ++milp_solves;
    milp_nodes += s.nodes;
    lp_iters += s.lp_iterations;
}

void Stats::add(const Stats& s)
{
    milp_solves += s.milp_solves;
    milp_nodes += s.milp_nodes;
    lp_iters += s.lp_iters;
    bpt_steps += s.bpt_steps;
}

namespace {

class Timer
{
public:
    [[nodiscard]] double ms() const
    {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - _start).count();
    }

private:
    std::chrono::steady_clock::time_point _start = std::chrono::steady_clock::now();
};

milp::Result solve(const milp::Instance& inst, const milp::Options& opt, Stats& stats)
{
    auto r = milp::solve_milp(inst, opt);
    stats.add(r.stats);
    if (r.status == milp::Status::bound_limit)
        throw rmilp::SolverLimit("MILP node limit reached (" + std::to_string(r.stats.nodes) + " nodes)");
    if (r.status == milp::Status::unbounded)
        throw rmilp::EncodingError("encoding is unbounded; state boxes must be finite");
    return r;
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

// Adds rows forcing a skeleton (leaf steps shifted by `offset`) to hold,
// optionally only when binary `indicator` is 1.
class SkeletonEncoder
{
public:
    SkeletonEncoder(milp::Instance& inst, const rmilp::UnrolledEncoding& enc, const ltl::Skeleton& sk,
                    const ltl::StateSpace& space, std::size_t offset, double strict_margin, double feas_tol)
        : _inst{ inst }, _enc{ enc }, _sk{ sk }, _space{ space }, _offset{ offset }, _strict{ strict_margin },
          _tight{ 2 * feas_tol }
    {
    }

    /// Leaves flagged here can never hold.
    std::vector<bool> impossible;

    void require(std::size_t node, int indicator = -1)
    {
        const auto& n = _sk.nodes[node];
        switch (n.kind) {
        case ltl::Skeleton::Kind::leaf: leaf(n.leaf, indicator); return;
        case ltl::Skeleton::Kind::conjunction:
            for (std::size_t c : n.children)
                require(c, indicator);
            return;
        case ltl::Skeleton::Kind::disjunction: {
            LinExpr sum;
            for (std::size_t c : n.children) {
                const int b = _inst.add_binary();
                sum.add(b, 1.0);
                require(c, b);
            }
            if (indicator < 0)
                _inst.add_ge(sum, 1.0);
            else
                _inst.add_ge(sum - LinExpr::var(indicator), 0.0);
            return;
        }
        }
    }

private:
    void leaf(std::size_t l, int indicator)
    {
        const auto& lf = _sk.leaves[l];
        if (l < impossible.size() && impossible[l]) {
            if (indicator < 0)
                _inst.add_le(LinExpr(1.0), 0.0);
            else
                _inst.vars()[static_cast<std::size_t>(indicator)].upper = 0.0;
            return;
        }
        const auto la = ltl::resolve(lf.atom, _space);
        // Effective claim after polarity: c.x <= d, or c.x > d when strict.
        const bool strict = lf.positive == la.strict;
        const auto step = _offset + static_cast<std::size_t>(lf.step);
        const auto& xs = _enc.steps.at(step).x;
        LinExpr g;
        for (std::size_t j = 0; j < la.c.size(); ++j)
            if (la.c[j] != 0.0)
                g.add(xs[j], strict ? -la.c[j] : la.c[j]);
        // Non-strict rows are tightened by the solver tolerance so a witness
        // satisfies the claim exactly; strict rows use the strict margin.
        const double rhs = strict ? -la.d - _strict : la.d - _tight;
        if (indicator < 0) {
            _inst.add_le(g, rhs);
            return;
        }
        const Interval r = expr_range(_inst, g);
        if (!std::isfinite(r.hi))
            throw rmilp::EncodingError("no finite bound for an atom in a disjunction");
        const double M = r.hi - rhs;
        if (M <= 0.0)
            return;
        _inst.add_le(g + LinExpr::var(indicator, M), rhs + M);
    }

    milp::Instance& _inst;
    const rmilp::UnrolledEncoding& _enc;
    const ltl::Skeleton& _sk;
    const ltl::StateSpace& _space;
    std::size_t _offset;
    double _strict;
    double _tight;
};

bool path_violates(const ltl::Formula& f, const Path& p, const ltl::StateSpace& space, const ltl::Options& opt)
{
    try {
        return !ltl::eval_on_path(f, p.states(), space, opt);
    }
    catch (const std::exception&) {
        return false;
    }
}

// Feasibility of several probes; returns the lowest feasible index.
std::optional<std::pair<std::size_t, Vector>> first_feasible(const std::vector<milp::Instance>& probes,
                                                            const Config& cfg, Stats& stats)
{
    std::vector<std::optional<Vector>> points(probes.size());
    std::vector<Stats> local(probes.size());
    std::vector<std::string> errors(probes.size());
    std::atomic<std::size_t> next{ 0 };
    std::atomic<std::size_t> found{ probes.size() };
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= probes.size() || i > found.load())
                return;
            try {
                const auto r = solve(probes[i], cfg.solver, local[i]);
                if (r.status == milp::Status::optimal) {
                    points[i] = *r.point;
                    std::size_t cur = found.load();
                    while (i < cur && !found.compare_exchange_weak(cur, i)) {
                    }
                }
            }
            catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const std::size_t jobs = std::clamp<std::size_t>(cfg.jobs, 1, std::max<std::size_t>(1, probes.size()));
    if (jobs == 1)
        work();
    else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j)
            pool.emplace_back(work);
        for (auto& th : pool)
            th.join();
    }
    for (const auto& s : local)
        stats.add(s);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        if (points[i])
            return std::pair{ i, *points[i] };
        if (!errors[i].empty())
            throw rmilp::SolverLimit(errors[i]);
    }
    return std::nullopt;
}

ltl::Skeleton state_skeleton(const ltl::Formula& g, const ltl::Options& opt)
{
    return ltl::flatten_next(ltl::to_nnf(g), opt);
}

std::vector<Box> prefix_boxes(const std::vector<Box>& boxes, std::size_t n)
{
    return { boxes.begin(), boxes.begin() + static_cast<std::ptrdiff_t>(n) };
}

} // namespace

// ---------------------------------------------------------------- bounded

Verdict verify_bounded(const SystemSpec& spec, const ltl::Formula& f, const Config& cfg)
{
    if (!ltl::is_bounded(f))
        throw std::invalid_argument("verify_bounded: formula has unbounded temporal operators");
    const Timer timer;
    Verdict v;
    v.method_used = Method::bounded;
    const auto space = ltl::StateSpace::of(spec);
    const auto g = ltl::to_nnf(f);
    const auto H = static_cast<std::size_t>(ltl::horizon(g, cfg.ltl));
    v.depth_reached = H;
    const auto sk = ltl::flatten_next(g, cfg.ltl);

    bpt::BoundsTrace trace;
    try {
        trace = bpt::bpt_run(spec, H);
    }
    catch (const bpt::TotalityGap& e) {
        v.notes.push_back(std::string("bound propagation stopped: ") + e.what());
        v.stats.wall_ms = timer.ms();
        return v;
    }
    v.stats.bpt_steps = H;

    std::vector<Verdict3> leaf(sk.leaves.size(), Verdict3::Unknown);
    std::vector<ltl::LinearAtom> atoms;
    for (const auto& lf : sk.leaves)
        atoms.push_back(ltl::resolve(lf.atom, space));
    if (cfg.engine != EngineChoice::rmilp_only) {
        for (std::size_t i = 0; i < leaf.size(); ++i)
            leaf[i] = bpt::check_next_atom_bpt(trace, static_cast<std::size_t>(sk.leaves[i].step), atoms[i],
                                               sk.leaves[i].positive);
        if (ltl::eval_skeleton(sk, leaf) == Verdict3::True) {
            v.value = Verdict3::True;
            v.engine_used = Engine::bpt;
            v.stats.wall_ms = timer.ms();
            return v;
        }
        if (cfg.engine == EngineChoice::bpt_only) {
            v.engine_used = Engine::bpt;
            v.stats.wall_ms = timer.ms();
            return v;
        }
    }

    v.engine_used = Engine::rmilp;
    const auto enc = rmilp::build_constraints(spec, H, &trace);
    std::optional<Path> witness;
    if (!sk.has_disjunction()) {
        // Pure conjunction: each undecided leaf is its own query.
        v.value = Verdict3::True;
        for (std::size_t i = 0; i < leaf.size(); ++i) {
            if (leaf[i] == Verdict3::True)
                continue;
            auto r = rmilp::verify_next_atom_rmilp(enc, static_cast<std::size_t>(sk.leaves[i].step), atoms[i],
                                                   sk.leaves[i].positive, cfg.solver, true);
            v.stats.add(r.stats);
            if (r.value == Verdict3::False) {
                v.value = Verdict3::False;
                witness = std::move(r.witness);
                break;
            }
        }
    }
    else {
        // One MILP for a run satisfying the negation.
        const auto neg = ltl::flatten_next(ltl::to_nnf(ltl::negation(g)), cfg.ltl);
        auto inst = enc.prefix(H);
        SkeletonEncoder se(inst, enc, neg, space, 0, cfg.strict_margin, cfg.solver.feas_tol);
        if (cfg.engine != EngineChoice::rmilp_only)
            for (const auto& lf : neg.leaves)
                se.impossible.push_back(bpt::check_next_atom_bpt(trace, static_cast<std::size_t>(lf.step),
                                                                 ltl::resolve(lf.atom, space),
                                                                 !lf.positive) == Verdict3::True);
        se.require(neg.root);
        const auto r = solve(inst, cfg.solver, v.stats);
        if (r.status == milp::Status::infeasible)
            v.value = Verdict3::True;
        else {
            v.value = Verdict3::False;
            witness = rmilp::extract_path(enc, H, *r.point);
        }
    }
    if (v.value == Verdict3::False) {
        if (witness && path_violates(f, *witness, space, cfg.ltl))
            v.witness = std::move(witness);
        else {
            v.value = Verdict3::Unknown;
            v.notes.push_back("MILP counterexample failed the exact re-check");
        }
    }
    v.stats.wall_ms = timer.ms();
    return v;
}

// ------------------------------------------------------------------ shape

std::optional<ShapeMatch> match_shape(const ltl::Formula& f)
{
    const auto g = ltl::to_nnf(f);
    ShapeMatch m;
    switch (g.op()) {
    case ltl::Op::always: m.shape = Shape::always; break;
    case ltl::Op::eventually: m.shape = Shape::eventually; break;
    case ltl::Op::until: m.shape = Shape::until; break;
    case ltl::Op::release: m.shape = Shape::release; break;
    default: return std::nullopt;
    }
    if (m.shape == Shape::always || m.shape == Shape::eventually) {
        m.rhs = g.child();
        if (!ltl::is_bounded(m.rhs))
            return std::nullopt;
    }
    else {
        m.lhs = g.child(0);
        m.rhs = g.child(1);
        if (!ltl::is_bounded(m.lhs) || !ltl::is_bounded(m.rhs))
            return std::nullopt;
    }
    return m;
}

// ------------------------------------------------------------------- bpmc

Verdict bpmc(const SystemSpec& spec, const ltl::Formula& f, Side side, const Config& cfg)
{
    const auto m = match_shape(f);
    if (!m)
        throw std::invalid_argument("bpmc: formula is not G, F, U or R over bounded operands");
    const int k = static_cast<int>(cfg.k);
    const auto& phi = m->rhs;
    const auto& psi = m->lhs;
    // Every expansion starts at step 0, like the unbounded operators.
    Config c = cfg;
    c.ltl.include_step_zero = true;
    std::optional<ltl::Formula> b;
    if (side == Side::satisfy) {
        if (m->shape == Shape::eventually)
            b = ltl::bounded_eventually(k, phi);
        else if (m->shape == Shape::until)
            b = ltl::bounded_until(k, psi, phi);
        else if (m->shape == Shape::release) {
            // psi at some i <= k with phi on 0..i
            std::vector<ltl::Formula> terms;
            for (int i = 0; i <= k; ++i) {
                std::vector<ltl::Formula> conj{ ltl::next(i, psi) };
                for (int j = 0; j <= i; ++j)
                    conj.push_back(ltl::next(j, phi));
                terms.push_back(ltl::conjunction(std::move(conj)));
            }
            b = ltl::disjunction(std::move(terms));
        }
    }
    else {
        if (m->shape == Shape::always)
            b = ltl::bounded_always(k, phi);
        else if (m->shape == Shape::release)
            b = ltl::bounded_release(k, psi, phi);
        else if (m->shape == Shape::until)
            // Weak until truncated at k: a violation is a step with neither
            // psi nor phi before any phi.
            b = ltl::bounded_release(k, phi, ltl::disjunction({ psi, phi }));
    }
    Verdict v;
    v.method_used = Method::bpmc;
    v.depth_reached = cfg.k;
    if (!b) {
        v.notes.push_back("bpmc cannot " + to_string(side) + " " + to_string(m->shape));
        return v;
    }
    auto r = verify_bounded(spec, *b, c);
    r.method_used = Method::bpmc;
    const bool ok = side == Side::satisfy ? r.value == Verdict3::True : r.value == Verdict3::False;
    if (!ok) {
        r.value = Verdict3::Unknown;
        r.witness.reset();
    }
    return r;
}

// ------------------------------------------------------------------ lasso

namespace {

using ExtraRows = std::function<void(milp::Instance&, const rmilp::UnrolledEncoding&, std::size_t t)>;

// Unrolled run of length t that avoids `never` at steps 0..t and returns to
// the state at some t' < t.
Verdict lasso_core(const SystemSpec& spec, const ltl::Formula& never, const Config& cfg, const ExtraRows& extra)
{
    const Timer timer;
    Verdict v;
    v.method_used = Method::lasso;
    v.engine_used = Engine::rmilp;
    const auto space = ltl::StateSpace::of(spec);
    const auto neg = state_skeleton(ltl::negation(never), cfg.ltl);
    rmilp::UnrolledEncoding enc;
    try {
        enc = rmilp::build_constraints(spec, 0);
    }
    catch (const bpt::TotalityGap& e) {
        v.notes.push_back(std::string("bound propagation stopped: ") + e.what());
        return v;
    }
    const std::size_t n = spec.state_dim() + spec.hidden_dim();
    for (std::size_t t = 1; t <= cfg.k; ++t) {
        try {
            rmilp::extend(enc, t);
        }
        catch (const bpt::TotalityGap& e) {
            v.notes.push_back(std::string("bound propagation stopped: ") + e.what());
            break;
        }
        v.depth_reached = t;
        auto base = enc.prefix(t);
        for (std::size_t s = 0; s <= t; ++s) {
            SkeletonEncoder at(base, enc, neg, space, s, cfg.strict_margin, cfg.solver.feas_tol);
            at.require(neg.root);
        }
        if (extra)
            extra(base, enc, t);
        if (solve(base, cfg.solver, v.stats).status == milp::Status::infeasible) {
            v.notes.push_back("no run avoids the predicate for " + std::to_string(t) + " steps");
            break;
        }
        std::vector<milp::Instance> probes;
        for (std::size_t tp = 0; tp < t; ++tp) {
            auto p = base;
            auto joint = [&](std::size_t s, std::size_t j) {
                const auto& sv = enc.steps[s];
                return j < sv.x.size() ? sv.x[j] : sv.h[j - sv.x.size()];
            };
            for (std::size_t j = 0; j < n; ++j) {
                const LinExpr diff = LinExpr::var(joint(t, j)) - LinExpr::var(joint(tp, j));
                if (cfg.lasso_eq_tol > 0.0) {
                    p.add_le(diff, cfg.lasso_eq_tol);
                    p.add_ge(diff, -cfg.lasso_eq_tol);
                }
                else
                    p.add_eq(diff, 0.0);
            }
            probes.push_back(std::move(p));
        }
        if (const auto hit = first_feasible(probes, cfg, v.stats)) {
            v.value = Verdict3::False;
            v.witness = rmilp::extract_path(enc, t, hit->second);
            v.lasso_loop = hit->first;
            break;
        }
    }
    v.stats.wall_ms = timer.ms();
    return v;
}

std::vector<Vector> lasso_states(const Path& p)
{
    auto s = p.states();
    s.pop_back();
    return s;
}

} // namespace

Verdict lasso_search(const SystemSpec& spec, const ltl::Formula& phi, const Config& cfg)
{
    if (!ltl::is_state_predicate(phi)) {
        Verdict v;
        v.method_used = Method::lasso;
        v.notes.push_back("lasso search needs a state predicate");
        return v;
    }
    auto v = lasso_core(spec, phi, cfg, {});
    if (v.value == Verdict3::False) {
        const auto space = ltl::StateSpace::of(spec);
        if (ltl::eval_on_lasso(ltl::eventually(phi), lasso_states(*v.witness), *v.lasso_loop, space, cfg.ltl)) {
            v.value = Verdict3::Unknown;
            v.witness.reset();
            v.lasso_loop.reset();
            v.notes.push_back("lasso failed the exact re-check");
        }
    }
    return v;
}

Verdict verify_unbounded_lasso(const SystemSpec& spec, const ltl::Formula& f, const Config& cfg)
{
    const auto m = match_shape(f);
    if (!m || (m->shape != Shape::until && m->shape != Shape::release))
        throw std::invalid_argument("verify_unbounded_lasso: formula must be psi U phi or psi R phi");
    Verdict v;
    if (m->shape == Shape::until)
        // A run that never reaches phi violates psi U phi.
        v = lasso_search(spec, m->rhs, cfg);
    else {
        v.method_used = Method::lasso;
        if (!ltl::is_state_predicate(m->lhs) || !ltl::is_state_predicate(m->rhs)) {
            v.notes.push_back("lasso search needs state predicates");
            return v;
        }
        // Never psi along the lasso, and phi fails at some step j <= i.
        const std::size_t bound = cfg.release_bound.value_or(cfg.k);
        const auto space = ltl::StateSpace::of(spec);
        const auto not_phi = state_skeleton(ltl::negation(m->rhs), cfg.ltl);
        const double margin = cfg.strict_margin, tol = cfg.solver.feas_tol;
        v = lasso_core(spec, m->lhs, cfg, [&](milp::Instance& inst, const rmilp::UnrolledEncoding& enc, std::size_t t) {
            LinExpr sum;
            for (std::size_t j = 0; j <= std::min(bound, t); ++j) {
                const int b = inst.add_binary();
                sum.add(b, 1.0);
                SkeletonEncoder se(inst, enc, not_phi, space, j, margin, tol);
                se.require(not_phi.root, b);
            }
            inst.add_ge(sum, 1.0);
        });
    }
    if (v.value == Verdict3::False) {
        const auto space = ltl::StateSpace::of(spec);
        if (ltl::eval_on_lasso(ltl::to_nnf(f), lasso_states(*v.witness), *v.lasso_loop, space, cfg.ltl)) {
            v.value = Verdict3::Unknown;
            v.witness.reset();
            v.lasso_loop.reset();
            v.notes.push_back("lasso failed the exact re-check");
        }
    }
    return v;
}

// -------------------------------------------------------------- invariant

namespace {

// Exact cover test over boxes with per-side openness.
struct Piece
{
    Vector lo, hi;
    std::vector<bool> lo_open, hi_open;

    [[nodiscard]] bool empty() const
    {
        for (std::size_t j = 0; j < lo.size(); ++j)
            if (lo[j] > hi[j] || (lo[j] == hi[j] && (lo_open[j] || hi_open[j])))
                return true;
        return false;
    }
    [[nodiscard]] bool inside(const Box& c) const
    {
        for (std::size_t j = 0; j < lo.size(); ++j)
            if (lo[j] < c.lower[j] || hi[j] > c.upper[j])
                return false;
        return true;
    }
    [[nodiscard]] bool meets(const Box& c) const
    {
        for (std::size_t j = 0; j < lo.size(); ++j) {
            if (hi[j] < c.lower[j] || (hi[j] == c.lower[j] && hi_open[j]))
                return false;
            if (lo[j] > c.upper[j] || (lo[j] == c.upper[j] && lo_open[j]))
                return false;
        }
        return true;
    }
};

bool covered(Piece p, const std::vector<Box>& cover, std::size_t from)
{
    if (p.empty())
        return true;
    for (std::size_t i = from; i < cover.size(); ++i) {
        const Box& c = cover[i];
        if (!p.meets(c))
            continue;
        if (p.inside(c))
            return true;
        // Peel off the parts of p outside c, one dimension at a time.
        for (std::size_t j = 0; j < p.lo.size(); ++j) {
            if (p.lo[j] < c.lower[j]) {
                Piece left = p;
                left.hi[j] = c.lower[j];
                left.hi_open[j] = true;
                if (!covered(left, cover, i + 1))
                    return false;
                p.lo[j] = c.lower[j];
                p.lo_open[j] = false;
            }
            if (p.hi[j] > c.upper[j]) {
                Piece right = p;
                right.lo[j] = c.upper[j];
                right.lo_open[j] = true;
                if (!covered(right, cover, i + 1))
                    return false;
                p.hi[j] = c.upper[j];
                p.hi_open[j] = false;
            }
        }
        return true;
    }
    return false;
}

class InvariantContext
{
public:
    InvariantContext(const SystemSpec& spec, const ltl::Formula& phi, InvariantEngine engine, const Config& cfg,
                     Stats& stats)
        : _spec{ spec }, _phi{ phi }, _engine{ engine }, _cfg{ cfg }, _stats{ stats },
          _space{ ltl::StateSpace::of(spec) }, _neg{ state_skeleton(ltl::negation(phi), cfg.ltl) }
    {
    }

    /// Box hull of the one-step image; nullopt when nothing leaves the box.
    std::optional<Box> image(const Box& b)
    {
        ++_stats.bpt_steps;
        if (_engine == InvariantEngine::bpt) {
            try {
                return bpt::IntervalPropagator{}.step(_spec, b).next;
            }
            catch (const bpt::TotalityGap&) {
                return std::nullopt;
            }
        }
        rmilp::UnrolledEncoding enc;
        try {
            rmilp::Options o;
            o.start_box = b;
            enc = rmilp::build_constraints(_spec, 1, nullptr, o);
        }
        catch (const bpt::TotalityGap&) {
            return std::nullopt;
        }
        const std::size_t n = b.dim();
        Box out = Box::uniform(n, 0.0, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            milp::Stats ms;
            const auto lo = rmilp::optimize_coordinate(enc, 1, j, milp::Sense::minimize, _cfg.solver, &ms);
            _stats.add(ms);
            if (!lo)
                return std::nullopt;
            milp::Stats ms2;
            const auto hi = rmilp::optimize_coordinate(enc, 1, j, milp::Sense::maximize, _cfg.solver, &ms2);
            _stats.add(ms2);
            out.lower[j] = *lo;
            out.upper[j] = *hi;
        }
        return out;
    }

    /// phi holds at every state of the box.
    bool holds_on(const Box& b)
    {
        if (_engine == InvariantEngine::bpt)
            return ltl::eval_on_boxes(_phi, { b }, _space, _cfg.ltl) == Verdict3::True;
        rmilp::Options o;
        o.start_box = b;
        bpt::Options bo;
        bo.start_box = b;
        auto trace = bpt::bpt_run(_spec, 0, bo);
        const auto enc = rmilp::build_constraints(_spec, 0, &trace, o);
        auto inst = enc.prefix(0);
        SkeletonEncoder se(inst, enc, _neg, _space, 0, _cfg.strict_margin, _cfg.solver.feas_tol);
        se.require(_neg.root);
        return solve(inst, _cfg.solver, _stats).status == milp::Status::infeasible;
    }

    /// A run violating phi at step t, if one exists.
    std::optional<Path> reachable_violation(std::size_t t)
    {
        if (!_reach)
            _reach = rmilp::build_constraints(_spec, t);
        else
            rmilp::extend(*_reach, t);
        auto inst = _reach->prefix(t);
        SkeletonEncoder se(inst, *_reach, _neg, _space, t, _cfg.strict_margin, _cfg.solver.feas_tol);
        se.require(_neg.root);
        const auto r = solve(inst, _cfg.solver, _stats);
        if (r.status == milp::Status::infeasible)
            return std::nullopt;
        return rmilp::extract_path(*_reach, t, *r.point);
    }

    bool certify(const std::vector<Box>& boxes, std::string* reason)
    {
        auto fail = [&](const std::string& why) {
            if (reason)
                *reason = why;
            return false;
        };
        if (!box_covered(bpt::initial_box(_spec), boxes))
            return fail("initial box not covered");
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            if (!holds_on(boxes[i]))
                return fail("predicate fails on box " + std::to_string(i));
            const auto img = image(boxes[i]);
            if (img && !box_covered(*img, boxes))
                return fail("image of box " + std::to_string(i) + " not covered");
        }
        return true;
    }

private:
    const SystemSpec& _spec;
    const ltl::Formula& _phi;
    InvariantEngine _engine;
    const Config& _cfg;
    Stats& _stats;
    ltl::StateSpace _space;
    ltl::Skeleton _neg;
    std::optional<rmilp::UnrolledEncoding> _reach;
};

} // namespace

bool box_covered(const Box& b, const std::vector<Box>& cover)
{
    for (const auto& c : cover)
        if (c.dim() != b.dim())
            throw DimensionError("box_covered: dimension mismatch");
    Piece p{ b.lower, b.upper, std::vector<bool>(b.dim(), false), std::vector<bool>(b.dim(), false) };
    return covered(std::move(p), cover, 0);
}

bool certify_invariant(const SystemSpec& spec, const std::vector<Box>& boxes, const ltl::Formula& phi,
                       InvariantEngine engine, const Config& cfg, std::string* reason)
{
    if (!ltl::is_state_predicate(phi))
        throw std::invalid_argument("certify_invariant: phi must be a state predicate");
    Stats stats;
    InvariantContext ctx(spec, phi, engine, cfg, stats);
    return ctx.certify(boxes, reason);
}

Verdict invariant_search(const SystemSpec& spec, const ltl::Formula& phi, const Config& cfg)
{
    const Timer timer;
    Verdict v;
    v.method_used = Method::invariant;
    if (!ltl::is_state_predicate(phi)) {
        v.notes.push_back("invariant search needs a state predicate");
        return v;
    }
    const InvariantEngine engine =
        cfg.engine == EngineChoice::bpt_only ? InvariantEngine::bpt : cfg.invariant_engine;
    v.engine_used = engine == InvariantEngine::bpt ? Engine::bpt : Engine::rmilp;
    InvariantContext ctx(spec, phi, engine, cfg, v.stats);
    auto done = [&](Verdict3 value) {
        v.value = value;
        v.stats.wall_ms = timer.ms();
        return v;
    };
    auto accept = [&](std::vector<Box> candidate, const char* kind) {
        std::string why;
        if (ctx.certify(candidate, &why)) {
            v.invariant_boxes = std::move(candidate);
            v.notes.push_back(std::string(kind) + " invariant");
            return true;
        }
        v.notes.push_back(std::string(kind) + " candidate rejected at depth " + std::to_string(v.depth_reached) +
                          ": " + why);
        return false;
    };

    try {
        std::vector<Box> I{ bpt::initial_box(spec) };
        // Maximal chain over the whole declared space; without a hidden box
        // the initial hidden box stands in (certification guards the result).
        std::optional<Box> M = concat(spec.state_box, spec.hidden_box.value_or(spec.hidden_init()));

        if (engine == InvariantEngine::rmilp_tight) {
            if (auto w = ctx.reachable_violation(0)) {
                v.witness = std::move(w);
                return done(Verdict3::False);
            }
        }
        for (std::size_t t = 1; t <= cfg.k; ++t) {
            v.depth_reached = t;
            const auto It = ctx.image(I.back());
            if (!It) {
                // No successor from the last box: the chain so far is closed.
                if (accept(I, "terminal"))
                    return done(Verdict3::True);
                return done(Verdict3::Unknown);
            }
            if (engine == InvariantEngine::rmilp_tight) {
                if (auto w = ctx.reachable_violation(t)) {
                    v.witness = std::move(w);
                    return done(Verdict3::False);
                }
            }
            else if (ltl::eval_on_boxes(phi, { *It }, ltl::StateSpace::of(spec), cfg.ltl) != Verdict3::True) {
                v.notes.push_back("box at step " + std::to_string(t) + " not proven to satisfy the predicate");
                return done(Verdict3::Unknown);
            }
            if (M && ctx.holds_on(*M)) {
                auto cand = prefix_boxes(I, t);
                cand.push_back(*M);
                if (accept(std::move(cand), "maximal"))
                    return done(Verdict3::True);
            }
            if (box_covered(*It, I) && accept(I, "minimal"))
                return done(Verdict3::True);
            I.push_back(*It);
            if (M)
                M = ctx.image(*M);
        }
    }
    catch (const bpt::TotalityGap& e) {
        v.notes.push_back(std::string("bound propagation stopped: ") + e.what());
    }
    return done(Verdict3::Unknown);
}

// --------------------------------------------------------------- dispatch

std::vector<std::pair<Method, Side>> attempt_order(Shape s)
{
    switch (s) {
    case Shape::eventually:
        return { { Method::bpmc, Side::satisfy }, { Method::lasso, Side::falsify }, { Method::invariant, Side::falsify } };
    case Shape::always: return { { Method::invariant, Side::satisfy }, { Method::bpmc, Side::falsify } };
    case Shape::until:
        return { { Method::bpmc, Side::satisfy },
                 { Method::bpmc, Side::falsify },
                 { Method::lasso, Side::falsify },
                 { Method::invariant, Side::falsify } };
    case Shape::release:
        return { { Method::bpmc, Side::satisfy },
                 { Method::bpmc, Side::falsify },
                 { Method::invariant, Side::satisfy },
                 { Method::lasso, Side::falsify } };
    }
    return {};
}

namespace {

Verdict run_attempt(const SystemSpec& spec, const ltl::Formula& f, const ShapeMatch& m, Method method, Side side,
                    const Config& cfg)
{
    switch (method) {
    case Method::bpmc: return bpmc(spec, f, side, cfg);
    case Method::lasso: {
        if (cfg.engine == EngineChoice::bpt_only) {
            Verdict v;
            v.method_used = Method::lasso;
            v.notes.push_back("lasso search needs the MILP engine");
            return v;
        }
        if (m.shape == Shape::eventually)
            return lasso_search(spec, m.rhs, cfg);
        return verify_unbounded_lasso(spec, f, cfg);
    }
    case Method::invariant: {
        if (side == Side::satisfy)
            return invariant_search(spec, m.rhs, cfg);
        // G !phi on all runs falsifies F phi and psi U phi; any run is a witness.
        auto v = invariant_search(spec, ltl::negation(m.rhs), cfg);
        if (v.value == Verdict3::True) {
            v.value = Verdict3::False;
            v.witness.reset();
            try {
                v.witness = bench::simulate(spec, cfg.k, bench::SimOptions::with_seed(0));
            }
            catch (const std::exception& e) {
                v.notes.push_back(std::string("no sample run: ") + e.what());
            }
        }
        else {
            v.value = Verdict3::Unknown;
            v.witness.reset();
            v.invariant_boxes.clear();
        }
        return v;
    }
    case Method::bounded: break;
    }
    return {};
}

} // namespace

Verdict dispatch(const SystemSpec& spec, const ltl::Formula& f, const Config& cfg)
{
    const Timer timer;
    auto allowed = [&](Method m) {
        return cfg.methods.empty() || std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
    };
    if (ltl::is_bounded(f)) {
        auto v = verify_bounded(spec, f, cfg);
        v.attempts.push_back({ Method::bounded, Side::satisfy, v.value });
        return v;
    }
    Verdict out;
    const auto m = match_shape(f);
    if (!m) {
        out.notes.push_back("unsupported formula shape: " + ltl::print(f));
        return out;
    }
    std::optional<Verdict> result;
    Stats total;
    std::vector<Attempt> attempts;
    std::vector<std::string> notes;
    for (const auto& [method, side] : attempt_order(m->shape)) {
        if (!allowed(method))
            continue;
        Verdict v;
        try {
            v = run_attempt(spec, f, *m, method, side, cfg);
        }
        catch (const rmilp::SolverLimit& e) {
            v.method_used = method;
            v.notes.push_back(e.what());
        }
        attempts.push_back({ method, side, v.value });
        total.add(v.stats);
        for (auto& n : v.notes)
            notes.push_back(to_string(method) + "/" + to_string(side) + ": " + n);
        if (v.value != Verdict3::Unknown && !result) {
            result = std::move(v);
            if (!cfg.run_all)
                break;
        }
    }
    if (result)
        out = std::move(*result);
    else
        out.depth_reached = cfg.k;
    out.attempts = std::move(attempts);
    out.notes = std::move(notes);
    out.stats = total;
    out.stats.wall_ms = timer.ms();
    return out;
}

} // namespace mnv::verify
