// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "mnv/milp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <sstream>

namespace mnv::milp {

// ---------------------------------------------------------------------------
// LinExpr / Instance

LinExpr LinExpr::var(int id, double coeff)
{
    LinExpr e;
    e.add(id, coeff);
    return e;
}

LinExpr& LinExpr::add(int id, double coeff)
{
    if (!std::isfinite(coeff))
        throw DimensionError("non-finite coefficient for variable " + std::to_string(id));
    auto [it, inserted] = _terms.try_emplace(id, coeff);
    if (!inserted)
        it->second += coeff;
    return *this;
}

LinExpr& LinExpr::operator+=(const LinExpr& other)
{
    for (auto [id, c] : other._terms)
        add(id, c);
    _constant += other._constant;
    return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& other)
{
    for (auto [id, c] : other._terms)
        add(id, -c);
    _constant -= other._constant;
    return *this;
}

LinExpr& LinExpr::operator*=(double s)
{
    for (auto& [id, c] : _terms)
        c *= s;
    _constant *= s;
    return *this;
}

double LinExpr::coeff(int id) const
{
    auto it = _terms.find(id);
    return it == _terms.end() ? 0.0 : it->second;
}

double LinExpr::evaluate(std::span<const double> point) const
{
    double acc = _constant;
    for (auto [id, c] : _terms)
        acc += c * point[static_cast<std::size_t>(id)];
    return acc;
}

int Instance::add_var(VarKind kind, double lower, double upper, std::string name)
{
    if (kind == VarKind::binary) {
        lower = std::max(lower, 0.0);
        upper = std::min(upper, 1.0);
    }
    if (std::isnan(lower) || std::isnan(upper) || lower > upper)
        throw DimensionError("invalid bounds for variable '" + name + "'");
    _vars.push_back(Var{ kind, lower, upper, std::move(name) });
    return static_cast<int>(_vars.size() - 1);
}

void Instance::add_constraint(LinExpr expr, Relation rel, double rhs, std::string name)
{
    for (auto [id, c] : expr.terms())
        if (id < 0 || static_cast<std::size_t>(id) >= _vars.size())
            throw DimensionError("constraint references undeclared variable " + std::to_string(id));
    if (!std::isfinite(rhs))
        throw DimensionError("non-finite right-hand side");
    _constraints.push_back(Constraint{ std::move(expr), rel, rhs, std::move(name) });
}

std::size_t Instance::num_free_binaries() const
{
    return static_cast<std::size_t>(std::count_if(_vars.begin(), _vars.end(), [](const Var& v) {
        return v.kind == VarKind::binary && v.lower < v.upper;
    }));
}

double Instance::max_violation(std::span<const double> point) const
{
    double worst = 0.0;
    for (std::size_t j = 0; j < _vars.size(); ++j) {
        worst = std::max(worst, _vars[j].lower - point[j]);
        worst = std::max(worst, point[j] - _vars[j].upper);
    }
    for (const auto& c : _constraints) {
        const double lhs = c.expr.evaluate(point);
        const double d = lhs - c.rhs;
        worst = std::max(worst, c.rel == Relation::eq ? std::abs(d) : d);
    }
    return worst;
}

std::string to_string(Status s)
{
    switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::bound_limit: return "bound_limit";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Dense two-phase simplex

namespace {

constexpr double reduced_cost_tol = 1e-9;

struct Column
{
    int var;
    double sign;
};

class Tableau
{
public:
    Tableau(std::size_t rows, std::size_t cols) : _rows{ rows }, _cols{ cols }, _t(rows * (cols + 1), 0.0) {}

    double& at(std::size_t r, std::size_t c) { return _t[r * (_cols + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return _t[r * (_cols + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, _cols); }
    double rhs(std::size_t r) const { return at(r, _cols); }
    std::size_t rows() const { return _rows; }
    std::size_t cols() const { return _cols; }

    void pivot(std::size_t pr, std::size_t pc, std::vector<double>& z)
    {
        const std::size_t w = _cols + 1;
        double* prow = &_t[pr * w];
        const double inv = 1.0 / prow[pc];
        for (std::size_t c = 0; c < w; ++c)
            prow[c] *= inv;
        prow[pc] = 1.0;
        for (std::size_t r = 0; r < _rows; ++r) {
            if (r == pr)
                continue;
            double* row = &_t[r * w];
            const double f = row[pc];
            if (f == 0.0)
                continue;
            for (std::size_t c = 0; c < w; ++c) {
                if (prow[c] != 0.0) {
                    row[c] -= f * prow[c];
                    if (std::abs(row[c]) < 1e-14)
                        row[c] = 0.0;
                }
            }
            row[pc] = 0.0;
        }
        const double f = z[pc];
        if (f != 0.0) {
            for (std::size_t c = 0; c < w; ++c)
                if (prow[c] != 0.0)
                    z[c] -= f * prow[c];
            z[pc] = 0.0;
        }
    }

    void remove_row(std::size_t r)
    {
        const std::size_t w = _cols + 1;
        _t.erase(_t.begin() + static_cast<std::ptrdiff_t>(r * w), _t.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
        --_rows;
    }

private:
    std::size_t _rows;
    std::size_t _cols;
    std::vector<double> _t;
};

enum class SimplexOutcome { optimal, unbounded };

struct SimplexRun
{
    SimplexOutcome outcome = SimplexOutcome::optimal;
    std::size_t unbounded_col = 0;
};

class SimplexEngine
{
public:
    SimplexEngine(Tableau& t, std::vector<std::size_t>& basis, const Options& opt, std::uint64_t& iters)
        : _t{ t }, _basis{ basis }, _opt{ opt }, _iters{ iters }
    {
    }

    // Minimises cost over allowed columns starting from the current basis.
    // On return z holds reduced costs and z[cols] = -objective.
    SimplexRun run(const std::vector<double>& cost, const std::vector<char>& allowed, std::vector<double>& z)
    {
        const std::size_t n = _t.cols();
        z.assign(n + 1, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            z[j] = cost[j];
        for (std::size_t i = 0; i < _t.rows(); ++i) {
            const double cb = cost[_basis[i]];
            if (cb == 0.0)
                continue;
            for (std::size_t j = 0; j <= n; ++j)
                z[j] -= cb * _t.at(i, j);
        }
        std::vector<char> is_basic(n, 0);
        for (auto b : _basis)
            is_basic[b] = 1;

        bool bland = false;
        std::size_t degenerate = 0;
        for (;;) {
            std::size_t enter = n;
            double best = -reduced_cost_tol;
            for (std::size_t j = 0; j < n; ++j) {
                if (!allowed[j] || is_basic[j])
                    continue;
                if (bland) {
                    if (z[j] < -reduced_cost_tol) {
                        enter = j;
                        break;
                    }
                } else if (z[j] < best) {
                    best = z[j];
                    enter = j;
                }
            }
            if (enter == n)
                return { SimplexOutcome::optimal, 0 };

            std::size_t leave = _t.rows();
            double best_ratio = 0.0;
            bool tiny_pivot_seen = false;
            for (std::size_t i = 0; i < _t.rows(); ++i) {
                const double a = _t.at(i, enter);
                if (a <= _opt.pivot_tol) {
                    if (a > _opt.pivot_tol * 1e-2)
                        tiny_pivot_seen = true;
                    continue;
                }
                const double ratio = std::max(0.0, _t.rhs(i)) / a;
                if (leave == _t.rows()) {
                    leave = i;
                    best_ratio = ratio;
                    continue;
                }
                const double tol = 1e-12 * (1.0 + best_ratio);
                if (ratio < best_ratio - tol) {
                    leave = i;
                    best_ratio = ratio;
                } else if (ratio <= best_ratio + tol) {
                    const bool better = bland ? _basis[i] < _basis[leave] : a > _t.at(leave, enter);
                    if (better) {
                        leave = i;
                        best_ratio = std::min(best_ratio, ratio);
                    }
                }
            }
            if (leave == _t.rows()) {
                if (tiny_pivot_seen)
                    throw NumericalError("simplex: only pivots below pivot_tol available");
                return { SimplexOutcome::unbounded, enter };
            }

            if (best_ratio < 1e-12) {
                if (++degenerate > _opt.degeneracy_threshold)
                    bland = true;
            } else {
                degenerate = 0;
            }

            is_basic[_basis[leave]] = 0;
            is_basic[enter] = 1;
            _basis[leave] = enter;
            _t.pivot(leave, enter, z);
            for (std::size_t i = 0; i < _t.rows(); ++i)
                if (_t.rhs(i) < 0.0 && _t.rhs(i) > -1e-11)
                    _t.rhs(i) = 0.0;
            if (++_iters > _opt.iteration_limit)
                throw NumericalError("simplex: iteration limit exceeded");
        }
    }

private:
    Tableau& _t;
    std::vector<std::size_t>& _basis;
    const Options& _opt;
    std::uint64_t& _iters;
};

struct StdRow
{
    std::vector<double> coeffs; // over structural columns
    double rhs = 0.0;
    Relation rel = Relation::le;
    int origin = -1; // constraint index, -1 for an upper-bound row
};

} // namespace

Result solve_lp(const Instance& instance, std::span<const double> lower, std::span<const double> upper,
                const Options& opt)
{
    Result res;
    const auto& vars = instance.vars();
    const std::size_t nv = vars.size();
    res.duals.assign(instance.constraints().size(), 0.0);

    // Variable substitution x = offset + sum(sign * y), y >= 0.
    std::vector<double> offset(nv, 0.0);
    std::vector<Column> cols;
    std::vector<std::vector<std::size_t>> var_cols(nv);
    std::vector<double> col_ub;
    for (std::size_t j = 0; j < nv; ++j) {
        double lo = lower[j];
        double hi = upper[j];
        if (vars[j].kind == VarKind::binary) {
            lo = std::max(lo, 0.0);
            hi = std::min(hi, 1.0);
        }
        if (lo > hi + opt.feas_tol) {
            res.status = Status::infeasible;
            return res;
        }
        if (hi < lo)
            hi = lo;
        if (hi - lo <= 1e-12) {
            offset[j] = lo;
        } else if (std::isfinite(lo)) {
            offset[j] = lo;
            var_cols[j].push_back(cols.size());
            cols.push_back({ static_cast<int>(j), 1.0 });
            col_ub.push_back(hi - lo);
        } else if (std::isfinite(hi)) {
            offset[j] = hi;
            var_cols[j].push_back(cols.size());
            cols.push_back({ static_cast<int>(j), -1.0 });
            col_ub.push_back(inf);
        } else {
            var_cols[j].push_back(cols.size());
            cols.push_back({ static_cast<int>(j), 1.0 });
            col_ub.push_back(inf);
            var_cols[j].push_back(cols.size());
            cols.push_back({ static_cast<int>(j), -1.0 });
            col_ub.push_back(inf);
        }
    }
    const std::size_t ns = cols.size();

    std::vector<StdRow> rows;
    for (std::size_t ci = 0; ci < instance.constraints().size(); ++ci) {
        const auto& c = instance.constraints()[ci];
        StdRow row;
        row.coeffs.assign(ns, 0.0);
        row.rel = c.rel;
        row.origin = static_cast<int>(ci);
        row.rhs = c.rhs - c.expr.constant();
        bool any = false;
        for (auto [id, a] : c.expr.terms()) {
            if (a == 0.0)
                continue;
            row.rhs -= a * offset[static_cast<std::size_t>(id)];
            for (auto col : var_cols[static_cast<std::size_t>(id)]) {
                row.coeffs[col] += a * cols[col].sign;
                any = true;
            }
        }
        if (!any || std::all_of(row.coeffs.begin(), row.coeffs.end(), [](double v) { return v == 0.0; })) {
            const bool ok = c.rel == Relation::eq ? std::abs(row.rhs) <= opt.feas_tol : row.rhs >= -opt.feas_tol;
            if (!ok) {
                res.status = Status::infeasible;
                return res;
            }
            continue;
        }
        rows.push_back(std::move(row));
    }
    for (std::size_t col = 0; col < ns; ++col) {
        if (!std::isfinite(col_ub[col]))
            continue;
        StdRow row;
        row.coeffs.assign(ns, 0.0);
        row.coeffs[col] = 1.0;
        row.rhs = col_ub[col];
        row.rel = Relation::le;
        rows.push_back(std::move(row));
    }

    const std::size_t m = rows.size();
    std::vector<double> flip(m, 1.0);
    std::vector<long> slack_col(m, -1), art_col(m, -1);
    std::size_t ncols = ns;
    for (std::size_t i = 0; i < m; ++i) {
        if (rows[i].rhs < 0.0)
            flip[i] = -1.0;
        if (rows[i].rel == Relation::le)
            slack_col[i] = static_cast<long>(ncols++);
    }
    const std::size_t first_art = ncols;
    for (std::size_t i = 0; i < m; ++i)
        if (!(rows[i].rel == Relation::le && flip[i] > 0.0))
            art_col[i] = static_cast<long>(ncols++);

    Tableau t(m, ncols);
    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t c = 0; c < ns; ++c)
            t.at(i, c) = flip[i] * rows[i].coeffs[c];
        t.rhs(i) = flip[i] * rows[i].rhs;
        if (slack_col[i] >= 0)
            t.at(i, static_cast<std::size_t>(slack_col[i])) = flip[i];
        if (art_col[i] >= 0) {
            t.at(i, static_cast<std::size_t>(art_col[i])) = 1.0;
            basis[i] = static_cast<std::size_t>(art_col[i]);
        } else {
            basis[i] = static_cast<std::size_t>(slack_col[i]);
        }
    }
    // Row bookkeeping survives redundant-row removal.
    std::vector<std::size_t> row_id(m);
    for (std::size_t i = 0; i < m; ++i)
        row_id[i] = i;

    std::uint64_t iters = 0;
    SimplexEngine engine(t, basis, opt, iters);
    std::vector<double> z;

    if (first_art < ncols) {
        std::vector<double> cost(ncols, 0.0);
        for (std::size_t c = first_art; c < ncols; ++c)
            cost[c] = 1.0;
        std::vector<char> allowed(ncols, 1);
        engine.run(cost, allowed, z);
        const double infeas = -z[ncols];
        if (infeas > opt.feas_tol) {
            res.status = Status::infeasible;
            res.stats.lp_iterations = iters;
            return res;
        }
        // Drive artificials out of the basis; drop rows that are redundant.
        for (std::size_t i = 0; i < t.rows();) {
            if (basis[i] < first_art) {
                ++i;
                continue;
            }
            std::size_t best = ncols;
            double mag = 1e-9;
            for (std::size_t c = 0; c < first_art; ++c) {
                if (std::abs(t.at(i, c)) > mag) {
                    mag = std::abs(t.at(i, c));
                    best = c;
                }
            }
            if (best == ncols) {
                t.remove_row(i);
                basis.erase(basis.begin() + static_cast<std::ptrdiff_t>(i));
                row_id.erase(row_id.begin() + static_cast<std::ptrdiff_t>(i));
                continue;
            }
            t.pivot(i, best, z);
            basis[i] = best;
            ++i;
        }
    }

    std::vector<double> cost(ncols, 0.0);
    const auto& objective = instance.objective();
    const double osign = objective && objective->sense == Sense::maximize ? -1.0 : 1.0;
    if (objective) {
        for (auto [id, a] : objective->expr.terms())
            for (auto col : var_cols[static_cast<std::size_t>(id)])
                cost[col] += osign * a * cols[col].sign;
    }
    std::vector<char> allowed(ncols, 1);
    for (std::size_t c = first_art; c < ncols; ++c)
        allowed[c] = 0;
    const SimplexRun run = engine.run(cost, allowed, z);
    res.stats.lp_iterations = iters;

    std::vector<double> y(ncols, 0.0);
    for (std::size_t i = 0; i < t.rows(); ++i)
        y[basis[i]] = std::max(0.0, t.rhs(i));
    Vector x(nv);
    for (std::size_t j = 0; j < nv; ++j) {
        x[j] = offset[j];
        for (auto col : var_cols[j])
            x[j] += cols[col].sign * y[col];
    }

    if (run.outcome == SimplexOutcome::unbounded) {
        std::vector<double> dcol(ncols, 0.0);
        dcol[run.unbounded_col] = 1.0;
        for (std::size_t i = 0; i < t.rows(); ++i)
            dcol[basis[i]] = -t.at(i, run.unbounded_col);
        Vector ray(nv, 0.0);
        for (std::size_t j = 0; j < nv; ++j)
            for (auto col : var_cols[j])
                ray[j] += cols[col].sign * dcol[col];
        res.status = Status::unbounded;
        res.ray = std::move(ray);
        res.point = std::move(x);
        return res;
    }

    // Duals: y_row = c_B B^-1 e_row, reading B^-1 off the unit columns.
    for (std::size_t k = 0; k < t.rows(); ++k) {
        const std::size_t i = row_id[k];
        if (rows[i].origin < 0)
            continue;
        const long unit = art_col[i] >= 0 ? art_col[i] : slack_col[i];
        double yi = 0.0;
        for (std::size_t r = 0; r < t.rows(); ++r)
            yi += cost[basis[r]] * t.at(r, static_cast<std::size_t>(unit));
        res.duals[static_cast<std::size_t>(rows[i].origin)] = -flip[i] * yi;
    }

    res.status = Status::optimal;
    if (objective)
        res.objective_value = objective->expr.evaluate(x);
    res.point = std::move(x);
    return res;
}

Result solve_lp(const Instance& instance, const Options& options)
{
    std::vector<double> lo, hi;
    lo.reserve(instance.num_vars());
    hi.reserve(instance.num_vars());
    for (const auto& v : instance.vars()) {
        lo.push_back(v.lower);
        hi.push_back(v.upper);
    }
    return solve_lp(instance, lo, hi, options);
}

// ---------------------------------------------------------------------------
// Branch and bound

namespace {

struct Node
{
    double bound;
    std::size_t depth;
    std::uint64_t id;
    std::vector<double> lower;
    std::vector<double> upper;
    Vector point;
};

struct NodeOrder
{
    // Best bound first; deeper nodes first on ties, then creation order.
    bool operator()(const Node& a, const Node& b) const
    {
        if (a.bound != b.bound)
            return a.bound > b.bound;
        if (a.depth != b.depth)
            return a.depth < b.depth;
        return a.id > b.id;
    }
};

} // namespace

Result solve_milp(const Instance& instance, const Options& opt)
{
    Result out;
    const std::size_t nv = instance.num_vars();
    std::vector<int> binaries;
    for (std::size_t j = 0; j < nv; ++j)
        if (instance.vars()[j].kind == VarKind::binary)
            binaries.push_back(static_cast<int>(j));

    const auto& objective = instance.objective();
    const double osign = objective && objective->sense == Sense::maximize ? -1.0 : 1.0;
    auto min_form = [&](const Result& r) { return objective ? osign * *r.objective_value : 0.0; };

    std::vector<double> lo0(nv), hi0(nv);
    for (std::size_t j = 0; j < nv; ++j) {
        lo0[j] = instance.vars()[j].lower;
        hi0[j] = instance.vars()[j].upper;
    }

    Result root = solve_lp(instance, lo0, hi0, opt);
    out.stats.lp_iterations += root.stats.lp_iterations;
    out.stats.nodes = 1;
    if (root.status != Status::optimal) {
        out.status = root.status;
        out.ray = root.ray;
        out.point = root.point;
        return out;
    }

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    std::uint64_t next_id = 0;
    open.push(Node{ min_form(root), 0, next_id++, lo0, hi0, *root.point });

    std::optional<double> incumbent;
    Vector incumbent_point;

    auto gap = [&](double inc) { return opt.gap_tol * std::max(1.0, std::abs(inc)); };

    while (!open.empty()) {
        Node node = open.top();
        open.pop();
        if (incumbent && node.bound >= *incumbent - gap(*incumbent))
            continue;

        int branch_var = -1;
        double best_frac = opt.int_tol;
        for (int b : binaries) {
            const double v = node.point[static_cast<std::size_t>(b)];
            const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
            if (frac > best_frac) {
                best_frac = frac;
                branch_var = b;
            }
        }

        if (branch_var < 0) {
            // Integral: re-solve with binaries pinned for a clean point.
            std::vector<double> lo = node.lower, hi = node.upper;
            for (int b : binaries) {
                const double r = std::round(node.point[static_cast<std::size_t>(b)]);
                lo[static_cast<std::size_t>(b)] = hi[static_cast<std::size_t>(b)] = r;
            }
            Result pinned = solve_lp(instance, lo, hi, opt);
            out.stats.lp_iterations += pinned.stats.lp_iterations;
            ++out.stats.nodes;
            Vector pt = node.point;
            double val = node.bound;
            if (pinned.status == Status::optimal) {
                pt = *pinned.point;
                val = min_form(pinned);
            }
            for (int b : binaries)
                pt[static_cast<std::size_t>(b)] = std::round(pt[static_cast<std::size_t>(b)]);
            if (!incumbent || val < *incumbent) {
                incumbent = val;
                incumbent_point = std::move(pt);
            }
            if (!objective)
                break;
            continue;
        }

        if (out.stats.nodes >= opt.node_limit) {
            out.status = Status::bound_limit;
            if (incumbent) {
                out.point = incumbent_point;
                if (objective)
                    out.objective_value = objective->expr.evaluate(incumbent_point);
            }
            return out;
        }

        for (double v : { 0.0, 1.0 }) {
            std::vector<double> lo = node.lower, hi = node.upper;
            lo[static_cast<std::size_t>(branch_var)] = hi[static_cast<std::size_t>(branch_var)] = v;
            Result child = solve_lp(instance, lo, hi, opt);
            out.stats.lp_iterations += child.stats.lp_iterations;
            ++out.stats.nodes;
            if (child.status == Status::unbounded) {
                out.status = Status::unbounded;
                out.ray = child.ray;
                out.point = child.point;
                return out;
            }
            if (child.status != Status::optimal)
                continue;
            const double b = min_form(child);
            if (incumbent && b >= *incumbent - gap(*incumbent))
                continue;
            open.push(Node{ b, node.depth + 1, next_id++, std::move(lo), std::move(hi), *child.point });
        }
    }

    if (!incumbent) {
        out.status = Status::infeasible;
        return out;
    }
    out.status = Status::optimal;
    out.point = incumbent_point;
    if (objective)
        out.objective_value = objective->expr.evaluate(incumbent_point);
    return out;
}

Result feasible(const Instance& instance, const Options& options)
{
    Instance copy = instance;
    copy.clear_objective();
    return solve_milp(copy, options);
}

// ---------------------------------------------------------------------------
// LP format export

namespace {

std::string fmt_num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string lp_name(const Instance& inst, int id)
{
    const std::string& raw = inst.vars()[static_cast<std::size_t>(id)].name;
    std::string s;
    for (char ch : raw) {
        const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.';
        s.push_back(ok ? ch : '_');
    }
    // Names must be unique and must not look like numbers or keywords.
    return "v" + std::to_string(id) + (s.empty() ? "" : "_" + s);
}

void write_expr(std::ostringstream& os, const Instance& inst, const LinExpr& e)
{
    bool first = true;
    for (auto [id, c] : e.terms()) {
        if (c == 0.0)
            continue;
        if (c < 0)
            os << (first ? "- " : " - ");
        else if (!first)
            os << " + ";
        os << fmt_num(std::abs(c)) << ' ' << lp_name(inst, id);
        first = false;
    }
    if (first)
        os << "0 " << (inst.num_vars() ? lp_name(inst, 0) : std::string("__zero"));
}

} // namespace

std::string export_lp_format(const Instance& inst)
{
    std::ostringstream os;
    os << "\\ exported by mnverify\n";
    const auto& obj = inst.objective();
    os << (obj && obj->sense == Sense::maximize ? "Maximize\n" : "Minimize\n");
    os << " obj: ";
    if (obj)
        write_expr(os, inst, obj->expr);
    else if (inst.num_vars())
        os << "0 " << lp_name(inst, 0);
    os << "\nSubject To\n";
    std::size_t k = 0;
    for (const auto& c : inst.constraints()) {
        bool nonzero = false;
        for (auto [id, a] : c.expr.terms())
            nonzero = nonzero || a != 0.0;
        if (!nonzero)
            continue;
        os << " c" << k++ << ": ";
        write_expr(os, inst, c.expr);
        os << (c.rel == Relation::eq ? " = " : " <= ") << fmt_num(c.rhs - c.expr.constant()) << '\n';
    }
    os << "Bounds\n";
    for (std::size_t j = 0; j < inst.num_vars(); ++j) {
        const auto& v = inst.vars()[j];
        const std::string n = lp_name(inst, static_cast<int>(j));
        if (!std::isfinite(v.lower) && !std::isfinite(v.upper))
            os << ' ' << n << " free\n";
        else if (!std::isfinite(v.lower))
            os << " -inf <= " << n << " <= " << fmt_num(v.upper) << '\n';
        else if (!std::isfinite(v.upper))
            os << ' ' << n << " >= " << fmt_num(v.lower) << '\n';
        else
            os << ' ' << fmt_num(v.lower) << " <= " << n << " <= " << fmt_num(v.upper) << '\n';
    }
    bool any_bin = false;
    for (std::size_t j = 0; j < inst.num_vars(); ++j) {
        if (inst.vars()[j].kind != VarKind::binary)
            continue;
        if (!any_bin)
            os << "Binaries\n";
        any_bin = true;
        os << ' ' << lp_name(inst, static_cast<int>(j)) << '\n';
    }
    os << "End\n";
    return os.str();
}

} // namespace mnv::milp
