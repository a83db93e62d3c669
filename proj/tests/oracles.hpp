// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Test-only reference computations. Nothing here calls into the code paths it
// is used to check, except where noted (the exhaustive MILP oracle reuses the
// LP solver, which itself is checked against vertex enumeration).
#pragma once

#include "mnv/milp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace mnv::testing {

/// Gaussian elimination with partial pivoting. Returns nullopt when singular.
inline std::optional<Vector> solve_square(std::vector<Vector> a, Vector b)
{
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[p][c]))
                p = r;
        if (std::abs(a[p][c]) < 1e-11)
            return std::nullopt;
        std::swap(a[p], a[c]);
        std::swap(b[p], b[c]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c)
                continue;
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k)
                a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = b[i] / a[i][i];
    return x;
}

/// Dense LP  max c.x  s.t.  A x <= b,  lo <= x <= hi (finite bounds).
struct DenseLp
{
    std::vector<Vector> a;
    Vector b;
    Vector c;
    Vector lo;
    Vector hi;
};

/// Brute force over every basis: choose n tight constraints among rows and
/// bounds, solve, keep the feasible vertex with the best objective.
inline std::optional<double> lp_by_vertex_enumeration(const DenseLp& lp)
{
    const std::size_t n = lp.c.size();
    std::vector<Vector> rows = lp.a;
    Vector rhs = lp.b;
    for (std::size_t j = 0; j < n; ++j) {
        Vector e(n, 0.0);
        e[j] = 1.0;
        rows.push_back(e);
        rhs.push_back(lp.hi[j]);
        e[j] = -1.0;
        rows.push_back(e);
        rhs.push_back(-lp.lo[j]);
    }
    const std::size_t m = rows.size();
    std::optional<double> best;
    std::vector<std::size_t> pick(n);
    for (std::size_t i = 0; i < n; ++i)
        pick[i] = i;
    for (;;) {
        std::vector<Vector> sa;
        Vector sb;
        for (auto k : pick) {
            sa.push_back(rows[k]);
            sb.push_back(rhs[k]);
        }
        if (auto x = solve_square(sa, sb)) {
            bool ok = true;
            for (std::size_t r = 0; r < m && ok; ++r) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    s += rows[r][j] * (*x)[j];
                ok = s <= rhs[r] + 1e-8;
            }
            if (ok) {
                double v = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    v += lp.c[j] * (*x)[j];
                if (!best || v > *best)
                    best = v;
            }
        }
        // next combination
        std::size_t i = n;
        while (i > 0 && pick[i - 1] == m - n + (i - 1))
            --i;
        if (i == 0)
            break;
        ++pick[i - 1];
        for (std::size_t k = i; k < n; ++k)
            pick[k] = pick[k - 1] + 1;
    }
    return best;
}

/// Lagrangian lower bound for the minimisation form of `inst` given row
/// multipliers: q(mu) = min_{x in bounds} c.x + sum mu_i (g_i(x) - rhs_i).
/// Returns -inf when a coefficient faces an infinite bound.
inline double lagrangian_bound(const milp::Instance& inst, const Vector& mu)
{
    const auto& obj = inst.objective();
    const double sign = obj && obj->sense == milp::Sense::maximize ? -1.0 : 1.0;
    const std::size_t n = inst.num_vars();
    Vector coef(n, 0.0);
    double constant = 0.0;
    if (obj) {
        for (auto [id, a] : obj->expr.terms())
            coef[static_cast<std::size_t>(id)] += sign * a;
        constant += sign * obj->expr.constant();
    }
    for (std::size_t i = 0; i < inst.constraints().size(); ++i) {
        const auto& c = inst.constraints()[i];
        for (auto [id, a] : c.expr.terms())
            coef[static_cast<std::size_t>(id)] += mu[i] * a;
        constant += mu[i] * (c.expr.constant() - c.rhs);
    }
    double q = constant;
    for (std::size_t j = 0; j < n; ++j) {
        const auto& v = inst.vars()[j];
        double lo = v.lower, hi = v.upper;
        if (v.kind == milp::VarKind::binary) {
            lo = std::max(lo, 0.0);
            hi = std::min(hi, 1.0);
        }
        if (std::abs(coef[j]) < 1e-9)
            continue;
        const double bound = coef[j] > 0 ? lo : hi;
        if (!std::isfinite(bound))
            return -milp::inf;
        q += coef[j] * bound;
    }
    return q;
}

/// Optimum of a MILP by enumerating every binary pattern and solving the LP
/// with the binaries pinned. Returns nullopt when every pattern is infeasible.
inline std::optional<double> milp_by_enumeration(const milp::Instance& inst, const milp::Options& opt = {})
{
    std::vector<int> bins;
    for (std::size_t j = 0; j < inst.num_vars(); ++j)
        if (inst.vars()[j].kind == milp::VarKind::binary)
            bins.push_back(static_cast<int>(j));
    const bool maximize = inst.objective() && inst.objective()->sense == milp::Sense::maximize;
    std::optional<double> best;
    Vector lo, hi;
    for (const auto& v : inst.vars()) {
        lo.push_back(v.lower);
        hi.push_back(v.upper);
    }
    for (std::uint64_t mask = 0; mask < (std::uint64_t{ 1 } << bins.size()); ++mask) {
        Vector l = lo, h = hi;
        bool skip = false;
        for (std::size_t k = 0; k < bins.size(); ++k) {
            const double v = (mask >> k) & 1U ? 1.0 : 0.0;
            const auto j = static_cast<std::size_t>(bins[k]);
            if (v < l[j] || v > h[j])
                skip = true;
            l[j] = h[j] = v;
        }
        if (skip)
            continue;
        auto r = milp::solve_lp(inst, l, h, opt);
        if (r.status != milp::Status::optimal)
            continue;
        const double v = r.objective_value.value_or(0.0);
        if (!best || (maximize ? v > *best : v < *best))
            best = v;
    }
    return best;
}

inline milp::Instance dense_to_instance(const DenseLp& lp)
{
    milp::Instance inst;
    for (std::size_t j = 0; j < lp.c.size(); ++j)
        inst.add_continuous(lp.lo[j], lp.hi[j]);
    for (std::size_t i = 0; i < lp.a.size(); ++i) {
        milp::LinExpr e;
        for (std::size_t j = 0; j < lp.c.size(); ++j)
            e.add(static_cast<int>(j), lp.a[i][j]);
        inst.add_le(e, lp.b[i]);
    }
    milp::LinExpr obj;
    for (std::size_t j = 0; j < lp.c.size(); ++j)
        obj.add(static_cast<int>(j), lp.c[j]);
    inst.set_objective(obj, milp::Sense::maximize);
    return inst;
}

/// Random instance: `nc` continuous vars in boxes, `nb` binaries, and rows
/// mixing both, with a known feasible point so most instances are feasible.
inline milp::Instance random_milp(std::mt19937_64& rng, std::size_t nc, std::size_t nb, std::size_t rows)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    milp::Instance inst;
    Vector feasible_point;
    for (std::size_t j = 0; j < nc; ++j) {
        inst.add_continuous(-2.0 - u(rng), 2.0 + u(rng));
        feasible_point.push_back(0.5 * u(rng));
    }
    std::bernoulli_distribution coin(0.5);
    for (std::size_t j = 0; j < nb; ++j) {
        inst.add_binary();
        feasible_point.push_back(coin(rng) ? 1.0 : 0.0);
    }
    for (std::size_t i = 0; i < rows; ++i) {
        milp::LinExpr e;
        for (std::size_t j = 0; j < nc + nb; ++j)
            if (coin(rng))
                e.add(static_cast<int>(j), 3.0 * u(rng));
        const double at = e.evaluate(feasible_point);
        if (i % 5 == 4)
            inst.add_eq(e, at);
        else
            inst.add_le(e, at + 0.5 * (u(rng) + 1.0));
    }
    milp::LinExpr obj;
    for (std::size_t j = 0; j < nc + nb; ++j)
        obj.add(static_cast<int>(j), u(rng));
    inst.set_objective(obj, coin(rng) ? milp::Sense::maximize : milp::Sense::minimize);
    return inst;
}

} // namespace mnv::testing
