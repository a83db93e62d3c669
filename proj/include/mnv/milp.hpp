// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mnv/core.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

// Self-contained LP/MILP solving: dense two-phase primal simplex for the LP
// relaxations and best-first branch-and-bound over binary variables.
namespace mnv::milp {

inline constexpr double inf = std::numeric_limits<double>::infinity();

enum class VarKind { continuous, binary };

struct Var
{
    VarKind kind = VarKind::continuous;
    double lower = 0.0;
    double upper = inf;
    std::string name;
};

/// Sparse affine expression sum_i coeff_i * var_i + constant over variable ids.
class LinExpr
{
public:
    LinExpr() = default;
    explicit LinExpr(double constant) : _constant{ constant } {}
    static LinExpr var(int id, double coeff = 1.0);

    LinExpr& add(int id, double coeff);
    LinExpr& add_constant(double c)
    {
        _constant += c;
        return *this;
    }
    LinExpr& operator+=(const LinExpr& other);
    LinExpr& operator-=(const LinExpr& other);
    LinExpr& operator*=(double s);

    friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
    friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
    friend LinExpr operator*(LinExpr a, double s) { return a *= s; }
    friend LinExpr operator*(double s, LinExpr a) { return a *= s; }

    [[nodiscard]] const std::map<int, double>& terms() const { return _terms; }
    [[nodiscard]] double constant() const { return _constant; }
    [[nodiscard]] double coeff(int id) const;
    [[nodiscard]] double evaluate(std::span<const double> point) const;

    bool operator==(const LinExpr&) const = default;

private:
    std::map<int, double> _terms;
    double _constant = 0.0;
};

enum class Relation { le, eq };

/// expr (rel) rhs. The expression constant is folded into the comparison.
struct Constraint
{
    LinExpr expr;
    Relation rel = Relation::le;
    double rhs = 0.0;
    std::string name;
};

enum class Sense { minimize, maximize };

struct Objective
{
    LinExpr expr;
    Sense sense = Sense::minimize;
};

class Instance
{
public:
    int add_var(VarKind kind, double lower, double upper, std::string name = {});
    int add_continuous(double lower, double upper, std::string name = {})
    {
        return add_var(VarKind::continuous, lower, upper, std::move(name));
    }
    int add_binary(std::string name = {}) { return add_var(VarKind::binary, 0.0, 1.0, std::move(name)); }

    void add_constraint(LinExpr expr, Relation rel, double rhs, std::string name = {});
    void add_le(LinExpr expr, double rhs, std::string name = {})
    {
        add_constraint(std::move(expr), Relation::le, rhs, std::move(name));
    }
    void add_ge(LinExpr expr, double rhs, std::string name = {})
    {
        add_constraint(-1.0 * std::move(expr), Relation::le, -rhs, std::move(name));
    }
    void add_eq(LinExpr expr, double rhs, std::string name = {})
    {
        add_constraint(std::move(expr), Relation::eq, rhs, std::move(name));
    }

    void set_objective(LinExpr expr, Sense sense) { _objective = Objective{ std::move(expr), sense }; }
    void clear_objective() { _objective.reset(); }

    [[nodiscard]] const std::vector<Var>& vars() const { return _vars; }
    [[nodiscard]] std::vector<Var>& vars() { return _vars; }
    [[nodiscard]] const std::vector<Constraint>& constraints() const { return _constraints; }
    [[nodiscard]] const std::optional<Objective>& objective() const { return _objective; }
    [[nodiscard]] std::size_t num_vars() const { return _vars.size(); }
    /// Binary variables whose bounds still leave both values open.
    [[nodiscard]] std::size_t num_free_binaries() const;

    /// Largest violation of any constraint or variable bound at `point`.
    [[nodiscard]] double max_violation(std::span<const double> point) const;

private:
    std::vector<Var> _vars;
    std::vector<Constraint> _constraints;
    std::optional<Objective> _objective;
};

struct Options
{
    double feas_tol = 1e-7;
    double int_tol = 1e-6;
    double gap_tol = 1e-6;
    double pivot_tol = 1e-10;
    std::size_t node_limit = 200000;
    /// Consecutive degenerate pivots before switching to Bland's rule.
    std::size_t degeneracy_threshold = 50;
    std::size_t iteration_limit = 200000;
};

enum class Status { optimal, infeasible, unbounded, bound_limit };

std::string to_string(Status s);

struct Stats
{
    std::uint64_t nodes = 0;
    std::uint64_t lp_iterations = 0;

    Stats& operator+=(const Stats& o)
    {
        nodes += o.nodes;
        lp_iterations += o.lp_iterations;
        return *this;
    }
};

struct Result
{
    Status status = Status::infeasible;
    std::optional<Vector> point;
    std::optional<double> objective_value;
    /// Improving direction in variable space when status is unbounded.
    std::optional<Vector> ray;
    /// LP only: Lagrange multipliers per constraint for the minimisation form
    /// of the problem (maximise c.x is treated as minimise -c.x). For a
    /// <= row the multiplier is >= 0.
    Vector duals;
    Stats stats;
};

class NumericalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Solves the LP relaxation (binaries relaxed to their bounds within [0,1]).
/// Without an objective, returns any feasible point with status optimal.
Result solve_lp(const Instance& instance, const Options& options = {});

/// Same as solve_lp with per-variable bound overrides (used by B&B).
Result solve_lp(const Instance& instance, std::span<const double> lower, std::span<const double> upper,
                const Options& options = {});

/// Best-first branch-and-bound. Branches on the most fractional binary
/// (ties: lowest id). Node limit exceeded -> bound_limit with the incumbent.
Result solve_milp(const Instance& instance, const Options& options = {});

/// Feasibility check honouring integrality; ignores any objective.
Result feasible(const Instance& instance, const Options& options = {});

/// CPLEX LP text format.
std::string export_lp_format(const Instance& instance);

} // namespace mnv::milp
