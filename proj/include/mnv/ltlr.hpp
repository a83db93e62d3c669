// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mnv/core.hpp"

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mnv {
struct SystemSpec;
}

// Linear temporal logic over real-valued state: formulas, a text syntax,
// rewriting (negation normal form, bounded expansion, next-flattening) and
// point / interval semantics.
namespace mnv::ltl {

/// Non-strict atoms mean sum c_v v <= rhs; strict atoms mean sum c_v v > rhs.
/// Strict atoms only arise from negation.
struct Atom
{
    std::map<std::string, double> coeffs;
    double rhs = 0.0;
    bool strict = false;

    [[nodiscard]] Atom negated() const { return { coeffs, rhs, !strict }; }
    bool operator==(const Atom&) const = default;
    auto operator<=>(const Atom&) const = default;
};

enum class Op {
    atom,
    negation,
    conjunction,
    disjunction,
    next,
    always,
    eventually,
    until,
    release,
    bounded_always,
    bounded_eventually,
    bounded_until,
    bounded_release,
};

struct Node;

/// Immutable formula handle; copies share structure.
class Formula
{
public:
    Formula() = default;
    explicit Formula(std::shared_ptr<const Node> n) : _node{ std::move(n) } {}

    [[nodiscard]] const Node& node() const { return *_node; }
    [[nodiscard]] Op op() const;
    /// Step count for Next and bound for bounded operators; 0 otherwise.
    [[nodiscard]] int k() const;
    [[nodiscard]] const Atom& atom() const;
    [[nodiscard]] const std::vector<Formula>& children() const;
    [[nodiscard]] const Formula& child(std::size_t i = 0) const { return children().at(i); }
    [[nodiscard]] bool valid() const { return static_cast<bool>(_node); }

    friend bool operator==(const Formula& a, const Formula& b);

private:
    std::shared_ptr<const Node> _node;
};

struct Node
{
    Op op = Op::atom;
    int k = 0;
    Atom atom;
    std::vector<Formula> children;
};

// construction
Formula make_atom(Atom a);
Formula make_true();
Formula make_false();
Formula negation(Formula f);
Formula conjunction(std::vector<Formula> fs);
Formula disjunction(std::vector<Formula> fs);
Formula next(int k, Formula f);
Formula always(Formula f);
Formula eventually(Formula f);
Formula until(Formula lhs, Formula rhs);
Formula release(Formula lhs, Formula rhs);
Formula bounded_always(int k, Formula f);
Formula bounded_eventually(int k, Formula f);
Formula bounded_until(int k, Formula lhs, Formula rhs);
Formula bounded_release(int k, Formula lhs, Formula rhs);

class ParseError : public std::runtime_error
{
public:
    ParseError(const std::string& msg, int line, int column);
    [[nodiscard]] int line() const { return _line; }
    [[nodiscard]] int column() const { return _column; }

private:
    int _line;
    int _column;
};

Formula parse(const std::string& text);
/// Fully parenthesised text; parse(print(f)) == f.
std::string print(const Formula& f);
std::string print(const Atom& a);

struct Options
{
    /// Bounded always/eventually range over steps 0..k instead of 1..k.
    bool include_step_zero = false;
};

bool is_bounded(const Formula& f);
/// No temporal operators at all.
bool is_state_predicate(const Formula& f);
bool is_nnf(const Formula& f);
/// Largest step index a bounded formula inspects.
int horizon(const Formula& f, const Options& opt = {});
/// Every variable name referenced by an atom.
std::vector<std::string> variables(const Formula& f);

Formula to_nnf(const Formula& f);
/// Rewrites bounded operators into conjunctions/disjunctions of Next. Throws
/// std::invalid_argument when an unbounded operator is present.
Formula expand_bounded(const Formula& f, const Options& opt = {});

/// Dense form of an atom over a state space.
struct LinearAtom
{
    Vector c;
    double d = 0.0;
    bool strict = false;

    [[nodiscard]] bool holds(std::span<const double> x) const;
};

/// Name resolution for atoms: explicit names first, then "x[i]".
struct StateSpace
{
    std::size_t dim = 0;
    std::vector<std::string> names;

    [[nodiscard]] std::optional<std::size_t> index(const std::string& name) const;
    static StateSpace of(const SystemSpec& spec);
};

class ResolveError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

LinearAtom resolve(const Atom& a, const StateSpace& space);

/// Boolean skeleton over leaves (step, atom).
struct Leaf
{
    int step = 0;
    Atom atom;
    bool positive = true;
    bool operator==(const Leaf&) const = default;
};

struct Skeleton
{
    enum class Kind { leaf, conjunction, disjunction };
    struct SNode
    {
        Kind kind = Kind::leaf;
        std::size_t leaf = 0;
        std::vector<std::size_t> children;
    };
    /// Distinct leaves; identical (step, atom, polarity) share one entry.
    std::vector<Leaf> leaves;
    /// Node storage; `root` indexes into it.
    std::vector<SNode> nodes;
    std::size_t root = 0;

    [[nodiscard]] bool has_disjunction() const;
};

/// Pushes Next through the Boolean structure. Bounded operators are expanded
/// first. Requires negations to sit directly on atoms.
Skeleton flatten_next(const Formula& f, const Options& opt = {});

enum class Verdict3 { False, True, Unknown };

Verdict3 kleene_and(Verdict3 a, Verdict3 b);
Verdict3 kleene_or(Verdict3 a, Verdict3 b);
Verdict3 kleene_not(Verdict3 a);
std::string to_string(Verdict3 v);

/// Concrete semantics of a bounded formula at position 0 of `path`.
bool eval_on_path(const Formula& f, const std::vector<Vector>& path, const StateSpace& space,
                  const Options& opt = {});

/// Semantics on the infinite path path[0..t-1] (path[t-1] -> path[loop]).
/// `path.size()` is the lasso length t; every position >= t maps back into
/// the loop. Handles unbounded operators.
bool eval_on_lasso(const Formula& f, const std::vector<Vector>& path, std::size_t loop, const StateSpace& space,
                   const Options& opt = {});

/// Interval semantics over per-step boxes (Kleene logic). Sound for all paths
/// inside the boxes.
Verdict3 eval_on_boxes(const Formula& f, const std::vector<Box>& boxes, const StateSpace& space,
                       const Options& opt = {});

/// Verdict of one atom over one box.
Verdict3 atom_on_box(const LinearAtom& a, const Box& box);

/// Skeleton evaluation given a verdict per leaf.
Verdict3 eval_skeleton(const Skeleton& s, const std::vector<Verdict3>& leaf_values);

} // namespace mnv::ltl
