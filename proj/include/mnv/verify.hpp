// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mnv/bpt.hpp"
#include "mnv/ltlr.hpp"
#include "mnv/milp.hpp"
#include "mnv/model.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

// Verification procedures: bounded checking, bounded proofs for unbounded
// formulas, lasso search, invariant search, and the dispatcher that picks
// among them by formula shape.
namespace mnv::verify {

enum class Method { bounded, bpmc, lasso, invariant };
enum class Engine { none, bpt, rmilp };
/// Which engines bounded checking may use.
enum class EngineChoice { automatic, bpt_only, rmilp_only };
/// Image operator for invariant chains.
enum class InvariantEngine { bpt, rmilp_tight };
enum class Shape { release, always, until, eventually };
enum class Side { satisfy, falsify };

std::string to_string(Method m);
std::string to_string(Engine e);
std::string to_string(Shape s);
std::string to_string(Side s);
std::optional<Method> method_from_string(const std::string& s);

/// Whether `m` can establish the `side` verdict for formulas of shape `s`.
bool applicable(Method m, Shape s, Side side);

struct Stats
{
    std::size_t milp_solves = 0;
    std::size_t milp_nodes = 0;
    std::size_t lp_iters = 0;
    std::size_t bpt_steps = 0;
    double wall_ms = 0.0;

    void add(const milp::Stats& s);
    void add(const Stats& s);
};

struct Attempt
{
    Method method = Method::bounded;
    Side side = Side::satisfy;
    ltl::Verdict3 value = ltl::Verdict3::Unknown;
};

struct Verdict
{
    ltl::Verdict3 value = ltl::Verdict3::Unknown;
    /// Counterexample run for False (absent for some invariant-based results).
    std::optional<Path> witness;
    /// Set when the witness is a lasso: positions past the end loop back here.
    std::optional<std::size_t> lasso_loop;
    Method method_used = Method::bounded;
    Engine engine_used = Engine::none;
    std::size_t depth_reached = 0;
    /// Joint (x, h) boxes whose union is an invariant (True from invariant search).
    std::vector<Box> invariant_boxes;
    std::vector<Attempt> attempts;
    std::vector<std::string> notes;
    Stats stats;
};

struct Config
{
    /// Unrolling bound for bounded proofs, lasso and invariant search.
    std::size_t k = 10;
    EngineChoice engine = EngineChoice::automatic;
    InvariantEngine invariant_engine = InvariantEngine::rmilp_tight;
    ltl::Options ltl;
    milp::Options solver;
    /// Loop closure tolerance |x_t - x_t'| <= tol (0 means exact equality).
    double lasso_eq_tol = 0.0;
    /// Bound i for the release lasso argument; defaults to k.
    std::optional<std::size_t> release_bound;
    /// Methods the dispatcher may use; empty means all.
    std::vector<Method> methods;
    /// Parallel MILP probes in lasso search.
    std::size_t jobs = 1;
    /// Dispatcher keeps trying remaining methods after a conclusive one
    /// (the first conclusive verdict is still returned).
    bool run_all = false;
    /// Margin used to encode strict inequalities c.x > d as c.x >= d + margin.
    double strict_margin = 1e-6;
};

/// Bounded formula: bound propagation per leaf first, the MILP for what
/// remains. Only runs that reach the formula horizon are considered.
Verdict verify_bounded(const SystemSpec& spec, const ltl::Formula& f, const Config& cfg = {});

/// Bounded proof of an unbounded formula of one of the four shapes. `side`
/// chooses which bounded expansion is checked.
Verdict bpmc(const SystemSpec& spec, const ltl::Formula& f, Side side, const Config& cfg = {});

/// Searches a run of length <= k that never satisfies the state predicate
/// phi and closes a loop. False means S does not satisfy F phi.
Verdict lasso_search(const SystemSpec& spec, const ltl::Formula& phi, const Config& cfg = {});

/// Falsification of psi U phi or psi R phi through lassos.
Verdict verify_unbounded_lasso(const SystemSpec& spec, const ltl::Formula& f, const Config& cfg = {});

/// Invariant search for G phi with phi a state predicate.
Verdict invariant_search(const SystemSpec& spec, const ltl::Formula& phi, const Config& cfg = {});

/// Checks that the union of `boxes` contains the initial box, is closed under
/// one step of `engine`, and satisfies phi everywhere.
bool certify_invariant(const SystemSpec& spec, const std::vector<Box>& boxes, const ltl::Formula& phi,
                       InvariantEngine engine, const Config& cfg = {}, std::string* reason = nullptr);

/// Unbounded formula recognised as one of the four shapes (after NNF).
struct ShapeMatch
{
    Shape shape = Shape::always;
    /// psi (release/until), unused otherwise.
    ltl::Formula lhs;
    /// phi
    ltl::Formula rhs;
};
std::optional<ShapeMatch> match_shape(const ltl::Formula& f);

/// Entry point: bounded formulas go to verify_bounded, the four unbounded
/// shapes to the applicable methods in a fixed order.
Verdict dispatch(const SystemSpec& spec, const ltl::Formula& f, const Config& cfg = {});

/// Ordered (method, side) attempts the dispatcher makes for a shape.
std::vector<std::pair<Method, Side>> attempt_order(Shape s);

/// Union of closed boxes covers `b` (exact, by box subtraction).
bool box_covered(const Box& b, const std::vector<Box>& cover);

} // namespace mnv::verify
