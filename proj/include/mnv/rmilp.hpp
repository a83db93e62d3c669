// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mnv/bpt.hpp"
#include "mnv/ltlr.hpp"
#include "mnv/milp.hpp"
#include "mnv/model.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

// Exact unrolled mixed-integer encoding of the closed loop. Big-M constants
// come from bound-propagation boxes; the boxes also drive adaptive splitting.
namespace mnv::rmilp {

/// A big-M constant would be infinite.
class EncodingError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// The MILP solver hit its node or iteration limit.
class SolverLimit : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct Options
{
    bool split = true;
    /// Start from this (x, h) box instead of the initial set.
    std::optional<Box> start_box;
};

enum class GadgetMode { big_m, identity, zero };

struct ReluGadget
{
    std::size_t step = 0;
    /// Canonical unit index within the step (same order as StepDetail::relu_pre).
    std::size_t unit = 0;
    Interval bounds;
    GadgetMode mode = GadgetMode::big_m;
    int post = -1;
    int binary = -1;
};

/// Variable ids of one step. x and h are the state at step t; a, w and the
/// piece selectors drive the transition to t + 1 (empty at the last step).
struct StepVars
{
    std::vector<int> x;
    std::vector<int> h;
    std::vector<int> a;
    std::vector<int> w;
    /// Selector binary per piece; -1 when the piece is pruned or is the only
    /// candidate (then `fixed_piece` names it).
    std::vector<int> selectors;
    int fixed_piece = -1;
};

struct UnrolledEncoding
{
    std::shared_ptr<const SystemSpec> spec;
    Options options;
    bpt::BoundsTrace hints;
    milp::Instance instance;
    std::vector<StepVars> steps;
    std::vector<ReluGadget> relus;
    /// Instance size after encoding steps 0..t (index t).
    std::vector<std::size_t> vars_at_depth;
    std::vector<std::size_t> rows_at_depth;

    [[nodiscard]] std::size_t depth() const { return steps.empty() ? 0 : steps.size() - 1; }
    [[nodiscard]] std::size_t num_binaries() const;
    /// Activation and selector binaries of the transition from t to t + 1.
    [[nodiscard]] std::size_t binaries_in_step(std::size_t t) const;
    /// The depth-t encoding as a standalone instance (no objective).
    [[nodiscard]] milp::Instance prefix(std::size_t t) const;
};

/// Standard big-M gadget post = max(pre, 0) for pre in `bounds`. Returns the
/// binary id.
int encode_relu_big_m(milp::Instance& inst, const milp::LinExpr& pre, int post, Interval bounds,
                      const std::string& name = {});

/// Depth-t encoding. Without hints a bound-propagation run of depth t is done
/// first (from `options.start_box` when set).
UnrolledEncoding build_constraints(const SystemSpec& spec, std::size_t t, const bpt::BoundsTrace* hints = nullptr,
                                   const Options& options = {});

/// Appends steps up to `depth`, extending the hints as needed.
void extend(UnrolledEncoding& enc, std::size_t depth);

/// Rebuilds the encoding with splitting enabled against `hints`.
UnrolledEncoding apply_adaptive_splitting(const UnrolledEncoding& enc, const bpt::BoundsTrace& hints);

/// Concrete run read off a MILP point of the depth-t prefix.
Path extract_path(const UnrolledEncoding& enc, std::size_t t, std::span<const double> point);

struct AtomCheck
{
    ltl::Verdict3 value = ltl::Verdict3::Unknown;
    std::optional<Path> witness;
    /// Extreme value of c.x at the step (nullopt when no path reaches it).
    std::optional<double> extreme;
    milp::Stats stats;
};

/// Decides the (possibly negated) atom at step `step` for all runs. Never
/// returns Unknown; throws SolverLimit instead. With `full_depth` only runs
/// reaching the encoding depth count, and witnesses span the whole depth.
AtomCheck verify_next_atom_rmilp(const UnrolledEncoding& enc, std::size_t step, const ltl::LinearAtom& atom,
                                 bool positive = true, const milp::Options& solver = {}, bool full_depth = false);

/// Exact extreme of joint coordinate `coord` of (x, h) at step t; nullopt if
/// no run reaches step t.
std::optional<double> optimize_coordinate(const UnrolledEncoding& enc, std::size_t t, std::size_t coord,
                                          milp::Sense sense, const milp::Options& solver = {},
                                          milp::Stats* stats = nullptr);

/// Verdict tolerance for atom checks: c.x <= d holds when max c.x <= d + tol.
inline constexpr double verdict_tol = 1e-9;

} // namespace mnv::rmilp
