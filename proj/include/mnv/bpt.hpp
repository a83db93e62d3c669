// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mnv/ltlr.hpp"
#include "mnv/model.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

// Interval bound propagation through time: one box over the joint (x, h)
// state per step, each an over-approximation of the reachable set.
namespace mnv::bpt {

/// No transition piece can fire from the given box.
class TotalityGap : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

Box propagate_affine(const Box& input, const Matrix& W, std::span<const double> b);
Box propagate_relu(const Box& input);

/// Successor box of the x-part for (x, a) ranging over `xa_box`, with w over
/// the relation's disturbance box. Pieces whose guard is LP-infeasible over
/// the box are skipped; `active` (if given) receives one flag per piece.
Box propagate_transition(const Box& xa_box, const TransitionRelation& rel, std::size_t state_dim,
                         std::vector<bool>* active = nullptr);

/// Per-step by-products used by the MILP encoding.
struct StepDetail
{
    /// Pre-activation interval of every ReLU unit, in the order agents ->
    /// layers -> units (ReLU layers and ReLU-activated recurrent layers).
    std::vector<Interval> relu_pre;
    /// Observation box per agent.
    std::vector<Box> observation;
    /// Input box of every layer per agent (layer_inputs[agent][layer]).
    std::vector<std::vector<Box>> layer_inputs;
    Box action;
    std::vector<bool> piece_active;
};

struct StepResult
{
    Box next;
    StepDetail detail;
};

/// The bound-propagation routine applied at each step. Interval arithmetic is
/// the shipped implementation; tighter relaxations can plug in here.
class StepPropagator
{
public:
    virtual ~StepPropagator() = default;
    [[nodiscard]] virtual StepResult step(const SystemSpec& spec, const Box& xh) const = 0;
};

class IntervalPropagator final : public StepPropagator
{
public:
    [[nodiscard]] StepResult step(const SystemSpec& spec, const Box& xh) const override;
};

struct BoundsTrace
{
    std::size_t state_dim = 0;
    std::size_t hidden_dim = 0;
    /// boxes[t] bounds (x, h) at step t; size depth + 1.
    std::vector<Box> boxes;
    /// steps[t] describes the step from t to t + 1; size depth.
    std::vector<StepDetail> steps;
    double wall_ms = 0.0;

    [[nodiscard]] std::size_t depth() const { return boxes.empty() ? 0 : boxes.size() - 1; }
    [[nodiscard]] Box state_box(std::size_t t) const { return boxes.at(t).slice(0, state_dim); }
    [[nodiscard]] Box hidden_box(std::size_t t) const { return boxes.at(t).slice(state_dim, hidden_dim); }
};

/// Bounding box of initial_states x hidden_init, per-coordinate LP over the
/// initial polytope.
Box initial_box(const SystemSpec& spec);

struct Options
{
    /// Start from this (x, h) box instead of the initial set.
    std::optional<Box> start_box;
    /// Defaults to IntervalPropagator.
    const StepPropagator* propagator = nullptr;
};

BoundsTrace bpt_run(const SystemSpec& spec, std::size_t depth, const Options& options = {});

/// Appends steps until the trace reaches `depth`.
void extend(const SystemSpec& spec, BoundsTrace& trace, std::size_t depth, const Options& options = {});

/// One atom at one step over the trace. Never returns False: a violated box
/// carries no concrete witness, so it is reported as Unknown.
ltl::Verdict3 check_next_atom_bpt(const BoundsTrace& trace, std::size_t step, const ltl::LinearAtom& atom,
                                  bool positive = true);

} // namespace mnv::bpt
