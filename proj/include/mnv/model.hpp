// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mnv/core.hpp"
#include "mnv/milp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

// Data model of a closed-loop system: a guarded piecewise-affine environment
// with box-bounded disturbance, affine observations, and recurrent ReLU
// policies, plus point evaluation.
namespace mnv {

/// Dense c.v (rel) rhs over one variable block.
struct LinearConstraint
{
    Vector c;
    milp::Relation rel = milp::Relation::le;
    double rhs = 0.0;

    [[nodiscard]] bool satisfied(std::span<const double> v, double tol = 0.0) const;
    bool operator==(const LinearConstraint&) const = default;
};

/// Conjunction of linear constraints over a block of `dim` variables. An
/// optional box is kept separately so encodings can use it as variable bounds.
struct Polytope
{
    std::size_t dim = 0;
    std::vector<LinearConstraint> constraints;
    std::optional<Box> box;

    static Polytope from_box(const Box& b);
    static Polytope universe(std::size_t dim) { return Polytope{ dim, {}, std::nullopt }; }

    [[nodiscard]] bool contains(std::span<const double> v, double tol = 0.0) const;
    /// Adds the constraints over the given variable ids (one id per coordinate).
    void add_to(milp::Instance& inst, std::span<const int> ids) const;
    bool operator==(const Polytope&) const = default;
};

/// One guarded affine update: guard over (x, a, w), x' = A x + B a + C w + d.
struct TransitionPiece
{
    Polytope guard;
    Matrix A;
    Matrix B;
    Matrix C;
    Vector d;

    [[nodiscard]] Vector apply(std::span<const double> x, std::span<const double> a,
                               std::span<const double> w) const;
    bool operator==(const TransitionPiece&) const = default;
};

struct TransitionRelation
{
    std::vector<TransitionPiece> pieces;
    Box disturbance_box;
    bool operator==(const TransitionRelation&) const = default;
};

enum class Activation { relu, identity };

struct AffineLayer
{
    Matrix W;
    Vector b;
    bool operator==(const AffineLayer&) const = default;
};

struct ReluLayer
{
    bool operator==(const ReluLayer&) const = default;
};

/// h' = act(W_in in + W_h h + b); the layer output is h'.
struct RecurrentLayer
{
    Matrix W_in;
    Matrix W_h;
    Vector b;
    Activation activation = Activation::relu;

    [[nodiscard]] std::size_t width() const { return W_h.rows(); }
    bool operator==(const RecurrentLayer&) const = default;
};

using Layer = std::variant<AffineLayer, ReluLayer, RecurrentLayer>;

struct PolicySpec
{
    std::vector<Layer> layers;
    Box hidden_init;

    [[nodiscard]] std::size_t hidden_dim() const;
    /// Output width of each layer given the input width.
    [[nodiscard]] std::vector<std::size_t> layer_widths(std::size_t input_dim) const;
    bool operator==(const PolicySpec&) const = default;
};

struct ObservationMap
{
    Matrix C;
    Vector d;

    [[nodiscard]] Vector apply(std::span<const double> x) const;
    bool operator==(const ObservationMap&) const = default;
};

struct AgentSpec
{
    std::string name;
    ObservationMap observation;
    PolicySpec policy;
    Box action_box;
    bool operator==(const AgentSpec&) const = default;
};

struct SystemSpec
{
    std::string name;
    /// Optional names for state coordinates, usable in formulas.
    std::vector<std::string> state_names;
    Box state_box;
    Polytope initial_states;
    std::vector<AgentSpec> agents;
    TransitionRelation transition;
    /// Bounds on the joint hidden state, used as the starting region of the
    /// maximal invariant chain. Not part of the dynamics.
    std::optional<Box> hidden_box;

    [[nodiscard]] std::size_t state_dim() const { return state_box.dim(); }
    [[nodiscard]] std::size_t action_dim() const;
    [[nodiscard]] std::size_t hidden_dim() const;
    [[nodiscard]] std::size_t disturbance_dim() const { return transition.disturbance_box.dim(); }

    /// Joint hidden-state initial box (concatenation over agents).
    [[nodiscard]] Box hidden_init() const;
    /// Joint action box (concatenation over agents).
    [[nodiscard]] Box action_box() const;
    /// Index of a state coordinate by name or "x[i]"; nullopt if unknown.
    [[nodiscard]] std::optional<std::size_t> state_index(const std::string& name) const;
    /// Display name for coordinate i.
    [[nodiscard]] std::string state_name(std::size_t i) const;

    bool operator==(const SystemSpec&) const = default;
};

struct ValidationReport
{
    std::vector<std::string> violations;

    [[nodiscard]] bool ok() const { return violations.empty(); }
};

/// Reports every structural problem found; never throws on malformed content.
ValidationReport validate_system(const SystemSpec& spec);

/// Throws DimensionError listing the violations when the system is invalid.
void require_valid(const SystemSpec& spec);

struct PolicyOutput
{
    Vector action;
    Vector hidden;
};

/// Forward pass. Recurrent layers consume `hidden` slices in declaration order.
PolicyOutput eval_policy_step(const PolicySpec& policy, std::span<const double> obs,
                              std::span<const double> hidden);

struct JointOutput
{
    Vector action;
    Vector hidden;
};

/// All agents at once: joint action and joint next hidden state from (x, h).
JointOutput eval_agents(const SystemSpec& spec, std::span<const double> x, std::span<const double> h);

struct Successor
{
    std::size_t piece = 0;
    Vector x;
};

/// Successors under every piece whose guard holds at (x, a, w) within `tol`.
/// An empty result is a totality gap.
std::vector<Successor> step_relation(const SystemSpec& spec, std::span<const double> x,
                                     std::span<const double> a, std::span<const double> w,
                                     double tol = 1e-9);

/// One step of a concrete run. For the last recorded state `w` is empty and
/// `piece` is -1.
struct PathStep
{
    Vector x;
    Vector h;
    Vector a;
    Vector w;
    int piece = -1;
};

struct Path
{
    std::vector<PathStep> steps;

    [[nodiscard]] std::size_t length() const { return steps.size(); }
    /// Joint (x, h) at step t.
    [[nodiscard]] Vector joint(std::size_t t) const { return concat(steps[t].x, steps[t].h); }
    [[nodiscard]] std::vector<Vector> states() const;
};

/// Largest residual of the recorded path against the dynamics: initial
/// membership, policy outputs, guards and updates under the recorded choices.
double replay_residual(const SystemSpec& spec, const Path& path);

/// Samples (x, a, w) uniformly from the declared boxes and counts samples
/// with no enabled piece.
std::size_t sample_totality_gaps(const SystemSpec& spec, std::size_t samples, std::uint64_t seed);

} // namespace mnv
