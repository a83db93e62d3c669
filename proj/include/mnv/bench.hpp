// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mnv/model.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

// Benchmark systems, piecewise-linear approximation of scalar functions,
// reproducible random policies and the concrete simulator.
namespace mnv::bench {

struct Segment
{
    double slope = 0.0;
    double intercept = 0.0;
};

struct PWLApprox
{
    Vector breakpoints;
    std::vector<Segment> segments;
    /// Upper bound on |f - approx| over the range.
    double max_error = 0.0;

    [[nodiscard]] std::size_t segment_of(double v) const;
    [[nodiscard]] double operator()(double v) const;
};

enum class Fn { sin, cos };

/// Chord interpolation at uniform breakpoints. The error bound is the
/// largest deviation on a 10^5-point grid plus a Lipschitz margin for the
/// grid spacing.
PWLApprox pwl_approx_1d(Fn fn, double lo, double hi, std::size_t segments);
PWLApprox pwl_approx_1d(const std::function<double(double)>& f, double lipschitz, double lo, double hi,
                        std::size_t segments);

struct PendulumParams
{
    double g = 10.0;
    double m = 1.0;
    double l = 1.0;
    double dt = 0.05;
    double theta_lo = -3.14159265358979323846;
    double theta_hi = 3.14159265358979323846;
    double speed_limit = 8.0;
    double torque_limit = 2.0;
    Box initial{ { -0.1, -0.1 }, { 0.1, 0.1 } };
};

struct CartpoleParams
{
    double gravity = 9.8;
    double masscart = 1.0;
    double masspole = 0.1;
    double length = 0.5; // half the pole length
    double dt = 0.02;
    double theta_limit = 0.4;
    double x_limit = 2.4;
    double speed_limit = 3.0;
    double force_limit = 10.0;
    Box initial{ { -0.05, -0.05, -0.05, -0.05 }, { 0.05, 0.05, 0.05, 0.05 } };
};

/// State (theta, theta_dot), one torque agent observing the full state.
SystemSpec make_pendulum(const PendulumParams& params, std::size_t segments, const PolicySpec& policy);
/// State (x, x_dot, theta, theta_dot), one force agent observing the full state.
SystemSpec make_cartpole(const CartpoleParams& params, std::size_t segments, const PolicySpec& policy);

/// Layer sizes [in, h1, ..., out]: affine layers with ReLU between them. A
/// positive `recurrent_width` inserts a ReLU recurrent layer after the first
/// hidden layer. Weights come from mt19937_64 mapped to [-s, s) with
/// s = scale / sqrt(fan_in).
PolicySpec random_policy(std::uint64_t seed, const std::vector<std::size_t>& layer_sizes,
                         std::size_t recurrent_width = 0, double scale = 1.0);

/// Small worked example: state (x1, x2, z), the agent observes (x1, x2)
/// through a 2-2-1 net whose last layer is recurrent, z' = a, x' = w.
SystemSpec make_fig1();
/// x' = rate * x over [lo, hi], no agents.
SystemSpec make_scalar_linear(double rate, double lo, double hi, double state_bound, const std::string& name);

/// Builtin by name, with optional parameters: "pendulum:n=8,seed=1".
/// Names: fig1, pendulum, cartpole, contracting, doubling, period2, identity.
SystemSpec builtin(const std::string& spec);
std::vector<std::string> builtin_names();

struct SimOptions
{
    enum class Mode { random, schedule };
    Mode mode = Mode::random;
    std::uint64_t seed = 0;
    /// Schedule mode: piece per step (absolute index) and disturbance per
    /// step. Missing entries fall back to the lowest enabled piece and the
    /// disturbance box midpoint.
    std::vector<int> pieces;
    std::vector<Vector> disturbances;
    std::optional<Vector> x0;
    std::optional<Vector> h0;

    static SimOptions with_seed(std::uint64_t s)
    {
        SimOptions o;
        o.seed = s;
        return o;
    }
};

/// Concrete rollout with horizon + 1 states. Throws bpt-style TotalityGap
/// (std::runtime_error) when no piece is enabled.
Path simulate(const SystemSpec& spec, std::size_t horizon, const SimOptions& options = {});

/// A point of the initial set (uniform rejection sampling with an LP
/// projection fallback for thin sets).
Vector sample_initial_state(const SystemSpec& spec, std::uint64_t seed);

} // namespace mnv::bench
