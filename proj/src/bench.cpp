// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "mnv/bench.hpp"

#include "mnv/bpt.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace mnv::bench {

namespace {

constexpr double pi = 3.14159265358979323846;

// Portable [0, 1) from a 64-bit engine (std distributions are not).
double unit(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi)
{
    return lo + unit(rng) * (hi - lo);
}

Vector uniform_in(std::mt19937_64& rng, const Box& b)
{
    Vector v(b.dim());
    for (std::size_t j = 0; j < b.dim(); ++j)
        v[j] = uniform(rng, b.lower[j], b.upper[j]);
    return v;
}

// Guard over (x, a, w) restricting one state coordinate to [lo, hi].
Polytope band_guard(std::size_t dim, std::size_t coord, double lo, double hi)
{
    Vector up(dim, 0.0), down(dim, 0.0);
    up[coord] = 1.0;
    down[coord] = -1.0;
    return Polytope{ dim, { { up, milp::Relation::le, hi }, { down, milp::Relation::le, -lo } }, std::nullopt };
}

std::map<std::string, std::string> parse_params(const std::string& s, std::string& name)
{
    std::map<std::string, std::string> out;
    const auto colon = s.find(':');
    name = s.substr(0, colon);
    if (colon == std::string::npos)
        return out;
    std::stringstream ss(s.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty())
            continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("builtin parameter '" + item + "' is not key=value");
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

double num(const std::map<std::string, std::string>& p, const std::string& key, double def)
{
    auto it = p.find(key);
    if (it == p.end())
        return def;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(it->second, &used);
    }
    catch (const std::exception&) {
        used = 0;
    }
    if (used != it->second.size())
        throw std::invalid_argument("builtin parameter '" + key + "' is not a number: " + it->second);
    return v;
}

std::size_t count(const std::map<std::string, std::string>& p, const std::string& key, std::size_t def)
{
    const double v = num(p, key, static_cast<double>(def));
    if (v < 0 || v != std::floor(v))
        throw std::invalid_argument("builtin parameter '" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v);
}

void reject_unknown(const std::map<std::string, std::string>& p, std::initializer_list<const char*> known,
                    const std::string& name)
{
    for (const auto& [k, v] : p) {
        bool ok = false;
        for (const char* c : known)
            ok = ok || k == c;
        if (!ok)
            throw std::invalid_argument("unknown parameter '" + k + "' for builtin '" + name + "'");
    }
}

} // namespace

std::size_t PWLApprox::segment_of(double v) const
{
    if (segments.size() <= 1)
        return 0;
    const auto it = std::upper_bound(breakpoints.begin() + 1, breakpoints.end() - 1, v);
    return static_cast<std::size_t>(it - (breakpoints.begin() + 1));
}

double PWLApprox::operator()(double v) const
{
    const auto& s = segments[segment_of(v)];
    return s.slope * v + s.intercept;
}

PWLApprox pwl_approx_1d(const std::function<double(double)>& f, double lipschitz, double lo, double hi,
                        std::size_t segments)
{
    if (segments == 0)
        throw std::invalid_argument("pwl_approx_1d: need at least one segment");
    if (!(lo <= hi))
        throw std::invalid_argument("pwl_approx_1d: empty range");
    PWLApprox out;
    if (lo == hi) {
        out.breakpoints = { lo, hi };
        out.segments = { { 0.0, f(lo) } };
        return out;
    }
    const double step = (hi - lo) / static_cast<double>(segments);
    for (std::size_t i = 0; i <= segments; ++i)
        out.breakpoints.push_back(i == segments ? hi : lo + step * static_cast<double>(i));
    double max_slope = 0.0;
    for (std::size_t i = 0; i < segments; ++i) {
        const double a = out.breakpoints[i], b = out.breakpoints[i + 1];
        const double fa = f(a), fb = f(b);
        const double slope = (fb - fa) / (b - a);
        out.segments.push_back({ slope, fa - slope * a });
        max_slope = std::max(max_slope, std::abs(slope));
    }
    constexpr std::size_t samples = 100000;
    const double spacing = (hi - lo) / static_cast<double>(samples - 1);
    double worst = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const double v = s + 1 == samples ? hi : lo + spacing * static_cast<double>(s);
        worst = std::max(worst, std::abs(f(v) - out(v)));
    }
    // Between grid points the error changes by at most (L_f + L_approx) * spacing / 2.
    out.max_error = worst + (lipschitz + max_slope) * spacing / 2.0;
    return out;
}

PWLApprox pwl_approx_1d(Fn fn, double lo, double hi, std::size_t segments)
{
    if (fn == Fn::sin)
        return pwl_approx_1d([](double v) { return std::sin(v); }, 1.0, lo, hi, segments);
    return pwl_approx_1d([](double v) { return std::cos(v); }, 1.0, lo, hi, segments);
}

SystemSpec make_pendulum(const PendulumParams& p, std::size_t segments, const PolicySpec& policy)
{
    if (p.g <= 0 || p.m <= 0 || p.l <= 0 || p.dt <= 0)
        throw std::invalid_argument("pendulum: physical parameters must be positive");
    const auto approx = pwl_approx_1d(Fn::sin, p.theta_lo, p.theta_hi, segments);
    const double k1 = 3.0 * p.g / (2.0 * p.l);
    const double k2 = 3.0 / (p.m * p.l * p.l);
    const double dt = p.dt;

    SystemSpec s;
    s.name = "pendulum";
    s.state_names = { "theta", "theta_dot" };
    s.state_box = Box({ p.theta_lo, -p.speed_limit }, { p.theta_hi, p.speed_limit });
    s.initial_states = Polytope::from_box(p.initial);
    AgentSpec ag;
    ag.name = "controller";
    ag.observation = { Matrix::identity(2), { 0.0, 0.0 } };
    ag.policy = policy;
    ag.action_box = Box({ -p.torque_limit }, { p.torque_limit });
    s.agents.push_back(ag);
    s.transition.disturbance_box = Box({ -approx.max_error }, { approx.max_error });
    // theta_dot' = theta_dot + dt (k1 (slope theta + icpt + w) + k2 u); theta' = theta + dt theta_dot'
    for (std::size_t i = 0; i < approx.segments.size(); ++i) {
        const auto& sg = approx.segments[i];
        TransitionPiece pc;
        pc.guard = band_guard(4, 0, approx.breakpoints[i], approx.breakpoints[i + 1]);
        pc.A = Matrix{ { 1.0 + dt * dt * k1 * sg.slope, dt }, { dt * k1 * sg.slope, 1.0 } };
        pc.B = Matrix{ { dt * dt * k2 }, { dt * k2 } };
        pc.C = Matrix{ { dt * dt * k1 }, { dt * k1 } };
        pc.d = { dt * dt * k1 * sg.intercept, dt * k1 * sg.intercept };
        s.transition.pieces.push_back(std::move(pc));
    }
    s.hidden_box = Box::uniform(policy.hidden_dim(), -10.0, 10.0);
    return s;
}

namespace {

struct CartpoleAccel
{
    double theta_acc;
    double x_acc;
};

CartpoleAccel cartpole_accel(const CartpoleParams& p, double theta, double theta_dot, double force)
{
    const double total = p.masspole + p.masscart;
    const double pml = p.masspole * p.length;
    const double c = std::cos(theta), s = std::sin(theta);
    const double temp = (force + pml * theta_dot * theta_dot * s) / total;
    const double th = (p.gravity * s - c * temp) / (p.length * (4.0 / 3.0 - p.masspole * c * c / total));
    return { th, temp - pml * th * c / total };
}

} // namespace

SystemSpec make_cartpole(const CartpoleParams& p, std::size_t segments, const PolicySpec& policy)
{
    if (p.gravity <= 0 || p.masscart <= 0 || p.masspole <= 0 || p.length <= 0 || p.dt <= 0)
        throw std::invalid_argument("cartpole: physical parameters must be positive");
    if (segments == 0)
        throw std::invalid_argument("cartpole: need at least one segment");
    const double lo = -p.theta_limit, hi = p.theta_limit;
    const double total = p.masspole + p.masscart;
    // Gravity-only accelerations are approximated by chords in theta; the
    // force coupling is frozen at the segment midpoint. The remaining error
    // (including the theta_dot^2 term) is bounded on a grid and absorbed into
    // a disturbance on both accelerations.
    auto th_g = [&](double t) { return cartpole_accel(p, t, 0.0, 0.0).theta_acc; };
    auto x_g = [&](double t) { return cartpole_accel(p, t, 0.0, 0.0).x_acc; };
    const auto th_pwl = pwl_approx_1d(th_g, 30.0, lo, hi, segments);
    const auto x_pwl = pwl_approx_1d(x_g, 5.0, lo, hi, segments);

    struct Coupling
    {
        double th_f, x_f;
    };
    std::vector<Coupling> coupling;
    double err_th = 0.0, err_x = 0.0;
    for (std::size_t i = 0; i < th_pwl.segments.size(); ++i) {
        const double a = th_pwl.breakpoints[i], b = th_pwl.breakpoints[i + 1];
        const double mid = 0.5 * (a + b);
        const double c = std::cos(mid);
        const double denom = p.length * (4.0 / 3.0 - p.masspole * c * c / total);
        const double th_f = -c / (total * denom);
        const double x_f = 1.0 / total - p.masspole * p.length * th_f * c / total;
        coupling.push_back({ th_f, x_f });
        constexpr int grid = 40;
        for (int it = 0; it <= grid; ++it) {
            const double t = a + (b - a) * it / grid;
            for (int iv = 0; iv <= grid; ++iv) {
                const double v = -p.speed_limit + 2.0 * p.speed_limit * iv / grid;
                for (int iff = 0; iff <= 4; ++iff) {
                    const double f = -p.force_limit + 2.0 * p.force_limit * iff / 4;
                    const auto acc = cartpole_accel(p, t, v, f);
                    err_th = std::max(err_th, std::abs(acc.theta_acc - (th_pwl.segments[i].slope * t +
                                                                         th_pwl.segments[i].intercept + th_f * f)));
                    err_x = std::max(err_x, std::abs(acc.x_acc - (x_pwl.segments[i].slope * t +
                                                                   x_pwl.segments[i].intercept + x_f * f)));
                }
            }
        }
    }
    // grid margin
    err_th = 1.05 * err_th + th_pwl.max_error;
    err_x = 1.05 * err_x + x_pwl.max_error;

    SystemSpec s;
    s.name = "cartpole";
    s.state_names = { "x", "x_dot", "theta", "theta_dot" };
    s.state_box = Box({ -p.x_limit, -p.speed_limit, -p.theta_limit, -p.speed_limit },
                      { p.x_limit, p.speed_limit, p.theta_limit, p.speed_limit });
    s.initial_states = Polytope::from_box(p.initial);
    AgentSpec ag;
    ag.name = "controller";
    ag.observation = { Matrix::identity(4), Vector(4, 0.0) };
    ag.policy = policy;
    ag.action_box = Box({ -p.force_limit }, { p.force_limit });
    s.agents.push_back(ag);
    s.transition.disturbance_box = Box({ -err_x, -err_th }, { err_x, err_th });
    const double dt = p.dt;
    for (std::size_t i = 0; i < th_pwl.segments.size(); ++i) {
        const auto& ts = th_pwl.segments[i];
        const auto& xs = x_pwl.segments[i];
        TransitionPiece pc;
        pc.guard = band_guard(4 + 1 + 2, 2, th_pwl.breakpoints[i], th_pwl.breakpoints[i + 1]);
        pc.A = Matrix{ { 1, dt, 0, 0 }, { 0, 1, dt * xs.slope, 0 }, { 0, 0, 1, dt }, { 0, 0, dt * ts.slope, 1 } };
        pc.B = Matrix{ { 0 }, { dt * coupling[i].x_f }, { 0 }, { dt * coupling[i].th_f } };
        pc.C = Matrix{ { 0, 0 }, { dt, 0 }, { 0, 0 }, { 0, dt } };
        pc.d = { 0.0, dt * xs.intercept, 0.0, dt * ts.intercept };
        s.transition.pieces.push_back(std::move(pc));
    }
    s.hidden_box = Box::uniform(policy.hidden_dim(), -10.0, 10.0);
    return s;
}

PolicySpec random_policy(std::uint64_t seed, const std::vector<std::size_t>& sizes, std::size_t recurrent_width,
                         double scale)
{
    if (sizes.size() < 2)
        throw std::invalid_argument("random_policy: need at least input and output sizes");
    std::mt19937_64 rng(seed);
    auto matrix = [&](std::size_t rows, std::size_t cols, double s) {
        Matrix m(rows, cols);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                m(r, c) = uniform(rng, -s, s);
        return m;
    };
    auto vec = [&](std::size_t n, double s) {
        Vector v(n);
        for (auto& x : v)
            x = uniform(rng, -s, s);
        return v;
    };
    PolicySpec pol;
    std::size_t width = sizes[0];
    for (std::size_t i = 1; i < sizes.size(); ++i) {
        const double s = scale / std::sqrt(static_cast<double>(std::max<std::size_t>(width, 1)));
        pol.layers.push_back(AffineLayer{ matrix(sizes[i], width, s), vec(sizes[i], s) });
        width = sizes[i];
        if (i + 1 == sizes.size())
            break;
        pol.layers.push_back(ReluLayer{});
        if (i == 1 && recurrent_width > 0) {
            const double si = scale / std::sqrt(static_cast<double>(width));
            const double sh = 0.5 * scale / std::sqrt(static_cast<double>(recurrent_width));
            RecurrentLayer r;
            r.W_in = matrix(recurrent_width, width, si);
            r.W_h = matrix(recurrent_width, recurrent_width, sh);
            r.b = vec(recurrent_width, si);
            r.activation = Activation::relu;
            pol.layers.push_back(std::move(r));
            width = recurrent_width;
        }
    }
    pol.hidden_init = Box::uniform(pol.hidden_dim(), 0.0, 0.0);
    return pol;
}

SystemSpec make_fig1()
{
    SystemSpec s;
    s.name = "fig1";
    s.state_names = { "x1", "x2", "z" };
    s.state_box = Box({ 0, 0, 0 }, { 1, 1, 10 });
    s.initial_states = Polytope::from_box(Box({ 0, 0, 0 }, { 1, 1, 0 }));
    AgentSpec ag;
    ag.name = "rnn";
    ag.observation = { Matrix{ { 1, 0, 0 }, { 0, 1, 0 } }, { 0, 0 } };
    ag.policy.layers.push_back(AffineLayer{ Matrix{ { -1, 1 }, { 1, 1 } }, { 0, 0 } });
    ag.policy.layers.push_back(ReluLayer{});
    ag.policy.layers.push_back(RecurrentLayer{ Matrix{ { 1, -1 } }, Matrix{ { 1 } }, { 0 }, Activation::relu });
    ag.policy.hidden_init = Box({ 0 }, { 0 });
    ag.action_box = Box({ 0 }, { 10 });
    s.agents.push_back(ag);
    s.transition.disturbance_box = Box({ 0, 0 }, { 1, 1 });
    TransitionPiece pc;
    pc.guard = Polytope::universe(3 + 1 + 2);
    pc.A = Matrix(3, 3, 0.0);
    pc.B = Matrix{ { 0 }, { 0 }, { 1 } };
    pc.C = Matrix{ { 1, 0 }, { 0, 1 }, { 0, 0 } };
    pc.d = { 0, 0, 0 };
    s.transition.pieces.push_back(pc);
    s.hidden_box = Box({ 0 }, { 10 });
    return s;
}

SystemSpec make_scalar_linear(double rate, double lo, double hi, double state_bound, const std::string& name)
{
    SystemSpec s;
    s.name = name;
    s.state_names = { "x" };
    s.state_box = Box({ -state_bound }, { state_bound });
    s.initial_states = Polytope::from_box(Box({ lo }, { hi }));
    TransitionPiece pc;
    pc.guard = Polytope::universe(1);
    pc.A = Matrix{ { rate } };
    pc.d = { 0.0 };
    s.transition.pieces.push_back(pc);
    s.hidden_box = Box{};
    return s;
}

std::vector<std::string> builtin_names()
{
    return { "fig1", "pendulum", "cartpole", "contracting", "doubling", "period2", "identity" };
}

SystemSpec builtin(const std::string& text)
{
    std::string name;
    const auto p = parse_params(text, name);
    if (name == "fig1") {
        reject_unknown(p, {}, name);
        return make_fig1();
    }
    if (name == "pendulum" || name == "cartpole") {
        reject_unknown(p, { "n", "seed", "hidden", "recurrent", "scale" }, name);
        const std::size_t n = count(p, "n", 8);
        const std::size_t hidden = count(p, "hidden", 4);
        const std::size_t rec = count(p, "recurrent", 2);
        const auto seed = static_cast<std::uint64_t>(count(p, "seed", 0));
        const double scale = num(p, "scale", 0.5);
        const std::size_t in = name == "pendulum" ? 2 : 4;
        const auto pol = random_policy(seed, { in, hidden, 1 }, rec, scale);
        SystemSpec s = name == "pendulum" ? make_pendulum({}, n, pol) : make_cartpole({}, n, pol);
        return s;
    }
    if (name == "contracting") {
        reject_unknown(p, { "lo", "hi", "rate" }, name);
        return make_scalar_linear(num(p, "rate", 0.5), num(p, "lo", -1.0), num(p, "hi", 1.0), 2.0, name);
    }
    if (name == "doubling") {
        reject_unknown(p, { "lo", "hi" }, name);
        return make_scalar_linear(2.0, num(p, "lo", 0.0), num(p, "hi", 1.0), 1e6, name);
    }
    if (name == "period2") {
        reject_unknown(p, { "x0" }, name);
        const double x0 = num(p, "x0", 1.0);
        return make_scalar_linear(-1.0, x0, x0, std::max(1.0, std::abs(x0)), name);
    }
    if (name == "identity") {
        reject_unknown(p, {}, name);
        return make_scalar_linear(1.0, -1.0, 1.0, 1.0, name);
    }
    std::string known;
    for (const auto& n : builtin_names())
        known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown builtin system '" + name + "' (known: " + known + ")");
}

Vector sample_initial_state(const SystemSpec& spec, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const auto& poly = spec.initial_states;
    const Box hull = bpt::initial_box(spec).slice(0, spec.state_dim());
    for (int tries = 0; tries < 200; ++tries) {
        Vector x = uniform_in(rng, hull);
        if (poly.contains(x, 1e-12))
            return x;
    }
    // Thin set: L1 projection of a random hull point.
    const Vector target = uniform_in(rng, hull);
    milp::Instance inst;
    std::vector<int> xs;
    milp::LinExpr obj;
    for (std::size_t j = 0; j < spec.state_dim(); ++j)
        xs.push_back(inst.add_continuous(hull.lower[j], hull.upper[j]));
    poly.add_to(inst, xs);
    for (std::size_t j = 0; j < spec.state_dim(); ++j) {
        const int t = inst.add_continuous(0.0, milp::inf);
        inst.add_le(milp::LinExpr::var(xs[j]) - milp::LinExpr::var(t), target[j]);
        inst.add_ge(milp::LinExpr::var(xs[j]) + milp::LinExpr::var(t), target[j]);
        obj.add(t, 1.0);
    }
    inst.set_objective(obj, milp::Sense::minimize);
    const auto r = milp::solve_lp(inst);
    if (r.status != milp::Status::optimal)
        throw std::runtime_error("cannot sample the initial set");
    Vector x(spec.state_dim());
    for (std::size_t j = 0; j < x.size(); ++j)
        x[j] = (*r.point)[static_cast<std::size_t>(xs[j])];
    return x;
}

Path simulate(const SystemSpec& spec, std::size_t horizon, const SimOptions& opt)
{
    std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
    Path path;
    PathStep cur;
    cur.x = opt.x0 ? *opt.x0 : sample_initial_state(spec, opt.seed);
    cur.h = opt.h0 ? *opt.h0 : uniform_in(rng, spec.hidden_init());
    const Box& wbox = spec.transition.disturbance_box;
    for (std::size_t t = 0;; ++t) {
        const auto out = eval_agents(spec, cur.x, cur.h);
        cur.a = out.action;
        if (t == horizon) {
            path.steps.push_back(cur);
            break;
        }
        Vector w;
        if (opt.mode == SimOptions::Mode::schedule) {
            if (t < opt.disturbances.size())
                w = opt.disturbances[t];
            else {
                w.resize(wbox.dim());
                for (std::size_t j = 0; j < w.size(); ++j)
                    w[j] = 0.5 * (wbox.lower[j] + wbox.upper[j]);
            }
        }
        else
            w = uniform_in(rng, wbox);
        const auto succ = step_relation(spec, cur.x, cur.a, w, 0.0);
        if (succ.empty())
            throw bpt::TotalityGap("no transition piece is enabled at step " + std::to_string(t));
        std::size_t pick = 0;
        if (opt.mode == SimOptions::Mode::schedule) {
            if (t < opt.pieces.size()) {
                auto it = std::find_if(succ.begin(), succ.end(), [&](const Successor& s) {
                    return static_cast<int>(s.piece) == opt.pieces[t];
                });
                if (it == succ.end())
                    throw std::invalid_argument("scheduled piece " + std::to_string(opt.pieces[t]) +
                                                " is not enabled at step " + std::to_string(t));
                pick = static_cast<std::size_t>(it - succ.begin());
            }
        }
        else
            pick = static_cast<std::size_t>(unit(rng) * static_cast<double>(succ.size()));
        cur.w = w;
        cur.piece = static_cast<int>(succ[pick].piece);
        path.steps.push_back(cur);
        PathStep nxt;
        nxt.x = succ[pick].x;
        nxt.h = out.hidden;
        cur = std::move(nxt);
    }
    return path;
}

} // namespace mnv::bench
