// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "mnv/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mnv {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what)
{
    throw ModelFormatError(where + ": " + what);
}

const json& field(const json& j, const char* key, const std::string& where)
{
    if (!j.is_object())
        fail(where, "expected an object");
    auto it = j.find(key);
    if (it == j.end())
        fail(where, std::string("missing key '") + key + "'");
    return *it;
}

double number(const json& j, const std::string& where)
{
    if (!j.is_number())
        fail(where, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v))
        fail(where, "expected a finite number");
    return v;
}

Vector vector_from_json(const json& j, const std::string& where)
{
    if (!j.is_array())
        fail(where, "expected an array of numbers");
    Vector v;
    v.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        v.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
    return v;
}

LinearConstraint constraint_from_json(const json& j, const std::string& where)
{
    LinearConstraint c;
    c.c = vector_from_json(field(j, "c", where), where + ".c");
    c.rhs = number(field(j, "rhs", where), where + ".rhs");
    const std::string rel = j.value("rel", std::string("<="));
    if (rel == "<=")
        c.rel = milp::Relation::le;
    else if (rel == "=" || rel == "==")
        c.rel = milp::Relation::eq;
    else if (rel == ">=") {
        for (auto& v : c.c)
            v = -v;
        c.rhs = -c.rhs;
    }
    else
        fail(where + ".rel", "unknown relation '" + rel + "'");
    return c;
}

Polytope polytope_from_json(const json& j, std::size_t dim, const std::string& where)
{
    Polytope p;
    p.dim = dim;
    if (!j.is_object())
        fail(where, "expected an object");
    if (auto it = j.find("box"); it != j.end())
        p.box = box_from_json(*it, where + ".box");
    if (auto it = j.find("constraints"); it != j.end()) {
        if (!it->is_array())
            fail(where + ".constraints", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i)
            p.constraints.push_back(constraint_from_json((*it)[i], where + ".constraints[" + std::to_string(i) + "]"));
    }
    return p;
}

json polytope_to_json(const Polytope& p)
{
    json j = json::object();
    if (p.box)
        j["box"] = box_to_json(*p.box);
    json cs = json::array();
    for (const auto& c : p.constraints)
        cs.push_back({ { "c", c.c }, { "rel", c.rel == milp::Relation::eq ? "=" : "<=" }, { "rhs", c.rhs } });
    j["constraints"] = cs;
    return j;
}

Activation activation_from_json(const json& j, const std::string& where)
{
    const std::string s = j.is_string() ? j.get<std::string>() : std::string{};
    if (s == "relu")
        return Activation::relu;
    if (s == "identity" || s == "linear")
        return Activation::identity;
    fail(where, "activation must be 'relu' or 'identity'");
}

Layer layer_from_json(const json& j, const std::string& where)
{
    const auto& type = field(j, "type", where);
    if (!type.is_string())
        fail(where + ".type", "expected a string");
    const std::string t = type.get<std::string>();
    if (t == "affine")
        return AffineLayer{ matrix_from_json(field(j, "W", where), where + ".W"),
                            vector_from_json(field(j, "b", where), where + ".b") };
    if (t == "relu")
        return ReluLayer{};
    if (t == "recurrent") {
        RecurrentLayer r;
        r.W_in = matrix_from_json(field(j, "W_in", where), where + ".W_in");
        r.W_h = matrix_from_json(field(j, "W_h", where), where + ".W_h");
        r.b = vector_from_json(field(j, "b", where), where + ".b");
        if (auto it = j.find("activation"); it != j.end())
            r.activation = activation_from_json(*it, where + ".activation");
        return r;
    }
    fail(where + ".type", "unknown layer type '" + t + "'");
}

json layer_to_json(const Layer& l)
{
    if (const auto* a = std::get_if<AffineLayer>(&l))
        return { { "type", "affine" }, { "W", matrix_to_json(a->W) }, { "b", a->b } };
    if (std::holds_alternative<ReluLayer>(l))
        return { { "type", "relu" } };
    const auto& r = std::get<RecurrentLayer>(l);
    return { { "type", "recurrent" },
             { "W_in", matrix_to_json(r.W_in) },
             { "W_h", matrix_to_json(r.W_h) },
             { "b", r.b },
             { "activation", r.activation == Activation::relu ? "relu" : "identity" } };
}

} // namespace

json box_to_json(const Box& b)
{
    return { { "lower", b.lower }, { "upper", b.upper } };
}

Box box_from_json(const json& j, const std::string& where)
{
    Vector lo = vector_from_json(field(j, "lower", where), where + ".lower");
    Vector hi = vector_from_json(field(j, "upper", where), where + ".upper");
    try {
        return Box(std::move(lo), std::move(hi));
    }
    catch (const DimensionError& e) {
        fail(where, e.what());
    }
}

json matrix_to_json(const Matrix& m)
{
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r)
        rows.push_back(m.row_vector(r));
    return rows;
}

Matrix matrix_from_json(const json& j, const std::string& where)
{
    if (!j.is_array())
        fail(where, "expected an array of rows");
    std::vector<Vector> rows;
    for (std::size_t r = 0; r < j.size(); ++r) {
        rows.push_back(vector_from_json(j[r], where + "[" + std::to_string(r) + "]"));
        if (rows.back().size() != rows.front().size())
            fail(where, "ragged rows");
    }
    return Matrix::from_rows(rows);
}

SystemSpec system_from_json(const json& doc)
{
    if (!doc.is_object())
        fail("model", "expected a JSON object");
    SystemSpec s;
    s.name = doc.value("name", std::string{});
    if (auto it = doc.find("state_names"); it != doc.end()) {
        if (!it->is_array())
            fail("state_names", "expected an array of strings");
        for (const auto& n : *it) {
            if (!n.is_string())
                fail("state_names", "expected an array of strings");
            s.state_names.push_back(n.get<std::string>());
        }
    }
    s.state_box = box_from_json(field(doc, "state_box", "model"), "state_box");
    const std::size_t nx = s.state_box.dim();
    s.initial_states = polytope_from_json(field(doc, "initial_states", "model"), nx, "initial_states");

    if (auto it = doc.find("agents"); it != doc.end()) {
        if (!it->is_array())
            fail("agents", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string w = "agents[" + std::to_string(i) + "]";
            const auto& aj = (*it)[i];
            AgentSpec ag;
            ag.name = aj.is_object() ? aj.value("name", std::string{}) : std::string{};
            const auto& obs = field(aj, "observation", w);
            ag.observation.C = matrix_from_json(field(obs, "C", w + ".observation"), w + ".observation.C");
            ag.observation.d = obs.contains("d") ? vector_from_json(obs["d"], w + ".observation.d")
                                                 : Vector(ag.observation.C.rows(), 0.0);
            const auto& pol = field(aj, "policy", w);
            const auto& layers = field(pol, "layers", w + ".policy");
            if (!layers.is_array())
                fail(w + ".policy.layers", "expected an array");
            for (std::size_t l = 0; l < layers.size(); ++l)
                ag.policy.layers.push_back(layer_from_json(layers[l], w + ".policy.layers[" + std::to_string(l) + "]"));
            ag.policy.hidden_init = pol.contains("hidden_init")
                                        ? box_from_json(pol["hidden_init"], w + ".policy.hidden_init")
                                        : Box::uniform(ag.policy.hidden_dim(), 0.0, 0.0);
            ag.action_box = box_from_json(field(aj, "action_box", w), w + ".action_box");
            s.agents.push_back(std::move(ag));
        }
    }

    const auto& tr = field(doc, "transition", "model");
    s.transition.disturbance_box = tr.contains("disturbance_box")
                                       ? box_from_json(tr["disturbance_box"], "transition.disturbance_box")
                                       : Box{};
    const std::size_t guard_dim = nx + s.action_dim() + s.disturbance_dim();
    const auto& pieces = field(tr, "pieces", "transition");
    if (!pieces.is_array())
        fail("transition.pieces", "expected an array");
    for (std::size_t p = 0; p < pieces.size(); ++p) {
        const std::string w = "transition.pieces[" + std::to_string(p) + "]";
        const auto& pj = pieces[p];
        TransitionPiece pc;
        pc.guard = pj.contains("guard") ? polytope_from_json(pj["guard"], guard_dim, w + ".guard")
                                        : Polytope::universe(guard_dim);
        pc.A = matrix_from_json(field(pj, "A", w), w + ".A");
        pc.B = pj.contains("B") ? matrix_from_json(pj["B"], w + ".B") : Matrix{};
        pc.C = pj.contains("C") ? matrix_from_json(pj["C"], w + ".C") : Matrix{};
        pc.d = pj.contains("d") ? vector_from_json(pj["d"], w + ".d") : Vector(nx, 0.0);
        s.transition.pieces.push_back(std::move(pc));
    }
    if (auto it = doc.find("hidden_box"); it != doc.end())
        s.hidden_box = box_from_json(*it, "hidden_box");
    return s;
}

json system_to_json(const SystemSpec& s)
{
    json doc = json::object();
    if (!s.name.empty())
        doc["name"] = s.name;
    if (!s.state_names.empty())
        doc["state_names"] = s.state_names;
    doc["state_box"] = box_to_json(s.state_box);
    doc["initial_states"] = polytope_to_json(s.initial_states);
    json agents = json::array();
    for (const auto& ag : s.agents) {
        json layers = json::array();
        for (const auto& l : ag.policy.layers)
            layers.push_back(layer_to_json(l));
        json a = { { "observation", { { "C", matrix_to_json(ag.observation.C) }, { "d", ag.observation.d } } },
                   { "policy", { { "layers", layers }, { "hidden_init", box_to_json(ag.policy.hidden_init) } } },
                   { "action_box", box_to_json(ag.action_box) } };
        if (!ag.name.empty())
            a["name"] = ag.name;
        agents.push_back(a);
    }
    doc["agents"] = agents;
    json pieces = json::array();
    for (const auto& pc : s.transition.pieces)
        pieces.push_back({ { "guard", polytope_to_json(pc.guard) },
                           { "A", matrix_to_json(pc.A) },
                           { "B", matrix_to_json(pc.B) },
                           { "C", matrix_to_json(pc.C) },
                           { "d", pc.d } });
    doc["transition"] = { { "pieces", pieces }, { "disturbance_box", box_to_json(s.transition.disturbance_box) } };
    if (s.hidden_box)
        doc["hidden_box"] = box_to_json(*s.hidden_box);
    return doc;
}

SystemSpec load_system(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ModelFormatError("cannot open model file '" + path + "'");
    json doc;
    try {
        in >> doc;
    }
    catch (const json::parse_error& e) {
        throw ModelFormatError(path + ": " + e.what());
    }
    return system_from_json(doc);
}

void save_system(const SystemSpec& spec, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw ModelFormatError("cannot write '" + path + "'");
    out << system_to_json(spec).dump(2) << '\n';
}

json path_to_json(const Path& path)
{
    json steps = json::array();
    for (std::size_t t = 0; t < path.steps.size(); ++t) {
        const auto& s = path.steps[t];
        json j = { { "t", t }, { "x", s.x }, { "h", s.h }, { "a", s.a }, { "w", s.w } };
        j["piece"] = s.piece;
        steps.push_back(j);
    }
    return steps;
}

Path path_from_json(const json& j)
{
    if (!j.is_array())
        fail("path", "expected an array of steps");
    Path p;
    for (std::size_t t = 0; t < j.size(); ++t) {
        const std::string w = "path[" + std::to_string(t) + "]";
        PathStep s;
        s.x = vector_from_json(field(j[t], "x", w), w + ".x");
        s.h = vector_from_json(field(j[t], "h", w), w + ".h");
        s.a = j[t].contains("a") ? vector_from_json(j[t]["a"], w + ".a") : Vector{};
        s.w = j[t].contains("w") ? vector_from_json(j[t]["w"], w + ".w") : Vector{};
        s.piece = j[t].value("piece", -1);
        p.steps.push_back(std::move(s));
    }
    return p;
}

} // namespace mnv
