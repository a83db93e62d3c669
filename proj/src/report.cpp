// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "mnv/report.hpp"

#include "mnv/model_io.hpp"

#include <set>

namespace mnv::report {

using nlohmann::json;

namespace {

std::string engine_choice(verify::EngineChoice e)
{
    switch (e) {
    case verify::EngineChoice::automatic: return "auto";
    case verify::EngineChoice::bpt_only: return "bpt-only";
    case verify::EngineChoice::rmilp_only: return "rmilp-only";
    }
    return "?";
}

} // namespace

json stats_to_json(const verify::Stats& s)
{
    return { { "milp_solves", s.milp_solves },
             { "milp_nodes", s.milp_nodes },
             { "lp_iters", s.lp_iters },
             { "bpt_steps", s.bpt_steps },
             { "wall_ms", s.wall_ms } };
}

json verdict_to_json(const verify::Verdict& v)
{
    json j = { { "verdict", ltl::to_string(v.value) },
               { "method", verify::to_string(v.method_used) },
               { "engine", verify::to_string(v.engine_used) },
               { "depth", v.depth_reached },
               { "stats", stats_to_json(v.stats) } };
    if (v.witness)
        j["witness"] = path_to_json(*v.witness);
    if (v.lasso_loop)
        j["lasso_loop"] = *v.lasso_loop;
    if (!v.invariant_boxes.empty()) {
        json boxes = json::array();
        for (const auto& b : v.invariant_boxes)
            boxes.push_back(box_to_json(b));
        j["invariant_boxes"] = boxes;
    }
    json attempts = json::array();
    for (const auto& a : v.attempts)
        attempts.push_back({ { "method", verify::to_string(a.method) },
                             { "side", verify::to_string(a.side) },
                             { "verdict", ltl::to_string(a.value) } });
    j["attempts"] = attempts;
    j["notes"] = v.notes;
    return j;
}

json config_to_json(const verify::Config& c)
{
    json methods = json::array();
    for (auto m : c.methods)
        methods.push_back(verify::to_string(m));
    json j = { { "k", c.k },
               { "engine", engine_choice(c.engine) },
               { "invariant_engine", c.invariant_engine == verify::InvariantEngine::bpt ? "bpt" : "rmilp-tight" },
               { "include_step_zero", c.ltl.include_step_zero },
               { "run_all", c.run_all },
               { "methods", methods },
               { "lasso_eq_tol", c.lasso_eq_tol },
               { "strict_margin", c.strict_margin },
               { "jobs", c.jobs },
               { "solver",
                 { { "feas_tol", c.solver.feas_tol },
                   { "int_tol", c.solver.int_tol },
                   { "gap_tol", c.solver.gap_tol },
                   { "node_limit", c.solver.node_limit },
                   { "iteration_limit", c.solver.iteration_limit } } } };
    j["release_bound"] = c.release_bound ? json(*c.release_bound) : json(nullptr);
    return j;
}

verify::Config config_from_json(const json& j)
{
    if (!j.is_object())
        throw std::invalid_argument("config: expected an object");
    static const std::set<std::string> known = { "k",           "engine",        "invariant_engine",
                                                 "include_step_zero", "methods", "lasso_eq_tol",
                                                 "strict_margin", "jobs",        "solver",
                                                 "release_bound", "run_all" };
    static const std::set<std::string> solver_keys = { "feas_tol", "int_tol", "gap_tol", "node_limit",
                                                       "iteration_limit" };
    for (const auto& [key, _] : j.items())
        if (!known.contains(key))
            throw std::invalid_argument("config: unknown key '" + key + "'");
    verify::Config c;
    try {
        if (j.contains("k")) {
            if (!j["k"].is_number_unsigned())
                throw std::invalid_argument("config: k must be a non-negative integer");
            c.k = j["k"].get<std::size_t>();
        }
        if (j.contains("engine")) {
            const auto e = j["engine"].get<std::string>();
            if (e == "auto")
                c.engine = verify::EngineChoice::automatic;
            else if (e == "bpt-only")
                c.engine = verify::EngineChoice::bpt_only;
            else if (e == "rmilp-only")
                c.engine = verify::EngineChoice::rmilp_only;
            else
                throw std::invalid_argument("config: unknown engine '" + e + "'");
        }
        if (j.contains("invariant_engine")) {
            const auto e = j["invariant_engine"].get<std::string>();
            if (e == "bpt")
                c.invariant_engine = verify::InvariantEngine::bpt;
            else if (e == "rmilp-tight")
                c.invariant_engine = verify::InvariantEngine::rmilp_tight;
            else
                throw std::invalid_argument("config: unknown invariant engine '" + e + "'");
        }
        if (j.contains("include_step_zero"))
            c.ltl.include_step_zero = j["include_step_zero"].get<bool>();
        if (j.contains("run_all"))
            c.run_all = j["run_all"].get<bool>();
        if (j.contains("methods"))
            for (const auto& m : j["methods"]) {
                const auto method = verify::method_from_string(m.get<std::string>());
                if (!method)
                    throw std::invalid_argument("config: unknown method " + m.dump());
                c.methods.push_back(*method);
            }
        if (j.contains("lasso_eq_tol"))
            c.lasso_eq_tol = j["lasso_eq_tol"].get<double>();
        if (j.contains("strict_margin"))
            c.strict_margin = j["strict_margin"].get<double>();
        if (j.contains("jobs"))
            c.jobs = j["jobs"].get<std::size_t>();
        if (j.contains("release_bound") && !j["release_bound"].is_null())
            c.release_bound = j["release_bound"].get<std::size_t>();
        if (j.contains("solver")) {
            const auto& s = j["solver"];
            for (const auto& [key, _] : s.items())
                if (!solver_keys.contains(key))
                    throw std::invalid_argument("config: unknown solver key '" + key + "'");
            c.solver.feas_tol = s.value("feas_tol", c.solver.feas_tol);
            c.solver.int_tol = s.value("int_tol", c.solver.int_tol);
            c.solver.gap_tol = s.value("gap_tol", c.solver.gap_tol);
            c.solver.node_limit = s.value("node_limit", c.solver.node_limit);
            c.solver.iteration_limit = s.value("iteration_limit", c.solver.iteration_limit);
        }
    }
    catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    if (!(c.solver.feas_tol > 0 && c.solver.int_tol > 0 && c.solver.gap_tol > 0 && c.strict_margin > 0))
        throw std::invalid_argument("config: tolerances must be positive");
    if (c.lasso_eq_tol < 0)
        throw std::invalid_argument("config: lasso_eq_tol must be >= 0");
    if (c.jobs == 0)
        throw std::invalid_argument("config: jobs must be >= 1");
    return c;
}

json trace_to_json(const bpt::BoundsTrace& trace, const SystemSpec& spec)
{
    std::vector<std::string> names;
    for (std::size_t i = 0; i < trace.state_dim; ++i)
        names.push_back(spec.state_name(i));
    json boxes = json::array();
    for (std::size_t t = 0; t < trace.boxes.size(); ++t)
        boxes.push_back({ { "t", t },
                          { "x", box_to_json(trace.state_box(t)) },
                          { "h", box_to_json(trace.hidden_box(t)) } });
    return { { "schema_version", schema_version },
             { "kind", "bounds" },
             { "system", spec.name },
             { "state_names", names },
             { "depth", trace.depth() },
             { "boxes", boxes },
             { "wall_ms", trace.wall_ms } };
}

json verification_report(const SystemSpec& spec, const std::string& formula, const verify::Config& cfg,
                         const verify::Verdict& v)
{
    json warnings = json::array();
    if (cfg.lasso_eq_tol > 0.0)
        warnings.push_back("lasso_eq_tol > 0: loops close only approximately, so lasso-based False verdicts "
                           "are not sound");
    return { { "schema_version", schema_version },
             { "kind", "verification" },
             { "system", spec.name },
             { "formula", formula },
             { "config", config_to_json(cfg) },
             { "result", verdict_to_json(v) },
             { "warnings", warnings } };
}

json without_timing(json doc)
{
    if (doc.is_object()) {
        doc.erase("wall_ms");
        for (auto& [key, val] : doc.items())
            val = without_timing(val);
    }
    else if (doc.is_array())
        for (auto& val : doc)
            val = without_timing(val);
    return doc;
}

int exit_code(ltl::Verdict3 v)
{
    switch (v) {
    case ltl::Verdict3::True: return 0;
    case ltl::Verdict3::False: return 1;
    case ltl::Verdict3::Unknown: return 2;
    }
    return 2;
}

} // namespace mnv::report
