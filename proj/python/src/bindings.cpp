// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
//
// Low-level extension module. Documents cross the boundary as JSON text;
// the mnverify package turns them into Python objects.

#include "mnv/bench.hpp"
#include "mnv/bpt.hpp"
#include "mnv/ltlr.hpp"
#include "mnv/model_io.hpp"
#include "mnv/report.hpp"
#include "mnv/rmilp.hpp"
#include "mnv/verify.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

namespace py = pybind11;
using nlohmann::json;

namespace {

// Model JSON text, a model file path, or a builtin name.
mnv::SystemSpec resolve_system(const std::string& system)
{
    mnv::SystemSpec spec;
    const auto first = system.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && system[first] == '{') {
        json doc;
        try {
            doc = json::parse(system);
        }
        catch (const json::parse_error& e) {
            throw mnv::ModelFormatError(std::string("model document: ") + e.what());
        }
        spec = mnv::system_from_json(doc);
    }
    else if (std::filesystem::is_regular_file(system) || system.ends_with(".json"))
        spec = mnv::load_system(system);
    else
        spec = mnv::bench::builtin(system);
    mnv::require_valid(spec);
    return spec;
}

json parse_config(const std::string& text)
{
    try {
        return text.empty() ? json::object() : json::parse(text);
    }
    catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
}

std::string system_json(const std::string& system)
{
    return mnv::system_to_json(resolve_system(system)).dump();
}

std::string verify(const std::string& system, const std::string& formula, const std::string& config)
{
    const auto spec = resolve_system(system);
    const auto cfg = mnv::report::config_from_json(parse_config(config));
    const auto f = mnv::ltl::parse(formula);
    mnv::verify::Verdict v;
    {
        py::gil_scoped_release release;
        v = mnv::verify::dispatch(spec, f, cfg);
    }
    return mnv::report::verification_report(spec, formula, cfg, v).dump();
}

std::string bounds(const std::string& system, std::size_t depth)
{
    const auto spec = resolve_system(system);
    return mnv::report::trace_to_json(mnv::bpt::bpt_run(spec, depth), spec).dump();
}

std::string simulate(const std::string& system, std::size_t horizon, std::uint64_t seed)
{
    const auto spec = resolve_system(system);
    const auto path = mnv::bench::simulate(spec, horizon, mnv::bench::SimOptions::with_seed(seed));
    const json doc = { { "schema_version", mnv::report::schema_version },
                       { "kind", "path" },
                       { "system", spec.name },
                       { "horizon", horizon },
                       { "seed", seed },
                       { "path", mnv::path_to_json(path) } };
    return doc.dump();
}

std::string export_lp(const std::string& system, std::size_t depth, bool split, const std::string& maximize)
{
    const auto spec = resolve_system(system);
    mnv::rmilp::Options opt;
    opt.split = split;
    auto enc = mnv::rmilp::build_constraints(spec, depth, nullptr, opt);
    if (!maximize.empty()) {
        const auto coord = spec.state_index(maximize);
        if (!coord)
            throw std::invalid_argument("unknown state coordinate '" + maximize + "'");
        enc.instance.set_objective(mnv::milp::LinExpr::var(enc.steps.back().x[*coord]), mnv::milp::Sense::maximize);
    }
    return mnv::milp::export_lp_format(enc.instance);
}

std::string normalize_formula(const std::string& formula)
{
    return mnv::ltl::print(mnv::ltl::parse(formula));
}

} // namespace

PYBIND11_MODULE(_mnverify, m)
{
    m.doc() = "mnverify core bindings (JSON in, JSON out)";

    py::register_exception<mnv::ModelFormatError>(m, "ModelError", PyExc_ValueError);
    py::register_exception<mnv::ltl::ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<mnv::ltl::ResolveError>(m, "FormulaError", PyExc_ValueError);
    py::register_exception<mnv::bpt::TotalityGap>(m, "TotalityGap", PyExc_RuntimeError);

    m.attr("schema_version") = mnv::report::schema_version;
    m.attr("__version__") = MNV_VERSION;
    m.def("builtin_names", &mnv::bench::builtin_names);
    m.def("system_json", &system_json, py::arg("system"));
    m.def("verify", &verify, py::arg("system"), py::arg("formula"), py::arg("config") = "");
    m.def("bounds", &bounds, py::arg("system"), py::arg("depth"));
    m.def("simulate", &simulate, py::arg("system"), py::arg("horizon"), py::arg("seed") = 0);
    m.def("export_lp", &export_lp, py::arg("system"), py::arg("depth"), py::arg("split") = true,
          py::arg("maximize") = "");
    m.def("normalize_formula", &normalize_formula, py::arg("formula"));
}
