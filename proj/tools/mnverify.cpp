// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
//
// mnverify: verify LTL properties of neural multi-agent systems.
//
//   mnverify verify --system fig1 --spec "X^3 (z <= 2)"
//   mnverify bounds --system fig1 --depth 3
//   mnverify simulate --system pendulum:n=8 --horizon 5 --seed 1
//   mnverify export-lp --system fig1 --depth 3
//   mnverify model --system doubling > doubling.json
//
// Exit codes: 0 True, 1 False, 2 Unknown, 3 usage/input errors, 4 internal.

#include "mnv/bench.hpp"
#include "mnv/bpt.hpp"
#include "mnv/ltlr.hpp"
#include "mnv/model_io.hpp"
#include "mnv/report.hpp"
#include "mnv/rmilp.hpp"
#include "mnv/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int exit_input_error = 3;
constexpr int exit_internal_error = 4;

class InputError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig
{
    std::string system;
    std::string spec;
    std::string spec_file;
    int depth = 10;
    std::vector<std::string> methods;
    std::string engine = "auto";
    std::string invariant_engine = "rmilp-tight";
    bool include_step_zero = false;
    bool run_all = false;
    mnv::milp::Options solver;
    double lasso_eq_tol = 0.0;
    int release_bound = -1;
    int jobs = 1;
    double strict_margin = 1e-6;
    std::string output;
    std::string config_path;
    // simulate
    int horizon = 10;
    std::uint64_t seed = 0;
    // export-lp
    bool no_split = false;
    std::string maximize;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <class T>
void take(const json& doc, const char* key, T& dst)
{
    if (!doc.contains(key))
        return;
    try {
        dst = doc[key].get<T>();
    }
    catch (const json::exception&) {
        throw InputError(std::string("config: bad value for '") + key + "'");
    }
}

// Keys mirror the long flag names with '_' for '-'.
void apply_config_file(const std::string& path, RunConfig& rc)
{
    json doc;
    try {
        doc = json::parse(read_file(path));
    }
    catch (const json::parse_error& e) {
        throw InputError("config '" + path + "': " + e.what());
    }
    if (!doc.is_object())
        throw InputError("config '" + path + "': expected an object");
    static const std::vector<std::string> known = {
        "system",    "spec",         "spec_file",    "depth",         "methods",  "engine",
        "invariant_engine", "include_step_zero", "run_all", "node_limit", "iteration_limit",
        "feas_tol",  "int_tol",      "gap_tol",      "lasso_eq_tol",  "release_bound", "jobs",
        "strict_margin", "output",   "horizon",      "seed",          "no_split",
        "maximize"
    };
    for (const auto& [key, _] : doc.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw InputError("config '" + path + "': unknown key '" + key + "'");
    take(doc, "system", rc.system);
    take(doc, "spec", rc.spec);
    take(doc, "spec_file", rc.spec_file);
    take(doc, "depth", rc.depth);
    take(doc, "methods", rc.methods);
    take(doc, "engine", rc.engine);
    take(doc, "invariant_engine", rc.invariant_engine);
    take(doc, "include_step_zero", rc.include_step_zero);
    take(doc, "run_all", rc.run_all);
    take(doc, "node_limit", rc.solver.node_limit);
    take(doc, "iteration_limit", rc.solver.iteration_limit);
    take(doc, "feas_tol", rc.solver.feas_tol);
    take(doc, "int_tol", rc.solver.int_tol);
    take(doc, "gap_tol", rc.solver.gap_tol);
    take(doc, "lasso_eq_tol", rc.lasso_eq_tol);
    take(doc, "release_bound", rc.release_bound);
    take(doc, "jobs", rc.jobs);
    take(doc, "strict_margin", rc.strict_margin);
    take(doc, "output", rc.output);
    take(doc, "horizon", rc.horizon);
    take(doc, "seed", rc.seed);
    take(doc, "no_split", rc.no_split);
    take(doc, "maximize", rc.maximize);
}

// The config file has to be known before parsing so that flags win.
std::string find_config_path(int argc, char** argv)
{
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc)
            return argv[i + 1];
        if (a.rfind("--config=", 0) == 0)
            return a.substr(9);
    }
    if (const char* env = std::getenv("MNVERIFY_CONFIG"))
        return env;
    return {};
}

mnv::SystemSpec load_model(const std::string& name)
{
    if (name.empty())
        throw InputError("no system given (--system)");
    mnv::SystemSpec spec;
    if (fs::is_regular_file(name) || name.ends_with(".json"))
        spec = mnv::load_system(name);
    else
        spec = mnv::bench::builtin(name);
    const auto rep = mnv::validate_system(spec);
    if (!rep.ok()) {
        std::string msg = "invalid system '" + name + "':";
        for (const auto& v : rep.violations)
            msg += "\n  " + v;
        throw InputError(msg);
    }
    return spec;
}

std::string formula_text(const RunConfig& rc)
{
    if (!rc.spec.empty() && !rc.spec_file.empty())
        throw InputError("give either --spec or --spec-file, not both");
    if (!rc.spec_file.empty())
        return read_file(rc.spec_file);
    if (rc.spec.empty())
        throw InputError("no formula given (--spec or --spec-file)");
    return rc.spec;
}

mnv::verify::Config verify_config(const RunConfig& rc)
{
    using namespace mnv::verify;
    if (rc.depth < 0)
        throw InputError("--depth must be >= 0");
    if (rc.jobs < 1)
        throw InputError("--jobs must be >= 1");
    if (!(rc.solver.feas_tol > 0 && rc.solver.int_tol > 0 && rc.solver.gap_tol > 0 && rc.strict_margin > 0))
        throw InputError("tolerances must be positive");
    if (rc.lasso_eq_tol < 0)
        throw InputError("--lasso-eq-tol must be >= 0");
    Config cfg;
    cfg.k = static_cast<std::size_t>(rc.depth);
    if (rc.engine == "auto")
        cfg.engine = EngineChoice::automatic;
    else if (rc.engine == "bpt-only")
        cfg.engine = EngineChoice::bpt_only;
    else if (rc.engine == "rmilp-only")
        cfg.engine = EngineChoice::rmilp_only;
    else
        throw InputError("unknown engine '" + rc.engine + "'");
    if (rc.invariant_engine == "bpt")
        cfg.invariant_engine = InvariantEngine::bpt;
    else if (rc.invariant_engine == "rmilp-tight")
        cfg.invariant_engine = InvariantEngine::rmilp_tight;
    else
        throw InputError("unknown invariant engine '" + rc.invariant_engine + "'");
    for (const auto& m : rc.methods) {
        const auto method = method_from_string(m);
        if (!method)
            throw InputError("unknown method '" + m + "'");
        cfg.methods.push_back(*method);
    }
    cfg.ltl.include_step_zero = rc.include_step_zero;
    cfg.run_all = rc.run_all;
    cfg.solver = rc.solver;
    cfg.lasso_eq_tol = rc.lasso_eq_tol;
    if (rc.release_bound >= 0)
        cfg.release_bound = static_cast<std::size_t>(rc.release_bound);
    cfg.jobs = static_cast<std::size_t>(rc.jobs);
    cfg.strict_margin = rc.strict_margin;
    return cfg;
}

void emit(const RunConfig& rc, const std::string& text)
{
    if (rc.output.empty() || rc.output == "-") {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(rc.output);
    if (!out)
        throw InputError("cannot write '" + rc.output + "'");
    out << text << "\n";
}

int cmd_verify(const RunConfig& rc)
{
    const auto spec = load_model(rc.system);
    const auto text = formula_text(rc);
    const auto cfg = verify_config(rc);
    const auto f = mnv::ltl::parse(text);
    const auto v = mnv::verify::dispatch(spec, f, cfg);
    const auto doc = mnv::report::verification_report(spec, text, cfg, v);
    emit(rc, doc.dump(2));
    std::cerr << mnv::ltl::to_string(v.value) << " (" << mnv::verify::to_string(v.method_used) << ", "
              << mnv::verify::to_string(v.engine_used) << ")\n";
    return mnv::report::exit_code(v.value);
}

int cmd_bounds(const RunConfig& rc)
{
    if (rc.depth < 0)
        throw InputError("--depth must be >= 0");
    const auto spec = load_model(rc.system);
    const auto trace = mnv::bpt::bpt_run(spec, static_cast<std::size_t>(rc.depth));
    emit(rc, mnv::report::trace_to_json(trace, spec).dump(2));
    return 0;
}

int cmd_simulate(const RunConfig& rc)
{
    if (rc.horizon < 0)
        throw InputError("--horizon must be >= 0");
    const auto spec = load_model(rc.system);
    const auto path =
        mnv::bench::simulate(spec, static_cast<std::size_t>(rc.horizon), mnv::bench::SimOptions::with_seed(rc.seed));
    const json doc = { { "schema_version", mnv::report::schema_version },
                       { "kind", "path" },
                       { "system", spec.name },
                       { "horizon", rc.horizon },
                       { "seed", rc.seed },
                       { "path", mnv::path_to_json(path) } };
    emit(rc, doc.dump(2));
    return 0;
}

int cmd_export_lp(const RunConfig& rc)
{
    if (rc.depth < 0)
        throw InputError("--depth must be >= 0");
    const auto spec = load_model(rc.system);
    mnv::rmilp::Options opt;
    opt.split = !rc.no_split;
    auto enc = mnv::rmilp::build_constraints(spec, static_cast<std::size_t>(rc.depth), nullptr, opt);
    if (!rc.maximize.empty()) {
        const auto coord = spec.state_index(rc.maximize);
        if (!coord)
            throw InputError("unknown state coordinate '" + rc.maximize + "'");
        enc.instance.set_objective(mnv::milp::LinExpr::var(enc.steps.back().x[*coord]), mnv::milp::Sense::maximize);
    }
    emit(rc, mnv::milp::export_lp_format(enc.instance));
    return 0;
}

void add_common(CLI::App* cmd, RunConfig& rc)
{
    cmd->add_option("--system,-s", rc.system, "Builtin name (e.g. pendulum:n=8) or model JSON path")
        ->envname("MNVERIFY_SYSTEM");
    cmd->add_option("--output,-o", rc.output, "Write the result here instead of stdout")->envname("MNVERIFY_OUTPUT");
    // Handled before parsing; declared so that it is accepted and documented.
    cmd->add_option("--config", rc.config_path, "JSON config file; flags and MNVERIFY_* variables take precedence");
}

void add_depth(CLI::App* cmd, RunConfig& rc)
{
    cmd->add_option("--depth,-k", rc.depth, "Unrolling depth")->envname("MNVERIFY_DEPTH")->capture_default_str();
}

} // namespace

int main(int argc, char** argv)
{
    RunConfig rc;
    try {
        if (const auto path = find_config_path(argc, argv); !path.empty())
            apply_config_file(path, rc);
    }
    catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_input_error;
    }

    CLI::App app{ "Verification of LTL properties for neural multi-agent systems" };
    app.require_subcommand(1);
    app.set_version_flag("--version", "mnverify 0.1.0");

    auto* verify = app.add_subcommand("verify", "Decide whether the system satisfies a formula");
    add_common(verify, rc);
    add_depth(verify, rc);
    verify->add_option("--spec", rc.spec, "Formula text")->envname("MNVERIFY_SPEC");
    verify->add_option("--spec-file", rc.spec_file, "File holding the formula")->envname("MNVERIFY_SPEC_FILE");
    verify->add_option("--methods", rc.methods, "Restrict to these methods: bounded, bpmc, lasso, invariant")
        ->delimiter(',')
        ->envname("MNVERIFY_METHODS");
    verify->add_option("--engine", rc.engine, "auto, bpt-only or rmilp-only")
        ->envname("MNVERIFY_ENGINE")
        ->capture_default_str();
    verify->add_option("--invariant-engine", rc.invariant_engine, "bpt or rmilp-tight")
        ->envname("MNVERIFY_INVARIANT_ENGINE")
        ->capture_default_str();
    verify->add_flag("--include-step-zero", rc.include_step_zero, "Bounded always/eventually include step 0")
        ->envname("MNVERIFY_INCLUDE_STEP_ZERO");
    verify->add_flag("--run-all", rc.run_all, "Run every applicable method instead of stopping at the first verdict")
        ->envname("MNVERIFY_RUN_ALL");
    verify->add_option("--node-limit", rc.solver.node_limit, "Branch-and-bound node limit per MILP")
        ->envname("MNVERIFY_NODE_LIMIT")
        ->capture_default_str();
    verify->add_option("--iteration-limit", rc.solver.iteration_limit, "Simplex iteration limit per LP")
        ->envname("MNVERIFY_ITERATION_LIMIT")
        ->capture_default_str();
    verify->add_option("--feas-tol", rc.solver.feas_tol, "Primal feasibility tolerance")
        ->envname("MNVERIFY_FEAS_TOL")
        ->capture_default_str();
    verify->add_option("--int-tol", rc.solver.int_tol, "Integrality tolerance")
        ->envname("MNVERIFY_INT_TOL")
        ->capture_default_str();
    verify->add_option("--gap-tol", rc.solver.gap_tol, "Relative optimality gap")
        ->envname("MNVERIFY_GAP_TOL")
        ->capture_default_str();
    verify->add_option("--lasso-eq-tol", rc.lasso_eq_tol, "Loop closure tolerance (0 = exact; >0 is unsound)")
        ->envname("MNVERIFY_LASSO_EQ_TOL")
        ->capture_default_str();
    verify->add_option("--release-bound", rc.release_bound, "Prefix bound for release lassos (default: depth)")
        ->envname("MNVERIFY_RELEASE_BOUND");
    verify->add_option("--jobs,-j", rc.jobs, "Worker threads for lasso probes")
        ->envname("MNVERIFY_JOBS")
        ->capture_default_str();
    verify->add_option("--strict-margin", rc.strict_margin, "Margin used for strict inequalities in MILP")
        ->envname("MNVERIFY_STRICT_MARGIN")
        ->capture_default_str();

    auto* bounds = app.add_subcommand("bounds", "Interval bounds of the reachable states per step");
    add_common(bounds, rc);
    add_depth(bounds, rc);

    auto* simulate = app.add_subcommand("simulate", "Random concrete run");
    add_common(simulate, rc);
    simulate->add_option("--horizon", rc.horizon, "Number of steps")
        ->envname("MNVERIFY_HORIZON")
        ->capture_default_str();
    simulate->add_option("--seed", rc.seed, "Random seed")->envname("MNVERIFY_SEED")->capture_default_str();

    auto* export_lp = app.add_subcommand("export-lp", "Unrolled MILP encoding in LP format");
    add_common(export_lp, rc);
    add_depth(export_lp, rc);
    export_lp->add_flag("--no-split", rc.no_split, "Disable adaptive splitting")->envname("MNVERIFY_NO_SPLIT");
    export_lp->add_option("--maximize", rc.maximize, "Objective: maximize this state coordinate at the last step")
        ->envname("MNVERIFY_MAXIMIZE");

    auto* model = app.add_subcommand("model", "Print a system as a model JSON document");
    add_common(model, rc);

    auto* list = app.add_subcommand("list", "Builtin system names");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_input_error;
    }

    try {
        if (*verify)
            return cmd_verify(rc);
        if (*bounds)
            return cmd_bounds(rc);
        if (*simulate)
            return cmd_simulate(rc);
        if (*export_lp)
            return cmd_export_lp(rc);
        if (*model) {
            emit(rc, mnv::system_to_json(load_model(rc.system)).dump(2));
            return 0;
        }
        if (*list) {
            for (const auto& n : mnv::bench::builtin_names())
                std::cout << n << "\n";
            return 0;
        }
    }
    catch (const mnv::ltl::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return exit_input_error;
    }
    catch (const mnv::ltl::ResolveError& e) {
        std::cerr << "formula error: " << e.what() << "\n";
        return exit_input_error;
    }
    catch (const mnv::ModelFormatError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return exit_input_error;
    }
    catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_input_error;
    }
    catch (const std::invalid_argument& e) {
        // Unknown builtins, bad builtin parameters, dimension problems.
        std::cerr << "error: " << e.what() << "\n";
        return exit_input_error;
    }
    catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return exit_internal_error;
    }
    return exit_internal_error;
}
