/*
 * hdgmg -- hybridizable DG Stokes solver with homogeneous multigrid.
 *
 * Experiment harness: configuration, result tables in long CSV form, JSON
 * reports and the command-line front end used by tools/hdgmg.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "augmented_lagrangian.hpp"

namespace hdgmg {

/// Invalid experiment configuration (exit code 3).
class ConfigError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// A solve that did not converge (exit code 2).
class SolverError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum ExitCode { exit_ok = 0, exit_failed = 1, exit_not_converged = 2, exit_bad_config = 3 };

enum class NestedMode { Off, On, Both };

inline NestedMode
parse_nested(const std::string& value)
{
    if (value == "false" || value == "off" || value == "0")
        return NestedMode::Off;
    if (value == "true" || value == "on" || value == "1")
        return NestedMode::On;
    if (value == "both")
        return NestedMode::Both;
    throw ConfigError("nested must be true, false or both, got '" + value + "'");
}

inline std::string
to_string(NestedMode mode)
{
    switch (mode)
    {
        case NestedMode::Off:  return "false";
        case NestedMode::On:   return "true";
        case NestedMode::Both: return "both";
    }
    return "?";
}

struct ExperimentConfig
{
    std::string           table;  ///< label of the CSV rows; defaults to the command
    std::vector<int>      degrees{1};
    int                   first_level = 1;
    int                   max_level   = 4;
    std::vector<double>   dts{2.0};
    SmootherKind          smoother = SmootherKind::GaussSeidel;
    std::vector<int>      steps{4};
    double                omega = 2.0 / 3.0;
    std::optional<double> eps_tol, rho;  ///< per-degree defaults when unset
    double                tau         = 1.0;
    double                tau_offstar = 0.0;  ///< identity negative control
    std::string           method      = "sfh";
    NestedMode            nested      = NestedMode::Off;
    bool                  warm_start  = false;
    InjectionKind         injection   = InjectionKind::Polynomial;
    int                   max_outer   = 500;
    int                   max_inner   = 200;
    bool                  zero_data   = false;
    double                cond_tol    = 1e-6;
    std::string           out         = "results";
    bool                  verbose     = false;
    bool                  dump_matrix = false, dump_mesh = false, dump_fields = false;

    void validate() const
    {
        if (degrees.empty() || dts.empty() || steps.empty())
            throw ConfigError("p, dt and steps need at least one value");
        for (int p : degrees)
            if (p < 1 || p > 4)
                throw ConfigError("polynomial degree must lie in 1..4");
        if (first_level < 1 || first_level > max_level || max_level > 8)
            throw ConfigError("levels must satisfy 1 <= first <= last <= 8");
        for (double dt : dts)
            if (!(dt > 0.0))
                throw ConfigError("time steps must be positive");
        for (int m : steps)
            if (m < 1)
                throw ConfigError("smoothing steps must be at least 1");
        if (!(omega > 0.0 && omega <= 1.0))
            throw ConfigError("Jacobi damping must lie in (0,1]");
        if ((eps_tol && !(*eps_tol > 0.0)) || (rho && !(*rho > 0.0)) || !(cond_tol > 0.0))
            throw ConfigError("tolerances must be positive");
        if (!(tau > 0.0) || tau_offstar < 0.0)
            throw ConfigError("stabilization must be positive");
        if (max_outer < 1 || max_inner < 1)
            throw ConfigError("iteration caps must be positive");
        try
        {
            parse_method(method, tau);
        }
        catch (const std::invalid_argument& e)
        {
            throw ConfigError(e.what());
        }
    }

    Method make_method() const { return parse_method(method, tau); }

    SmootherConfig smoother_config(int m) const { return {smoother, m, omega}; }

    ALConfig al_config(int p, double dt, bool nested_run = false) const
    {
        ALConfig c   = ALConfig::defaults(p, dt);
        c.eps_tol    = eps_tol.value_or(c.eps_tol);
        c.rho        = rho.value_or(c.rho);
        c.max_outer  = max_outer;
        c.max_inner  = max_inner;
        c.warm_start = warm_start;
        c.nested     = nested_run;
        c.injection  = injection;
        return c;
    }

    std::vector<bool> nested_runs() const
    {
        switch (nested)
        {
            case NestedMode::Off: return {false};
            case NestedMode::On:  return {true};
            default:              return {false, true};
        }
    }

    ProblemData data() const { return zero_data ? ProblemData{} : ManufacturedProblem::data(); }
};

/// "N" means levels 1..N, "a-b" levels a..b.
inline std::pair<int, int>
parse_levels(const std::string& text)
{
    try
    {
        std::size_t used = 0;
        const auto  dash = text.find('-');
        if (dash == std::string::npos)
        {
            const int n = std::stoi(text, &used);
            if (used != text.size())
                throw ConfigError("");
            return {1, n};
        }
        const std::string a = text.substr(0, dash), b = text.substr(dash + 1);
        const int first = std::stoi(a, &used);
        if (used != a.size())
            throw ConfigError("");
        const int last = std::stoi(b, &used);
        if (used != b.size())
            throw ConfigError("");
        return {first, last};
    }
    catch (const std::exception&)
    {
        throw ConfigError("levels must be 'N' or 'a-b', got '" + text + "'");
    }
}

inline std::string
format_number(double v)
{
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.12g", v);
    return buffer;
}

struct ResultRow
{
    std::string table;
    int         level = 0;
    double      dt    = 0.0;
    int         p     = 0;
    std::string quantity;
    std::string value;
};

/// Long-format results; rows keep insertion order so output is reproducible.
class ResultTable
{
    std::string            name_;
    std::vector<ResultRow> rows_;

public:
    explicit ResultTable(std::string name = "") : name_(std::move(name)) {}

    const std::string&            name() const { return name_; }
    const std::vector<ResultRow>& rows() const { return rows_; }

    void add(int level, double dt, int p, const std::string& quantity, const std::string& value)
    {
        rows_.push_back({name_, level, dt, p, quantity, value});
    }
    void add(int level, double dt, int p, const std::string& quantity, double value)
    {
        add(level, dt, p, quantity, format_number(value));
    }
    void add(int level, double dt, int p, const std::string& quantity, int value)
    {
        add(level, dt, p, quantity, std::to_string(value));
    }

    std::optional<std::string> find(int level, double dt, int p, const std::string& quantity) const
    {
        for (const auto& r : rows_)
            if (r.level == level && r.dt == dt && r.p == p && r.quantity == quantity)
                return r.value;
        return std::nullopt;
    }

    void write_csv(std::ostream& os) const
    {
        os << "table,level,dt,p,quantity,value\n";
        for (const auto& r : rows_)
            os << r.table << ',' << r.level << ',' << format_number(r.dt) << ',' << r.p << ','
               << r.quantity << ',' << r.value << '\n';
    }

    /// One line per (p, dt, quantity), one column per level.
    std::string format_wide() const
    {
        std::vector<int> levels;
        using Key = std::tuple<int, double, std::string>;
        std::vector<Key>                                  keys;
        std::map<Key, std::map<int, std::string>>         cells;
        for (const auto& r : rows_)
        {
            if (std::find(levels.begin(), levels.end(), r.level) == levels.end())
                levels.push_back(r.level);
            const Key key{r.p, r.dt, r.quantity};
            if (!cells.count(key))
                keys.push_back(key);
            cells[key][r.level] = r.value;
        }
        std::sort(levels.begin(), levels.end());
        std::size_t label = 8;
        for (const auto& k : keys)
            label = std::max(label, std::get<2>(k).size());

        std::ostringstream os;
        char buffer[64];
        std::snprintf(buffer, sizeof buffer, "%-3s %-5s %-*s", "p", "dt", int(label), "quantity");
        os << buffer;
        for (int l : levels)
        {
            std::snprintf(buffer, sizeof buffer, " %12s", ("level " + std::to_string(l)).c_str());
            os << buffer;
        }
        os << '\n';
        for (const auto& k : keys)
        {
            std::snprintf(buffer, sizeof buffer, "%-3d %-5s %-*s", std::get<0>(k),
                          format_number(std::get<1>(k)).c_str(), int(label), std::get<2>(k).c_str());
            os << buffer;
            for (int l : levels)
            {
                const auto& row = cells[k];
                const auto  it  = row.find(l);
                std::string v   = it == row.end() ? "" : it->second;
                if (v.find_first_of(".e") != std::string::npos && v != "--")
                {
                    std::snprintf(buffer, sizeof buffer, "%.4g", std::stod(v));
                    v = buffer;
                }
                std::snprintf(buffer, sizeof buffer, " %12s", v.c_str());
                os << buffer;
            }
            os << '\n';
        }
        return os.str();
    }
};

inline nlohmann::json
to_json(const SolveReport& r)
{
    nlohmann::json j;
    j["level"]      = r.level;
    j["degree"]     = r.degree;
    j["dt"]         = r.dt;
    j["method"]     = r.method;
    j["smoother"]   = {{"kind", to_string(r.smoother.kind)},
                       {"steps", r.smoother.steps},
                       {"omega", r.smoother.omega}};
    j["nested"]          = r.nested;
    j["warm_start"]      = r.warm_start;
    j["dofs"]            = r.dofs;
    j["n_iter"]          = r.n_iter;
    j["mg_iters"]        = r.mg_iters;
    j["max_mg_iters"]    = r.max_mg_iters();
    j["increments"]      = r.increments;
    j["converged"]       = r.converged;
    j["inner_converged"] = r.inner_converged;
    j["status"]          = r.status;
    if (r.errors)
        j["errors"] = {{"u", r.errors->u}, {"p", r.errors->p}, {"L", r.errors->L}};
    j["seconds_setup"] = r.seconds_setup;
    j["seconds_solve"] = r.seconds_solve;
    return j;
}

inline nlohmann::json
to_json(const ExperimentConfig& c)
{
    nlohmann::json j;
    j["table"]       = c.table;
    j["p"]           = c.degrees;
    j["levels"]      = {c.first_level, c.max_level};
    j["dt"]          = c.dts;
    j["smoother"]    = to_string(c.smoother);
    j["steps"]       = c.steps;
    j["omega"]       = c.omega;
    j["eps_tol"]     = c.eps_tol ? nlohmann::json(*c.eps_tol) : nlohmann::json("default");
    j["rho"]         = c.rho ? nlohmann::json(*c.rho) : nlohmann::json("default");
    j["tau"]         = c.tau;
    j["tau_offstar"] = c.tau_offstar;
    j["method"]      = c.method;
    j["nested"]      = to_string(c.nested);
    j["warm_start"]  = c.warm_start;
    j["injection"]   = to_string(c.injection);
    j["max_outer"]   = c.max_outer;
    j["max_inner"]   = c.max_inner;
    j["data"]        = c.zero_data ? "zero" : "manufactured";
    return j;
}

struct CommandResult
{
    ResultTable    table;
    nlohmann::json report;
    int            exit_code = exit_ok;
};

namespace detail {

inline void
progress(const ExperimentConfig& c, std::ostream* log, const SolveReport& r)
{
    if (c.verbose && log)
        *log << "# p=" << r.degree << " dt=" << format_number(r.dt) << " level=" << r.level
             << " m=" << r.smoother.steps << " nested=" << r.nested << " n_iter=" << r.n_iter
             << " max_mg=" << r.max_mg_iters() << " status=" << r.status << '\n';
}

/// Levels lo..hi in order; nested runs start at level 1 and pass the final
/// pressure of each level on. Returns the reports of levels >= keep_from.
inline std::vector<SolveReport>
run_levels(const MeshHierarchy& meshes, const ExperimentConfig& c, int p, double dt, int m,
           bool nested_run, int lo, int hi, bool stop_on_failure, std::ostream* log)
{
    ALConfig config = c.al_config(p, dt, nested_run);
    if (c.verbose)
        config.telemetry = log;
    const Method              method = c.make_method();
    const ProblemData         data   = c.data();
    const ExactSolution       exact  = ManufacturedProblem::exact();
    const ExactSolution*      ex     = c.zero_data ? nullptr : &exact;
    std::vector<SolveReport>  reports;
    PressureField             carried;
    for (int level = nested_run ? 1 : lo; level <= hi; level++)
    {
        PressureField p0;
        if (nested_run && level > 1)
            p0 = init_pressure(meshes, level, p, carried);
        SolveReport r = al_solve(meshes, level, method, p, config, c.smoother_config(m), data, p0, ex);
        progress(c, log, r);
        carried             = r.pressure;
        const bool ok       = r.converged;
        if (level >= lo)
            reports.push_back(std::move(r));
        if (!ok && stop_on_failure)
            break;
    }
    return reports;
}

inline std::string
run_suffix(const ExperimentConfig& c, int m, bool nested_run)
{
    std::string s = "_m" + std::to_string(m);
    if (nested_run && c.nested == NestedMode::Both)
        s += "_nested";
    return s;
}

inline nlohmann::json
strip_pressure(const std::vector<SolveReport>& reports)
{
    nlohmann::json a = nlohmann::json::array();
    for (const auto& r : reports)
        a.push_back(to_json(r));
    return a;
}

inline double
eoc(double coarse_error, double fine_error)
{
    return std::log(coarse_error / fine_error) / std::log(2.0);
}

} // namespace detail

/// L2 errors and estimated orders of convergence on levels first..max.
inline CommandResult
cmd_eoc(const ExperimentConfig& c, std::ostream* log = nullptr)
{
    c.validate();
    if (c.zero_data)
        throw ConfigError("eoc needs the manufactured solution");
    CommandResult result{ResultTable(c.table.empty() ? "eoc" : c.table), {}, exit_ok};
    result.report["config"] = to_json(c);
    result.report["runs"]   = nlohmann::json::array();
    const MeshHierarchy meshes = build_hierarchy(c.max_level);
    const bool          nested = c.nested != NestedMode::Off;
    for (int p : c.degrees)
        for (double dt : c.dts)
        {
            const int lo = std::max(1, c.first_level - 1);
            const auto reports = detail::run_levels(meshes, c, p, dt, c.steps.front(), nested, lo,
                                                    c.max_level, true, log);
            const SolveReport* previous = nullptr;
            for (const auto& r : reports)
            {
                if (!r.converged)
                {
                    result.table.add(r.level, dt, p, "status", std::string("not-converged"));
                    result.exit_code = exit_not_converged;
                    break;
                }
                if (r.level >= c.first_level)
                {
                    result.table.add(r.level, dt, p, "err_u", r.errors->u);
                    result.table.add(r.level, dt, p, "err_p", r.errors->p);
                    result.table.add(r.level, dt, p, "err_L", r.errors->L);
                    if (previous)
                    {
                        result.table.add(r.level, dt, p, "eoc_u", detail::eoc(previous->errors->u, r.errors->u));
                        result.table.add(r.level, dt, p, "eoc_p", detail::eoc(previous->errors->p, r.errors->p));
                        result.table.add(r.level, dt, p, "eoc_L", detail::eoc(previous->errors->L, r.errors->L));
                    }
                }
                previous = &r;
            }
            result.report["runs"].push_back(detail::strip_pressure(reports));
        }
    return result;
}

/// Outer counts (n_iter) and the largest inner multigrid count per run;
/// "--" marks runs whose inner solve hit its cap.
inline CommandResult
cmd_iters(const ExperimentConfig& c, std::ostream* log = nullptr)
{
    c.validate();
    CommandResult result{ResultTable(c.table.empty() ? "iters" : c.table), {}, exit_ok};
    result.report["config"] = to_json(c);
    result.report["runs"]   = nlohmann::json::array();
    const MeshHierarchy meshes = build_hierarchy(c.max_level);
    for (int p : c.degrees)
    {
        for (int level = c.first_level; level <= c.max_level; level++)
            result.table.add(level, c.dts.front(), p, "dofs",
                             static_cast<int>(build_trace_space(meshes.level(level), p).size()));
        for (double dt : c.dts)
            for (bool nested_run : c.nested_runs())
                for (int m : c.steps)
                {
                    const auto reports = detail::run_levels(meshes, c, p, dt, m, nested_run,
                                                            c.first_level, c.max_level, false, log);
                    const std::string suffix = detail::run_suffix(c, m, nested_run);
                    for (const auto& r : reports)
                    {
                        result.table.add(r.level, dt, p, "n_iter" + suffix,
                                         r.converged ? std::to_string(r.n_iter) : std::string("--"));
                        result.table.add(r.level, dt, p, "mg_iters" + suffix,
                                         r.inner_converged ? std::to_string(r.max_mg_iters())
                                                           : std::string("--"));
                    }
                    result.report["runs"].push_back(detail::strip_pressure(reports));
                }
    }
    return result;
}

/// Spectral condition numbers of the condensed matrices and their growth
/// from one level to the next.
inline CommandResult
cmd_cond(const ExperimentConfig& c, std::ostream* log = nullptr)
{
    c.validate();
    CommandResult result{ResultTable(c.table.empty() ? "cond" : c.table), {}, exit_ok};
    result.report["config"] = to_json(c);
    result.report["cells"]  = nlohmann::json::array();
    const MeshHierarchy meshes = build_hierarchy(c.max_level);
    const Method        method = c.make_method();
    for (int p : c.degrees)
        for (double dt : c.dts)
        {
            std::optional<double> previous;
            for (int level = c.first_level; level <= c.max_level; level++)
            {
                const TraceSpace        space = build_trace_space(meshes.level(level), p);
                const ConditionEstimate e =
                    estimate_condition_number(assemble_condensed(space, method, dt).matrix, c.cond_tol);
                result.table.add(level, dt, p, "kappa", e.kappa);
                result.table.add(level, dt, p, "lambda_min", e.lambda_min);
                result.table.add(level, dt, p, "lambda_max", e.lambda_max);
                if (previous)
                    result.table.add(level, dt, p, "ratio", e.kappa / *previous);
                result.table.add(level, dt, p, "eig_converged", e.converged ? 1 : 0);
                if (!e.converged)
                    result.exit_code = exit_not_converged;
                previous = e.kappa;
                result.report["cells"].push_back({{"level", level}, {"dt", dt}, {"p", p},
                                                  {"kappa", e.kappa}, {"iterations", e.iterations},
                                                  {"converged", e.converged}});
                if (c.verbose && log)
                    *log << "# p=" << p << " dt=" << format_number(dt) << " level=" << level
                         << " kappa=" << format_number(e.kappa) << '\n';
            }
        }
    return result;
}

/// Largest entry of |A - B| relative to the largest entry of |A|.
inline double
max_relative_entry_difference(const SparseMatrix& A, const SparseMatrix& B)
{
    if (A.rows() != B.rows() || A.cols() != B.cols())
        throw std::invalid_argument("matrices differ in size");
    const SparseMatrix D     = A - B;
    double             scale = 0.0, diff = 0.0;
    for (Eigen::Index k = 0; k < A.outerSize(); k++)
        for (SparseMatrix::InnerIterator it(A, k); it; ++it)
            scale = std::max(scale, std::abs(it.value()));
    for (Eigen::Index k = 0; k < D.outerSize(); k++)
        for (SparseMatrix::InnerIterator it(D, k); it; ++it)
            diff = std::max(diff, std::abs(it.value()));
    return scale > 0.0 ? diff / scale : diff;
}

/// Condensed matrices of SFH (tau and 10 tau), BDM-H and RT-H must coincide.
/// A positive tau_offstar stabilizes the reference SFH matrix on every face,
/// which has to be detected.
inline CommandResult
cmd_identity(const ExperimentConfig& c, std::ostream* log = nullptr)
{
    c.validate();
    if (c.max_level > 3)
        throw ConfigError("identity check is limited to levels <= 3");
    CommandResult result{ResultTable(c.table.empty() ? "identity" : c.table), {}, exit_ok};
    result.report["config"] = to_json(c);
    result.report["cells"]  = nlohmann::json::array();
    const MeshHierarchy meshes = build_hierarchy(c.max_level);
    const double        threshold = 1e-10;

    Method reference      = Method::sfh(c.tau);
    reference.tau_offstar = c.tau_offstar;
    const std::vector<std::pair<std::string, Method>> variants = {
        {"sfh_tau10", Method::sfh(10.0 * c.tau)}, {"bdmh", Method::bdmh()}, {"rth", Method::rth()}};

    bool all = true;
    for (int p : c.degrees)
        for (double dt : c.dts)
            for (int level = c.first_level; level <= c.max_level; level++)
            {
                const TraceSpace   space = build_trace_space(meshes.level(level), p);
                const SparseMatrix A     = assemble_condensed(space, reference, dt).matrix;
                double             worst = 0.0;
                nlohmann::json     cell  = {{"level", level}, {"dt", dt}, {"p", p}};
                for (const auto& [name, method] : variants)
                {
                    const double d =
                        max_relative_entry_difference(A, assemble_condensed(space, method, dt).matrix);
                    result.table.add(level, dt, p, "max_rel_diff_" + name, d);
                    cell[name] = d;
                    worst      = std::max(worst, d);
                }
                const bool pass = worst < threshold;
                result.table.add(level, dt, p, "max_rel_diff", worst);
                result.table.add(level, dt, p, "pass", pass ? 1 : 0);
                cell["pass"] = pass;
                result.report["cells"].push_back(cell);
                all = all && pass;
                if (c.verbose && log)
                    *log << "# p=" << p << " level=" << level << " max_rel_diff="
                         << format_number(worst) << (pass ? " pass" : " FAIL") << '\n';
            }
    result.report["pass"] = all;
    if (!all)
        result.exit_code = exit_failed;
    return result;
}

/// One full solve on the finest configured level.
inline CommandResult
cmd_solve(const ExperimentConfig& c, std::ostream* log = nullptr)
{
    c.validate();
    if (c.degrees.size() != 1 || c.dts.size() != 1 || c.steps.size() != 1 ||
        c.nested == NestedMode::Both)
        throw ConfigError("solve takes a single p, dt, smoothing step count and nested mode");
    CommandResult result{ResultTable(c.table.empty() ? "solve" : c.table), {}, exit_ok};
    const int    p = c.degrees.front(), level = c.max_level;
    const double dt = c.dts.front();
    const MeshHierarchy meshes = build_hierarchy(level);
    const auto reports = detail::run_levels(meshes, c, p, dt, c.steps.front(),
                                            c.nested == NestedMode::On, level, level, true, log);
    if (reports.empty())
        throw SolverError("nested initialization failed on a coarser level");
    const SolveReport& r = reports.back();

    result.table.add(level, dt, p, "dofs", static_cast<int>(r.dofs));
    result.table.add(level, dt, p, "n_iter", r.n_iter);
    result.table.add(level, dt, p, "mg_iters", r.inner_converged ? std::to_string(r.max_mg_iters())
                                                                 : std::string("--"));
    if (r.errors)
    {
        result.table.add(level, dt, p, "err_u", r.errors->u);
        result.table.add(level, dt, p, "err_p", r.errors->p);
        result.table.add(level, dt, p, "err_L", r.errors->L);
    }
    result.table.add(level, dt, p, "converged", r.converged ? 1 : 0);
    result.report           = to_json(r);
    result.report["config"] = to_json(c);
    if (!r.converged)
        result.exit_code = exit_not_converged;

    if (c.dump_mesh || c.dump_matrix || c.dump_fields)
        std::filesystem::create_directories(c.out);
    const std::string stem = c.out + "/" + result.table.name() + "_level" + std::to_string(level);
    if (c.dump_mesh)
    {
        std::ofstream os(stem + "_mesh.txt");
        write_mesh(os, meshes.level(level));
    }
    if (c.dump_matrix)
    {
        std::ofstream os(stem + "_matrix.mtx");
        const TraceSpace space = build_trace_space(meshes.level(level), p);
        write_matrix(os, assemble_condensed(space, c.make_method(), dt).matrix);
    }
    if (c.dump_fields)
    {
        // pressure at cell centroids
        std::ofstream    os(stem + "_pressure.csv");
        const MeshLevel& mesh = meshes.level(level);
        os << "cell,x,y,p\n";
        for (const auto& t : mesh.triangles)
        {
            const TriangleGeometry T{mesh.point(t.vertices[0]), mesh.point(t.vertices[1]),
                                     mesh.point(t.vertices[2])};
            const Point x = T.centroid();
            os << t.id << ',' << format_number(x.x()) << ',' << format_number(x.y()) << ','
               << format_number(CellBasis(p, T).eval(x).dot(r.pressure[t.id])) << '\n';
        }
    }
    return result;
}

/// Writes <out>/<table>.csv and <out>/<table>.json.
inline void
write_outputs(const ExperimentConfig& c, const CommandResult& result)
{
    std::filesystem::create_directories(c.out);
    const std::string stem = c.out + "/" + result.table.name();
    std::ofstream     csv(stem + ".csv");
    result.table.write_csv(csv);
    std::ofstream json(stem + ".json");
    nlohmann::json report = result.report;
    report["table"]       = result.table.name();
    report["exit_code"]   = result.exit_code;
    json << report.dump(2) << '\n';
    if (!csv || !json)
        throw std::runtime_error("cannot write results to '" + c.out + "'");
}

/// Command-line front end. `args` excludes the program name.
inline int
run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"HDG Stokes solver with homogeneous multigrid: experiment harness", "hdgmg"};
    app.set_config("--config", "", "INI file with key = value lines; flags override it");
    app.allow_config_extras(false);
    app.require_subcommand(1, 1);

    ExperimentConfig c;
    std::string      levels = "1-4", smoother = "gauss-seidel", nested = "false";
    std::string      injection = "polynomial", data = "manufactured";

    app.add_option("--p", c.degrees, "polynomial degrees, comma separated")->delimiter(',');
    app.add_option("--levels", levels, "'N' for 1..N or 'a-b'");
    app.add_option("--dt", c.dts, "time steps, comma separated")->delimiter(',');
    app.add_option("--smoother", smoother, "jacobi | gauss-seidel | symmetric-gauss-seidel");
    app.add_option("--steps", c.steps, "smoothing steps per half cycle, comma separated")->delimiter(',');
    app.add_option("--tau", c.tau, "stabilization on the distinguished face");
    app.add_option("--method", c.method, "sfh | rth | bdmh");
    app.add_flag("--nested{true}", nested, "initialize from the coarser level: true | false | both");
    app.add_option("--out", c.out, "output directory");
    app.add_flag("--verbose", c.verbose, "progress and inner residuals on stderr");
    app.add_option("--table", c.table, "table label (default: command name)");
    app.add_option("--eps-tol", c.eps_tol, "relative pressure increment tolerance");
    app.add_option("--rho", c.rho, "relative residual tolerance of the inner solver");
    app.add_option("--max-outer", c.max_outer);
    app.add_option("--max-inner", c.max_inner);
    app.add_option("--omega", c.omega, "Jacobi damping");
    app.add_flag("--warm-start", c.warm_start, "start inner solves from the previous trace");
    app.add_option("--injection", injection, "polynomial | linear");
    app.add_option("--tau-offstar", c.tau_offstar, "off-face stabilization (identity control)");
    app.add_option("--data", data, "manufactured | zero");
    app.add_option("--cond-tol", c.cond_tol);
    app.add_flag("--dump-matrix", c.dump_matrix);
    app.add_flag("--dump-mesh", c.dump_mesh);
    app.add_flag("--dump-fields", c.dump_fields);

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"eoc", "errors and orders of convergence"},
        {"iters", "outer and inner iteration counts"},
        {"cond", "condition numbers of the condensed matrices"},
        {"identity", "compare condensed matrices of all method variants"},
        {"solve", "one solve on the finest level with a JSON report"}};
    for (const auto& [name, help] : commands)
        app.add_subcommand(name, help)->fallthrough();

    try
    {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_bad_config;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try
    {
        std::tie(c.first_level, c.max_level) = parse_levels(levels);
        c.nested    = parse_nested(nested);
        try
        {
            c.smoother  = parse_smoother(smoother);
            c.injection = parse_injection(injection);
        }
        catch (const std::invalid_argument& e)
        {
            throw ConfigError(e.what());
        }
        if (data != "manufactured" && data != "zero")
            throw ConfigError("data must be manufactured or zero");
        c.zero_data = data == "zero";
        c.validate();

        CommandResult result;
        if (command == "eoc")
            result = cmd_eoc(c, &err);
        else if (command == "iters")
            result = cmd_iters(c, &err);
        else if (command == "cond")
            result = cmd_cond(c, &err);
        else if (command == "identity")
            result = cmd_identity(c, &err);
        else
            result = cmd_solve(c, &err);

        write_outputs(c, result);
        out << result.table.format_wide();
        if (result.exit_code == exit_not_converged)
            err << "hdgmg: solver did not converge\n";
        else if (result.exit_code == exit_failed)
            err << "hdgmg: check failed\n";
        return result.exit_code;
    }
    catch (const ConfigError& e)
    {
        err << "hdgmg: invalid configuration: " << e.what() << '\n';
        return exit_bad_config;
    }
    catch (const SolverError& e)
    {
        err << "hdgmg: " << e.what() << '\n';
        return exit_not_converged;
    }
    catch (const std::exception& e)
    {
        err << "hdgmg: " << e.what() << '\n';
        return exit_failed;
    }
}

} // namespace hdgmg
