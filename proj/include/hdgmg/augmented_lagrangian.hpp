/*
 * hdgmg -- hybridizable DG Stokes solver with homogeneous multigrid.
 *
 * Outer pseudo-time iteration: each step solves the condensed system for the
 * trace with the pressure of the previous step on the right-hand side, then
 * updates the pressure, until the relative pressure increment is small.
 */

#pragma once

#include <algorithm>
#include <chrono>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "assembly.hpp"
#include "multigrid.hpp"
#include "problem.hpp"

namespace hdgmg {

struct ALConfig
{
    double dt         = 2.0;
    double eps_tol    = 1e-8;   ///< relative pressure increment
    double rho        = 1e-10;  ///< inner relative residual
    int    max_outer  = 500;
    int    max_inner  = 200;
    bool   warm_start = false;  ///< reuse the previous trace as inner initial guess
    bool   nested     = false;  ///< start from the pressure of the next coarser level
    bool   strict     = true;   ///< stop when an inner solve hits its cap
    InjectionKind injection = InjectionKind::Polynomial;
    std::ostream* telemetry = nullptr;  ///< per-iteration inner residuals as CSV

    void validate() const
    {
        if (!(dt > 0.0))
            throw std::invalid_argument("time step must be positive");
        if (!(eps_tol > 0.0) || !(rho > 0.0))
            throw std::invalid_argument("tolerances must be positive");
        if (max_outer < 1 || max_inner < 1)
            throw std::invalid_argument("iteration caps must be positive");
    }

    /// Tolerances used for the experiments at degree p.
    static ALConfig defaults(int p, double dt = 2.0)
    {
        ALConfig c;
        c.dt      = dt;
        c.eps_tol = p >= 3 ? 1e-10 : 1e-8;
        c.rho     = p >= 3 ? 1e-12 : 1e-10;
        return c;
    }
};

struct ALStep
{
    int    mg_iterations   = 0;
    bool   inner_converged = true;
    double increment       = 0.0;  ///< ||p^n - p^{n-1}||
    double relative        = 0.0;  ///< increment / ||p^n||
};

struct ALState
{
    int                 n = 0;
    Vector              lambda;
    PressureField       pressure;
    std::vector<ALStep> history;

    bool converged(double eps) const
    {
        if (history.empty())
            return false;
        const ALStep& s = history.back();
        if (s.increment == 0.0)
            return true;
        return std::isfinite(s.relative) && s.relative < eps;
    }
};

struct SolveReport
{
    int                 level  = 0;
    int                 degree = 0;
    double              dt     = 0.0;
    std::string         method;
    SmootherConfig      smoother;
    bool                nested     = false;
    bool                warm_start = false;
    index_t             dofs       = 0;
    int                 n_iter     = 0;
    std::vector<int>    mg_iters;
    std::vector<double> increments;
    bool                converged       = false;
    bool                inner_converged = true;
    std::string         status;
    std::optional<FieldErrors> errors;
    double              seconds_setup = 0.0;
    double              seconds_solve = 0.0;
    PressureField       pressure;

    int max_mg_iters() const
    {
        return mg_iters.empty() ? 0 : *std::max_element(mg_iters.begin(), mg_iters.end());
    }
};

/// Element-wise L2 projection of a function onto the pressure space.
inline PressureField
init_pressure(const MeshLevel& mesh, int p, const ScalarField& p0)
{
    PressureField field(mesh.triangles.size());
    for (const auto& t : mesh.triangles)
    {
        const TriangleGeometry T{mesh.point(t.vertices[0]), mesh.point(t.vertices[1]),
                                 mesh.point(t.vertices[2])};
        const CellBasis basis(p, T);
        Vector c = Vector::Zero(basis.size());
        for (const auto& qp : T.quadrature(2 * p + 6))
            c += qp.w * p0(qp.x) * basis.eval(qp.x);
        field[t.id] = c;
    }
    return field;
}

/// Embeds a pressure field of level `fine_level - 1` into level `fine_level`;
/// children inherit the parent polynomial exactly.
inline PressureField
init_pressure(const MeshHierarchy& meshes, int fine_level, int p, const PressureField& coarse)
{
    const MeshLevel& cm = meshes.level(fine_level - 1);
    const MeshLevel& fm = meshes.level(fine_level);
    if (coarse.size() != cm.triangles.size())
        throw std::invalid_argument("coarse pressure does not match the coarse mesh");
    auto geometry = [](const MeshLevel& mesh, const Triangle& t) {
        return TriangleGeometry{mesh.point(t.vertices[0]), mesh.point(t.vertices[1]),
                                mesh.point(t.vertices[2])};
    };
    PressureField field(fm.triangles.size());
    for (const auto& ct : cm.triangles)
    {
        const CellBasis parent(p, geometry(cm, ct));
        for (index_t c : ct.children)
        {
            const TriangleGeometry T = geometry(fm, fm.triangles[c]);
            const CellBasis        child(p, T);
            Vector coeffs = Vector::Zero(child.size());
            for (const auto& qp : T.quadrature(2 * p))
                coeffs += qp.w * parent.eval(qp.x).dot(coarse[ct.id]) * child.eval(qp.x);
            field[c] = coeffs;
        }
    }
    return field;
}

inline PressureField
zero_pressure(const MeshLevel& mesh, int p)
{
    return PressureField(mesh.triangles.size(), Vector::Zero(dim_P(p)));
}

/// One outer step: right-hand side from p^{n-1}, multigrid solve for the
/// trace, pressure update.
inline void
al_step(ALState& state, const ALConfig& config, const LevelProblem& problem,
        const MultigridHierarchy& mg)
{
    const Vector   b  = problem.rhs(state.pressure);
    const Vector   x0 = config.warm_start ? state.lambda : Vector();
    const MGResult r  = mg_solve(mg, b, config.rho, x0, config.max_inner, config.telemetry);
    PressureField  next = problem.pressure(r.x, state.pressure);

    ALStep step;
    step.mg_iterations   = r.iterations;
    step.inner_converged = r.converged;
    step.increment       = pressure_distance(next, state.pressure);
    const double norm    = pressure_norm(next);
    step.relative        = norm > 0.0 ? step.increment / norm : INFINITY;

    state.lambda   = r.x;
    state.pressure = std::move(next);
    state.history.push_back(step);
    state.n++;
}

namespace detail {

inline double
seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace detail

/// Runs the outer iteration on one level from the initial pressure p0.
inline SolveReport
al_solve(const MeshHierarchy& meshes, int level, const Method& method, int p,
         const ALConfig& config, const SmootherConfig& smoother, const ProblemData& data,
         const PressureField& p0, const ExactSolution* exact = nullptr)
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const MeshLevel&   mesh = meshes.level(level);
    const LevelProblem problem(mesh, method, p, config.dt, data);
    const MultigridHierarchy mg(meshes, level, method, p, config.dt, smoother, &problem.matrix(),
                                config.injection);

    SolveReport report;
    report.level         = level;
    report.degree        = p;
    report.dt            = config.dt;
    report.method        = method.name();
    report.smoother      = smoother;
    report.nested        = config.nested;
    report.warm_start    = config.warm_start;
    report.dofs          = problem.space().size();
    report.seconds_setup = detail::seconds_since(start);

    const auto solve_start = std::chrono::steady_clock::now();
    ALState state;
    state.lambda   = Vector::Zero(problem.space().size());
    state.pressure = p0.empty() ? zero_pressure(mesh, p) : p0;
    if (state.pressure.size() != mesh.triangles.size())
        throw std::invalid_argument("initial pressure does not match the mesh");

    PressureField previous;
    while (state.n < config.max_outer)
    {
        previous = state.pressure;
        al_step(state, config, problem, mg);
        const ALStep& s = state.history.back();
        report.mg_iters.push_back(s.mg_iterations);
        report.increments.push_back(s.relative);
        report.inner_converged = report.inner_converged && s.inner_converged;
        if (!s.inner_converged && config.strict)
            break;
        if (state.converged(config.eps_tol))
        {
            report.converged = true;
            break;
        }
    }
    report.n_iter        = state.n;
    report.seconds_solve = detail::seconds_since(solve_start);
    if (report.converged)
        report.status = "converged";
    else if (!report.inner_converged && config.strict)
        report.status = "inner solver exceeded its iteration cap";
    else
        report.status = "outer iteration cap reached";

    if (exact)
    {
        const DiscreteFields fields = problem.reconstruct(state.lambda, previous);
        report.errors = compute_errors(mesh, method, p, fields, *exact);
    }
    report.pressure = std::move(state.pressure);
    return report;
}

/// Levels 1..finest in sequence; with config.nested each level starts from the
/// embedded final pressure of the previous one, otherwise from zero.
inline std::vector<SolveReport>
al_solve_levels(const MeshHierarchy& meshes, int first, int finest, const Method& method, int p,
                const ALConfig& config, const SmootherConfig& smoother, const ProblemData& data,
                const ExactSolution* exact = nullptr)
{
    std::vector<SolveReport> reports;
    PressureField            carried;
    const int                start = config.nested ? 1 : first;
    for (int level = start; level <= finest; level++)
    {
        PressureField p0;
        if (config.nested && level > 1)
            p0 = init_pressure(meshes, level, p, carried);
        SolveReport r = al_solve(meshes, level, method, p, config, smoother, data, p0,
                                 level >= first ? exact : nullptr);
        carried = r.pressure;
        const bool ok = r.converged;
        if (level >= first)
            reports.push_back(std::move(r));
        if (!ok)
            break;
    }
    return reports;
}

} // namespace hdgmg
