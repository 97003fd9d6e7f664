/*
 * hdgmg -- hybridizable DG Stokes solver with homogeneous multigrid.
 *
 * Problem data and the manufactured solution used by the experiments.
 */

#pragma once

#include <cmath>
#include <numbers>

#include "local_solver.hpp"

namespace hdgmg {

/// Right-hand side data of the Stokes problem -div(grad u) + grad p = f,
/// div u = 0, u = u_D on the Dirichlet part and (grad u - p I) n = g_N on the
/// Neumann part of the boundary.
struct ProblemData
{
    VectorField f   = [](const Point&) { return Point(0, 0); };
    VectorField u_D = [](const Point&) { return Point(0, 0); };
    /// traction on Neumann faces; the second argument is the outward normal
    std::function<Point(const Point&, const Point&)> g_N = [](const Point&, const Point&) {
        return Point(0, 0);
    };
};

/// Closed-form solution used for error measurement.
struct ExactSolution
{
    VectorField u;
    ScalarField p;
    TensorField L;
};

/// u = (sin(pi x) sin(pi y), cos(pi x) cos(pi y)), p = sin(pi x) cos(pi y).
struct ManufacturedProblem
{
    static constexpr double pi = std::numbers::pi;

    static Point u(const Point& x)
    {
        return Point(std::sin(pi * x.x()) * std::sin(pi * x.y()),
                     std::cos(pi * x.x()) * std::cos(pi * x.y()));
    }

    static double p(const Point& x) { return std::sin(pi * x.x()) * std::cos(pi * x.y()); }

    /// L_ij = d u_i / d x_j
    static Eigen::Matrix2d grad_u(const Point& x)
    {
        const double sx = std::sin(pi * x.x()), cx = std::cos(pi * x.x());
        const double sy = std::sin(pi * x.y()), cy = std::cos(pi * x.y());
        Eigen::Matrix2d G;
        G << pi * cx * sy, pi * sx * cy, -pi * sx * cy, -pi * cx * sy;
        return G;
    }

    static Point f(const Point& x)
    {
        const double sx = std::sin(pi * x.x()), cx = std::cos(pi * x.x());
        const double sy = std::sin(pi * x.y()), cy = std::cos(pi * x.y());
        return Point(2 * pi * pi * sx * sy + pi * cx * cy, 2 * pi * pi * cx * cy - pi * sx * sy);
    }

    static Point traction(const Point& x, const Point& normal)
    {
        return grad_u(x) * normal - p(x) * normal;
    }

    static ProblemData data() { return {f, u, traction}; }
    static ExactSolution exact() { return {u, p, grad_u}; }
};

} // namespace hdgmg
