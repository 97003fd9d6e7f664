/*
 * hdgmg -- hybridizable DG Stokes solver with homogeneous multigrid.
 *
 * Gauss rules on the unit interval and on triangles (collapsed Gauss).
 */

#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hdgmg {

using Point = Eigen::Vector2d;

/// Quadrature node with the weight already scaled to the integration domain.
struct QuadraturePoint
{
    Point  x;
    double w;
    double s = 0.0; ///< arc-length parameter in [0,1] for edge rules
};

enum class QuadratureDomain { Triangle, Edge };

struct QuadratureRule
{
    QuadratureDomain             domain;
    int                          exactness;
    std::vector<QuadraturePoint> points;

    auto        begin() const { return points.begin(); }
    auto        end() const { return points.end(); }
    std::size_t size() const { return points.size(); }

    double weight_sum() const
    {
        double sum = 0.0;
        for (const auto& qp : points)
            sum += qp.w;
        return sum;
    }
};

inline constexpr int max_quadrature_exactness = 20;

namespace detail {

/// Gauss-Legendre nodes and weights on [0,1] with n points.
inline std::pair<std::vector<double>, std::vector<double>>
gauss_legendre_01(int n)
{
    // P_n(x) and P_n'(x) by the three-term recurrence
    auto legendre = [n](double x) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; k++)
        {
            const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = pk;
        }
        return std::pair{p1, n * (x * p1 - p0) / (x * x - 1.0)};
    };

    std::vector<double> nodes(n), weights(n);
    for (int i = 0; i < n; i++)
    {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int iter = 0; iter < 100; iter++)
        {
            const auto [value, derivative] = legendre(x);
            const double dx = value / derivative;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        const double dp    = legendre(x).second;
        nodes[n - 1 - i]   = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return {nodes, weights};
}

inline void check_exactness(int exactness)
{
    if (exactness < 0 || exactness > max_quadrature_exactness)
        throw std::invalid_argument("unsupported quadrature exactness " +
                                    std::to_string(exactness));
}

} // namespace detail

/// Gauss rule on the segment [a,b], exact for polynomials of the given degree.
inline QuadratureRule
edge_quadrature(const Point& a, const Point& b, int exactness)
{
    detail::check_exactness(exactness);
    const int n = exactness / 2 + 1;
    auto [nodes, weights] = detail::gauss_legendre_01(n);
    const double length = (b - a).norm();

    QuadratureRule rule{QuadratureDomain::Edge, exactness, {}};
    rule.points.reserve(n);
    for (int i = 0; i < n; i++)
        rule.points.push_back({a + nodes[i] * (b - a), weights[i] * length, nodes[i]});
    return rule;
}

/// Reference edge [0,1] on the x axis.
inline QuadratureRule
edge_quadrature(int exactness)
{
    return edge_quadrature(Point(0, 0), Point(1, 0), exactness);
}

/// Collapsed (Duffy) Gauss product rule on the triangle (v0, v1, v2).
/// All weights are positive and sum to the triangle area.
inline QuadratureRule
triangle_quadrature(const Point& v0, const Point& v1, const Point& v2, int exactness)
{
    detail::check_exactness(exactness);
    // The collapse adds one degree in the collapsed direction.
    const int n = (exactness + 1) / 2 + 1;
    auto [nodes, weights] = detail::gauss_legendre_01(n);

    const Point  e1   = v1 - v0;
    const Point  e2   = v2 - v0;
    const double area = 0.5 * std::abs(e1.x() * e2.y() - e1.y() * e2.x());

    QuadratureRule rule{QuadratureDomain::Triangle, exactness, {}};
    rule.points.reserve(n * n);
    for (int i = 0; i < n; i++)
        for (int j = 0; j < n; j++)
        {
            const double xi  = nodes[i];
            const double eta = nodes[j];
            const double a   = xi * (1.0 - eta);
            const double b   = eta;
            const double w   = weights[i] * weights[j] * (1.0 - eta) * 2.0 * area;
            rule.points.push_back({v0 + a * e1 + b * e2, w, 0.0});
        }
    return rule;
}

/// Reference triangle (0,0), (1,0), (0,1).
inline QuadratureRule
triangle_quadrature(int exactness)
{
    return triangle_quadrature(Point(0, 0), Point(1, 0), Point(0, 1), exactness);
}

inline QuadratureRule
quadrature(QuadratureDomain domain, int exactness)
{
    return domain == QuadratureDomain::Triangle ? triangle_quadrature(exactness)
                                                : edge_quadrature(exactness);
}

} // namespace hdgmg
