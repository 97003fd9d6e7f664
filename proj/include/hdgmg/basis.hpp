/*
 * hdgmg -- hybridizable DG Stokes solver with homogeneous multigrid.
 *
 * L2-orthonormal polynomial bases on faces (Legendre) and on triangles
 * (orthonormalized scaled monomials), plus the Raviart-Thomas space RT_p.
 */

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quadrature.hpp"

namespace hdgmg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int max_degree = 4;

inline int
dim_P(int p)
{
    return p < 0 ? 0 : (p + 1) * (p + 2) / 2;
}

inline int
dim_RT(int p)
{
    return (p + 1) * (p + 3);
}

namespace detail {

inline void
check_degree(int p, int lowest = 1)
{
    if (p < lowest || p > max_degree)
        throw std::invalid_argument("unsupported polynomial degree " + std::to_string(p));
}

} // namespace detail

/// Orthonormal Legendre polynomials sqrt(2k+1) P_k(2s-1) on [0,1].
class EdgeBasis
{
    int degree_;

public:
    explicit EdgeBasis(int p) : degree_(p) { detail::check_degree(p); }

    int degree() const { return degree_; }
    int size() const { return degree_ + 1; }

    Vector eval(double s) const
    {
        Vector values(size());
        const double x = 2.0 * s - 1.0;
        double p0 = 1.0, p1 = x;
        values(0) = 1.0;
        if (degree_ >= 1)
            values(1) = std::sqrt(3.0) * x;
        for (int k = 2; k <= degree_; k++)
        {
            const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = pk;
            values(k) = std::sqrt(2.0 * k + 1.0) * pk;
        }
        return values;
    }
};

inline EdgeBasis
edge_basis(int p)
{
    return EdgeBasis(p);
}

/// Scaled monomials ((x-xc)/h)^i ((y-yc)/h)^j ordered by total degree.
class ScaledMonomials
{
    int   degree_;
    Point center_;
    double h_;
    std::vector<std::pair<int, int>> powers_;

public:
    ScaledMonomials(int p, const Point& center, double h) : degree_(p), center_(center), h_(h)
    {
        for (int d = 0; d <= p; d++)
            for (int j = 0; j <= d; j++)
                powers_.emplace_back(d - j, j);
    }

    int size() const { return static_cast<int>(powers_.size()); }
    int degree() const { return degree_; }
    double scale() const { return h_; }
    const Point& center() const { return center_; }
    const std::vector<std::pair<int, int>>& powers() const { return powers_; }

    Vector eval(const Point& x) const
    {
        const double s = (x.x() - center_.x()) / h_, t = (x.y() - center_.y()) / h_;
        Vector values(size());
        for (int k = 0; k < size(); k++)
            values(k) = std::pow(s, powers_[k].first) * std::pow(t, powers_[k].second);
        return values;
    }

    /// size x 2 matrix of gradients w.r.t. physical coordinates.
    Matrix grad(const Point& x) const
    {
        const double s = (x.x() - center_.x()) / h_, t = (x.y() - center_.y()) / h_;
        Matrix g(size(), 2);
        for (int k = 0; k < size(); k++)
        {
            const auto [i, j] = powers_[k];
            g(k, 0) = i == 0 ? 0.0 : i * std::pow(s, i - 1) * std::pow(t, j) / h_;
            g(k, 1) = j == 0 ? 0.0 : j * std::pow(s, i) * std::pow(t, j - 1) / h_;
        }
        return g;
    }
};

/// Triangle geometry shared by cell bases.
struct TriangleGeometry
{
    Point v0, v1, v2;

    Point  centroid() const { return (v0 + v1 + v2) / 3.0; }
    double diameter() const
    {
        return std::max({(v1 - v0).norm(), (v2 - v1).norm(), (v0 - v2).norm()});
    }
    double area() const
    {
        const Point e1 = v1 - v0, e2 = v2 - v0;
        return 0.5 * std::abs(e1.x() * e2.y() - e1.y() * e2.x());
    }
    QuadratureRule quadrature(int exactness) const
    {
        return triangle_quadrature(v0, v1, v2, exactness);
    }
};

/// L2(T)-orthonormal basis of P_p(T). The first dim P_q functions span P_q
/// for every q <= p.
class CellBasis
{
    ScaledMonomials monomials_;
    Matrix          coeffs_;  // rows: basis functions, columns: monomials

public:
    CellBasis(int p, const TriangleGeometry& T)
        : monomials_(p, T.centroid(), T.diameter())
    {
        detail::check_degree(p, 0);
        const int n = monomials_.size();
        Matrix gram = Matrix::Zero(n, n);
        for (const auto& qp : T.quadrature(2 * p))
        {
            const Vector m = monomials_.eval(qp.x);
            gram.noalias() += qp.w * m * m.transpose();
        }
        // gram = R R^T, basis = R^{-1} m keeps the degree ordering
        const Eigen::LLT<Matrix> llt(gram);
        coeffs_ = llt.matrixL().solve(Matrix::Identity(n, n));
    }

    int degree() const { return monomials_.degree(); }
    int size() const { return monomials_.size(); }

    Vector eval(const Point& x) const { return coeffs_ * monomials_.eval(x); }
    Matrix grad(const Point& x) const { return coeffs_ * monomials_.grad(x); }
};

inline CellBasis
cell_basis(int p, const TriangleGeometry& T)
{
    return CellBasis(p, T);
}

/// L2(T)-orthonormal basis of RT_p(T) = [P_p]^2 + x P~_p, built from the
/// spanning set {(m,0), (0,m) : m in P_p} U {x h : h homogeneous of degree p}.
class RTBasis
{
    int             degree_;
    ScaledMonomials monomials_;  // degree p + 0, homogeneous part is the tail
    Matrix          coeffs_;     // rows: basis functions, columns: spanning set

    // spanning set values (n x 2) and divergences (n)
    void spanning(const Point& x, Matrix& values, Vector& div) const
    {
        const int    nm = monomials_.size();
        const int    nh = degree_ + 1;
        const Vector m  = monomials_.eval(x);
        const Matrix g  = monomials_.grad(x);
        const double h  = monomials_.scale();
        const double s  = (x.x() - monomials_.center().x()) / h;
        const double t  = (x.y() - monomials_.center().y()) / h;

        values.setZero(2 * nm + nh, 2);
        div.setZero(2 * nm + nh);
        for (int k = 0; k < nm; k++)
        {
            values(k, 0)      = m(k);
            div(k)            = g(k, 0);
            values(nm + k, 1) = m(k);
            div(nm + k)       = g(k, 1);
        }
        for (int k = 0; k < nh; k++)
        {
            const int hk = nm - nh + k;
            values(2 * nm + k, 0) = s * m(hk);
            values(2 * nm + k, 1) = t * m(hk);
            div(2 * nm + k) = 2.0 * m(hk) / h + s * g(hk, 0) + t * g(hk, 1);
        }
    }

public:
    RTBasis(int p, const TriangleGeometry& T)
        : degree_(p), monomials_(p, T.centroid(), T.diameter())
    {
        detail::check_degree(p);
        const int n = dim_RT(p);
        Matrix gram = Matrix::Zero(n, n);
        Matrix values;
        Vector div;
        for (const auto& qp : T.quadrature(2 * p + 2))
        {
            spanning(qp.x, values, div);
            gram.noalias() += qp.w * values * values.transpose();
        }
        const Eigen::LLT<Matrix> llt(gram);
        coeffs_ = llt.matrixL().solve(Matrix::Identity(n, n));
    }

    int degree() const { return degree_; }
    int size() const { return dim_RT(degree_); }

    /// size x 2 matrix of values.
    Matrix eval(const Point& x) const
    {
        Matrix values;
        Vector div;
        spanning(x, values, div);
        return coeffs_ * values;
    }

    Vector div(const Point& x) const
    {
        Matrix values;
        Vector div;
        spanning(x, values, div);
        return coeffs_ * div;
    }
};

inline RTBasis
rt_basis(int p, const TriangleGeometry& T)
{
    return RTBasis(p, T);
}

} // namespace hdgmg
