#include <cmath>

#include <gtest/gtest.h>

#include "hdgmg/basis.hpp"

using namespace hdgmg;

namespace {

const TriangleGeometry skewed{Point(0.1, 0.2), Point(0.6, 0.25), Point(0.3, 0.7)};

Matrix
cell_gram(const CellBasis& basis, const TriangleGeometry& T)
{
    Matrix gram = Matrix::Zero(basis.size(), basis.size());
    for (const auto& qp : T.quadrature(2 * basis.degree()))
    {
        const Vector v = basis.eval(qp.x);
        gram += qp.w * v * v.transpose();
    }
    return gram;
}

} // namespace

TEST(EdgeBasis, Orthonormal)
{
    for (int p = 1; p <= max_degree; p++)
    {
        const EdgeBasis basis(p);
        Matrix gram = Matrix::Zero(p + 1, p + 1);
        for (const auto& qp : edge_quadrature(2 * p))
        {
            const Vector v = basis.eval(qp.s);
            gram += qp.w * v * v.transpose();
        }
        EXPECT_LT((gram - Matrix::Identity(p + 1, p + 1)).norm(), 1e-13) << "p=" << p;
    }
}

TEST(EdgeBasis, EndpointValues)
{
    const EdgeBasis basis(4);
    const Vector left = basis.eval(0.0), right = basis.eval(1.0);
    for (int k = 0; k <= 4; k++)
    {
        EXPECT_NEAR(right(k), std::sqrt(2.0 * k + 1.0), 1e-14);
        EXPECT_NEAR(left(k), (k % 2 ? -1 : 1) * std::sqrt(2.0 * k + 1.0), 1e-14);
    }
}

TEST(EdgeBasis, RejectsDegreeOutOfRange)
{
    EXPECT_THROW(EdgeBasis(0), std::invalid_argument);
    EXPECT_THROW(EdgeBasis(5), std::invalid_argument);
}

TEST(CellBasis, OrthonormalOnSkewedTriangle)
{
    for (int p = 0; p <= max_degree; p++)
    {
        const CellBasis basis(p, skewed);
        EXPECT_EQ(basis.size(), dim_P(p));
        EXPECT_LT((cell_gram(basis, skewed) - Matrix::Identity(dim_P(p), dim_P(p))).norm(), 1e-11)
            << "p=" << p;
    }
}

TEST(CellBasis, Hierarchical)
{
    // leading dim P_q functions of the degree p basis equal the degree q basis
    const CellBasis high(4, skewed);
    for (int q = 0; q < 4; q++)
    {
        const CellBasis low(q, skewed);
        for (const auto& qp : skewed.quadrature(6))
            EXPECT_LT((high.eval(qp.x).head(dim_P(q)) - low.eval(qp.x)).norm(), 1e-10);
    }
}

TEST(CellBasis, GradientMatchesFiniteDifference)
{
    const CellBasis basis(3, skewed);
    const Point x(0.33, 0.4);
    const double eps = 1e-6;
    const Matrix g   = basis.grad(x);
    for (int d = 0; d < 2; d++)
    {
        Point e = Point::Zero();
        e(d)    = eps;
        const Vector fd = (basis.eval(x + e) - basis.eval(x - e)) / (2 * eps);
        EXPECT_LT((fd - g.col(d)).norm(), 1e-6);
    }
}

TEST(CellBasis, ReproducesPolynomials)
{
    // projection onto P_2 reproduces x^2 - xy exactly
    const CellBasis basis(2, skewed);
    auto f = [](const Point& x) { return x.x() * x.x() - x.x() * x.y(); };
    Vector c = Vector::Zero(basis.size());
    for (const auto& qp : skewed.quadrature(4))
        c += qp.w * f(qp.x) * basis.eval(qp.x);
    for (const Point& x : {Point(0.2, 0.3), Point(0.5, 0.3), Point(0.3, 0.6)})
        EXPECT_NEAR(c.dot(basis.eval(x)), f(x), 1e-12);
}

TEST(RTBasis, DimensionAndOrthonormality)
{
    for (int p = 1; p <= max_degree; p++)
    {
        const RTBasis basis(p, skewed);
        EXPECT_EQ(basis.size(), (p + 1) * (p + 3));
        Matrix gram = Matrix::Zero(basis.size(), basis.size());
        for (const auto& qp : skewed.quadrature(2 * p + 2))
        {
            const Matrix v = basis.eval(qp.x);
            gram += qp.w * v * v.transpose();
        }
        EXPECT_LT((gram - Matrix::Identity(basis.size(), basis.size())).norm(), 1e-10)
            << "p=" << p;
    }
}

TEST(RTBasis, DivergenceMatchesFiniteDifference)
{
    const RTBasis basis(2, skewed);
    const Point x(0.3, 0.35);
    const double eps = 1e-6;
    const Point ex(eps, 0), ey(0, eps);
    const Vector fd = (basis.eval(x + ex).col(0) - basis.eval(x - ex).col(0) +
                       basis.eval(x + ey).col(1) - basis.eval(x - ey).col(1)) /
                      (2 * eps);
    EXPECT_LT((fd - basis.div(x)).norm(), 1e-6);
}

TEST(RTBasis, NormalTraceIsDegreeP)
{
    // on every edge v.n is a polynomial of degree p in the edge parameter:
    // its Legendre coefficient of degree p+1 vanishes
    const int p = 2;
    const RTBasis basis(p, skewed);
    const std::array<Point, 3> v = {skewed.v0, skewed.v1, skewed.v2};
    for (int j = 0; j < 3; j++)
    {
        const Point a = v[j], b = v[(j + 1) % 3];
        const Point e = b - a;
        const Point n(e.y(), -e.x());
        const EdgeBasis legendre(p + 1);
        Matrix coeffs = Matrix::Zero(basis.size(), p + 2);
        for (const auto& qp : edge_quadrature(a, b, 2 * p + 2))
            coeffs += qp.w * (basis.eval(qp.x) * n) * legendre.eval(qp.s).transpose();
        EXPECT_LT(coeffs.col(p + 1).norm(), 1e-11) << "edge " << j;
        EXPECT_GT(coeffs.col(p).norm(), 1e-3);
    }
}

TEST(RTBasis, ContainsFullVectorPolynomials)
{
    // [P_p]^2 is in the span: L2 projection of (x^p, y x) is exact
    const int p = 2;
    const RTBasis basis(p, skewed);
    auto f = [](const Point& x) { return Point(x.x() * x.x(), x.y() * x.x()); };
    Vector c = Vector::Zero(basis.size());
    for (const auto& qp : skewed.quadrature(2 * p + 2))
        c += qp.w * basis.eval(qp.x) * f(qp.x);
    const Point x(0.25, 0.4);
    EXPECT_LT((basis.eval(x).transpose() * c - f(x)).norm(), 1e-11);
}
