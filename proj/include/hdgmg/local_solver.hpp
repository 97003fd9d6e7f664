/*
 * hdgmg -- hybridizable DG Stokes solver with homogeneous multigrid.
 *
 * Element-local HDG problems for the SFH, RT-H and BDM-H methods and their
 * static condensation onto the face unknowns.
 *
 * On an element T the local unknowns are (L, u, p) in W_T x V_T x Q_T and the
 * local equations read, for all (G, v, q),
 *
 *   (L, G) + (u, div G)                        = <<lambda, G n>>
 *   (-div L + grad p, v) + <<S(u - lambda), v>> = (f, v)
 *   1/dt (p, q) - (u, grad q)                  = -<<lambda . n, q>> + 1/dt (m, q)
 *
 * where m is the pressure of the previous pseudo-time step.
 */

#pragma once

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "basis.hpp"
#include "mesh.hpp"

namespace hdgmg {

using VectorField = std::function<Point(const Point&)>;
using ScalarField = std::function<double(const Point&)>;
using TensorField = std::function<Eigen::Matrix2d(const Point&)>;

/// Discretization variant. All three give the same condensed operator.
struct Method
{
    enum class Family { SFH, RTH, BDMH };

    Family family      = Family::SFH;
    double tau_star    = 1.0;
    double tau_offstar = 0.0;  ///< nonzero only for negative-control experiments

    static Method sfh(double tau = 1.0)
    {
        if (!(tau > 0.0))
            throw std::invalid_argument("SFH needs a positive stabilization parameter");
        return {Family::SFH, tau, 0.0};
    }
    static Method rth() { return {Family::RTH, 0.0, 0.0}; }
    static Method bdmh() { return {Family::BDMH, 0.0, 0.0}; }

    std::string name() const
    {
        switch (family)
        {
            case Family::SFH:  return "SFH";
            case Family::RTH:  return "RT-H";
            case Family::BDMH: return "BDM-H";
        }
        return "?";
    }

    bool rt_gradient() const { return family == Family::RTH; }
    int  velocity_degree(int p) const { return family == Family::BDMH ? p - 1 : p; }

    int dim_W(int p) const { return rt_gradient() ? 2 * dim_RT(p) : 4 * dim_P(p); }
    int dim_V(int p) const { return 2 * dim_P(velocity_degree(p)); }
    int dim_Q(int p) const { return dim_P(p); }
    int dim_state(int p) const { return dim_W(p) + dim_V(p) + dim_Q(p); }

    double tau(int local_face, int star_face) const
    {
        if (family != Family::SFH)
            return 0.0;
        return local_face == star_face ? tau_star : tau_offstar;
    }
};

inline Method
parse_method(const std::string& name, double tau = 1.0)
{
    if (name == "sfh" || name == "SFH")
        return Method::sfh(tau);
    if (name == "rth" || name == "rt-h" || name == "RT-H")
        return Method::rth();
    if (name == "bdmh" || name == "bdm-h" || name == "BDM-H")
        return Method::bdmh();
    throw std::invalid_argument("unknown method '" + name + "'");
}

/// Face of an element, parametrized from `a` (lower global vertex id) to `b`.
struct FaceGeometry
{
    Point  a, b;
    Point  normal;  // outward w.r.t. the element
    double length;
};

struct Element
{
    TriangleGeometry            geometry;
    std::array<FaceGeometry, 3> faces;
    int                         star_face = 0;
};

inline Element
make_element(const MeshLevel& mesh, const Triangle& t)
{
    Element e;
    e.geometry  = {mesh.point(t.vertices[0]), mesh.point(t.vertices[1]), mesh.point(t.vertices[2])};
    e.star_face = t.star_face;
    for (int j = 0; j < 3; j++)
    {
        const Face& f = mesh.faces[t.faces[j]];
        e.faces[j]    = {mesh.point(f.vertices[0]), mesh.point(f.vertices[1]),
                         mesh.outward_normal(t, j), f.length};
    }
    return e;
}

/// Element from three counterclockwise points; faces parametrized along
/// the local vertex order.
inline Element
make_element(const Point& v0, const Point& v1, const Point& v2, int star_face = 0)
{
    Element e;
    e.geometry  = {v0, v1, v2};
    e.star_face = star_face;
    const std::array<Point, 3> v = {v0, v1, v2};
    for (int j = 0; j < 3; j++)
    {
        const Point d = v[(j + 1) % 3] - v[j];
        e.faces[j]    = {v[j], v[(j + 1) % 3], Point(d.y(), -d.x()) / d.norm(), d.norm()};
    }
    return e;
}

/// Local function spaces W_T, V_T, Q_T of a method on one element.
class LocalSpaces
{
    Method    method_;
    int       p_;
    CellBasis scalar_;
    std::optional<RTBasis> rt_;
    int       nP_, nPV_;

public:
    LocalSpaces(const Method& method, int p, const TriangleGeometry& T)
        : method_(method), p_(p), scalar_(p, T), nP_(dim_P(p)),
          nPV_(dim_P(method.velocity_degree(p)))
    {
        detail::check_degree(p);
        if (method.rt_gradient())
            rt_.emplace(p, T);
    }

    const Method& method() const { return method_; }
    int degree() const { return p_; }
    int nW() const { return method_.dim_W(p_); }
    int nV() const { return method_.dim_V(p_); }
    int nQ() const { return method_.dim_Q(p_); }
    const CellBasis& scalar_basis() const { return scalar_; }

    /// nW x 4 values (row-major 2x2 entries) and nW x 2 row divergences.
    void w_eval(const Point& x, Matrix& values, Matrix& div) const
    {
        values.setZero(nW(), 4);
        div.setZero(nW(), 2);
        if (rt_)
        {
            const Matrix r  = rt_->eval(x);
            const Vector dr = rt_->div(x);
            const int    n  = rt_->size();
            for (int i = 0; i < 2; i++)
                for (int k = 0; k < n; k++)
                {
                    values(i * n + k, 2 * i)     = r(k, 0);
                    values(i * n + k, 2 * i + 1) = r(k, 1);
                    div(i * n + k, i)            = dr(k);
                }
            return;
        }
        const Vector phi = scalar_.eval(x);
        const Matrix g   = scalar_.grad(x);
        for (int i = 0; i < 2; i++)
            for (int j = 0; j < 2; j++)
                for (int k = 0; k < nP_; k++)
                {
                    const int a      = (2 * i + j) * nP_ + k;
                    values(a, 2 * i + j) = phi(k);
                    div(a, i)            = g(k, j);
                }
    }

    /// nV x 2 values; velocity uses the leading nPV scalar functions.
    Matrix v_eval(const Point& x) const
    {
        const Vector phi = scalar_.eval(x);
        Matrix       values = Matrix::Zero(nV(), 2);
        for (int c = 0; c < 2; c++)
            for (int k = 0; k < nPV_; k++)
                values(c * nPV_ + k, c) = phi(k);
        return values;
    }

    Vector q_eval(const Point& x) const { return scalar_.eval(x); }
    Matrix q_grad(const Point& x) const { return scalar_.grad(x); }
};

/// Coefficients of (L, u, p) on one element.
struct LocalState
{
    Vector L, u, p;

    static LocalState split(const Vector& x, int nW, int nV, int nQ)
    {
        return {x.head(nW), x.segment(nW, nV), x.tail(nQ)};
    }
    Vector stacked() const
    {
        Vector x(L.size() + u.size() + p.size());
        x << L, u, p;
        return x;
    }
};

/// Condensed element operator and the linear maps back to the local fields.
struct ElementOperator
{
    Matrix a_local;     // n_lambda x n_lambda, symmetric
    Matrix map_lambda;  // state x n_lambda
    Matrix map_f;       // state x dim V_T  (acts on moments (f, v))
    Matrix map_m;       // state x dim Q_T  (acts on coefficients of m)
};

/// Dense local saddle-point system of one element.
///
/// Rows/columns of K are ordered [W | V | Q]; `E` stacks the right-hand
/// sides generated by the trace basis functions, `flux` gives the element
/// contribution to the conservation equation:
///   flux(lambda) = <<(L - p I) n - S(u - lambda), mu>>  =  flux_state * x + T_ll * lambda.
struct LocalSystem
{
    int    nW = 0, nV = 0, nQ = 0, nL = 0;
    Matrix K;
    Matrix E;           // (nW+nV+nQ) x nL
    Matrix flux_state;  // nL x (nW+nV+nQ)
    Matrix T_ll;        // nL x nL
    Matrix M_W, M_Q;
    Matrix S_uu;        // nV x nV  stabilization mass on V
    Matrix S_ul;        // nV x nL  stabilization coupling to lambda
};

inline int
trace_dofs_per_face(int p)
{
    return 2 * (p + 1);
}

/// Solves the element-local problems of one element. The factorization of the
/// local matrix is reused for the trace, source and pressure right-hand sides.
class LocalSolver
{
    LocalSpaces  spaces_;
    Element      element_;
    double       dt_;
    LocalSystem  sys_;
    Eigen::PartialPivLU<Matrix> lu_;

    int cell_exactness() const { return 2 * spaces_.degree() + 2; }
    int face_exactness() const { return 2 * spaces_.degree() + 1; }

    void assemble()
    {
        const int p  = spaces_.degree();
        const int nW = spaces_.nW(), nV = spaces_.nV(), nQ = spaces_.nQ();
        const int nf = trace_dofs_per_face(p);
        const int nL = 3 * nf;
        const int nS = nW + nV + nQ;
        sys_.nW = nW;
        sys_.nV = nV;
        sys_.nQ = nQ;
        sys_.nL = nL;

        Matrix M_W = Matrix::Zero(nW, nW), B = Matrix::Zero(nW, nV);
        Matrix C = Matrix::Zero(nV, nQ), M_Q = Matrix::Zero(nQ, nQ);
        Matrix wv, wd;
        for (const auto& qp : element_.geometry.quadrature(cell_exactness()))
        {
            spaces_.w_eval(qp.x, wv, wd);
            const Matrix v  = spaces_.v_eval(qp.x);
            const Vector q  = spaces_.q_eval(qp.x);
            const Matrix gq = spaces_.q_grad(qp.x);
            M_W.noalias() += qp.w * wv * wv.transpose();
            B.noalias()   += qp.w * wd * v.transpose();
            C.noalias()   += qp.w * v * gq.transpose();
            M_Q.noalias() += qp.w * q * q.transpose();
        }

        Matrix E1 = Matrix::Zero(nW, nL), E2 = Matrix::Zero(nV, nL), E3 = Matrix::Zero(nQ, nL);
        Matrix S_uu = Matrix::Zero(nV, nV), T_ll = Matrix::Zero(nL, nL);
        const EdgeBasis eb(p);
        for (int j = 0; j < 3; j++)
        {
            const FaceGeometry& F   = element_.faces[j];
            const double        tau = spaces_.method().tau(j, element_.star_face);
            for (const auto& qp : edge_quadrature(F.a, F.b, face_exactness()))
            {
                spaces_.w_eval(qp.x, wv, wd);
                const Matrix v = spaces_.v_eval(qp.x);
                const Vector q = spaces_.q_eval(qp.x);
                const Vector b = eb.eval(qp.s);
                // (G n)_c for every W basis function
                Matrix Gn(nW, 2);
                Gn.col(0) = wv.col(0) * F.normal.x() + wv.col(1) * F.normal.y();
                Gn.col(1) = wv.col(2) * F.normal.x() + wv.col(3) * F.normal.y();
                for (int c = 0; c < 2; c++)
                    for (int k = 0; k <= p; k++)
                    {
                        const int mu = j * nf + c * (p + 1) + k;
                        E1.col(mu) += qp.w * b(k) * Gn.col(c);
                        E3.col(mu) -= qp.w * b(k) * F.normal(c) * q;
                        if (tau != 0.0)
                        {
                            E2.col(mu) += tau * qp.w * b(k) * v.col(c);
                            for (int k2 = 0; k2 <= p; k2++)
                                T_ll(mu, j * nf + c * (p + 1) + k2) += tau * qp.w * b(k) * b(k2);
                        }
                    }
                if (tau != 0.0)
                    S_uu.noalias() += tau * qp.w * v * v.transpose();
            }
        }

        sys_.K = Matrix::Zero(nS, nS);
        sys_.K.block(0, 0, nW, nW)        = M_W;
        sys_.K.block(0, nW, nW, nV)       = B;
        sys_.K.block(nW, 0, nV, nW)       = -B.transpose();
        sys_.K.block(nW, nW, nV, nV)      = S_uu;
        sys_.K.block(nW, nW + nV, nV, nQ) = C;
        sys_.K.block(nW + nV, nW, nQ, nV) = -C.transpose();
        sys_.K.block(nW + nV, nW + nV, nQ, nQ) = M_Q / dt_;

        sys_.E.resize(nS, nL);
        sys_.E << E1, E2, E3;
        sys_.flux_state.resize(nL, nS);
        sys_.flux_state << E1.transpose(), -E2.transpose(), E3.transpose();
        sys_.T_ll = T_ll;
        sys_.M_W  = M_W;
        sys_.M_Q  = M_Q;
        sys_.S_uu = S_uu;
        sys_.S_ul = E2;
    }

public:
    LocalSolver(const Method& method, int p, const Element& element, double dt)
        : spaces_(method, p, element.geometry), element_(element), dt_(dt)
    {
        if (!(dt > 0.0))
            throw std::invalid_argument("time step must be positive");
        assemble();
        lu_.compute(sys_.K);
        const double rcond = lu_.rcond();
        if (!(rcond > 1e-14))
            throw std::runtime_error("singular local system (rcond " + std::to_string(rcond) + ")");
    }

    const LocalSpaces& spaces() const { return spaces_; }
    const LocalSystem& system() const { return sys_; }
    const Element&     element() const { return element_; }
    double             dt() const { return dt_; }
    int                n_lambda() const { return sys_.nL; }

    LocalState split(const Vector& x) const { return LocalState::split(x, sys_.nW, sys_.nV, sys_.nQ); }

    /// Local solution generated by the trace lambda on the element boundary.
    LocalState solve_lambda(const Vector& lambda) const
    {
        if (lambda.size() != sys_.nL)
            throw std::invalid_argument("trace vector has the wrong dimension");
        return split(lu_.solve(sys_.E * lambda));
    }

    /// Local solution generated by the source; `f_moments` are (f, v) for v in V_T.
    LocalState solve_f(const Vector& f_moments) const
    {
        Vector rhs = Vector::Zero(sys_.K.rows());
        rhs.segment(sys_.nW, sys_.nV) = f_moments;
        return split(lu_.solve(rhs));
    }

    /// Local solution generated by the previous pressure m (coefficients in Q_T).
    LocalState solve_m(const Vector& m) const
    {
        Vector rhs = Vector::Zero(sys_.K.rows());
        rhs.tail(sys_.nQ) = sys_.M_Q * m / dt_;
        return split(lu_.solve(rhs));
    }

    /// (f, v) for all v in V_T.
    Vector f_moments(const VectorField& f) const
    {
        Vector moments = Vector::Zero(sys_.nV);
        for (const auto& qp : element_.geometry.quadrature(2 * spaces_.degree() + 10))
            moments.noalias() += qp.w * spaces_.v_eval(qp.x) * f(qp.x);
        return moments;
    }

    /// Element-wise L2 projection of a scalar function onto Q_T.
    Vector project_q(const ScalarField& g) const
    {
        Vector rhs = Vector::Zero(sys_.nQ);
        for (const auto& qp : element_.geometry.quadrature(2 * spaces_.degree() + 6))
            rhs.noalias() += qp.w * g(qp.x) * spaces_.q_eval(qp.x);
        return sys_.M_Q.ldlt().solve(rhs);
    }

    /// Condensed matrix via the energy form
    ///   (L l_i, L l_j) + <<S(u l_i - l_i), u l_j - l_j>> + 1/dt (p l_i, p l_j),
    /// together with the solution maps.
    ElementOperator condense() const
    {
        const int nW = sys_.nW, nV = sys_.nV, nQ = sys_.nQ, nS = nW + nV + nQ;
        ElementOperator op;
        op.map_lambda = lu_.solve(sys_.E);

        const auto XL = op.map_lambda.topRows(nW);
        const auto XU = op.map_lambda.middleRows(nW, nV);
        const auto XP = op.map_lambda.bottomRows(nQ);
        Matrix a = XL.transpose() * sys_.M_W * XL + XP.transpose() * sys_.M_Q * XP / dt_;
        if (sys_.S_uu.squaredNorm() > 0.0)
        {
            const Matrix cross = XU.transpose() * sys_.S_ul;
            a += XU.transpose() * sys_.S_uu * XU - cross - cross.transpose() + sys_.T_ll;
        }
        op.a_local = 0.5 * (a + a.transpose());

        Matrix rhs_f = Matrix::Zero(nS, nV);
        rhs_f.middleRows(nW, nV).setIdentity();
        op.map_f = lu_.solve(rhs_f);
        Matrix rhs_m = Matrix::Zero(nS, nQ);
        rhs_m.bottomRows(nQ) = sys_.M_Q / dt_;
        op.map_m = lu_.solve(rhs_m);
        return op;
    }

    // pointwise evaluation of a local state
    Eigen::Matrix2d eval_L(const LocalState& s, const Point& x) const
    {
        Matrix wv, wd;
        spaces_.w_eval(x, wv, wd);
        const Vector flat = wv.transpose() * s.L;
        Eigen::Matrix2d L;
        L << flat(0), flat(1), flat(2), flat(3);
        return L;
    }
    Point  eval_u(const LocalState& s, const Point& x) const { return spaces_.v_eval(x).transpose() * s.u; }
    double eval_p(const LocalState& s, const Point& x) const { return spaces_.q_eval(x).dot(s.p); }
};

/// Convenience wrappers with the signatures of the individual local problems.
inline LocalState
solve_local_lambda(const Method& method, int p, const Element& T, double dt, const Vector& lambda)
{
    return LocalSolver(method, p, T, dt).solve_lambda(lambda);
}

inline LocalState
solve_local_f(const Method& method, int p, const Element& T, double dt, const Vector& f_moments)
{
    return LocalSolver(method, p, T, dt).solve_f(f_moments);
}

inline LocalState
solve_local_m(const Method& method, int p, const Element& T, double dt, const Vector& m)
{
    return LocalSolver(method, p, T, dt).solve_m(m);
}

inline ElementOperator
condense(const Method& method, int p, const Element& T, double dt)
{
    return LocalSolver(method, p, T, dt).condense();
}

} // namespace hdgmg
