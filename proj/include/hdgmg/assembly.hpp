/*
 * hdgmg -- hybridizable DG Stokes solver with homogeneous multigrid.
 *
 * Global trace space, assembly of the condensed skeleton system, right-hand
 * sides, reconstruction of the element fields and error/condition measures.
 */

#pragma once

#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "local_solver.hpp"
#include "mesh.hpp"
#include "problem.hpp"

namespace hdgmg {

using SparseMatrix  = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using PressureField = std::vector<Vector>;  // Q coefficients per triangle

/// Degree-p vector-valued trace space on the skeleton. Interior and Neumann
/// faces carry unknowns, Dirichlet faces carry the projected boundary data.
class TraceSpace
{
    const MeshLevel*     mesh_ = nullptr;
    int                  degree_ = 1;
    std::vector<index_t> offset_;     // first global dof of each face, or invalid_index
    std::vector<Vector>  dirichlet_;  // per face; empty for faces with unknowns
    index_t              size_ = 0;

public:
    TraceSpace() = default;

    TraceSpace(const MeshLevel& mesh, int p, const VectorField& u_D) : mesh_(&mesh), degree_(p)
    {
        detail::check_degree(p);
        const int nf = dofs_per_face();
        offset_.assign(mesh.faces.size(), invalid_index);
        dirichlet_.resize(mesh.faces.size());
        const EdgeBasis eb(p);
        for (const auto& f : mesh.faces)
        {
            if (f.kind != FaceKind::Dirichlet)
            {
                offset_[f.id] = size_;
                size_ += nf;
                continue;
            }
            // L2 projection; the edge basis is orthonormal w.r.t. ds/|F|
            Vector& d = dirichlet_[f.id];
            d.setZero(nf);
            for (const auto& qp : edge_quadrature(mesh.point(f.vertices[0]),
                                                  mesh.point(f.vertices[1]), max_quadrature_exactness))
            {
                const Point  g = u_D(qp.x);
                const Vector b = eb.eval(qp.s);
                for (int c = 0; c < 2; c++)
                    d.segment(c * (p + 1), p + 1) += qp.w * g(c) * b / f.length;
            }
        }
    }

    const MeshLevel& mesh() const { return *mesh_; }
    int              level() const { return mesh_->level; }
    int              degree() const { return degree_; }
    index_t          size() const { return size_; }
    int              dofs_per_face() const { return trace_dofs_per_face(degree_); }

    bool    has_unknowns(index_t face) const { return offset_[face] != invalid_index; }
    index_t offset(index_t face) const { return offset_[face]; }
    index_t dof(index_t face, int component, int mode) const
    {
        return offset_[face] + component * (degree_ + 1) + mode;
    }
    const Vector& dirichlet_values(index_t face) const { return dirichlet_[face]; }

    /// Local trace vector of triangle t. Dirichlet faces get their data if
    /// `lift` is set, zero otherwise.
    Vector gather(const Triangle& t, const Vector& lambda, bool lift) const
    {
        const int nf = dofs_per_face();
        Vector    local(3 * nf);
        for (int j = 0; j < 3; j++)
        {
            const index_t f = t.faces[j];
            if (has_unknowns(f))
                local.segment(j * nf, nf) = lambda.segment(offset_[f], nf);
            else if (lift)
                local.segment(j * nf, nf) = dirichlet_[f];
            else
                local.segment(j * nf, nf).setZero();
        }
        return local;
    }

    /// Adds the unknown-face rows of a local vector into a global vector.
    void scatter_add(const Triangle& t, const Vector& local, Vector& global) const
    {
        const int nf = dofs_per_face();
        for (int j = 0; j < 3; j++)
            if (has_unknowns(t.faces[j]))
                global.segment(offset_[t.faces[j]], nf) += local.segment(j * nf, nf);
    }
};

inline TraceSpace
build_trace_space(const MeshLevel& mesh, int p,
                  const VectorField& u_D = [](const Point&) { return Point(0, 0); })
{
    return TraceSpace(mesh, p, u_D);
}

struct CondensedSystem
{
    SparseMatrix matrix;
    int          level  = 0;
    int          degree = 0;
    double       dt     = 0.0;
    Method       method;

    index_t size() const { return static_cast<index_t>(matrix.rows()); }
};

struct DiscreteFields
{
    std::vector<Vector> L, u, p;
};

namespace detail {

inline void
add_local_matrix(const TraceSpace& space, const Triangle& t, const Matrix& a,
                 std::vector<Eigen::Triplet<double>>& triplets)
{
    const int nf = space.dofs_per_face();
    for (int i = 0; i < 3; i++)
    {
        if (!space.has_unknowns(t.faces[i]))
            continue;
        for (int j = 0; j < 3; j++)
        {
            if (!space.has_unknowns(t.faces[j]))
                continue;
            const index_t ri = space.offset(t.faces[i]), cj = space.offset(t.faces[j]);
            for (int r = 0; r < nf; r++)
                for (int c = 0; c < nf; c++)
                    triplets.emplace_back(ri + r, cj + c, a(i * nf + r, j * nf + c));
        }
    }
}

inline SparseMatrix
from_triplets(index_t n, const std::vector<Eigen::Triplet<double>>& triplets)
{
    SparseMatrix A(n, n);
    A.setFromTriplets(triplets.begin(), triplets.end());
    A.makeCompressed();
    return A;
}

/// <g_N, mu> on Neumann faces.
inline Vector
neumann_load(const TraceSpace& space, const ProblemData& data)
{
    const MeshLevel& mesh = space.mesh();
    const int        p    = space.degree();
    const EdgeBasis  eb(p);
    Vector           b = Vector::Zero(space.size());
    for (const auto& f : mesh.faces)
    {
        if (f.kind != FaceKind::Neumann)
            continue;
        const Triangle& t = mesh.triangles[f.cells[0]];
        int j = 0;
        while (t.faces[j] != f.id)
            j++;
        const Point n = mesh.outward_normal(t, j);
        for (const auto& qp : edge_quadrature(mesh.point(f.vertices[0]), mesh.point(f.vertices[1]),
                                              max_quadrature_exactness))
        {
            const Point  g  = data.g_N(qp.x, n);
            const Vector bk = eb.eval(qp.s);
            for (int c = 0; c < 2; c++)
                b.segment(space.dof(f.id, c, 0), p + 1) += qp.w * g(c) * bk;
        }
    }
    return b;
}

} // namespace detail

/// Condensed matrix A with <A lambda, mu> = a(lambda, mu) on the unknown faces.
inline CondensedSystem
assemble_condensed(const TraceSpace& space, const Method& method, double dt)
{
    const MeshLevel& mesh = space.mesh();
    std::vector<Eigen::Triplet<double>> triplets;
    const int nL = 3 * space.dofs_per_face();
    triplets.reserve(mesh.triangles.size() * nL * nL);
    for (const auto& t : mesh.triangles)
    {
        const LocalSolver solver(method, space.degree(), make_element(mesh, t), dt);
        detail::add_local_matrix(space, t, solver.condense().a_local, triplets);
    }
    return {detail::from_triplets(space.size(), triplets), mesh.level, space.degree(), dt, method};
}

/// b(mu) = (f, u mu) - 1/dt (p_prev, p mu) + <g_N, mu> - a(lambda_D, mu).
inline Vector
assemble_rhs(const TraceSpace& space, const Method& method, double dt, const ProblemData& data,
             const PressureField& p_prev)
{
    const MeshLevel& mesh = space.mesh();
    Vector           b    = detail::neumann_load(space, data);
    for (const auto& t : mesh.triangles)
    {
        const LocalSolver     solver(method, space.degree(), make_element(mesh, t), dt);
        const LocalSystem&    sys = solver.system();
        const ElementOperator op  = solver.condense();
        const auto            XU  = op.map_lambda.middleRows(sys.nW, sys.nV);
        const auto            XP  = op.map_lambda.bottomRows(sys.nQ);
        Vector local = XU.transpose() * solver.f_moments(data.f);
        if (!p_prev.empty())
            local -= XP.transpose() * (sys.M_Q * p_prev[t.id]) / dt;
        local -= op.a_local * space.gather(t, Vector::Zero(space.size()), true);
        space.scatter_add(t, local, b);
    }
    return b;
}

/// Element fields from the trace solution by the superposition of the local
/// solution maps.
inline DiscreteFields
reconstruct_fields(const TraceSpace& space, const Method& method, double dt, const Vector& lambda,
                   const PressureField& p_prev, const VectorField& f)
{
    const MeshLevel& mesh = space.mesh();
    DiscreteFields   fields;
    fields.L.resize(mesh.triangles.size());
    fields.u.resize(mesh.triangles.size());
    fields.p.resize(mesh.triangles.size());
    for (const auto& t : mesh.triangles)
    {
        const LocalSolver solver(method, space.degree(), make_element(mesh, t), dt);
        Vector x = solver.solve_lambda(space.gather(t, lambda, true)).stacked();
        x += solver.solve_f(solver.f_moments(f)).stacked();
        if (!p_prev.empty())
            x += solver.solve_m(p_prev[t.id]).stacked();
        const LocalState s = solver.split(x);
        fields.L[t.id]     = s.L;
        fields.u[t.id]     = s.u;
        fields.p[t.id]     = s.p;
    }
    return fields;
}

struct FieldErrors
{
    double u = 0.0, p = 0.0, L = 0.0;
};

/// L2 errors of the element fields against a closed-form solution.
inline FieldErrors
compute_errors(const MeshLevel& mesh, const Method& method, int p, const DiscreteFields& fields,
               const ExactSolution& exact)
{
    FieldErrors e;
    Matrix      wv, wd;
    for (const auto& t : mesh.triangles)
    {
        const Element     T = make_element(mesh, t);
        const LocalSpaces S(method, p, T.geometry);
        for (const auto& qp : T.geometry.quadrature(2 * p + 6))
        {
            S.w_eval(qp.x, wv, wd);
            const Vector Lx = wv.transpose() * fields.L[t.id];
            Eigen::Matrix2d L;
            L << Lx(0), Lx(1), Lx(2), Lx(3);
            const Point  u  = S.v_eval(qp.x).transpose() * fields.u[t.id];
            const double pr = S.q_eval(qp.x).dot(fields.p[t.id]);
            e.u += qp.w * (u - exact.u(qp.x)).squaredNorm();
            e.p += qp.w * std::pow(pr - exact.p(qp.x), 2);
            e.L += qp.w * (L - exact.L(qp.x)).squaredNorm();
        }
    }
    e.u = std::sqrt(e.u);
    e.p = std::sqrt(e.p);
    e.L = std::sqrt(e.L);
    return e;
}

/// Everything needed to run the outer iteration on one level: the condensed
/// matrix plus compact per-element maps for the pressure and the pressure
/// dependent part of the right-hand side.
class LevelProblem
{
    struct ElementData
    {
        Matrix X_p;  // nQ x nL   pressure from the local trace
        Matrix P_m;  // nQ x nQ   pressure from the previous pressure
        Vector p_f;  // nQ        pressure from the source
        Matrix R_m;  // nL x nQ   right-hand side from the previous pressure
    };

    TraceSpace               space_;
    Method                   method_;
    int                      degree_;
    double                   dt_;
    ProblemData              data_;
    CondensedSystem          system_;
    Vector                   b_fixed_;
    std::vector<ElementData> elements_;

public:
    LevelProblem(const MeshLevel& mesh, const Method& method, int p, double dt,
                 const ProblemData& data)
        : space_(mesh, p, data.u_D), method_(method), degree_(p), dt_(dt), data_(data)
    {
        std::vector<Eigen::Triplet<double>> triplets;
        const int nL = 3 * space_.dofs_per_face();
        triplets.reserve(mesh.triangles.size() * nL * nL);
        b_fixed_ = detail::neumann_load(space_, data);
        elements_.resize(mesh.triangles.size());
        const Vector none = Vector::Zero(space_.size());
        for (const auto& t : mesh.triangles)
        {
            const LocalSolver     solver(method, p, make_element(mesh, t), dt);
            const LocalSystem&    sys = solver.system();
            const ElementOperator op  = solver.condense();
            detail::add_local_matrix(space_, t, op.a_local, triplets);

            const Vector moments = solver.f_moments(data.f);
            ElementData& e       = elements_[t.id];
            e.X_p = op.map_lambda.bottomRows(sys.nQ);
            e.P_m = op.map_m.bottomRows(sys.nQ);
            e.p_f = op.map_f.bottomRows(sys.nQ) * moments;
            e.R_m = -e.X_p.transpose() * sys.M_Q / dt;

            Vector local = op.map_lambda.middleRows(sys.nW, sys.nV).transpose() * moments;
            local -= op.a_local * space_.gather(t, none, true);
            space_.scatter_add(t, local, b_fixed_);
        }
        system_ = {detail::from_triplets(space_.size(), triplets), mesh.level, p, dt, method};
    }

    const TraceSpace&      space() const { return space_; }
    const CondensedSystem& system() const { return system_; }
    const SparseMatrix&    matrix() const { return system_.matrix; }
    const Method&          method() const { return method_; }
    const ProblemData&     data() const { return data_; }
    const MeshLevel&       mesh() const { return space_.mesh(); }
    int                    degree() const { return degree_; }
    double                 dt() const { return dt_; }
    index_t                num_elements() const { return elements_.size(); }

    Vector rhs(const PressureField& p_prev) const
    {
        Vector b = b_fixed_;
        if (p_prev.empty())
            return b;
        for (const auto& t : mesh().triangles)
            space_.scatter_add(t, elements_[t.id].R_m * p_prev[t.id], b);
        return b;
    }

    PressureField pressure(const Vector& lambda, const PressureField& p_prev) const
    {
        PressureField p(elements_.size());
        for (const auto& t : mesh().triangles)
        {
            const ElementData& e = elements_[t.id];
            p[t.id]              = e.X_p * space_.gather(t, lambda, true) + e.p_f;
            if (!p_prev.empty())
                p[t.id] += e.P_m * p_prev[t.id];
        }
        return p;
    }

    DiscreteFields reconstruct(const Vector& lambda, const PressureField& p_prev) const
    {
        return reconstruct_fields(space_, method_, dt_, lambda, p_prev, data_.f);
    }
};

/// L2 norm of a pressure field; the cell basis is orthonormal.
inline double
pressure_norm(const PressureField& p)
{
    double sum = 0.0;
    for (const auto& c : p)
        sum += c.squaredNorm();
    return std::sqrt(sum);
}

inline double
pressure_distance(const PressureField& a, const PressureField& b)
{
    double sum = 0.0;
    for (std::size_t t = 0; t < a.size(); t++)
        sum += (a[t] - b[t]).squaredNorm();
    return std::sqrt(sum);
}

struct ConditionEstimate
{
    double lambda_min = 0.0, lambda_max = 0.0, kappa = 0.0;
    int    iterations = 0;
    bool   converged  = false;
};

/// Extreme eigenvalues of an SPD matrix: power iteration for the largest,
/// inverse iteration with a Cholesky factorization for the smallest.
inline ConditionEstimate
estimate_condition_number(const SparseMatrix& A, double tol = 1e-6, int max_iter = 20000)
{
    const Eigen::Index n = A.rows();
    if (n == 0)
        throw std::invalid_argument("empty matrix");
    const Eigen::SparseMatrix<double> Ac = A;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(Ac);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("matrix is not positive definite");

    std::mt19937                           rng(1234);
    std::uniform_real_distribution<double> U(0.5, 1.5);
    Vector start(n);
    for (Eigen::Index i = 0; i < n; i++)
        start(i) = U(rng);
    start.normalize();

    ConditionEstimate est;
    bool max_ok = false, min_ok = false;

    // Rayleigh quotients converge monotonically; stop on small relative change
    auto iterate = [&](auto apply, double& theta, bool& ok) {
        Vector v = start;
        theta    = 0.0;
        for (int k = 1; k <= max_iter; k++)
        {
            Vector w           = apply(v);
            const double next  = v.dot(w);
            v                  = w.normalized();
            est.iterations     = std::max(est.iterations, k);
            if (k > 1 && std::abs(next - theta) <= 1e-2 * tol * std::abs(next))
            {
                theta = next;
                ok    = true;
                return;
            }
            theta = next;
        }
    };
    iterate([&](const Vector& v) { return Vector(A * v); }, est.lambda_max, max_ok);
    double inv = 0.0;
    iterate([&](const Vector& v) { return Vector(llt.solve(v)); }, inv, min_ok);
    est.lambda_min = 1.0 / inv;
    est.kappa      = est.lambda_max / est.lambda_min;
    est.converged  = max_ok && min_ok;
    return est;
}

inline ConditionEstimate
estimate_condition_number(const CondensedSystem& system, double tol = 1e-6)
{
    return estimate_condition_number(system.matrix, tol);
}

/// Coordinate text format, 1-based indices.
inline void
write_matrix(std::ostream& os, const SparseMatrix& A)
{
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
    os.precision(17);
    for (Eigen::Index r = 0; r < A.outerSize(); r++)
        for (SparseMatrix::InnerIterator it(A, r); it; ++it)
            os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

} // namespace hdgmg
