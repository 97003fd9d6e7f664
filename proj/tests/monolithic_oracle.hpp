// Monolithic reference solve for the assembled condensed system.
#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/SparseLU>

#include "hdgmg/assembly.hpp"
#include "local_oracle.hpp"

namespace hdgmg::oracle {

// Monolithic (uncondensed) system: all element unknowns plus the trace on
// faces without Dirichlet data, built from the element residual oracle.
struct MonolithicSolution
{
    Vector              lambda;
    std::vector<Vector> state;
};

inline MonolithicSolution
solve_monolithic(const MeshLevel& mesh, const Method& method, int p, double dt,
                 const ProblemData& data, const PressureField& m)
{
    const int nf = trace_dofs_per_face(p);
    const int nS = method.dim_state(p);
    const int nT = static_cast<int>(mesh.triangles.size());

    // own numbering of the trace unknowns and Dirichlet data
    std::vector<long> offset(mesh.faces.size(), -1);
    long              nL = 0;
    std::vector<Vector> dirichlet(mesh.faces.size());
    const EdgeBasis     eb(p);
    for (const auto& f : mesh.faces)
    {
        const Point a = mesh.point(f.vertices[0]), b = mesh.point(f.vertices[1]);
        if (f.kind != FaceKind::Dirichlet)
        {
            offset[f.id] = nL;
            nL += nf;
            continue;
        }
        // solve the face mass system instead of relying on orthonormality
        Matrix M = Matrix::Zero(p + 1, p + 1);
        Matrix r = Matrix::Zero(p + 1, 2);
        for (const auto& qp : edge_quadrature(a, b, max_quadrature_exactness))
        {
            const Vector bk = eb.eval(qp.s);
            M += qp.w * bk * bk.transpose();
            r += qp.w * bk * data.u_D(qp.x).transpose();
        }
        const Matrix c = M.ldlt().solve(r);
        dirichlet[f.id].resize(nf);
        dirichlet[f.id] << c.col(0), c.col(1);
    }

    const long n = nT * nS + nL;
    std::vector<Eigen::Triplet<double>> trip;
    Vector rhs = Vector::Zero(n);

    for (const auto& t : mesh.triangles)
    {
        const Element T = make_element(mesh, t);
        const Oracle  o{method, p, T, dt};
        const Matrix  K = o.jacobian_state(), E = o.jacobian_trace();
        const Matrix  Fx = o.flux_state(), Fl = o.flux_trace();
        const long    row0 = t.id * nS;
        // element residual with zero unknowns carries f and m
        const Vector r0 = o.residual(Vector::Zero(nS), Vector::Zero(3 * nf), data.f,
                                     m.empty() ? Vector::Zero(dim_P(p)) : m[t.id]);
        Vector lD = Vector::Zero(3 * nf);
        for (int j = 0; j < 3; j++)
            if (offset[t.faces[j]] < 0)
                lD.segment(j * nf, nf) = dirichlet[t.faces[j]];
        rhs.segment(row0, nS) -= r0 + E * lD;
        for (int a = 0; a < nS; a++)
            for (int b = 0; b < nS; b++)
                trip.emplace_back(row0 + a, row0 + b, K(a, b));
        for (int j = 0; j < 3; j++)
        {
            const long fj = offset[t.faces[j]];
            for (int a = 0; a < nf; a++)
            {
                for (int b = 0; b < nS; b++)
                {
                    if (fj >= 0)
                    {
                        trip.emplace_back(row0 + b, nT * nS + fj + a, E(b, j * nf + a));
                        trip.emplace_back(nT * nS + fj + a, row0 + b, Fx(j * nf + a, b));
                    }
                }
                if (fj < 0)
                    continue;
                for (int i = 0; i < 3; i++)
                {
                    const long fi = offset[t.faces[i]];
                    for (int b = 0; b < nf; b++)
                        if (fi >= 0)
                            trip.emplace_back(nT * nS + fj + a, nT * nS + fi + b,
                                              Fl(j * nf + a, i * nf + b));
                }
                rhs(nT * nS + fj + a) -= Fl.row(j * nf + a).dot(lD);
            }
        }
    }
    // Neumann traction
    for (const auto& f : mesh.faces)
    {
        if (f.kind != FaceKind::Neumann)
            continue;
        const Triangle& t = mesh.triangles[f.cells[0]];
        const Element   T = make_element(mesh, t);
        int j = 0;
        while (t.faces[j] != f.id)
            j++;
        for (const auto& qp : edge_quadrature(T.faces[j].a, T.faces[j].b, max_quadrature_exactness))
        {
            const Point  g  = data.g_N(qp.x, T.faces[j].normal);
            const Vector bk = eb.eval(qp.s);
            for (int c = 0; c < 2; c++)
                rhs.segment(nT * nS + offset[f.id] + c * (p + 1), p + 1) += qp.w * g(c) * bk;
        }
    }

    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("monolithic oracle factorization failed");
    const Vector x = lu.solve(rhs);

    MonolithicSolution sol;
    sol.lambda = x.tail(nL);
    for (int t = 0; t < nT; t++)
        sol.state.push_back(x.segment(t * nS, nS));
    return sol;
}

} // namespace hdgmg::oracle
