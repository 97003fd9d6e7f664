/*
 * hdgmg -- hybridizable DG Stokes solver with homogeneous multigrid.
 *
 * Injection between nested trace spaces, block smoothers on face blocks and
 * the V-cycle with rediscretized coarse operators.
 */

#pragma once

#include <cmath>
#include <memory>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "assembly.hpp"
#include "mesh.hpp"

namespace hdgmg {

/// Linear: on every fine face, the linear interpolant of the coarse skeleton
/// function at the face end points (averaged at coarse vertices, zero on the
/// closed Dirichlet boundary); higher modes are zero.
/// Polynomial: as Linear on faces inside coarse cells, but halves of coarse
/// faces receive the exact restriction of the coarse polynomial.
enum class InjectionKind { Linear, Polynomial };

inline std::string
to_string(InjectionKind kind)
{
    return kind == InjectionKind::Linear ? "linear" : "polynomial";
}

inline InjectionKind
parse_injection(const std::string& name)
{
    if (name == "linear")
        return InjectionKind::Linear;
    if (name == "polynomial")
        return InjectionKind::Polynomial;
    throw std::invalid_argument("unknown injection '" + name + "'");
}

inline SparseMatrix
build_injection(const TraceSpace& coarse, const TraceSpace& fine, const MeshHierarchy& hierarchy,
                InjectionKind kind = InjectionKind::Polynomial)
{
    if (fine.level() != coarse.level() + 1 || fine.degree() != coarse.degree())
        throw std::invalid_argument("injection needs consecutive levels of equal degree");
    const MeshLevel& cm = coarse.mesh();
    const MeshLevel& fm = fine.mesh();
    if (&hierarchy.level(coarse.level()) != &cm || &hierarchy.level(fine.level()) != &fm)
        throw std::invalid_argument("trace spaces do not belong to the hierarchy");

    const int     p  = coarse.degree();
    const index_t nv = cm.vertices.size();
    const Vector  at_start = EdgeBasis(p).eval(0.0);
    const Vector  at_end   = EdgeBasis(p).eval(1.0);
    const Vector  at_mid   = EdgeBasis(p).eval(0.5);

    std::vector<std::vector<index_t>> vertex_faces(nv);
    std::vector<bool>                 on_dirichlet(nv, false);
    for (const auto& f : cm.faces)
        for (index_t v : f.vertices)
        {
            vertex_faces[v].push_back(f.id);
            if (f.kind == FaceKind::Dirichlet)
                on_dirichlet[v] = true;
        }

    // value of component c of the coarse function at fine vertex v, as a
    // sparse combination of coarse dofs
    using Row = std::vector<std::pair<index_t, double>>;
    auto point_value = [&](index_t v, int c) {
        Row row;
        if (v >= nv)
        {
            const index_t cf = v - nv;
            if (!coarse.has_unknowns(cf))
                return row;
            for (int k = 0; k <= p; k++)
                row.emplace_back(coarse.dof(cf, c, k), at_mid(k));
            return row;
        }
        if (on_dirichlet[v])
            return row;
        const double w = 1.0 / vertex_faces[v].size();
        for (index_t cf : vertex_faces[v])
        {
            const Vector& b = cm.faces[cf].vertices[0] == v ? at_start : at_end;
            for (int k = 0; k <= p; k++)
                row.emplace_back(coarse.dof(cf, c, k), w * b(k));
        }
        return row;
    };

    // restriction of the coarse edge basis to the two halves, in the fine
    // face parameter (which starts at the coarse end point)
    const EdgeBasis edge(p);
    Matrix          halves[2];
    for (int half = 0; half < 2; half++)
    {
        halves[half] = Matrix::Zero(p + 1, p + 1);
        for (const auto& qp : edge_quadrature(2 * p))
        {
            const double t = half == 0 ? 0.5 * qp.s : 1.0 - 0.5 * qp.s;
            halves[half] += qp.w * edge.eval(qp.s) * edge.eval(t).transpose();
        }
    }
    const std::vector<FaceParent>& parents = hierarchy.parents_of(fine.level());

    std::vector<Eigen::Triplet<double>> triplets;
    const double slope = 1.0 / (2.0 * std::sqrt(3.0));
    for (const auto& f : fm.faces)
    {
        if (!fine.has_unknowns(f.id))
            continue;
        const FaceParent& parent = parents[f.id];
        if (kind == InjectionKind::Polynomial && parent.kind == FaceParent::Kind::HalfOfCoarseFace)
        {
            if (!coarse.has_unknowns(parent.coarse))
                continue;
            const Matrix& R = halves[parent.half];
            for (int c = 0; c < 2; c++)
                for (int i = 0; i <= p; i++)
                    for (int k = 0; k <= p; k++)
                        if (std::abs(R(i, k)) > 1e-14)
                            triplets.emplace_back(fine.dof(f.id, c, i),
                                                  coarse.dof(parent.coarse, c, k), R(i, k));
            continue;
        }
        for (int c = 0; c < 2; c++)
        {
            for (const auto& [j, w] : point_value(f.vertices[0], c))
            {
                triplets.emplace_back(fine.dof(f.id, c, 0), j, 0.5 * w);
                triplets.emplace_back(fine.dof(f.id, c, 1), j, -slope * w);
            }
            for (const auto& [j, w] : point_value(f.vertices[1], c))
            {
                triplets.emplace_back(fine.dof(f.id, c, 0), j, 0.5 * w);
                triplets.emplace_back(fine.dof(f.id, c, 1), j, slope * w);
            }
        }
    }
    SparseMatrix I(fine.size(), coarse.size());
    I.setFromTriplets(triplets.begin(), triplets.end());
    I.makeCompressed();
    return I;
}

enum class SmootherKind { Jacobi, GaussSeidel, SymmetricGaussSeidel };

inline std::string
to_string(SmootherKind kind)
{
    switch (kind)
    {
        case SmootherKind::Jacobi:               return "jacobi";
        case SmootherKind::GaussSeidel:          return "gauss-seidel";
        case SmootherKind::SymmetricGaussSeidel: return "symmetric-gauss-seidel";
    }
    return "?";
}

inline SmootherKind
parse_smoother(const std::string& name)
{
    if (name == "jacobi")
        return SmootherKind::Jacobi;
    if (name == "gauss-seidel" || name == "gs")
        return SmootherKind::GaussSeidel;
    if (name == "symmetric-gauss-seidel" || name == "sgs")
        return SmootherKind::SymmetricGaussSeidel;
    throw std::invalid_argument("unknown smoother '" + name + "'");
}

/// Gauss-Seidel pre-smoothing sweeps forward and post-smoothing backward, so
/// the V-cycle is symmetric. The symmetric variant does both in every step.
struct SmootherConfig
{
    SmootherKind kind  = SmootherKind::GaussSeidel;
    int          steps = 4;
    double       omega = 2.0 / 3.0;  ///< Jacobi damping

    void validate() const
    {
        if (steps < 1)
            throw std::invalid_argument("smoothing steps must be at least 1");
        if (!(omega > 0.0 && omega <= 1.0))
            throw std::invalid_argument("Jacobi damping must lie in (0,1]");
    }
};

enum class Sweep { Forward, Backward };

/// Block relaxation with one block per face.
class BlockSmoother
{
    const SparseMatrix* A_ = nullptr;
    int                 block_ = 1;
    std::vector<Matrix> inverse_;

public:
    BlockSmoother() = default;

    BlockSmoother(const SparseMatrix& A, int block) : A_(&A), block_(block)
    {
        if (A.rows() % block != 0)
            throw std::invalid_argument("matrix size is not a multiple of the block size");
        const Eigen::Index nb = A.rows() / block;
        inverse_.resize(nb);
        for (Eigen::Index i = 0; i < nb; i++)
        {
            const Matrix D = Matrix(A.block(i * block, i * block, block, block));
            Eigen::LLT<Matrix> llt(D);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("singular diagonal block " + std::to_string(i));
            inverse_[i] = llt.solve(Matrix::Identity(block, block));
        }
    }

    Eigen::Index num_blocks() const { return static_cast<Eigen::Index>(inverse_.size()); }

    void jacobi(const Vector& b, Vector& x, double omega) const
    {
        const Vector r = b - *A_ * x;
        for (Eigen::Index i = 0; i < num_blocks(); i++)
            x.segment(i * block_, block_) += omega * inverse_[i] * r.segment(i * block_, block_);
    }

    void gauss_seidel(const Vector& b, Vector& x, Sweep sweep) const
    {
        const Eigen::Index nb = num_blocks();
        Vector r(block_);
        for (Eigen::Index k = 0; k < nb; k++)
        {
            const Eigen::Index i = sweep == Sweep::Forward ? k : nb - 1 - k;
            for (int l = 0; l < block_; l++)
            {
                const Eigen::Index row = i * block_ + l;
                double             s   = b(row);
                for (SparseMatrix::InnerIterator it(*A_, row); it; ++it)
                    s -= it.value() * x(it.col());
                r(l) = s;
            }
            x.segment(i * block_, block_) += inverse_[i] * r;
        }
    }
};

/// One sweep of the configured relaxation; `post` selects the post-smoothing order.
inline void
smooth(const BlockSmoother& smoother, const SmootherConfig& config, const Vector& b, Vector& x,
       bool post = false)
{
    for (int s = 0; s < config.steps; s++)
        switch (config.kind)
        {
            case SmootherKind::Jacobi:
                smoother.jacobi(b, x, config.omega);
                break;
            case SmootherKind::GaussSeidel:
                smoother.gauss_seidel(b, x, post ? Sweep::Backward : Sweep::Forward);
                break;
            case SmootherKind::SymmetricGaussSeidel:
                smoother.gauss_seidel(b, x, post ? Sweep::Backward : Sweep::Forward);
                smoother.gauss_seidel(b, x, post ? Sweep::Forward : Sweep::Backward);
                break;
        }
}

/// Per-level condensed systems (each assembled on its own level), injections
/// between consecutive levels and a direct solver on level 1.
class MultigridHierarchy
{
    struct Level
    {
        TraceSpace    space;
        SparseMatrix  A;
        SparseMatrix  I;   // from the next coarser level; empty on level 1
        SparseMatrix  It;  // restriction
        std::unique_ptr<BlockSmoother> smoother;
    };

    const MeshHierarchy* meshes_;
    Method               method_;
    int                  degree_;
    double               dt_;
    SmootherConfig       config_;
    std::vector<Level>   levels_;  // levels_[0] is mesh level 1
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> coarse_;

public:
    /// Assembles levels 1..finest. If `top` is given it is used as the finest
    /// matrix instead of assembling it again.
    MultigridHierarchy(const MeshHierarchy& meshes, int finest, const Method& method, int p,
                       double dt, const SmootherConfig& config, const SparseMatrix* top = nullptr,
                       InjectionKind injection = InjectionKind::Polynomial)
        : meshes_(&meshes), method_(method), degree_(p), dt_(dt), config_(config)
    {
        config.validate();
        if (finest < 1 || finest > static_cast<int>(meshes.num_levels()))
            throw std::invalid_argument("finest level outside the mesh hierarchy");
        levels_.resize(finest);
        for (int l = 1; l <= finest; l++)
        {
            Level& L = levels_[l - 1];
            L.space  = build_trace_space(meshes.level(l), p);
            L.A      = top && l == finest ? *top : assemble_condensed(L.space, method, dt).matrix;
            if (static_cast<index_t>(L.A.rows()) != L.space.size())
                throw std::invalid_argument("finest matrix does not match the trace space");
            L.smoother = std::make_unique<BlockSmoother>(L.A, L.space.dofs_per_face());
            if (l > 1)
            {
                L.I  = build_injection(levels_[l - 2].space, L.space, meshes, injection);
                L.It = L.I.transpose();
            }
        }
        coarse_.compute(Eigen::SparseMatrix<double>(levels_[0].A));
        if (coarse_.info() != Eigen::Success)
            throw std::runtime_error("coarse factorization failed");
    }

    MultigridHierarchy(const MultigridHierarchy&)            = delete;
    MultigridHierarchy& operator=(const MultigridHierarchy&) = delete;

    int                   finest() const { return static_cast<int>(levels_.size()); }
    const SparseMatrix&   matrix(int level) const { return levels_.at(level - 1).A; }
    const SparseMatrix&   injection(int level) const { return levels_.at(level - 1).I; }
    const TraceSpace&     space(int level) const { return levels_.at(level - 1).space; }
    const BlockSmoother&  smoother(int level) const { return *levels_.at(level - 1).smoother; }
    const SmootherConfig& config() const { return config_; }
    void                  set_config(const SmootherConfig& config)
    {
        config.validate();
        config_ = config;
    }

    /// One V-cycle on `level` for A x = b, starting from x.
    void v_cycle(int level, const Vector& b, Vector& x) const
    {
        const Level& L = levels_.at(level - 1);
        if (level == 1)
        {
            x = coarse_.solve(b);
            return;
        }
        smooth(*L.smoother, config_, b, x, false);
        const Vector r  = b - L.A * x;
        const Vector rc = L.It * r;
        Vector       ec = Vector::Zero(rc.size());
        v_cycle(level - 1, rc, ec);
        x += L.I * ec;
        smooth(*L.smoother, config_, b, x, true);
    }

    Vector v_cycle(const Vector& b, const Vector& x0) const
    {
        Vector x = x0;
        v_cycle(finest(), b, x);
        return x;
    }
};

struct MGResult
{
    Vector              x;
    int                 iterations = 0;
    bool                converged  = false;
    std::vector<double> history;  // relative residual before each iteration and at the end
};

/// Stationary iteration x <- x + B(b - A x) with B one V-cycle, stopped when
/// ||A x - b|| / ||b|| < rho or after max_iter cycles.
inline MGResult
mg_solve(const MultigridHierarchy& mg, const Vector& b, double rho, const Vector& x0,
         int max_iter = 200, std::ostream* telemetry = nullptr)
{
    if (!(rho > 0.0))
        throw std::invalid_argument("residual tolerance must be positive");
    const SparseMatrix& A = mg.matrix(mg.finest());
    MGResult            result;
    const double        nb = b.norm();
    if (nb == 0.0)
    {
        result.x         = Vector::Zero(b.size());
        result.converged = true;
        result.history   = {0.0};
        return result;
    }
    result.x = x0.size() == b.size() ? x0 : Vector::Zero(b.size());
    if (telemetry)
        *telemetry << "iter,residual\n";
    for (int k = 0;; k++)
    {
        const double res = (b - A * result.x).norm() / nb;
        result.history.push_back(res);
        if (telemetry)
            *telemetry << k << ',' << res << '\n';
        if (res < rho)
        {
            result.converged = true;
            return result;
        }
        if (k == max_iter)
            return result;
        mg.v_cycle(mg.finest(), b, result.x);
        result.iterations = k + 1;
    }
}

/// Asymptotic A-norm error reduction of one V-cycle on `level`, measured on
/// the homogeneous problem from a random start.
inline double
measure_contraction(const MultigridHierarchy& mg, int level, int cycles = 12, unsigned seed = 5)
{
    const SparseMatrix& A = mg.matrix(level);
    std::mt19937                     rng(seed);
    std::normal_distribution<double> N;
    Vector e(A.rows());
    for (Eigen::Index i = 0; i < e.size(); i++)
        e(i) = N(rng);
    const Vector zero = Vector::Zero(e.size());
    double       rate = 0.0;
    double       norm = std::sqrt(e.dot(A * e));
    for (int k = 0; k < cycles; k++)
    {
        mg.v_cycle(level, zero, e);
        const double next = std::sqrt(e.dot(A * e));
        rate              = next / norm;
        norm              = next;
        if (norm < 1e-280)
            break;
        e /= norm;
        norm = 1.0;
    }
    return rate;
}

} // namespace hdgmg
