/*
 * hdgmg -- hybridizable DG Stokes solver with homogeneous multigrid.
 *
 * Nested triangular meshes of the unit square obtained by uniform red
 * refinement, with skeleton (face) connectivity and boundary classification.
 */

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "quadrature.hpp"

namespace hdgmg {

using index_t = std::size_t;

inline constexpr index_t invalid_index = static_cast<index_t>(-1);

enum class FaceKind { Interior, Dirichlet, Neumann };

inline const char*
to_string(FaceKind kind)
{
    switch (kind)
    {
        case FaceKind::Interior:  return "interior";
        case FaceKind::Dirichlet: return "dirichlet";
        case FaceKind::Neumann:   return "neumann";
    }
    return "?";
}

struct Vertex
{
    index_t id;
    Point   x;
};

struct Triangle
{
    index_t                id;
    std::array<index_t, 3> vertices;  // counterclockwise
    int                    level;
    index_t                parent = invalid_index;
    std::array<index_t, 4> children{invalid_index, invalid_index, invalid_index, invalid_index};
    /// faces[j] joins vertices[j] and vertices[(j+1)%3]
    std::array<index_t, 3> faces;
    int                    star_face = 0;
};

struct Face
{
    index_t                id;
    std::array<index_t, 2> vertices;  // ascending vertex ids
    std::array<index_t, 2> cells{invalid_index, invalid_index};
    FaceKind               kind;
    int                    level;
    double                 length;

    std::size_t num_cells() const { return cells[1] == invalid_index ? (cells[0] == invalid_index ? 0 : 1) : 2; }
    bool        is_boundary() const { return kind != FaceKind::Interior; }
};

struct MeshLevel
{
    int                   level = 1;
    std::vector<Vertex>   vertices;
    std::vector<Triangle> triangles;
    std::vector<Face>     faces;
    double                h = 0.0;

    const Point& point(index_t v) const { return vertices[v].x; }

    double signed_area(const Triangle& t) const
    {
        const Point e1 = point(t.vertices[1]) - point(t.vertices[0]);
        const Point e2 = point(t.vertices[2]) - point(t.vertices[0]);
        return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
    }

    /// Outward unit normal of local face j of triangle t.
    Point outward_normal(const Triangle& t, int j) const
    {
        const Point e = point(t.vertices[(j + 1) % 3]) - point(t.vertices[j]);
        return Point(e.y(), -e.x()) / e.norm();
    }

    std::size_t count(FaceKind kind) const
    {
        return std::count_if(faces.begin(), faces.end(),
                             [kind](const Face& f) { return f.kind == kind; });
    }
};

/// Where a fine face sits relative to the coarse mesh.
struct FaceParent
{
    enum class Kind { HalfOfCoarseFace, InsideCoarseCell };
    Kind    kind;
    index_t coarse;    // coarse face id or coarse triangle id
    int     half = 0;  // 0: half touching the coarse face's first vertex
};

struct MeshHierarchy
{
    std::vector<MeshLevel>               levels;       // levels[0] is mesh level 1
    std::vector<std::vector<FaceParent>> face_parent;  // face_parent[k] maps faces of levels[k+1]

    std::size_t      num_levels() const { return levels.size(); }
    const MeshLevel& level(int l) const { return levels.at(l - 1); }
    const std::vector<FaceParent>& parents_of(int fine_level) const
    {
        return face_parent.at(fine_level - 2);
    }
};

namespace detail {

inline FaceKind
classify_boundary(const Point& a, const Point& b)
{
    // Neumann boundary is the bottom side {y = 0}; the rest of the boundary is Dirichlet.
    if (a.y() == 0.0 && b.y() == 0.0)
        return FaceKind::Neumann;
    return FaceKind::Dirichlet;
}

inline void
select_star_faces(MeshLevel& mesh)
{
    for (auto& t : mesh.triangles)
    {
        int best = 0;
        for (int j = 1; j < 3; j++)
            if (t.faces[j] > t.faces[best])
                best = j;
        t.star_face = best;
    }
}

inline void
update_h(MeshLevel& mesh)
{
    mesh.h = 0.0;
    for (const auto& f : mesh.faces)
        mesh.h = std::max(mesh.h, f.length);
}

/// Builds faces from triangle connectivity; faces are numbered in order of
/// first appearance while scanning triangles and their local edges.
inline void
build_faces(MeshLevel& mesh)
{
    std::map<std::pair<index_t, index_t>, index_t> lookup;
    mesh.faces.clear();
    for (auto& t : mesh.triangles)
        for (int j = 0; j < 3; j++)
        {
            index_t a = t.vertices[j], b = t.vertices[(j + 1) % 3];
            const std::pair<index_t, index_t> key = std::minmax(a, b);
            auto [it, inserted] = lookup.try_emplace(key, mesh.faces.size());
            if (inserted)
            {
                Face f;
                f.id       = mesh.faces.size();
                f.vertices = {key.first, key.second};
                f.cells    = {t.id, invalid_index};
                f.kind     = FaceKind::Interior;
                f.level    = mesh.level;
                f.length   = (mesh.point(b) - mesh.point(a)).norm();
                mesh.faces.push_back(f);
            }
            else
                mesh.faces[it->second].cells[1] = t.id;
            t.faces[j] = it->second;
        }
    for (auto& f : mesh.faces)
        if (f.cells[1] == invalid_index)
            f.kind = classify_boundary(mesh.point(f.vertices[0]), mesh.point(f.vertices[1]));
}

} // namespace detail

/// The 16-triangle mesh of the unit square cut by x=1/2, y=1/2, both
/// diagonals and the diamond |x-1/2|+|y-1/2| = 1/2.
inline MeshLevel
build_initial_mesh()
{
    MeshLevel mesh;
    mesh.level = 1;
    const std::array<Point, 13> coords = {
        Point(0.0, 0.0), Point(0.5, 0.0), Point(1.0, 0.0),
        Point(0.0, 0.5), Point(0.5, 0.5), Point(1.0, 0.5),
        Point(0.0, 1.0), Point(0.5, 1.0), Point(1.0, 1.0),
        Point(0.25, 0.25), Point(0.75, 0.25), Point(0.25, 0.75), Point(0.75, 0.75)};
    for (index_t i = 0; i < coords.size(); i++)
        mesh.vertices.push_back({i, coords[i]});

    // Each quadrant is split by its diagonal and its diamond edge into four
    // triangles around the quadrant center.
    const std::array<std::array<index_t, 5>, 4> quadrants = {{
        {0, 1, 4, 3, 9},   // lower left: corners ccw, then center
        {1, 2, 5, 4, 10},  // lower right
        {3, 4, 7, 6, 11},  // upper left
        {4, 5, 8, 7, 12},  // upper right
    }};
    for (const auto& q : quadrants)
        for (int k = 0; k < 4; k++)
        {
            Triangle t;
            t.id       = mesh.triangles.size();
            t.vertices = {q[k], q[(k + 1) % 4], q[4]};
            t.level    = 1;
            mesh.triangles.push_back(t);
        }
    detail::build_faces(mesh);
    detail::select_star_faces(mesh);
    detail::update_h(mesh);
    return mesh;
}

/// Red refinement of every triangle. Returns the fine level and fills
/// face_parent (indexed by fine face id). Child triangles of coarse triangle t
/// are 4t..4t+3 (three corner children, then the middle one). Fine faces 2f,
/// 2f+1 are the halves of coarse face f; the three faces inside coarse
/// triangle t are 2*F + 3t + k.
inline MeshLevel
refine(MeshLevel& coarse, std::vector<FaceParent>* face_parent = nullptr)
{
    MeshLevel fine;
    fine.level = coarse.level + 1;

    const index_t nv = coarse.vertices.size();
    const index_t nf = coarse.faces.size();
    fine.vertices    = coarse.vertices;
    for (const auto& f : coarse.faces)
    {
        const Point mid = 0.5 * (coarse.point(f.vertices[0]) + coarse.point(f.vertices[1]));
        fine.vertices.push_back({nv + f.id, mid});
    }
    auto midpoint = [nv](index_t coarse_face) { return nv + coarse_face; };

    // faces: halves first, then interior faces of each coarse triangle
    fine.faces.resize(2 * nf + 3 * coarse.triangles.size());
    std::vector<FaceParent> parents(fine.faces.size());
    for (const auto& f : coarse.faces)
        for (int half = 0; half < 2; half++)
        {
            Face& c = fine.faces[2 * f.id + half];
            c.id    = 2 * f.id + half;
            const std::pair<index_t, index_t> ends = std::minmax(f.vertices[half], midpoint(f.id));
            c.vertices = {ends.first, ends.second};
            c.kind     = f.kind;
            c.level    = fine.level;
            c.length   = 0.5 * f.length;
            parents[c.id] = {FaceParent::Kind::HalfOfCoarseFace, f.id, half};
        }

    auto half_face = [&](index_t coarse_face, index_t vertex) {
        return coarse.faces[coarse_face].vertices[0] == vertex ? 2 * coarse_face
                                                               : 2 * coarse_face + 1;
    };
    auto attach = [&](index_t face, index_t cell) {
        Face& f = fine.faces[face];
        if (f.cells[0] == invalid_index)
            f.cells[0] = cell;
        else
            f.cells[1] = cell;
    };

    for (auto& t : coarse.triangles)
    {
        const auto& v = t.vertices;
        // m[j] is the midpoint of local face j (v_j, v_{j+1})
        const std::array<index_t, 3> m = {midpoint(t.faces[0]), midpoint(t.faces[1]),
                                          midpoint(t.faces[2])};
        const index_t inner0 = 2 * nf + 3 * t.id;
        // inner face k joins m[k] and m[(k+2)%3] -- it cuts off corner k
        for (int k = 0; k < 3; k++)
        {
            Face& f = fine.faces[inner0 + k];
            f.id    = inner0 + k;
            const std::pair<index_t, index_t> ends = std::minmax(m[k], m[(k + 2) % 3]);
            f.vertices = {ends.first, ends.second};
            f.kind     = FaceKind::Interior;
            f.level    = fine.level;
            f.length   = 0.5 * coarse.faces[t.faces[(k + 1) % 3]].length;
            parents[f.id] = {FaceParent::Kind::InsideCoarseCell, t.id, 0};
        }

        for (int k = 0; k < 4; k++)
            t.children[k] = 4 * t.id + k;

        // corner children: (v_k, m_k, m_{k-1})
        for (int k = 0; k < 3; k++)
        {
            Triangle c;
            c.id       = 4 * t.id + k;
            c.level    = fine.level;
            c.parent   = t.id;
            const index_t mk = m[k], mprev = m[(k + 2) % 3];
            c.vertices = {v[k], mk, mprev};
            c.faces    = {half_face(t.faces[k], v[k]), inner0 + k,
                          half_face(t.faces[(k + 2) % 3], v[k])};
            fine.triangles.push_back(c);
        }
        Triangle middle;
        middle.id       = 4 * t.id + 3;
        middle.level    = fine.level;
        middle.parent   = t.id;
        middle.vertices = {m[0], m[1], m[2]};
        // face (m0,m1) is inner face 1, (m1,m2) inner 2, (m2,m0) inner 0
        middle.faces = {inner0 + 1, inner0 + 2, inner0 + 0};
        fine.triangles.push_back(middle);
    }
    for (const auto& c : fine.triangles)
        for (int j = 0; j < 3; j++)
            attach(c.faces[j], c.id);

    detail::select_star_faces(fine);
    detail::update_h(fine);
    if (face_parent)
        *face_parent = std::move(parents);
    return fine;
}

/// Levels 1..num_levels starting from the initial mesh.
inline MeshHierarchy
build_hierarchy(int num_levels)
{
    if (num_levels < 1)
        throw std::invalid_argument("hierarchy needs at least one level");
    MeshHierarchy hierarchy;
    hierarchy.levels.reserve(num_levels);
    hierarchy.levels.push_back(build_initial_mesh());
    for (int l = 2; l <= num_levels; l++)
    {
        std::vector<FaceParent> parents;
        MeshLevel fine = refine(hierarchy.levels.back(), &parents);
        hierarchy.levels.push_back(std::move(fine));
        hierarchy.face_parent.push_back(std::move(parents));
    }
    return hierarchy;
}

/// Checks the structural invariants of a mesh level. Returns one message per
/// violation; an empty vector means the mesh is valid.
inline std::vector<std::string>
validate(const MeshLevel& mesh)
{
    std::vector<std::string> report;
    auto complain = [&report](const std::string& what) { report.push_back(what); };

    for (const auto& v : mesh.vertices)
        if (v.x.x() < 0.0 || v.x.x() > 1.0 || v.x.y() < 0.0 || v.x.y() > 1.0)
            complain("vertex " + std::to_string(v.id) + " outside the unit square");

    for (const auto& t : mesh.triangles)
    {
        if (!(mesh.signed_area(t) > 0.0))
            complain("triangle " + std::to_string(t.id) + " is not counterclockwise");
        if (t.star_face < 0 || t.star_face > 2)
            complain("triangle " + std::to_string(t.id) + " has no valid star face");
        for (int j = 0; j < 3; j++)
        {
            if (t.faces[j] >= mesh.faces.size())
            {
                complain("triangle " + std::to_string(t.id) + " references a missing face");
                continue;
            }
            const Face& f = mesh.faces[t.faces[j]];
            const std::pair<index_t, index_t> ends = std::minmax(t.vertices[j], t.vertices[(j + 1) % 3]);
            if (f.vertices[0] != ends.first || f.vertices[1] != ends.second)
                complain("triangle " + std::to_string(t.id) + " face " + std::to_string(j) +
                         " does not match its vertices");
            if (f.cells[0] != t.id && f.cells[1] != t.id)
                complain("face " + std::to_string(f.id) + " does not list adjacent triangle " +
                         std::to_string(t.id));
        }
    }

    std::size_t boundary = 0;
    for (const auto& f : mesh.faces)
    {
        const std::size_t n = f.num_cells();
        if (n == 0)
            complain("face " + std::to_string(f.id) + " is dangling (no adjacent cell)");
        else if (f.kind == FaceKind::Interior && n != 2)
            complain("interior face " + std::to_string(f.id) + " has " + std::to_string(n) +
                     " adjacent cells");
        else if (f.kind != FaceKind::Interior && n != 1)
            complain("boundary face " + std::to_string(f.id) + " has " + std::to_string(n) +
                     " adjacent cells");
        if (f.kind != FaceKind::Interior)
        {
            boundary++;
            const Point& a = mesh.point(f.vertices[0]);
            const Point& b = mesh.point(f.vertices[1]);
            const bool on_bottom = a.y() == 0.0 && b.y() == 0.0;
            if ((f.kind == FaceKind::Neumann) != on_bottom)
                complain("face " + std::to_string(f.id) + " has the wrong boundary kind");
        }
        if (!(f.length > 0.0))
            complain("face " + std::to_string(f.id) + " has nonpositive length");
    }
    if (2 * mesh.faces.size() != 3 * mesh.triangles.size() + boundary)
        complain("face count violates 2F = 3N + B");
    return report;
}

/// Text dump: `v x y`, `t v0 v1 v2`, `f v0 v1 kind`, one record per line.
inline void
write_mesh(std::ostream& os, const MeshLevel& mesh)
{
    os.precision(17);
    for (const auto& v : mesh.vertices)
        os << "v " << v.x.x() << ' ' << v.x.y() << '\n';
    for (const auto& t : mesh.triangles)
        os << "t " << t.vertices[0] << ' ' << t.vertices[1] << ' ' << t.vertices[2] << '\n';
    for (const auto& f : mesh.faces)
        os << "f " << f.vertices[0] << ' ' << f.vertices[1] << ' ' << to_string(f.kind) << '\n';
}

} // namespace hdgmg
