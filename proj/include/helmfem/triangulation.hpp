#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>
#include <algorithm>
#include <cmath>

#include "helmfem/geometry.hpp"

namespace helmfem {

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw std::invalid_argument(msg);
}

inline std::uint64_t edge_key(int a, int b)
{
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

} // namespace detail

/// Position of a triangle in the bisection forest: a left-aligned bit string
/// (0 = first child, 1 = second child).  128 bits cover any refinement depth
/// reachable with double-precision vertex coordinates.
struct BisectionPath {
    std::array<std::uint64_t, 2> bits{0, 0};
    std::uint8_t depth = 0;

    BisectionPath child(int which) const
    {
        if (depth >= 120)
            throw std::runtime_error("BisectionPath: refinement too deep");
        BisectionPath p = *this;
        if (which)
            p.bits[depth / 64] |= std::uint64_t(1) << (63 - depth % 64);
        p.depth = static_cast<std::uint8_t>(depth + 1);
        return p;
    }

    /// True if *this is a (possibly equal) prefix of `other`.
    bool is_prefix_of(const BisectionPath& other) const
    {
        if (depth > other.depth) return false;
        int full = depth / 64, rest = depth % 64;
        for (int i = 0; i < full; ++i)
            if (bits[i] != other.bits[i]) return false;
        if (rest == 0 || full >= 2) return true;
        const std::uint64_t mask = ~std::uint64_t(0) << (64 - rest);
        return (bits[full] & mask) == (other.bits[full] & mask);
    }

    bool operator==(const BisectionPath& o) const
    {
        return depth == o.depth && bits == o.bits;
    }
};

/// Triangle record.  Local edge j is the edge opposite local vertex j;
/// `ref_edge` is the local index of the refinement edge (the edge opposite
/// the newest vertex).
struct Triangle {
    std::array<int, 3> v;
    int ref_edge = 0;
    int root = 0;            // ancestor in the initial triangulation
    BisectionPath path;
};

/// Edge record with fixed orientation: `a -> b` is the counterclockwise
/// traversal direction of `tri_plus`, `normal` is the outer normal of
/// `tri_plus` (the outer normal of the domain for boundary edges) and
/// `tangent` its 90-degree counterclockwise rotation.
struct Edge {
    int a = -1, b = -1;
    int tri_plus = -1, tri_minus = -1;
    Vec2 normal, tangent;
    double length = 0.0;
    bool boundary = false;
};

struct CountsReport {
    long n_triangles = 0;
    long n_vertices = 0;
    long n_edges = 0;
    long n_interior_edges = 0;
    double min_angle = 0.0;      // radians
    std::string violation;       // empty when all invariants hold

    bool ok() const { return violation.empty(); }
};

/// Conforming triangulation of a polygonal domain.  Immutable after
/// construction; the refinement operations return new meshes.  Meshes
/// created from the same initial triangulation share a family id, which
/// makes their bisection forests comparable (refines / overlay).
class Triangulation {
public:
    /// Builds a triangulation from raw vertex and triangle lists and
    /// validates all structural invariants.  Triangles must be listed
    /// counterclockwise; `refinement_edges[t]` in {0,1,2} names the edge
    /// opposite that local vertex.
    static Triangulation build_initial(std::vector<Vec2> vertices,
                                       const std::vector<std::array<int, 3>>& triangles,
                                       const std::vector<int>& refinement_edges)
    {
        detail::require(triangles.size() == refinement_edges.size(),
                        "build_initial: refinement edge list size mismatch");
        std::vector<Triangle> tris(triangles.size());
        for (std::size_t t = 0; t < triangles.size(); ++t) {
            detail::require(refinement_edges[t] >= 0 && refinement_edges[t] <= 2,
                            "build_initial: refinement edge index out of range");
            tris[t].v = triangles[t];
            tris[t].ref_edge = refinement_edges[t];
            tris[t].root = static_cast<int>(t);
        }
        return Triangulation(std::move(vertices), std::move(tris), next_family());
    }

    /// Same, with refinement edges assigned by the longest-edge rule
    /// (ties broken by the smallest global index of the opposite vertex).
    static Triangulation build_initial(std::vector<Vec2> vertices,
                                       const std::vector<std::array<int, 3>>& triangles)
    {
        std::vector<int> ref(triangles.size(), 0);
        for (std::size_t t = 0; t < triangles.size(); ++t)
            ref[t] = longest_edge(vertices, triangles[t]);
        return build_initial(std::move(vertices), triangles, ref);
    }

    // -- queries ------------------------------------------------------------

    int n_vertices() const { return static_cast<int>(vertices_.size()); }
    int n_triangles() const { return static_cast<int>(tris_.size()); }
    int n_edges() const { return static_cast<int>(edges_.size()); }
    int n_interior_edges() const { return n_interior_edges_; }

    const std::vector<Vec2>& vertices() const { return vertices_; }
    const Vec2& vertex(int i) const { return vertices_[i]; }
    const Triangle& tri(int t) const { return tris_[t]; }
    const std::vector<Triangle>& triangles() const { return tris_; }
    const Edge& edge(int e) const { return edges_[e]; }
    const std::vector<Edge>& edges() const { return edges_; }
    /// Edge id of local edge j (opposite local vertex j) of triangle t.
    int tri_edge(int t, int j) const { return tri_edges_[t][j]; }
    std::uint64_t family() const { return family_; }

    Vec2 corner(int t, int local) const { return vertices_[tris_[t].v[local]]; }

    double area(int t) const
    {
        return 0.5 * doubled_signed_area(corner(t, 0), corner(t, 1), corner(t, 2));
    }

    /// Mesh size h_T: the square root of the triangle area.
    double h(int t) const { return std::sqrt(area(t)); }

    double domain_area() const
    {
        double a = 0.0;
        for (int t = 0; t < n_triangles(); ++t) a += area(t);
        return a;
    }

    Vec2 centroid(int t) const
    {
        return (corner(t, 0) + corner(t, 1) + corner(t, 2)) / 3.0;
    }

    /// Map reference coordinates (r, s) to the physical point of triangle t.
    Vec2 map_ref(int t, double r, double s) const
    {
        const Vec2 a = corner(t, 0);
        return a + r * (corner(t, 1) - a) + s * (corner(t, 2) - a);
    }

    /// Barycentric coordinates of a physical point with respect to triangle t.
    std::array<double, 3> barycentric(int t, const Vec2& p) const
    {
        const Vec2 a = corner(t, 0), b = corner(t, 1), c = corner(t, 2);
        const double inv = 1.0 / doubled_signed_area(a, b, c);
        const double l1 = doubled_signed_area(a, p, c) * inv;
        const double l2 = doubled_signed_area(a, b, p) * inv;
        return {1.0 - l1 - l2, l1, l2};
    }

    bool vertex_on_boundary(int v) const { return boundary_vertex_[v]; }

    double min_angle() const
    {
        double m = M_PI;
        for (int t = 0; t < n_triangles(); ++t)
            for (int j = 0; j < 3; ++j) {
                const Vec2 u = corner(t, (j + 1) % 3) - corner(t, j);
                const Vec2 w = corner(t, (j + 2) % 3) - corner(t, j);
                m = std::min(m, std::acos(std::clamp(
                        u.dot(w) / (u.norm() * w.norm()), -1.0, 1.0)));
            }
        return m;
    }

    /// Re-checks all structural invariants and reports the counts.  The
    /// first violated invariant (if any) is named in `violation`.
    CountsReport validate() const
    {
        CountsReport r;
        r.n_triangles = n_triangles();
        r.n_vertices = n_vertices();
        r.n_edges = n_edges();
        r.n_interior_edges = n_interior_edges();
        r.min_angle = min_angle();
        try {
            check_invariants(vertices_, tris_);
        } catch (const std::exception& e) {
            r.violation = e.what();
        }
        return r;
    }

    // -- refinement ---------------------------------------------------------

    /// Newest-vertex bisection of all marked triangles, plus the closure
    /// bisections needed to restore conformity.  Returns the smallest
    /// admissible refinement in which every marked triangle is bisected.
    Triangulation bisect(const std::vector<int>& marked) const
    {
        for (int t : marked)
            detail::require(t >= 0 && t < n_triangles(), "bisect: invalid triangle id");
        if (marked.empty()) return *this;

        std::vector<Vec2> verts = vertices_;
        std::vector<Triangle> work = tris_;
        std::vector<char> alive(work.size(), 1);
        std::unordered_map<std::uint64_t, int> mid;  // split edge -> midpoint id

        auto split = [&](int t) {
            const Triangle& tr = work[t];
            const int r = tr.ref_edge;
            const int o = tr.v[r], a = tr.v[(r + 1) % 3], b = tr.v[(r + 2) % 3];
            const std::uint64_t key = detail::edge_key(a, b);
            auto it = mid.find(key);
            int m;
            if (it != mid.end()) {
                m = it->second;
            } else {
                m = static_cast<int>(verts.size());
                verts.push_back(midpoint(verts[a], verts[b]));
                mid.emplace(key, m);
            }
            Triangle c0, c1;
            c0.v = {o, a, m};
            c0.ref_edge = 2;                 // edge (o, a)
            c0.root = tr.root;
            c0.path = tr.path.child(0);
            c1.v = {o, m, b};
            c1.ref_edge = 1;                 // edge (b, o)
            c1.root = tr.root;
            c1.path = tr.path.child(1);
            alive[t] = 0;
            work.push_back(c0);
            work.push_back(c1);
            alive.push_back(1);
            alive.push_back(1);
        };

        for (int t : marked)
            if (alive[t]) split(t);

        // Closure: bisect any triangle with a split (hanging) edge until
        // the mesh is conforming again.
        bool changed = true;
        while (changed) {
            changed = false;
            const int n = static_cast<int>(work.size());
            for (int t = 0; t < n; ++t) {
                if (!alive[t]) continue;
                const auto& v = work[t].v;
                if (mid.count(detail::edge_key(v[0], v[1])) ||
                    mid.count(detail::edge_key(v[1], v[2])) ||
                    mid.count(detail::edge_key(v[2], v[0]))) {
                    split(t);
                    changed = true;
                }
            }
        }

        std::vector<Triangle> out;
        out.reserve(work.size());
        for (std::size_t t = 0; t < work.size(); ++t)
            if (alive[t]) out.push_back(work[t]);
        return Triangulation(std::move(verts), std::move(out), family_);
    }

    /// Uniform red refinement: every triangle is split into four similar
    /// children through its edge midpoints.  The result starts a new
    /// bisection family (red children are treated as fresh roots).
    Triangulation red_refine() const
    {
        std::vector<Vec2> verts = vertices_;
        std::unordered_map<std::uint64_t, int> mid;
        auto midpoint_id = [&](int a, int b) {
            const std::uint64_t key = detail::edge_key(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            const int m = static_cast<int>(verts.size());
            verts.push_back(midpoint(verts[a], verts[b]));
            mid.emplace(key, m);
            return m;
        };

        std::vector<std::array<int, 3>> out;
        out.reserve(4 * tris_.size());
        for (const Triangle& tr : tris_) {
            const int v0 = tr.v[0], v1 = tr.v[1], v2 = tr.v[2];
            const int m01 = midpoint_id(v0, v1);
            const int m12 = midpoint_id(v1, v2);
            const int m20 = midpoint_id(v2, v0);
            out.push_back({v0, m01, m20});
            out.push_back({v1, m12, m01});
            out.push_back({v2, m20, m12});
            out.push_back({m01, m12, m20});
        }
        return build_initial(std::move(verts), out);
    }

    /// True if every triangle of *this descends from (or equals) a triangle
    /// of `coarse` in the shared bisection forest.
    bool refines(const Triangulation& coarse) const
    {
        if (family_ != coarse.family_) return false;
        auto index = coarse.leaf_index();
        for (const Triangle& tr : tris_)
            if (find_ancestor_or_self(index, tr) < 0) return false;
        return true;
    }

    /// For each triangle of *this, the index of the triangle of `coarse`
    /// that contains it (ancestor-or-self in the shared forest).  Throws if
    /// `coarse` is not actually coarser.
    std::vector<int> ancestors_in(const Triangulation& coarse) const
    {
        detail::require(family_ == coarse.family_,
                        "ancestors_in: meshes do not share an initial triangulation");
        auto index = coarse.leaf_index();
        std::vector<int> map(tris_.size(), -1);
        for (std::size_t t = 0; t < tris_.size(); ++t) {
            map[t] = find_ancestor_or_self(index, tris_[t]);
            detail::require(map[t] >= 0, "ancestors_in: mesh does not refine the given mesh");
        }
        return map;
    }

    /// Overlay: the coarsest common refinement of two triangulations from
    /// the same initial mesh (the union of their bisection forests).
    friend Triangulation overlay(const Triangulation& a, const Triangulation& b)
    {
        detail::require(a.family_ == b.family_,
                        "overlay: meshes do not descend from the same initial triangulation");
        Triangulation cur = a;
        auto index = b.leaf_index();
        for (int pass = 0; pass < 256; ++pass) {
            std::vector<int> need;
            for (int t = 0; t < cur.n_triangles(); ++t)
                if (b.has_strict_descendant(index, cur.tris_[t]))
                    need.push_back(t);
            if (need.empty()) return cur;
            cur = cur.bisect(need);
        }
        throw std::runtime_error("overlay: did not converge");
    }

    // -- plain-text mesh format ----------------------------------------------

    void save(std::ostream& os) const
    {
        char buf[64];
        os << "vertices " << n_vertices() << "\n";
        for (const Vec2& p : vertices_) {
            std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.x, p.y);
            os << buf;
        }
        os << "triangles " << n_triangles() << "\n";
        for (const Triangle& t : tris_)
            os << t.v[0] << " " << t.v[1] << " " << t.v[2] << " " << t.ref_edge << "\n";
    }

    void save(const std::string& path) const
    {
        std::ofstream os(path);
        detail::require(bool(os), "save: cannot open " + path);
        save(os);
    }

    static Triangulation load(std::istream& is)
    {
        std::string tag;
        long n = 0;
        detail::require(bool(is >> tag >> n) && tag == "vertices",
                        "load: expected 'vertices <n>' header");
        std::vector<Vec2> verts(n);
        for (long i = 0; i < n; ++i)
            detail::require(bool(is >> verts[i].x >> verts[i].y),
                            "load: malformed vertex line");
        long m = 0;
        detail::require(bool(is >> tag >> m) && tag == "triangles",
                        "load: expected 'triangles <m>' header");
        std::vector<std::array<int, 3>> tris(m);
        std::vector<int> ref(m);
        for (long i = 0; i < m; ++i)
            detail::require(bool(is >> tris[i][0] >> tris[i][1] >> tris[i][2] >> ref[i]),
                            "load: malformed triangle line");
        return build_initial(std::move(verts), tris, ref);
    }

    static Triangulation load(const std::string& path)
    {
        std::ifstream is(path);
        detail::require(bool(is), "load: cannot open " + path);
        return load(is);
    }

private:
    Triangulation(std::vector<Vec2> vertices, std::vector<Triangle> tris,
                  std::uint64_t family)
        : vertices_(std::move(vertices)), tris_(std::move(tris)), family_(family)
    {
        check_invariants(vertices_, tris_);
        build_edges();
    }

    static std::uint64_t next_family()
    {
        static std::atomic<std::uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    static int longest_edge(const std::vector<Vec2>& verts, const std::array<int, 3>& v)
    {
        int best = 0;
        double best_len = -1.0;
        for (int j = 0; j < 3; ++j) {
            const double len =
                (verts[v[(j + 2) % 3]] - verts[v[(j + 1) % 3]]).squared_norm();
            if (len > best_len ||
                (len == best_len && v[j] < v[best])) {
                best = j;
                best_len = len;
            }
        }
        return best;
    }

    // Structural validation shared by the constructor and validate().
    static void check_invariants(const std::vector<Vec2>& verts,
                                 const std::vector<Triangle>& tris)
    {
        detail::require(!tris.empty(), "triangulation has no triangles");
        std::vector<char> used(verts.size(), 0);
        for (std::size_t t = 0; t < tris.size(); ++t) {
            for (int j = 0; j < 3; ++j) {
                const int v = tris[t].v[j];
                detail::require(v >= 0 && v < static_cast<int>(verts.size()),
                                "triangle " + std::to_string(t) + ": vertex index out of range");
                used[v] = 1;
            }
            const double a2 = doubled_signed_area(verts[tris[t].v[0]],
                                                  verts[tris[t].v[1]],
                                                  verts[tris[t].v[2]]);
            detail::require(a2 > 0.0, "triangle " + std::to_string(t) +
                            ": degenerate or clockwise (signed area <= 0)");
        }
        for (std::size_t v = 0; v < verts.size(); ++v)
            detail::require(used[v], "vertex " + std::to_string(v) +
                            " not referenced by any triangle");

        // Edge adjacency: each undirected edge is traversed at most once in
        // each direction; two traversals in the same direction mean an
        // inconsistent orientation or an overlapping triangle.
        std::unordered_map<std::uint64_t, std::pair<int, int>> dir;  // key -> (fwd, bwd)
        for (std::size_t t = 0; t < tris.size(); ++t)
            for (int j = 0; j < 3; ++j) {
                const int a = tris[t].v[(j + 1) % 3], b = tris[t].v[(j + 2) % 3];
                detail::require(a != b, "triangle " + std::to_string(t) + ": repeated vertex");
                auto& d = dir[detail::edge_key(a, b)];
                int& count = (a < b) ? d.first : d.second;
                detail::require(count == 0,
                                "edge (" + std::to_string(a) + "," + std::to_string(b) +
                                ") traversed twice in the same direction (orientation)");
                count = 1;
            }

        // Hanging vertices: the midpoint of an existing edge must not be a
        // mesh vertex (the non-conformity produced by unmatched bisection).
        std::unordered_map<std::uint64_t, int> coord;
        coord.reserve(verts.size() * 2);
        auto key_of = [](const Vec2& p) {
            std::uint64_t hx, hy;
            static_assert(sizeof(double) == 8);
            std::memcpy(&hx, &p.x, 8);
            std::memcpy(&hy, &p.y, 8);
            return hx * 0x9e3779b97f4a7c15ULL ^ (hy + 0x7f4a7c15ULL);
        };
        for (std::size_t v = 0; v < verts.size(); ++v)
            coord.emplace(key_of(verts[v]), static_cast<int>(v));
        for (const auto& [key, d] : dir) {
            const int a = static_cast<int>(key >> 32);
            const int b = static_cast<int>(key & 0xffffffffu);
            const Vec2 m = midpoint(verts[a], verts[b]);
            auto it = coord.find(key_of(m));
            if (it != coord.end() && verts[it->second].x == m.x && verts[it->second].y == m.y)
                detail::require(false, "hanging vertex " + std::to_string(it->second) +
                                " on edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
        }

        // Euler formulae for a simply connected polygonal domain.
        const long T = static_cast<long>(tris.size());
        const long E = static_cast<long>(dir.size());
        long Ei = 0;
        for (const auto& [key, d] : dir)
            if (d.first + d.second == 2) ++Ei;
        const long N = static_cast<long>(verts.size());
        detail::require(E + Ei == 3 * T, "Euler identity card(E) + card(E(Omega)) = 3 card(T) violated");
        detail::require(Ei + N == 2 * T + 1, "Euler identity card(E(Omega)) + card(N) = 2 card(T) + 1 violated");
    }

    void build_edges()
    {
        edges_.clear();
        tri_edges_.assign(tris_.size(), {-1, -1, -1});
        std::unordered_map<std::uint64_t, int> ids;
        ids.reserve(tris_.size() * 2);
        for (std::size_t t = 0; t < tris_.size(); ++t)
            for (int j = 0; j < 3; ++j) {
                const int a = tris_[t].v[(j + 1) % 3], b = tris_[t].v[(j + 2) % 3];
                const std::uint64_t key = detail::edge_key(a, b);
                auto it = ids.find(key);
                if (it == ids.end()) {
                    Edge e;
                    e.a = a;
                    e.b = b;
                    e.tri_plus = static_cast<int>(t);
                    const Vec2 d = vertices_[b] - vertices_[a];
                    e.length = d.norm();
                    e.tangent = d / e.length;
                    e.normal = {e.tangent.y, -e.tangent.x};  // outward for CCW traversal
                    e.boundary = true;
                    ids.emplace(key, static_cast<int>(edges_.size()));
                    tri_edges_[t][j] = static_cast<int>(edges_.size());
                    edges_.push_back(e);
                } else {
                    Edge& e = edges_[it->second];
                    e.tri_minus = static_cast<int>(t);
                    e.boundary = false;
                    tri_edges_[t][j] = it->second;
                }
            }
        n_interior_edges_ = 0;
        for (const Edge& e : edges_)
            if (!e.boundary) ++n_interior_edges_;
        boundary_vertex_.assign(vertices_.size(), 0);
        for (const Edge& e : edges_)
            if (e.boundary) {
                boundary_vertex_[e.a] = 1;
                boundary_vertex_[e.b] = 1;
            }
    }

    // Sorted (root, path bits, depth) index of the leaves, for forest queries.
    struct LeafKey {
        int root;
        std::array<std::uint64_t, 2> bits;
        std::uint8_t depth;
        int tri;     // original triangle index; not part of the ordering
        bool operator<(const LeafKey& o) const
        {
            if (root != o.root) return root < o.root;
            if (bits != o.bits) return bits < o.bits;
            return depth < o.depth;
        }
    };

    std::vector<LeafKey> leaf_index() const
    {
        std::vector<LeafKey> idx;
        idx.reserve(tris_.size());
        for (std::size_t t = 0; t < tris_.size(); ++t)
            idx.push_back({tris_[t].root, tris_[t].path.bits, tris_[t].path.depth,
                           static_cast<int>(t)});
        std::sort(idx.begin(), idx.end());
        return idx;
    }

    // True if some leaf in `idx` (a leaf_index of *this) is a strict
    // descendant of `t` in the forest.
    bool has_strict_descendant(const std::vector<LeafKey>& idx, const Triangle& t) const
    {
        LeafKey probe{t.root, t.path.bits, 0, -1};
        auto it = std::lower_bound(idx.begin(), idx.end(), probe);
        for (; it != idx.end() && it->root == t.root; ++it) {
            BisectionPath p{it->bits, it->depth};
            if (!t.path.is_prefix_of(p)) break;
            if (it->depth > t.path.depth) return true;
        }
        return false;
    }

    // Triangle id of a leaf in `idx` equal to `t` or an ancestor of it,
    // else -1.  Every candidate ancestor is a prefix of t.path, so each one
    // can be probed directly.
    static int find_ancestor_or_self(const std::vector<LeafKey>& idx, const Triangle& t)
    {
        for (int d = t.path.depth; d >= 0; --d) {
            LeafKey probe{t.root, truncated(t.path.bits, d),
                          static_cast<std::uint8_t>(d), -1};
            auto it = std::lower_bound(idx.begin(), idx.end(), probe);
            if (it != idx.end() && it->root == probe.root &&
                it->bits == probe.bits && it->depth == probe.depth)
                return it->tri;
        }
        return -1;
    }

    static std::array<std::uint64_t, 2> truncated(std::array<std::uint64_t, 2> bits, int depth)
    {
        if (depth <= 0) return {0, 0};
        if (depth < 64) {
            bits[0] &= ~std::uint64_t(0) << (64 - depth);
            bits[1] = 0;
        } else if (depth < 128) {
            if (depth > 64) bits[1] &= ~std::uint64_t(0) << (128 - depth);
            else bits[1] = 0;
        }
        return bits;
    }

    std::vector<Vec2> vertices_;
    std::vector<Triangle> tris_;
    std::vector<Edge> edges_;
    std::vector<std::array<int, 3>> tri_edges_;
    std::vector<char> boundary_vertex_;
    int n_interior_edges_ = 0;
    std::uint64_t family_ = 0;
};

} // namespace helmfem
