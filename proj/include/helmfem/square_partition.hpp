#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "helmfem/geometry.hpp"
#include "helmfem/triangulation.hpp"

namespace helmfem {

/// Regular partition of an axis-aligned rectangle into congruent square
/// cells.  Cells are stored with counterclockwise corner order.
class SquarePartition {
public:
    struct Cell {
        std::array<int, 4> v;   // corners, CCW starting at the lower left
    };
    struct CellEdge {
        int a = -1, b = -1;
        int cell_plus = -1, cell_minus = -1;
        bool boundary = true;
    };

    static SquarePartition build(int nx, int ny, Vec2 origin, double width, double height)
    {
        detail::require(nx >= 1 && ny >= 1, "SquarePartition: nx, ny must be >= 1");
        const double sx = width / nx, sy = height / ny;
        detail::require(std::abs(sx - sy) <= 1e-12 * std::max(sx, sy),
                        "SquarePartition: cells are not squares");
        SquarePartition sq;
        sq.nx_ = nx;
        sq.ny_ = ny;
        sq.size_ = sx;
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i)
                sq.vertices_.push_back({origin.x + i * sx, origin.y + j * sy});
        auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                sq.cells_.push_back({{vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)}});
        sq.build_edges();
        return sq;
    }

    int n_cells() const { return static_cast<int>(cells_.size()); }
    int n_vertices() const { return static_cast<int>(vertices_.size()); }
    int n_edges() const { return static_cast<int>(edges_.size()); }
    int n_interior_edges() const { return n_interior_edges_; }
    double cell_size() const { return size_; }

    const std::vector<Vec2>& vertices() const { return vertices_; }
    const Cell& cell(int c) const { return cells_[c]; }
    const std::vector<CellEdge>& edges() const { return edges_; }
    /// Local edge j of a cell joins corners j and (j+1) mod 4.
    int cell_edge(int c, int j) const { return cell_edges_[c][j]; }

    Vec2 center(int c) const
    {
        return midpoint(vertices_[cells_[c].v[0]], vertices_[cells_[c].v[2]]);
    }

    /// 3 card(T) + 1 = card(E(Omega)) + card(N) for quadrilateral partitions.
    bool euler_identity_holds() const
    {
        return 3L * n_cells() + 1 == static_cast<long>(n_interior_edges_) + n_vertices();
    }

private:
    void build_edges()
    {
        std::unordered_map<std::uint64_t, int> ids;
        cell_edges_.assign(cells_.size(), {-1, -1, -1, -1});
        for (std::size_t c = 0; c < cells_.size(); ++c)
            for (int j = 0; j < 4; ++j) {
                const int a = cells_[c].v[j], b = cells_[c].v[(j + 1) % 4];
                const std::uint64_t key = detail::edge_key(a, b);
                auto it = ids.find(key);
                if (it == ids.end()) {
                    CellEdge e;
                    e.a = a;
                    e.b = b;
                    e.cell_plus = static_cast<int>(c);
                    ids.emplace(key, static_cast<int>(edges_.size()));
                    cell_edges_[c][j] = static_cast<int>(edges_.size());
                    edges_.push_back(e);
                } else {
                    edges_[it->second].cell_minus = static_cast<int>(c);
                    edges_[it->second].boundary = false;
                    cell_edges_[c][j] = it->second;
                }
            }
        n_interior_edges_ = 0;
        for (const CellEdge& e : edges_)
            if (!e.boundary) ++n_interior_edges_;
    }

    int nx_ = 0, ny_ = 0;
    double size_ = 0.0;
    std::vector<Vec2> vertices_;
    std::vector<Cell> cells_;
    std::vector<CellEdge> edges_;
    std::vector<std::array<int, 4>> cell_edges_;
    int n_interior_edges_ = 0;
};

} // namespace helmfem
