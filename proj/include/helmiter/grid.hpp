#pragma once

// Uniform Cartesian grids over a Domain. Curved boundaries are stair-stepped:
// a lattice node outside the open region but within h/2 of the boundary is
// snapped onto it, and interior nodes left facing a missing neighbor are
// pulled onto the boundary as well, so every interior node keeps a full
// 5-point stencil.

#include <array>
#include <cstdint>
#include <ostream>
#include <unordered_map>

#include "geometry.hpp"

namespace helmiter {

class GridError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class NodeClass { Interior, DirichletBoundary, ReflectingBoundary };

// Stencil directions: +x, +y, -x, -y. opposite(d) == d ^ 2.
inline constexpr std::array<std::pair<int, int>, 4> kStencil{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};

struct GridNode {
    Vec2 pos;
    int i = 0, j = 0;            // lattice coordinates, pos = (i*h, j*h)
    NodeClass cls = NodeClass::Interior;
    std::array<int, 4> nbr{-1, -1, -1, -1};  // node ids, -1 where no grid node
    int row = -1;                // row in the assembled system, -1 for Dirichlet
    int segment = -1;            // nearest boundary segment (boundary nodes)
};

class Grid {
public:
    Grid(Domain domain, double h) : domain_(std::move(domain)), h_(h) {}

    const Domain& domain() const { return domain_; }
    double h() const { return h_; }
    const std::vector<GridNode>& nodes() const { return nodes_; }
    const GridNode& node(int id) const { return nodes_[id]; }
    int n_nodes() const { return static_cast<int>(nodes_.size()); }
    int n_rows() const { return n_rows_; }
    int n_interior() const { return n_interior_; }
    int n_reflecting() const { return n_reflecting_; }
    int n_dirichlet() const { return n_dirichlet_; }

    /// Node ids of all system rows, indexed by row number.
    const std::vector<int>& row_to_node() const { return row_to_node_; }

    int ghost_count(int id) const {
        int g = 0;
        for (int d = 0; d < 4; ++d)
            if (nodes_[id].nbr[d] < 0) ++g;
        return g;
    }

    void export_csv(std::ostream& os) const {
        os << "x,y,class,row_index\n";
        for (const auto& n : nodes_) {
            const char* c = n.cls == NodeClass::Interior ? "interior"
                          : n.cls == NodeClass::DirichletBoundary ? "dirichlet" : "reflecting";
            os << n.pos.x << ',' << n.pos.y << ',' << c << ',' << n.row << '\n';
        }
    }

private:
    friend Grid build_grid(const Domain&, double);

    Domain domain_;
    double h_;
    std::vector<GridNode> nodes_;
    std::vector<int> row_to_node_;
    int n_rows_ = 0, n_interior_ = 0, n_reflecting_ = 0, n_dirichlet_ = 0;
};

namespace detail {

inline std::int64_t lattice_key(int i, int j) {
    return (static_cast<std::int64_t>(i) << 32) ^ static_cast<std::uint32_t>(j);
}

// Boundary class from the nearest segment kind; Dirichlet wins ties so that
// absorbing corners stay absorbing.
inline std::pair<NodeClass, int> classify_boundary(const Domain& dom, Vec2 p) {
    auto nd = dom.nearest_of_kind(p, true);
    auto nr = dom.nearest_of_kind(p, false);
    const double tie = 1e-12;
    if (nd && (!nr || nd->distance <= nr->distance + tie))
        return {NodeClass::DirichletBoundary, nd->segment};
    return {NodeClass::ReflectingBoundary, nr->segment};
}

} // namespace detail

/// Build the stair-stepped grid of spacing h over a domain. Classification is
/// a pure function of (domain, h): lattice nodes are i*h anchored at the
/// origin. Fails when no interior node survives or a reflecting node has no
/// in-grid neighbor to lean on (geometry too thin for this h).
inline Grid build_grid(const Domain& domain, double h) {
    if (!(h > 0.0))
        throw GridError("discretization.build_grid: h must be positive");

    Grid grid(domain, h);
    auto bb = domain.bounding_box();
    int i0 = static_cast<int>(std::floor(bb.xmin / h)) - 1;
    int i1 = static_cast<int>(std::ceil(bb.xmax / h)) + 1;
    int j0 = static_cast<int>(std::floor(bb.ymin / h)) - 1;
    int j1 = static_cast<int>(std::ceil(bb.ymax / h)) + 1;

    const double snap = 0.5 * h * (1.0 + 1e-9);

    std::unordered_map<std::int64_t, int> index;
    auto& nodes = grid.nodes_;

    for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
            Vec2 p{i * h, j * h};
            GridNode n;
            n.pos = p;
            n.i = i;
            n.j = j;
            if (domain.contains(p)) {
                n.cls = NodeClass::Interior;
            } else {
                NearestBoundary nb = domain.nearest_boundary(p);
                if (nb.distance > snap) continue;  // outside, not snapped
                auto [cls, seg] = detail::classify_boundary(domain, p);
                n.cls = cls;
                n.segment = seg;
            }
            index.emplace(detail::lattice_key(i, j), static_cast<int>(nodes.size()));
            nodes.push_back(n);
        }
    }

    // Interior nodes adjacent to a missing lattice point sit on the
    // stair-stepped boundary themselves.
    for (auto& n : nodes) {
        if (n.cls != NodeClass::Interior) continue;
        for (auto [di, dj] : kStencil) {
            if (!index.count(detail::lattice_key(n.i + di, n.j + dj))) {
                auto [cls, seg] = detail::classify_boundary(domain, n.pos);
                n.cls = cls;
                n.segment = seg;
                break;
            }
        }
    }

    // Neighbor table, row indices, sanity checks.
    for (std::size_t id = 0; id < nodes.size(); ++id) {
        auto& n = nodes[id];
        for (int d = 0; d < 4; ++d) {
            auto it = index.find(detail::lattice_key(n.i + kStencil[d].first,
                                                     n.j + kStencil[d].second));
            n.nbr[d] = it == index.end() ? -1 : it->second;
        }
    }

    for (auto& n : nodes) {
        switch (n.cls) {
        case NodeClass::Interior:   ++grid.n_interior_; break;
        case NodeClass::DirichletBoundary: ++grid.n_dirichlet_; break;
        case NodeClass::ReflectingBoundary: ++grid.n_reflecting_; break;
        }
        if (n.cls != NodeClass::DirichletBoundary) {
            n.row = grid.n_rows_++;
            grid.row_to_node_.push_back(static_cast<int>(&n - nodes.data()));
        }
    }

    if (grid.n_interior_ == 0)
        throw GridError("discretization.build_grid: grid has no interior nodes (h too coarse)");

    for (const auto& n : nodes) {
        if (n.cls == NodeClass::Interior) {
            for (int d = 0; d < 4; ++d)
                if (n.nbr[d] < 0)
                    throw GridError("discretization.build_grid: interior node with missing neighbor");
        } else if (n.cls == NodeClass::ReflectingBoundary) {
            bool any = false, ghost = false;
            for (int d = 0; d < 4; ++d) {
                if (n.nbr[d] >= 0) any = true; else ghost = true;
            }
            if (!any)
                throw GridError("discretization.build_grid: isolated reflecting node (geometry too thin)");
            if (!ghost)
                throw GridError("discretization.build_grid: reflecting node without ghost direction");
        }
    }

    return grid;
}

} // namespace helmiter
