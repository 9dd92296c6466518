#pragma once

// 2-D domains with holes, typed boundary segments, and the closed-form
// distance / normal queries used by both the finite-difference grid builder
// and the reflected-path simulator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace helmiter {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Boundary condition attached to a segment. Robin segments carry a real
/// coefficient: the radiation condition reads du/dn - coeff*i*k*u = g, so the
/// imaginary unit never appears in the geometry itself.
enum class BcKind { Dirichlet, Neumann, Robin };

/// Straight piece of boundary (rectangle or rhombus edge) with a fixed
/// outward unit normal.
struct EdgeShape {
    Vec2 a, b;     // endpoints
    Vec2 outward;  // unit normal pointing out of the domain
};

/// Full circle. `domain_inside` is true when the domain lies inside the
/// circle (an outer boundary) and false for a circular hole.
struct CircleShape {
    Vec2 center;
    double radius = 0.0;
    bool domain_inside = true;
};

using SegmentShape = std::variant<EdgeShape, CircleShape>;

struct BoundarySegment {
    SegmentShape shape;
    BcKind kind = BcKind::Dirichlet;
    double robin_coeff = 1.0;     // multiplier on k in the Robin condition
    std::string data_label = "zero";
    bool on_outer = true;
};

/// Solid region primitive used for containment tests. A rhombus is the
/// diamond |x-cx|/a + |y-cy|/b <= 1 with half-diagonals a, b.
struct Region {
    enum class Type { Rect, Circle, Rhombus };
    Type type = Type::Rect;
    Vec2 center;          // circle / rhombus
    double radius = 0.0;  // circle
    double half_dx = 0.0, half_dy = 0.0;  // rhombus half-diagonals
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;  // rect

    static Region rect(double x0, double x1, double y0, double y1) {
        Region r;
        r.type = Type::Rect;
        r.xmin = x0; r.xmax = x1; r.ymin = y0; r.ymax = y1;
        return r;
    }
    static Region circle(Vec2 c, double rad) {
        Region r;
        r.type = Type::Circle;
        r.center = c; r.radius = rad;
        return r;
    }
    static Region rhombus(Vec2 c, double a, double b) {
        Region r;
        r.type = Type::Rhombus;
        r.center = c; r.half_dx = a; r.half_dy = b;
        return r;
    }

    bool contains(Vec2 p) const {
        switch (type) {
        case Type::Rect:
            return p.x > xmin && p.x < xmax && p.y > ymin && p.y < ymax;
        case Type::Circle:
            return (p - center).norm() < radius;
        case Type::Rhombus:
            return std::abs(p.x - center.x) / half_dx + std::abs(p.y - center.y) / half_dy < 1.0;
        }
        return false;
    }

    struct Box { double xmin, xmax, ymin, ymax; };
    Box bounding_box() const {
        switch (type) {
        case Type::Rect:    return {xmin, xmax, ymin, ymax};
        case Type::Circle:  return {center.x - radius, center.x + radius,
                                    center.y - radius, center.y + radius};
        case Type::Rhombus: return {center.x - half_dx, center.x + half_dx,
                                    center.y - half_dy, center.y + half_dy};
        }
        return {0, 0, 0, 0};
    }
};

/// Result of a nearest-boundary query.
struct NearestBoundary {
    int segment = -1;       // index into Domain::segments()
    double distance = 0.0;  // unsigned distance to the segment
    Vec2 normal;            // outward (out of the domain) unit normal at the closest point
    Vec2 closest;           // closest point on the segment
};

namespace detail {

inline NearestBoundary edge_query(const EdgeShape& e, Vec2 p) {
    Vec2 d = e.b - e.a;
    double len2 = d.dot(d);
    double t = len2 > 0 ? std::clamp((p - e.a).dot(d) / len2, 0.0, 1.0) : 0.0;
    Vec2 c = e.a + t * d;
    return {-1, (p - c).norm(), e.outward, c};
}

inline NearestBoundary circle_query(const CircleShape& s, Vec2 p) {
    Vec2 r = p - s.center;
    double rn = r.norm();
    Vec2 radial = rn > 1e-300 ? r * (1.0 / rn) : Vec2{1.0, 0.0};
    Vec2 c = s.center + radial * s.radius;
    // Outward w.r.t. the domain: radially out for an outer circle, radially
    // in (towards the hole center) for a hole boundary.
    Vec2 n = s.domain_inside ? radial : radial * -1.0;
    return {-1, std::abs(rn - s.radius), n, c};
}

} // namespace detail

inline NearestBoundary segment_query(const SegmentShape& shape, Vec2 p) {
    if (std::holds_alternative<EdgeShape>(shape))
        return detail::edge_query(std::get<EdgeShape>(shape), p);
    return detail::circle_query(std::get<CircleShape>(shape), p);
}

/// A bounded 2-D region: one closed outer boundary and zero or more closed
/// hole boundaries, each carved into typed segments. Immutable after
/// construction and safe to share across threads.
class Domain {
public:
    Domain(Region outer, std::vector<Region> holes, std::vector<BoundarySegment> segments)
        : outer_(outer), holes_(std::move(holes)), segments_(std::move(segments)) {
        validate();
    }

    bool contains(Vec2 p) const {
        if (!outer_.contains(p)) return false;
        for (const auto& h : holes_)
            if (h.contains(p)) return false;
        return true;
    }

    NearestBoundary nearest_boundary(Vec2 p) const {
        NearestBoundary best;
        best.distance = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            NearestBoundary q = segment_query(segments_[i].shape, p);
            if (q.distance < best.distance) {
                best = q;
                best.segment = static_cast<int>(i);
            }
        }
        return best;
    }

    /// Nearest segment restricted to one boundary-condition kind; used by the
    /// grid builder to break classification ties (Dirichlet wins).
    std::optional<NearestBoundary> nearest_of_kind(Vec2 p, bool dirichlet) const {
        std::optional<NearestBoundary> best;
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            bool is_d = segments_[i].kind == BcKind::Dirichlet;
            if (is_d != dirichlet) continue;
            NearestBoundary q = segment_query(segments_[i].shape, p);
            if (!best || q.distance < best->distance) {
                best = q;
                best->segment = static_cast<int>(i);
            }
        }
        return best;
    }

    const Region& outer() const { return outer_; }
    const std::vector<Region>& holes() const { return holes_; }
    const std::vector<BoundarySegment>& segments() const { return segments_; }
    Region::Box bounding_box() const { return outer_.bounding_box(); }

    bool has_dirichlet() const {
        for (const auto& s : segments_)
            if (s.kind == BcKind::Dirichlet) return true;
        return false;
    }
    bool has_reflecting() const {
        for (const auto& s : segments_)
            if (s.kind != BcKind::Dirichlet) return true;
        return false;
    }

private:
    // Holes must sit strictly inside the outer curve. A dense sample of each
    // hole's boundary suffices for the supported primitives.
    void validate() const {
        if (segments_.empty())
            throw GeometryError("geometry.Domain: no boundary segments");
        for (const auto& h : holes_) {
            for (Vec2 p : boundary_sample(h))
                if (!outer_.contains(p))
                    throw GeometryError("geometry.Domain: hole not strictly inside the outer boundary");
        }
    }

    static std::vector<Vec2> boundary_sample(const Region& r) {
        std::vector<Vec2> pts;
        const int n = 64;
        switch (r.type) {
        case Region::Type::Rect:
            for (int i = 0; i < n; ++i) {
                double t = double(i) / n;
                pts.push_back({r.xmin + t * (r.xmax - r.xmin), r.ymin});
                pts.push_back({r.xmin + t * (r.xmax - r.xmin), r.ymax});
                pts.push_back({r.xmin, r.ymin + t * (r.ymax - r.ymin)});
                pts.push_back({r.xmax, r.ymin + t * (r.ymax - r.ymin)});
            }
            break;
        case Region::Type::Circle:
            for (int i = 0; i < 4 * n; ++i) {
                double a = 2.0 * M_PI * i / (4 * n);
                pts.push_back({r.center.x + r.radius * std::cos(a),
                               r.center.y + r.radius * std::sin(a)});
            }
            break;
        case Region::Type::Rhombus:
            for (int i = 0; i < n; ++i) {
                double t = double(i) / n;
                pts.push_back({r.center.x + r.half_dx * (1 - t), r.center.y + r.half_dy * t});
                pts.push_back({r.center.x - r.half_dx * t, r.center.y + r.half_dy * (1 - t)});
                pts.push_back({r.center.x - r.half_dx * (1 - t), r.center.y - r.half_dy * t});
                pts.push_back({r.center.x + r.half_dx * t, r.center.y - r.half_dy * (1 - t)});
            }
            break;
        }
        return pts;
    }

    Region outer_;
    std::vector<Region> holes_;
    std::vector<BoundarySegment> segments_;
};

namespace detail {

inline std::vector<BoundarySegment> rect_outline(const Region& r, BcKind kind,
                                                 double robin_coeff,
                                                 const std::string& label,
                                                 bool on_outer) {
    // Outward normals flip for hole boundaries: "out of the domain" points
    // into the hole.
    double s = on_outer ? 1.0 : -1.0;
    std::vector<BoundarySegment> v;
    v.push_back({EdgeShape{{r.xmin, r.ymin}, {r.xmax, r.ymin}, {0, -s}}, kind, robin_coeff, label, on_outer});
    v.push_back({EdgeShape{{r.xmax, r.ymin}, {r.xmax, r.ymax}, {s, 0}}, kind, robin_coeff, label, on_outer});
    v.push_back({EdgeShape{{r.xmin, r.ymax}, {r.xmax, r.ymax}, {0, s}}, kind, robin_coeff, label, on_outer});
    v.push_back({EdgeShape{{r.xmin, r.ymin}, {r.xmin, r.ymax}, {-s, 0}}, kind, robin_coeff, label, on_outer});
    return v;
}

inline std::vector<BoundarySegment> rhombus_outline(const Region& r, BcKind kind,
                                                    double robin_coeff,
                                                    const std::string& label,
                                                    bool on_outer) {
    double s = on_outer ? 1.0 : -1.0;
    Vec2 c = r.center;
    Vec2 px{c.x + r.half_dx, c.y}, py{c.x, c.y + r.half_dy};
    Vec2 mx{c.x - r.half_dx, c.y}, my{c.x, c.y - r.half_dy};
    auto unit = [](Vec2 v) { double n = v.norm(); return v * (1.0 / n); };
    std::vector<BoundarySegment> v;
    v.push_back({EdgeShape{px, py, unit({r.half_dy, r.half_dx}) * s}, kind, robin_coeff, label, on_outer});
    v.push_back({EdgeShape{py, mx, unit({-r.half_dy, r.half_dx}) * s}, kind, robin_coeff, label, on_outer});
    v.push_back({EdgeShape{mx, my, unit({-r.half_dy, -r.half_dx}) * s}, kind, robin_coeff, label, on_outer});
    v.push_back({EdgeShape{my, px, unit({r.half_dy, -r.half_dx}) * s}, kind, robin_coeff, label, on_outer});
    return v;
}

inline std::vector<BoundarySegment> region_outline(const Region& r, BcKind kind,
                                                   double robin_coeff,
                                                   const std::string& label,
                                                   bool on_outer) {
    switch (r.type) {
    case Region::Type::Rect:
        return rect_outline(r, kind, robin_coeff, label, on_outer);
    case Region::Type::Circle:
        return {{CircleShape{r.center, r.radius, on_outer}, kind, robin_coeff, label, on_outer}};
    case Region::Type::Rhombus:
        return rhombus_outline(r, kind, robin_coeff, label, on_outer);
    }
    return {};
}

} // namespace detail

/// An annular domain: outer boundary reflecting (Robin), hole boundary
/// absorbing (Dirichlet, scattering data by default).
inline Domain annular_domain(const Region& outer, const Region& hole,
                             const std::string& hole_label = "plane-wave") {
    auto segs = detail::region_outline(outer, BcKind::Robin, 1.0, "zero", true);
    auto hs = detail::region_outline(hole, BcKind::Dirichlet, 0.0, hole_label, false);
    segs.insert(segs.end(), hs.begin(), hs.end());
    return Domain(outer, {hole}, std::move(segs));
}

/// Simply connected domain with a single boundary condition kind everywhere.
inline Domain solid_domain(const Region& outer, BcKind kind,
                           const std::string& label = "zero") {
    return Domain(outer, {}, detail::region_outline(outer, kind, 1.0, label, true));
}

enum class ShapePreset { Shape1, Shape2, Shape3, SquareSquareHole };

/// The annular benchmark geometries:
///   Shape1          square [-0.3,0.3]^2, circular hole r=0.15 at the origin
///   Shape2          disk centred (0.8,0.5) r=0.45, concentric rhomboidal hole
///                   of diagonal length 0.15
///   Shape3          rectangle [-0.5,0.5]x[-0.8,0.8], hole [-0.05,0.05]x[-0.4,0.4]
///   SquareSquareHole square [-0.5,0.5]^2 with square hole [-0.15,0.15]^2
inline Domain make_shape(ShapePreset preset) {
    switch (preset) {
    case ShapePreset::Shape1:
        return annular_domain(Region::rect(-0.3, 0.3, -0.3, 0.3),
                              Region::circle({0.0, 0.0}, 0.15));
    case ShapePreset::Shape2:
        return annular_domain(Region::circle({0.8, 0.5}, 0.45),
                              Region::rhombus({0.8, 0.5}, 0.075, 0.075));
    case ShapePreset::Shape3:
        return annular_domain(Region::rect(-0.5, 0.5, -0.8, 0.8),
                              Region::rect(-0.05, 0.05, -0.4, 0.4));
    case ShapePreset::SquareSquareHole:
        return annular_domain(Region::rect(-0.5, 0.5, -0.5, 0.5),
                              Region::rect(-0.15, 0.15, -0.15, 0.15));
    }
    throw GeometryError("geometry.make_shape: unknown preset");
}

/// Rectangular cavity, absorbing on the whole boundary.
inline Domain make_cavity(double x0, double x1, double y0, double y1) {
    return solid_domain(Region::rect(x0, x1, y0, y1), BcKind::Dirichlet);
}

/// Waveguide [0,1]x[0,L_wid]: absorbing top/bottom, radiating left/right.
/// The left edge carries the inlet data and the opposite Robin sign.
inline Domain make_waveguide(double L_wid) {
    if (!(L_wid > 0.0 && L_wid < 1.0))
        throw GeometryError("geometry.make_waveguide: need 0 < L_wid < 1");
    Region r = Region::rect(0.0, 1.0, 0.0, L_wid);
    std::vector<BoundarySegment> segs;
    segs.push_back({EdgeShape{{0, 0}, {1, 0}, {0, -1}}, BcKind::Dirichlet, 0.0, "zero", true});
    segs.push_back({EdgeShape{{0, L_wid}, {1, L_wid}, {0, 1}}, BcKind::Dirichlet, 0.0, "zero", true});
    segs.push_back({EdgeShape{{0, 0}, {0, L_wid}, {-1, 0}}, BcKind::Robin, -1.0, "waveguide-inlet", true});
    segs.push_back({EdgeShape{{1, 0}, {1, L_wid}, {1, 0}}, BcKind::Robin, 1.0, "zero", true});
    return Domain(r, {}, std::move(segs));
}

/// All-Dirichlet disk (validation geometry).
inline Domain make_disk(Vec2 center, double radius, BcKind kind = BcKind::Dirichlet) {
    return solid_domain(Region::circle(center, radius), kind);
}

/// Uniformly scale a domain about the origin by factor lambda > 0.
inline Domain scale_domain(const Domain& d, double lambda) {
    auto scale_region = [lambda](const Region& r) {
        Region s = r;
        s.center = r.center * lambda;
        s.radius = r.radius * lambda;
        s.half_dx = r.half_dx * lambda;
        s.half_dy = r.half_dy * lambda;
        s.xmin = r.xmin * lambda; s.xmax = r.xmax * lambda;
        s.ymin = r.ymin * lambda; s.ymax = r.ymax * lambda;
        return s;
    };
    std::vector<Region> holes;
    for (const auto& h : d.holes()) holes.push_back(scale_region(h));
    std::vector<BoundarySegment> segs = d.segments();
    for (auto& s : segs) {
        if (std::holds_alternative<EdgeShape>(s.shape)) {
            auto& e = std::get<EdgeShape>(s.shape);
            e.a = e.a * lambda;
            e.b = e.b * lambda;
        } else {
            auto& c = std::get<CircleShape>(s.shape);
            c.center = c.center * lambda;
            c.radius *= lambda;
        }
    }
    return Domain(scale_region(d.outer()), std::move(holes), std::move(segs));
}

// --- JSON serialization ----------------------------------------------------

inline nlohmann::json to_json(const Region& r) {
    using Type = Region::Type;
    switch (r.type) {
    case Type::Rect:
        return {{"type", "rect"}, {"xmin", r.xmin}, {"xmax", r.xmax},
                {"ymin", r.ymin}, {"ymax", r.ymax}};
    case Type::Circle:
        return {{"type", "circle"}, {"cx", r.center.x}, {"cy", r.center.y},
                {"r", r.radius}};
    case Type::Rhombus:
        return {{"type", "rhombus"}, {"cx", r.center.x}, {"cy", r.center.y},
                {"a", r.half_dx}, {"b", r.half_dy}};
    }
    return {};
}

inline Region region_from_json(const nlohmann::json& j) {
    std::string t = j.at("type");
    if (t == "rect")
        return Region::rect(j.at("xmin"), j.at("xmax"), j.at("ymin"), j.at("ymax"));
    if (t == "circle")
        return Region::circle({j.at("cx"), j.at("cy")}, j.at("r"));
    if (t == "rhombus")
        return Region::rhombus({j.at("cx"), j.at("cy")}, j.at("a"), j.at("b"));
    throw GeometryError("geometry.region_from_json: unknown region type '" + t + "'");
}

inline nlohmann::json to_json(const BoundarySegment& s) {
    nlohmann::json shape;
    if (std::holds_alternative<EdgeShape>(s.shape)) {
        const auto& e = std::get<EdgeShape>(s.shape);
        shape = {{"type", "edge"},
                 {"ax", e.a.x}, {"ay", e.a.y}, {"bx", e.b.x}, {"by", e.b.y},
                 {"nx", e.outward.x}, {"ny", e.outward.y}};
    } else {
        const auto& c = std::get<CircleShape>(s.shape);
        shape = {{"type", "circle"}, {"cx", c.center.x}, {"cy", c.center.y},
                 {"r", c.radius}, {"domain_inside", c.domain_inside}};
    }
    const char* kind = s.kind == BcKind::Dirichlet ? "dirichlet"
                     : s.kind == BcKind::Neumann   ? "neumann" : "robin";
    return {{"shape", shape}, {"kind", kind}, {"robin_coeff", s.robin_coeff},
            {"data_label", s.data_label}, {"on_outer", s.on_outer}};
}

inline BoundarySegment segment_from_json(const nlohmann::json& j) {
    BoundarySegment s;
    const auto& sh = j.at("shape");
    std::string t = sh.at("type");
    if (t == "edge") {
        s.shape = EdgeShape{{sh.at("ax"), sh.at("ay")}, {sh.at("bx"), sh.at("by")},
                            {sh.at("nx"), sh.at("ny")}};
    } else if (t == "circle") {
        s.shape = CircleShape{{sh.at("cx"), sh.at("cy")}, sh.at("r"),
                              sh.at("domain_inside")};
    } else {
        throw GeometryError("geometry.segment_from_json: unknown shape type '" + t + "'");
    }
    std::string kind = j.at("kind");
    s.kind = kind == "dirichlet" ? BcKind::Dirichlet
           : kind == "neumann"   ? BcKind::Neumann : BcKind::Robin;
    s.robin_coeff = j.value("robin_coeff", 1.0);
    s.data_label = j.value("data_label", "zero");
    s.on_outer = j.value("on_outer", true);
    return s;
}

inline nlohmann::json to_json(const Domain& d) {
    nlohmann::json holes = nlohmann::json::array();
    for (const auto& h : d.holes()) holes.push_back(to_json(h));
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : d.segments()) segs.push_back(to_json(s));
    return {{"outer", to_json(d.outer())}, {"holes", holes}, {"segments", segs}};
}

inline Domain domain_from_json(const nlohmann::json& j) {
    Region outer = region_from_json(j.at("outer"));
    std::vector<Region> holes;
    for (const auto& h : j.at("holes")) holes.push_back(region_from_json(h));
    std::vector<BoundarySegment> segs;
    for (const auto& s : j.at("segments")) segs.push_back(segment_from_json(s));
    return Domain(outer, std::move(holes), std::move(segs));
}

} // namespace helmiter
