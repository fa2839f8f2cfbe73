#include "pcaplab/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "pcaplab/errors.hpp"

namespace pcaplab {

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw PreconditionError(std::string(what) + " must be positive and finite");
    }
}

// Stable -k log(sum exp(-a_i/k)).
double smooth_min(std::initializer_list<double> values, double k) {
    const double m = std::min(values);
    double s = 0.0;
    for (double v : values) s += std::exp(-(v - m) / k);
    return m - k * std::log(s);
}

double smooth_max(double a, double b, double k) { return -smooth_min({-a, -b}, k); }

Box symmetric_box(const Vec3& half_extent, double margin, int dim) {
    Box b;
    b.lo = -(half_extent.array() + margin).matrix();
    b.hi = (half_extent.array() + margin).matrix();
    if (dim == 2) b.lo.z() = b.hi.z() = 0.0;
    return b;
}

// Closest point on triangle (Ericson, Real-Time Collision Detection 5.1.5).
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace

std::string to_string(ShapeTag tag) {
    switch (tag) {
        case ShapeTag::Ball: return "ball";
        case ShapeTag::Ellipsoid: return "ellipsoid";
        case ShapeTag::Dumbbell: return "dumbbell";
        case ShapeTag::SolidTorus: return "solid-torus";
        case ShapeTag::LShape2D: return "L-shape-2d";
        case ShapeTag::CustomMesh: return "custom-mesh";
    }
    return "unknown";
}

ShapeTag parse_shape_tag(std::string_view name) {
    for (auto tag : {ShapeTag::Ball, ShapeTag::Ellipsoid, ShapeTag::Dumbbell, ShapeTag::SolidTorus,
                     ShapeTag::LShape2D, ShapeTag::CustomMesh}) {
        if (to_string(tag) == name) return tag;
    }
    throw PreconditionError("unknown shape tag '" + std::string(name) + "'");
}

ImplicitDomain::ImplicitDomain(ShapeInfo info, ScalarFn levelset, GradientFn gradient)
    : info_(std::move(info)), levelset_(std::move(levelset)), gradient_(std::move(gradient)) {}

Vec3 ImplicitDomain::gradient(const Vec3& x) const {
    if (gradient_) return gradient_(x);
    const double step = 1e-6 * std::max(1.0, info_.circumradius);
    Vec3 g = Vec3::Zero();
    for (int d = 0; d < info_.dimension; ++d) {
        Vec3 xp = x, xm = x;
        xp[d] += step;
        xm[d] -= step;
        g[d] = (levelset_(xp) - levelset_(xm)) / (2.0 * step);
    }
    return g;
}

double ImplicitDomain::distance_estimate(const Vec3& x) const {
    const double g = gradient(x).norm();
    const double f = levelset_(x);
    return g > 0 ? f / g : f;
}

Vec3 ImplicitDomain::project(const Vec3& x) const {
    Vec3 y = x;
    const double tol = 1e-14 * std::max(1.0, info_.circumradius);
    for (int it = 0; it < 50; ++it) {
        const double f = levelset_(y);
        const Vec3 g = gradient(y);
        const double g2 = g.squaredNorm();
        if (g2 == 0.0) break;
        const Vec3 step = g * (f / g2);
        y -= step;
        if (step.norm() <= tol) break;
    }
    return y;
}

ImplicitDomain ImplicitDomain::scaled(double lambda) const {
    require_positive(lambda, "scale factor");
    ShapeInfo s = info_;
    s.bounding_box.lo *= lambda;
    s.bounding_box.hi *= lambda;
    s.interior_seed *= lambda;
    s.margin *= lambda;
    s.feature_size *= lambda;
    s.circumradius *= lambda;
    s.inradius *= lambda;
    s.parameters["scale"] = lambda * (info_.parameters.count("scale") ? info_.parameters.at("scale") : 1.0);
    auto f = levelset_;
    ScalarFn fs = [f, lambda](const Vec3& x) { return lambda * f(x / lambda); };
    GradientFn gs;
    if (gradient_) {
        auto g = gradient_;
        gs = [g, lambda](const Vec3& x) { return g(x / lambda); };
    }
    return ImplicitDomain(std::move(s), std::move(fs), std::move(gs));
}

void ImplicitDomain::validate() const {
    if (!(levelset_(info_.interior_seed) < 0.0)) {
        throw PreconditionError(to_string(info_.tag) + ": level set is not negative at the interior seed");
    }
    const Box& b = info_.bounding_box;
    const int dim = info_.dimension;
    constexpr int samples = 17;
    for (int axis = 0; axis < dim; ++axis) {
        for (int side = 0; side < 2; ++side) {
            const int u = (axis + 1) % dim;
            const int v = (dim == 3) ? (axis + 2) % 3 : -1;
            for (int i = 0; i < samples; ++i) {
                for (int j = 0; j < (dim == 3 ? samples : 1); ++j) {
                    Vec3 x = Vec3::Zero();
                    x[axis] = side ? b.hi[axis] : b.lo[axis];
                    x[u] = b.lo[u] + (b.hi[u] - b.lo[u]) * i / (samples - 1.0);
                    if (v >= 0) x[v] = b.lo[v] + (b.hi[v] - b.lo[v]) * j / (samples - 1.0);
                    if (!(levelset_(x) > 0.0) || distance_estimate(x) < 0.5 * info_.margin) {
                        throw PreconditionError(to_string(info_.tag) +
                                                ": zero set is not bounded away from the bounding box");
                    }
                }
            }
        }
    }
}

ImplicitDomain make_ball(double radius, int dimension) {
    require_positive(radius, "ball radius");
    if (dimension != 2 && dimension != 3) throw PreconditionError("ball: dimension must be 2 or 3");
    ShapeInfo info;
    info.tag = ShapeTag::Ball;
    info.dimension = dimension;
    info.margin = radius;
    info.bounding_box = symmetric_box(Vec3::Constant(radius), radius, dimension);
    info.feature_size = 2.0 * radius;
    info.circumradius = radius;
    info.inradius = radius;
    info.mirror = {true, true, dimension == 3};
    info.parameters = {{"radius", radius}};
    auto f = [radius](const Vec3& x) { return x.norm() - radius; };
    auto g = [](const Vec3& x) -> Vec3 {
        const double r = x.norm();
        return r > 0 ? Vec3(x / r) : Vec3::UnitX();
    };
    return ImplicitDomain(std::move(info), f, g);
}

ImplicitDomain make_ellipsoid(double a, double b, double c) {
    require_positive(a, "ellipsoid semi-axis a");
    require_positive(b, "ellipsoid semi-axis b");
    require_positive(c, "ellipsoid semi-axis c");
    const double amax = std::max({a, b, c});
    ShapeInfo info;
    info.tag = ShapeTag::Ellipsoid;
    info.margin = amax;
    info.bounding_box = symmetric_box(Vec3(a, b, c), info.margin, 3);
    info.feature_size = 2.0 * std::min({a, b, c});
    info.circumradius = amax;
    info.inradius = std::min({a, b, c});
    info.mirror = {true, true, true};
    info.parameters = {{"a", a}, {"b", b}, {"c", c}};
    const Vec3 inv2(1.0 / (a * a), 1.0 / (b * b), 1.0 / (c * c));
    auto f = [inv2](const Vec3& x) { return x.cwiseProduct(x).dot(inv2) - 1.0; };
    auto g = [inv2](const Vec3& x) -> Vec3 { return 2.0 * x.cwiseProduct(inv2); };
    return ImplicitDomain(std::move(info), f, g);
}

ImplicitDomain make_dumbbell(double center_offset, double radius, double neck_radius) {
    require_positive(center_offset, "dumbbell centre offset");
    require_positive(radius, "dumbbell ball radius");
    require_positive(neck_radius, "dumbbell neck radius");
    if (neck_radius >= radius) throw PreconditionError("dumbbell: neck radius must be smaller than ball radius");
    const double k = 0.5 * neck_radius;
    const double c = center_offset;
    const double reach = c + radius;
    ShapeInfo info;
    info.tag = ShapeTag::Dumbbell;
    info.margin = 0.6 * reach;
    info.bounding_box = symmetric_box(Vec3(reach, radius, radius), info.margin, 3);
    info.feature_size = 2.0 * neck_radius;
    info.circumradius = reach;
    info.inradius = radius;
    info.interior_seed = Vec3(c, 0, 0);
    info.mirror = {true, true, true};
    info.parameters = {{"center_offset", c}, {"radius", radius}, {"neck_radius", neck_radius}};
    auto f = [c, radius, neck_radius, k](const Vec3& x) {
        const double left = (x - Vec3(-c, 0, 0)).norm() - radius;
        const double right = (x - Vec3(c, 0, 0)).norm() - radius;
        const double rho = std::hypot(x.y(), x.z());
        // Smooth slab |x| <= c intersected with the infinite cylinder rho <= r.
        const double neck = smooth_max(rho - neck_radius, (x.x() * x.x() - c * c) / (2.0 * c), k);
        return smooth_min({left, right, neck}, k);
    };
    ImplicitDomain dom(std::move(info), f);
    return dom;
}

ImplicitDomain make_solid_torus(double major_radius, double minor_radius) {
    require_positive(major_radius, "torus major radius");
    require_positive(minor_radius, "torus minor radius");
    if (minor_radius >= major_radius) throw PreconditionError("solid-torus: minor radius must be below major radius");
    const double R = major_radius, r = minor_radius;
    ShapeInfo info;
    info.tag = ShapeTag::SolidTorus;
    info.margin = 0.6 * (R + r);
    info.bounding_box = symmetric_box(Vec3(R + r, R + r, r), info.margin, 3);
    info.feature_size = 2.0 * r;
    info.circumradius = R + r;
    info.inradius = r;
    info.interior_seed = Vec3(R, 0, 0);
    info.mirror = {true, true, true};
    info.parameters = {{"major_radius", R}, {"minor_radius", r}};
    auto f = [R, r](const Vec3& x) {
        const double q = std::hypot(x.x(), x.y()) - R;
        return std::hypot(q, x.z()) - r;
    };
    auto g = [R](const Vec3& x) -> Vec3 {
        const double rho = std::hypot(x.x(), x.y());
        const double q = rho - R;
        const double d = std::hypot(q, x.z());
        if (rho == 0 || d == 0) return Vec3::UnitZ();
        return Vec3(q * x.x() / (rho * d), q * x.y() / (rho * d), x.z() / d);
    };
    return ImplicitDomain(std::move(info), f, g);
}

ImplicitDomain make_l_shape_2d(double arm) {
    require_positive(arm, "L-shape arm");
    const double s = arm;
    const std::vector<Vec3> poly = {Vec3(0, 0, 0),     Vec3(2 * s, 0, 0), Vec3(2 * s, s, 0),
                                    Vec3(s, s, 0),     Vec3(s, 2 * s, 0), Vec3(0, 2 * s, 0)};
    ShapeInfo info;
    info.tag = ShapeTag::LShape2D;
    info.dimension = 2;
    const double diameter = 2.0 * std::sqrt(2.0) * s;
    info.margin = 0.3 * diameter;
    info.bounding_box.lo = Vec3(-info.margin, -info.margin, 0);
    info.bounding_box.hi = Vec3(2 * s + info.margin, 2 * s + info.margin, 0);
    info.feature_size = s;
    info.circumradius = std::sqrt(5.0) * s;
    info.inradius = 0.5 * s;
    info.interior_seed = Vec3(0.5 * s, 0.5 * s, 0);
    info.parameters = {{"arm", s}};
    auto f = [poly](const Vec3& p) {
        double dmin = std::numeric_limits<double>::infinity();
        bool inside = false;
        const std::size_t n = poly.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const Vec3& a = poly[j];
            const Vec3& b = poly[i];
            const Vec3 ab = b - a;
            const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
            dmin = std::min(dmin, (p - (a + t * ab)).norm());
            if ((a.y() > p.y()) != (b.y() > p.y())) {
                const double xc = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
                if (p.x() < xc) inside = !inside;
            }
        }
        return inside ? -dmin : dmin;
    };
    return ImplicitDomain(std::move(info), f);
}

ImplicitDomain make_custom_mesh(SurfaceMesh mesh) {
    require_closed_manifold(mesh);
    if (enclosed_volume(mesh) <= 0.0) throw PreconditionError("custom-mesh: mesh must be oriented outward");
    Vec3 lo = mesh.vertices.front(), hi = lo;
    double circ = 0.0;
    Vec3 centroid = Vec3::Zero();
    double six_vol = 0.0;
    for (const auto& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
        circ = std::max(circ, v.norm());
    }
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        const double w = a.dot(b.cross(c));
        six_vol += w;
        centroid += w * (a + b + c) / 4.0;
    }
    centroid /= six_vol;
    const double diameter = (hi - lo).norm();
    ShapeInfo info;
    info.tag = ShapeTag::CustomMesh;
    info.margin = 0.3 * diameter;
    info.bounding_box.lo = (lo.array() - info.margin).matrix();
    info.bounding_box.hi = (hi.array() + info.margin).matrix();
    info.feature_size = (hi - lo).minCoeff();
    info.circumradius = circ;
    info.inradius = 0.0;
    info.interior_seed = centroid;
    info.parameters = {{"vertices", static_cast<double>(mesh.vertices.size())}};
    auto shared = std::make_shared<const SurfaceMesh>(std::move(mesh));
    auto f = [shared](const Vec3& p) {
        double dmin2 = std::numeric_limits<double>::infinity();
        double solid_angle = 0.0;
        for (const auto& t : shared->triangles) {
            const Vec3& a = shared->vertices[t[0]];
            const Vec3& b = shared->vertices[t[1]];
            const Vec3& c = shared->vertices[t[2]];
            dmin2 = std::min(dmin2, (p - closest_on_triangle(p, a, b, c)).squaredNorm());
            // Van Oosterom-Strackee solid angle.
            const Vec3 ra = a - p, rb = b - p, rc = c - p;
            const double la = ra.norm(), lb = rb.norm(), lc = rc.norm();
            const double num = ra.dot(rb.cross(rc));
            const double den = la * lb * lc + ra.dot(rb) * lc + rb.dot(rc) * la + rc.dot(ra) * lb;
            solid_angle += 2.0 * std::atan2(num, den);
        }
        const bool inside = solid_angle > 2.0 * std::numbers::pi;
        const double d = std::sqrt(dmin2);
        return inside ? -d : d;
    };
    ImplicitDomain dom(std::move(info), f);
    ShapeInfo adjusted = dom.info();
    // Inradius: distance from the centroid to the surface, when the centroid is inside.
    adjusted.inradius = std::max(0.0, -dom.levelset(centroid));
    return ImplicitDomain(std::move(adjusted), f);
}

ImplicitDomain make_shape(ShapeTag tag, const std::map<std::string, double>& params) {
    auto take = [&](const std::string& key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    auto reject_unknown = [&](std::initializer_list<const char*> allowed) {
        for (const auto& [key, value] : params) {
            bool ok = key == "scale";
            for (const char* a : allowed) ok = ok || key == a;
            if (!ok) throw PreconditionError("unknown parameter '" + key + "' for shape " + to_string(tag));
        }
    };
    ImplicitDomain dom = [&]() {
        switch (tag) {
            case ShapeTag::Ball:
                reject_unknown({"radius", "dimension"});
                return make_ball(take("radius", 1.0), static_cast<int>(take("dimension", 3)));
            case ShapeTag::Ellipsoid:
                reject_unknown({"a", "b", "c"});
                return make_ellipsoid(take("a", 1.5), take("b", 1.0), take("c", 0.75));
            case ShapeTag::Dumbbell:
                reject_unknown({"center_offset", "radius", "neck_radius"});
                return make_dumbbell(take("center_offset", 1.5), take("radius", 1.0), take("neck_radius", 0.3));
            case ShapeTag::SolidTorus:
                reject_unknown({"major_radius", "minor_radius"});
                return make_solid_torus(take("major_radius", 2.0), take("minor_radius", 0.5));
            case ShapeTag::LShape2D:
                reject_unknown({"arm"});
                return make_l_shape_2d(take("arm", 1.0));
            case ShapeTag::CustomMesh:
                throw PreconditionError("custom-mesh shapes are built from an OFF file, not parameters");
        }
        throw PreconditionError("unsupported shape tag");
    }();
    const double scale = take("scale", 1.0);
    return scale == 1.0 ? dom : dom.scaled(scale);
}

}  // namespace pcaplab
