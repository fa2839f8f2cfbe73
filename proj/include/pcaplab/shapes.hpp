#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "pcaplab/constants.hpp"
#include "pcaplab/mesh.hpp"

namespace pcaplab {

enum class ShapeTag { Ball, Ellipsoid, Dumbbell, SolidTorus, LShape2D, CustomMesh };

std::string to_string(ShapeTag tag);
ShapeTag parse_shape_tag(std::string_view name);

struct Box {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
    Vec3 extent() const { return hi - lo; }
};

/// Geometric metadata a shape declares about itself.
struct ShapeInfo {
    ShapeTag tag = ShapeTag::Ball;
    int dimension = 3;
    Box bounding_box;
    Vec3 interior_seed = Vec3::Zero();
    double margin = 0.0;         // min distance from the zero set to the box faces
    double feature_size = 0.0;   // smallest feature (diameter of the thinnest part)
    double circumradius = 0.0;   // max |x| over the closure, about the origin
    double inradius = 0.0;       // radius of a ball known to lie inside
    std::array<bool, 3> mirror{false, false, false};  // reflection symmetry x_i -> -x_i
    std::map<std::string, double> parameters;
};

/// A bounded open set given by a level-set function: negative inside, zero on
/// the boundary, positive outside. Cheap to copy (the function is shared).
class ImplicitDomain {
public:
    using ScalarFn = std::function<double(const Vec3&)>;
    using GradientFn = std::function<Vec3(const Vec3&)>;

    ImplicitDomain(ShapeInfo info, ScalarFn levelset, GradientFn gradient = {});

    const ShapeInfo& info() const { return info_; }
    ShapeTag tag() const { return info_.tag; }
    int dimension() const { return info_.dimension; }
    const Box& bounding_box() const { return info_.bounding_box; }

    double levelset(const Vec3& x) const { return levelset_(x); }
    Vec3 gradient(const Vec3& x) const;
    bool contains(const Vec3& x) const { return levelset_(x) < 0.0; }
    /// phi / |grad phi|: first-order signed distance.
    double distance_estimate(const Vec3& x) const;
    /// Newton projection onto the zero set along the level-set gradient.
    Vec3 project(const Vec3& x) const;

    /// The dilated set lambda * Omega (lambda > 0).
    ImplicitDomain scaled(double lambda) const;

    /// Checks the declared invariants (seed inside, box faces outside and at
    /// least `margin` away). Throws PreconditionError on violation.
    void validate() const;

private:
    ShapeInfo info_;
    ScalarFn levelset_;
    GradientFn gradient_;
};

ImplicitDomain make_ball(double radius, int dimension = 3);
ImplicitDomain make_ellipsoid(double a, double b, double c);
/// Two balls of radius `radius` centred at (+-center_offset, 0, 0) joined by a
/// neck of radius `neck_radius`; log-sum-exp blending with width neck_radius/2.
ImplicitDomain make_dumbbell(double center_offset, double radius, double neck_radius);
ImplicitDomain make_solid_torus(double major_radius, double minor_radius);
/// [0,2s]x[0,s] union [0,s]x[0,2s] in the plane (corners are not smoothed).
ImplicitDomain make_l_shape_2d(double arm = 1.0);
/// Inside/outside of a closed triangle mesh via winding numbers, distance by
/// brute force over the triangles. Intended for small meshes.
ImplicitDomain make_custom_mesh(SurfaceMesh mesh);

/// Generic factory used by configuration files. Unknown keys are rejected.
ImplicitDomain make_shape(ShapeTag tag, const std::map<std::string, double>& params);

}  // namespace pcaplab
