#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "pcaplab/constants.hpp"
#include "pcaplab/mesh.hpp"
#include "pcaplab/shapes.hpp"

namespace pcaplab {

/// Nodal scalar field on a uniform lattice, x index slowest. Selected nodes
/// may be displaced from their lattice position; the Kuhn tetrahedra then
/// follow the moved nodes.
struct LatticeField {
    Vec3 origin = Vec3::Zero();
    double h = 1.0;
    std::array<std::int64_t, 3> n{0, 0, 0};
    std::vector<double> values;
    std::unordered_map<std::int64_t, Vec3> moved;

    std::int64_t index(std::int64_t i, std::int64_t j, std::int64_t k) const { return (i * n[1] + j) * n[2] + k; }
    std::int64_t node_count() const { return n[0] * n[1] * n[2]; }
    Vec3 lattice_position(std::int64_t idx) const;
    Vec3 position(std::int64_t idx) const;
};

/// The six Kuhn tetrahedra of a cube, as corner bit masks (bit 0 = x, 1 = y, 2 = z).
/// Adjacent cubes split shared faces identically.
const std::array<std::array<int, 4>, 6>& kuhn_tetrahedra();

/// Global node indices of tetrahedron t in the cube with lower corner (i, j, k).
std::array<std::int64_t, 4> kuhn_tet_nodes(const LatticeField& f, std::int64_t i, std::int64_t j, std::int64_t k, int t);

enum class Facing { TowardIncreasing, TowardDecreasing };

/// Marching tetrahedra on the Kuhn decomposition. Vertices are shared through
/// lattice edge keys, so the output is a closed manifold whenever the level set
/// stays inside the lattice. When `tri_source` is given it receives, per
/// triangle, the tetrahedron id (cube linear index * 6 + t).
SurfaceMesh isosurface(const LatticeField& f, double level, Facing facing,
                       std::vector<std::int64_t>* tri_source = nullptr);

/// Exact volume of {f < level} for the piecewise-linear interpolant.
double sublevel_volume(const LatticeField& f, double level);

/// Planar analogue: nodal values on an nx-by-ny lattice (x slowest), squares
/// split along the (0,0)-(1,1) diagonal. Returns the length of {f = level}.
double isoline_length(const std::vector<double>& values, std::int64_t nx, std::int64_t ny, double h, double level);

/// Samples the level set of `domain` on its bounding box with spacing h.
LatticeField sample_levelset(const ImplicitDomain& domain, double h);

/// Triangulated boundary of a 3D domain: marching tetrahedra on the sampled
/// level set, vertices projected onto the zero set, then a few rounds of
/// tangential relaxation with reprojection.
/// Throws PreconditionError when h exceeds feature_size / 8 and MeshError when
/// the result is not a closed oriented manifold.
SurfaceMesh extract_boundary_mesh(const ImplicitDomain& domain, double h, int smoothing_rounds = 4);

}  // namespace pcaplab
