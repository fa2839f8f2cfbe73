#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "pcaplab/constants.hpp"

namespace pcaplab {

/// Triangulated closed surface with per-vertex geometric fields.
///
/// Geometry (vertices/triangles) is always present. vertex_area and normal are
/// filled by `update_vertex_geometry`; the curvature fields by `mesh_curvatures`.
/// Shape tensors are expressed in the per-vertex orthonormal tangent frame
/// (tangent1, tangent2), so that g restricted to the frame is the identity.
struct SurfaceMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    std::vector<double> vertex_area;
    std::vector<Vec3> normal;

    // Curvature fields (empty until mesh_curvatures runs).
    std::vector<double> H;            // sum of principal curvatures, > 0 on spheres
    std::vector<double> H_cotan;      // mean-curvature-normal cross-check
    std::vector<Mat2> h;              // second fundamental form in the tangent frame
    std::vector<Mat2> ring_h;         // h - (H/2) g
    std::vector<Vec3> tangent1, tangent2;
    std::vector<char> fit_fallback;   // 1 where the jet fit was rank-deficient

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t triangle_count() const { return triangles.size(); }
    bool has_curvature() const { return H.size() == vertices.size() && !vertices.empty(); }
};

/// Recomputes barycentric (one-third) vertex areas and area-weighted vertex normals.
void update_vertex_geometry(SurfaceMesh& mesh);

double triangle_area(const SurfaceMesh& mesh, std::size_t t);
double total_area(const SurfaceMesh& mesh);
/// Enclosed volume by the divergence theorem (positive for outward orientation).
double enclosed_volume(const SurfaceMesh& mesh);

/// Combinatorial data of the edge graph.
struct EdgeReport {
    std::size_t edge_count = 0;
    std::size_t boundary_edges = 0;      // used by one triangle
    std::size_t nonmanifold_edges = 0;   // used by more than two triangles
    std::size_t misoriented_edges = 0;   // two triangles traverse the edge in the same direction
    bool closed_orientable() const {
        return boundary_edges == 0 && nonmanifold_edges == 0 && misoriented_edges == 0;
    }
};
EdgeReport analyse_edges(const SurfaceMesh& mesh);

/// V - E + F.
int euler_characteristic(const SurfaceMesh& mesh);

/// Throws MeshError unless the mesh is closed, manifold and consistently oriented.
void require_closed_manifold(const SurfaceMesh& mesh);

/// Vertex adjacency lists (sorted, unique).
std::vector<std::vector<int>> vertex_neighbours(const SurfaceMesh& mesh);

// ASCII OFF ("OFF", counts line, vertex lines, face lines). Polygonal faces
// with more than three vertices are fan-triangulated on read.
SurfaceMesh read_off(std::istream& in);
SurfaceMesh read_off_file(const std::string& path);
void write_off(std::ostream& out, const SurfaceMesh& mesh);
void write_off_file(const std::string& path, const SurfaceMesh& mesh);

}  // namespace pcaplab
