#pragma once

#include <vector>

#include "pcaplab/mesh.hpp"

namespace pcaplab {

/// Populates H, H_cotan, h, ring_h and the tangent frames of a closed mesh.
///
/// h comes from a least-squares height-function fit over the two-ring (grown
/// until at least 15 neighbours are available), expressed in the orthonormal
/// tangent frame of the refined normal. H = trace h. H_cotan is the normal
/// component of the cotangent Laplacian of the embedding. Vertices whose fit
/// is rank-deficient fall back to h = (H_cotan / 2) I and are flagged.
void mesh_curvatures(SurfaceMesh& mesh);

/// Sum over vertices of integrand(v) * vertex_area(v).
double boundary_integral(const SurfaceMesh& mesh, const std::vector<double>& integrand);

struct GaussBonnet {
    double integral = 0.0;           // sum of (H^2 - |h|^2) dA
    double chi_estimate = 0.0;       // integral / (4 pi)
    int chi_combinatorial = 0;       // V - E + F
    bool flagged = false;            // the two disagree by more than 0.2
};

GaussBonnet gauss_bonnet_check(const SurfaceMesh& mesh);

/// Per-vertex |h|^2 (Frobenius norm in the orthonormal frame) and |ring_h|^2.
std::vector<double> shape_norm_squared(const SurfaceMesh& mesh);
std::vector<double> traceless_norm_squared(const SurfaceMesh& mesh);

}  // namespace pcaplab
