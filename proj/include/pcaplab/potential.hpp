#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcaplab/errors.hpp"
#include "pcaplab/marching.hpp"
#include "pcaplab/mesh.hpp"
#include "pcaplab/shapes.hpp"

namespace pcaplab {

enum class NodeKind : std::uint8_t {
    Free = 0,
    Inner = 1,     // inside the domain, u = 1
    Boundary = 2,  // moved onto the boundary, u = 1
    Outer = 3,     // |x| >= R_out, asymptotic profile
};

/// Per-tetrahedron gradient operator: grad u = B * (u0, u1, u2, u3).
struct TetGeometry {
    Eigen::Matrix<double, 3, 4> B;
    double volume = 0.0;
};

/// Summary of one pass of the far-field loop.
struct OuterIteration {
    double h = 0.0;
    double capacity_imposed = 0.0;
    double capacity_estimated = 0.0;
    double energy = 0.0;            // unregularised total energy (with tail)
    int newton_iterations = 0;
};

/// Discrete p-capacitary potential: P1 finite elements on the Kuhn
/// triangulation of a lattice covering the box of B_{R_out}, reduced by the
/// reflection symmetries of the domain.
struct PotentialField {
    LatticeField lattice;
    std::vector<NodeKind> kind;
    std::array<bool, 3> mirror{false, false, false};
    int dimension = 3;
    double p = 2.0;
    double epsilon = 0.0;
    double R_out = 0.0;
    double energy = 0.0;             // unregularised, full space, with tail
    double regularized_energy = 0.0; // reduced-domain regularised energy at the last iterate
    double residual_norm = 0.0;      // max-norm of the regularised gradient on free nodes
    double capacity_estimate = 0.0;  // C_p re-estimated from the final field
    double capacity_imposed = 0.0;   // C_p used in the final outer boundary condition
    std::vector<double> energy_log;  // accepted Newton iterates of the final stage
    std::vector<OuterIteration> outer_log;
    Warnings warnings;
    std::shared_ptr<const ImplicitDomain> domain;
    std::shared_ptr<const PotentialField> coarse;  // previous nested level, if any

    // Irregular tetrahedra (any vertex moved), indexed through the cube.
    std::vector<std::int32_t> cube_irregular;          // -1 or index into irregular
    std::vector<std::array<TetGeometry, 6>> irregular;

    double alpha() const { return (dimension - p) / (p - 1.0); }
    int multiplicity() const;
    std::int64_t cube_index(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return (i * (lattice.n[1] - 1) + j) * (lattice.n[2] - 1) + k;
    }
    /// Gradient operator of tetrahedron t in the cube with lower corner (i,j,k).
    TetGeometry tet_geometry(std::int64_t i, std::int64_t j, std::int64_t k, int t) const;

    /// Asymptotic profile C^{1/(p-1)} |x|^{-alpha}.
    double far_profile(const Vec3& x, double capacity) const;

    /// Value at a lattice node, reflecting indices across mirror planes.
    double node_value(std::int64_t i, std::int64_t j, std::int64_t k) const;

    /// Containing tetrahedron of x (after reflection into the computational
    /// region): node indices, barycentric weights and gradient operator.
    /// inside_domain is set when x falls in no element and lies in the domain.
    struct Location {
        std::array<std::int64_t, 4> nodes{};
        Eigen::Vector4d weights = Eigen::Vector4d::Zero();
        Eigen::Matrix<double, 3, 4> B = Eigen::Matrix<double, 3, 4>::Zero();
        std::array<bool, 3> flipped{false, false, false};
        bool inside_domain = false;
    };
    bool locate(const Vec3& x, Location& loc) const;

    /// P1 value and gradient at an arbitrary point (reflected into the
    /// computational region). Points inside the domain get 1 and zero gradient.
    /// Returns false when x lies outside the lattice.
    bool sample(const Vec3& x, double& value, Vec3* gradient = nullptr) const;
    double value_at(const Vec3& x) const;
};

struct SolveOptions {
    double p = 1.5;
    double h = 1.0 / 32.0;
    double R_out = 4.0;
    int nested_levels = 3;           // solves at h * 2^k, k = levels-1 .. 0
    int far_field_passes = 3;        // on the coarsest nested level
    double epsilon0 = 1.0;               // initial epsilon = epsilon0 / circumradius
    double epsilon_final_factor = 1e-4;  // epsilon_final = factor / h
    double energy_tolerance = 1e-10;
    int max_newton = 60;
    std::optional<double> initial_capacity;
    bool verbose = false;
};

/// Lattice, node classification and boundary snapping for one spacing:
/// `cells` cells per mirrored half-axis (2 * cells along unmirrored axes).
/// Inside nodes next to the exterior and exterior nodes closer than 0.2 h to
/// the boundary are moved onto the boundary (Dirichlet u = 1); moves that
/// would flatten a tetrahedron carrying a free node are damped or undone.
PotentialField make_exterior_lattice(const ImplicitDomain& domain, double p, double h, double R_out,
                                     std::int64_t cells);

/// Minimises the regularised p-Dirichlet energy outside the domain.
PotentialField solve_exterior(const ImplicitDomain& domain, const SolveOptions& options);

/// Unregularised energy over the truncated region times the symmetry
/// multiplicity, plus the closed-form tail of the asymptotic profile
/// (capacity `capacity` or, when absent, the imposed one) beyond R_out.
double field_energy(const PotentialField& field, std::optional<double> capacity = std::nullopt);
double tail_energy(double p, int n, double R_out, double capacity);

struct BoundaryGradient {
    std::vector<double> grad_norm;       // |Du| >= 0
    std::vector<double> normal_derivative;
    std::vector<char> probe_outside;     // probe stencil left the lattice
    std::size_t flagged = 0;
    bool extrapolated = false;
};

/// Normal derivative at each mesh vertex from a weighted least-squares fit of
/// nodal values within 3h, in the signed distance and tangential coordinates,
/// with u = 1 on the boundary built in. When the field carries its coarser
/// nested level the two estimates are combined by Richardson extrapolation
/// (the near-boundary gradient error is first order in h).
BoundaryGradient boundary_gradient(const PotentialField& field, const SurfaceMesh& mesh);

// PCAP1 / HULL1 binary layout: 5-byte magic, int64 dimension, double
// origin[dim], double spacing, int64 extents[dim], then nodal doubles with the
// x index slowest. Little-endian.
void write_lattice_binary(std::ostream& out, const char* magic, const LatticeField& f, int dimension);
LatticeField read_lattice_binary(std::istream& in, const char* magic, int& dimension);
void save_field(const std::string& path, const PotentialField& field);
LatticeField load_field_lattice(const std::string& path, int& dimension);

}  // namespace pcaplab
