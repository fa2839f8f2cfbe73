#include "pcaplab/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "pcaplab/errors.hpp"

namespace pcaplab {

namespace {

constexpr int kMinNeighbourhood = 15;
constexpr int kMaxRings = 4;

std::vector<int> neighbourhood(const std::vector<std::vector<int>>& nbr, int v, std::vector<int>& mark, int stamp) {
    std::vector<int> out{v};
    mark[v] = stamp;
    std::size_t ring_start = 0;
    for (int ring = 1; ring <= kMaxRings; ++ring) {
        const std::size_t ring_end = out.size();
        for (std::size_t q = ring_start; q < ring_end; ++q) {
            for (int w : nbr[out[q]]) {
                if (mark[w] != stamp) {
                    mark[w] = stamp;
                    out.push_back(w);
                }
            }
        }
        ring_start = ring_end;
        if (ring >= 2 && static_cast<int>(out.size()) - 1 >= kMinNeighbourhood) break;
    }
    return out;
}

void orthonormal_basis(const Vec3& n, Vec3& t1, Vec3& t2) {
    const Vec3 seed = std::abs(n.x()) < 0.6 ? Vec3::UnitX() : (std::abs(n.y()) < 0.6 ? Vec3::UnitY() : Vec3::UnitZ());
    t1 = (seed - seed.dot(n) * n).normalized();
    t2 = n.cross(t1);
}

struct JetFit {
    bool ok = false;
    double fx = 0, fy = 0, fxx = 0, fxy = 0, fyy = 0;
};

// z = c0 + c1 x + c2 y + c3 x^2 + c4 xy + c5 y^2 [+ cubic terms], in scaled coordinates.
JetFit fit_height(const std::vector<Eigen::Vector3d>& local, double scale) {
    const int m = static_cast<int>(local.size());
    const int k = m >= 20 ? 10 : 6;
    Eigen::MatrixXd A(m, k);
    Eigen::VectorXd b(m);
    for (int r = 0; r < m; ++r) {
        const double x = local[r].x() / scale, y = local[r].y() / scale;
        A(r, 0) = 1;
        A(r, 1) = x;
        A(r, 2) = y;
        A(r, 3) = x * x;
        A(r, 4) = x * y;
        A(r, 5) = y * y;
        if (k == 10) {
            A(r, 6) = x * x * x;
            A(r, 7) = x * x * y;
            A(r, 8) = x * y * y;
            A(r, 9) = y * y * y;
        }
        b(r) = local[r].z() / scale;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-8);
    JetFit fit;
    if (qr.rank() < k) return fit;
    const Eigen::VectorXd c = qr.solve(b);
    fit.ok = true;
    fit.fx = c(1);
    fit.fy = c(2);
    fit.fxx = 2 * c(3) / scale;
    fit.fxy = c(4) / scale;
    fit.fyy = 2 * c(5) / scale;
    return fit;
}

void cotan_mean_curvature(SurfaceMesh& mesh) {
    const std::size_t nv = mesh.vertices.size();
    std::vector<Vec3> lap(nv, Vec3::Zero());
    for (const auto& tri : mesh.triangles) {
        for (int q = 0; q < 3; ++q) {
            const int i = tri[q], j = tri[(q + 1) % 3], k = tri[(q + 2) % 3];
            const Vec3 ei = mesh.vertices[i] - mesh.vertices[k];
            const Vec3 ej = mesh.vertices[j] - mesh.vertices[k];
            const double cross = ei.cross(ej).norm();
            if (cross == 0) continue;
            const double cot = ei.dot(ej) / cross;
            const Vec3 d = mesh.vertices[j] - mesh.vertices[i];
            lap[i] += 0.5 * cot * d;
            lap[j] -= 0.5 * cot * d;
        }
    }
    mesh.H_cotan.assign(nv, 0.0);
    for (std::size_t v = 0; v < nv; ++v) {
        // Laplace-Beltrami of the embedding is -H times the outward normal.
        mesh.H_cotan[v] = -lap[v].dot(mesh.normal[v]) / mesh.vertex_area[v];
    }
}

}  // namespace

void mesh_curvatures(SurfaceMesh& mesh) {
    require_closed_manifold(mesh);
    update_vertex_geometry(mesh);
    cotan_mean_curvature(mesh);
    const std::size_t nv = mesh.vertices.size();
    const auto nbr = vertex_neighbours(mesh);
    mesh.H.assign(nv, 0.0);
    mesh.h.assign(nv, Mat2::Zero());
    mesh.ring_h.assign(nv, Mat2::Zero());
    mesh.tangent1.assign(nv, Vec3::Zero());
    mesh.tangent2.assign(nv, Vec3::Zero());
    mesh.fit_fallback.assign(nv, 0);

#pragma omp parallel
    {
        std::vector<int> mark(nv, -1);
        std::vector<Eigen::Vector3d> local;
#pragma omp for schedule(static)
        for (std::int64_t vi = 0; vi < static_cast<std::int64_t>(nv); ++vi) {
            const int v = static_cast<int>(vi);
            const auto hood = neighbourhood(nbr, v, mark, v);
            const Vec3& p0 = mesh.vertices[v];
            double scale = 0.0;
            for (int w : hood) scale = std::max(scale, (mesh.vertices[w] - p0).norm());
            Vec3 n = mesh.normal[v];
            Vec3 t1, t2;
            JetFit fit;
            for (int pass = 0; pass < 3; ++pass) {
                orthonormal_basis(n, t1, t2);
                local.clear();
                for (int w : hood) {
                    const Vec3 d = mesh.vertices[w] - p0;
                    local.emplace_back(d.dot(t1), d.dot(t2), d.dot(n));
                }
                fit = scale > 0 ? fit_height(local, scale) : JetFit{};
                if (!fit.ok) break;
                if (pass < 2) n = (n - fit.fx * t1 - fit.fy * t2).normalized();
            }
            Mat2 h_on;
            if (fit.ok) {
                // Coordinate tangents e_i = t_i + f_i n, metric g = I + grad f grad f^T.
                const Eigen::Vector2d grad(fit.fx, fit.fy);
                const double w = std::sqrt(1.0 + grad.squaredNorm());
                Mat2 hess;
                hess << fit.fxx, fit.fxy, fit.fxy, fit.fyy;
                const Mat2 g = Mat2::Identity() + grad * grad.transpose();
                const Mat2 L = g.llt().matrixL();
                const Mat2 Linv = L.inverse();
                h_on = Linv * (-hess / w) * Linv.transpose();
                const Vec3 e1 = t1 + fit.fx * n, e2 = t2 + fit.fy * n;
                mesh.tangent1[v] = Linv(0, 0) * e1 + Linv(0, 1) * e2;
                mesh.tangent2[v] = Linv(1, 0) * e1 + Linv(1, 1) * e2;
            } else {
                mesh.fit_fallback[v] = 1;
                h_on = 0.5 * mesh.H_cotan[v] * Mat2::Identity();
                mesh.tangent1[v] = t1;
                mesh.tangent2[v] = t2;
            }
            h_on = 0.5 * (h_on + h_on.transpose()).eval();
            mesh.h[v] = h_on;
            mesh.H[v] = h_on.trace();
            mesh.ring_h[v] = h_on - 0.5 * mesh.H[v] * Mat2::Identity();
        }
    }
}

double boundary_integral(const SurfaceMesh& mesh, const std::vector<double>& integrand) {
    if (integrand.size() != mesh.vertices.size() || mesh.vertex_area.size() != mesh.vertices.size()) {
        throw PreconditionError("boundary_integral: integrand size does not match the vertex count");
    }
    double sum = 0.0;
    for (std::size_t v = 0; v < integrand.size(); ++v) sum += integrand[v] * mesh.vertex_area[v];
    return sum;
}

std::vector<double> shape_norm_squared(const SurfaceMesh& mesh) {
    std::vector<double> out(mesh.h.size());
    for (std::size_t v = 0; v < out.size(); ++v) out[v] = mesh.h[v].squaredNorm();
    return out;
}

std::vector<double> traceless_norm_squared(const SurfaceMesh& mesh) {
    std::vector<double> out(mesh.ring_h.size());
    for (std::size_t v = 0; v < out.size(); ++v) out[v] = mesh.ring_h[v].squaredNorm();
    return out;
}

GaussBonnet gauss_bonnet_check(const SurfaceMesh& mesh) {
    if (!mesh.has_curvature()) throw PreconditionError("gauss_bonnet_check: curvature fields are not populated");
    std::vector<double> k2(mesh.vertices.size());
    for (std::size_t v = 0; v < k2.size(); ++v) k2[v] = mesh.H[v] * mesh.H[v] - mesh.h[v].squaredNorm();
    GaussBonnet gb;
    gb.integral = boundary_integral(mesh, k2);
    gb.chi_estimate = gb.integral / (4.0 * std::numbers::pi);
    gb.chi_combinatorial = euler_characteristic(mesh);
    gb.flagged = std::abs(gb.chi_estimate - gb.chi_combinatorial) > 0.2;
    return gb;
}

}  // namespace pcaplab
