#include "pcaplab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pcaplab/constants.hpp"

namespace pcaplab {

namespace {

constexpr double kMinVolumeRatio = 0.05;
constexpr double kSnapDistance = 0.2;

std::int64_t corner_offset(const LatticeField& f, int corner) {
    return ((corner & 1) ? f.n[1] * f.n[2] : 0) + ((corner & 2) ? f.n[2] : 0) + ((corner & 4) ? 1 : 0);
}

// Gradients of the barycentric coordinates of a regular Kuhn tetrahedron (unit spacing).
const std::array<Eigen::Matrix<double, 3, 4>, 6>& regular_b() {
    static const std::array<Eigen::Matrix<double, 3, 4>, 6> table = [] {
        std::array<Eigen::Matrix<double, 3, 4>, 6> out;
        const auto& tets = kuhn_tetrahedra();
        for (int t = 0; t < 6; ++t) {
            Eigen::Matrix3d M;
            Vec3 x0(tets[t][0] & 1, (tets[t][0] >> 1) & 1, (tets[t][0] >> 2) & 1);
            for (int q = 1; q < 4; ++q) {
                const int c = tets[t][q];
                M.col(q - 1) = Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1) - x0;
            }
            const Eigen::Matrix3d Minv = M.inverse();
            Eigen::Matrix<double, 3, 4> B;
            for (int q = 1; q < 4; ++q) B.col(q) = Minv.row(q - 1).transpose();
            B.col(0) = -(B.col(1) + B.col(2) + B.col(3));
            out[t] = B;
        }
        return out;
    }();
    return table;
}

TetGeometry geometry_from_points(const std::array<Vec3, 4>& x) {
    Eigen::Matrix3d M;
    for (int q = 1; q < 4; ++q) M.col(q - 1) = x[q] - x[0];
    TetGeometry g;
    const double det = M.determinant();
    g.volume = std::abs(det) / 6.0;
    if (det == 0.0) {
        g.B.setZero();
        return g;
    }
    const Eigen::Matrix3d Minv = M.inverse();
    for (int q = 1; q < 4; ++q) g.B.col(q) = Minv.row(q - 1).transpose();
    g.B.col(0) = -(g.B.col(1) + g.B.col(2) + g.B.col(3));
    return g;
}

}  // namespace

int PotentialField::multiplicity() const {
    int m = 1;
    for (bool b : mirror) m *= b ? 2 : 1;
    return m;
}

TetGeometry PotentialField::tet_geometry(std::int64_t i, std::int64_t j, std::int64_t k, int t) const {
    const std::int32_t irr = cube_irregular.empty() ? -1 : cube_irregular[cube_index(i, j, k)];
    if (irr >= 0) return irregular[irr][t];
    TetGeometry g;
    g.B = regular_b()[t] / lattice.h;
    g.volume = lattice.h * lattice.h * lattice.h / 6.0;
    return g;
}

double PotentialField::far_profile(const Vec3& x, double capacity) const {
    const double r = x.norm();
    return std::pow(capacity, 1.0 / (p - 1.0)) * std::pow(r, -alpha());
}

double PotentialField::node_value(std::int64_t i, std::int64_t j, std::int64_t k) const {
    std::int64_t idx[3] = {i, j, k};
    for (int d = 0; d < 3; ++d) {
        if (idx[d] < 0 && mirror[d]) idx[d] = -idx[d];
        if (idx[d] < 0 || idx[d] >= lattice.n[d]) return std::numeric_limits<double>::quiet_NaN();
    }
    return lattice.values[lattice.index(idx[0], idx[1], idx[2])];
}

bool PotentialField::locate(const Vec3& x_in, Location& loc) const {
    Vec3 x = x_in;
    loc.flipped = {false, false, false};
    for (int d = 0; d < 3; ++d) {
        if (mirror[d] && x[d] < 0) {
            x[d] = -x[d];
            loc.flipped[d] = true;
        }
    }
    loc.inside_domain = false;
    const Vec3 xi = (x - lattice.origin) / lattice.h;
    std::int64_t c[3];
    for (int d = 0; d < 3; ++d) {
        if (!(xi[d] >= -1e-12) || xi[d] > static_cast<double>(lattice.n[d] - 1) + 1e-12) return false;
        c[d] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(xi[d])), 0, lattice.n[d] - 2);
    }
    bool irregular_near = false;
    if (!irregular.empty()) {
        for (std::int64_t a = std::max<std::int64_t>(c[0] - 1, 0); a <= std::min(c[0] + 1, lattice.n[0] - 2); ++a)
            for (std::int64_t b = std::max<std::int64_t>(c[1] - 1, 0); b <= std::min(c[1] + 1, lattice.n[1] - 2); ++b)
                for (std::int64_t e = std::max<std::int64_t>(c[2] - 1, 0); e <= std::min(c[2] + 1, lattice.n[2] - 2); ++e)
                    irregular_near = irregular_near || cube_irregular[cube_index(a, b, e)] >= 0;
    }
    if (!irregular_near) {
        const Vec3 f(xi[0] - c[0], xi[1] - c[1], xi[2] - c[2]);
        std::array<int, 3> ord{0, 1, 2};
        std::sort(ord.begin(), ord.end(), [&](int a, int b) { return f[a] > f[b] || (f[a] == f[b] && a < b); });
        const std::int64_t base = lattice.index(c[0], c[1], c[2]);
        const int m1 = 1 << ord[0], m2 = m1 | (1 << ord[1]);
        loc.nodes = {base, base + corner_offset(lattice, m1), base + corner_offset(lattice, m2),
                     base + corner_offset(lattice, 7)};
        loc.weights = Eigen::Vector4d(1 - f[ord[0]], f[ord[0]] - f[ord[1]], f[ord[1]] - f[ord[2]], f[ord[2]]);
        loc.B.setZero();
        for (int q = 0; q < 3; ++q) {
            const int axis = ord[q];
            loc.B(axis, q) = -1.0 / lattice.h;
            loc.B(axis, q + 1) = 1.0 / lattice.h;
        }
        return true;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::int64_t a = std::max<std::int64_t>(c[0] - 1, 0); a <= std::min(c[0] + 1, lattice.n[0] - 2); ++a) {
        for (std::int64_t b = std::max<std::int64_t>(c[1] - 1, 0); b <= std::min(c[1] + 1, lattice.n[1] - 2); ++b) {
            for (std::int64_t e = std::max<std::int64_t>(c[2] - 1, 0); e <= std::min(c[2] + 1, lattice.n[2] - 2); ++e) {
                for (int t = 0; t < 6; ++t) {
                    const auto nodes = kuhn_tet_nodes(lattice, a, b, e, t);
                    const TetGeometry tg = tet_geometry(a, b, e, t);
                    if (tg.volume == 0.0) continue;
                    Eigen::Vector4d lam = tg.B.transpose() * (x - lattice.position(nodes[0]));
                    lam(0) += 1.0;
                    const double worst = lam.minCoeff();
                    if (worst > best) {
                        best = worst;
                        loc.nodes = nodes;
                        loc.weights = lam;
                        loc.B = tg.B;
                    }
                }
            }
        }
    }
    loc.inside_domain = best < -1e-9 && domain && domain->contains(x);
    return true;
}

bool PotentialField::sample(const Vec3& x, double& value, Vec3* gradient) const {
    Location loc;
    if (!locate(x, loc)) return false;
    if (loc.inside_domain) {
        value = 1.0;
        if (gradient) gradient->setZero();
        return true;
    }
    Eigen::Vector4d u;
    for (int q = 0; q < 4; ++q) u(q) = lattice.values[loc.nodes[q]];
    value = loc.weights.dot(u);
    if (gradient) {
        Vec3 g = loc.B * u;
        for (int d = 0; d < 3; ++d) {
            if (loc.flipped[d]) g[d] = -g[d];
        }
        *gradient = g;
    }
    return true;
}

double PotentialField::value_at(const Vec3& x) const {
    double v;
    return sample(x, v) ? v : std::numeric_limits<double>::quiet_NaN();
}

PotentialField make_exterior_lattice(const ImplicitDomain& domain, double p, double h, double R_out,
                                     std::int64_t cells) {
    if (domain.dimension() != 3) throw PreconditionError("the exterior solver handles n = 3 domains");
    PotentialField F;
    F.domain = std::make_shared<const ImplicitDomain>(domain);
    F.dimension = 3;
    F.p = p;
    F.R_out = R_out;
    F.mirror = domain.info().mirror;
    LatticeField& L = F.lattice;
    L.h = h;
    for (int d = 0; d < 3; ++d) {
        L.n[d] = (F.mirror[d] ? cells : 2 * cells) + 1;
        L.origin[d] = F.mirror[d] ? 0.0 : -static_cast<double>(cells) * h;
    }
    const std::int64_t N = L.node_count();
    L.values.assign(static_cast<std::size_t>(N), 0.0);
    F.kind.assign(static_cast<std::size_t>(N), NodeKind::Free);
    std::vector<double> phi(static_cast<std::size_t>(N));
#pragma omp parallel for schedule(static)
    for (std::int64_t idx = 0; idx < N; ++idx) {
        const Vec3 x = L.lattice_position(idx);
        phi[idx] = domain.levelset(x);
        if (phi[idx] < 0) F.kind[idx] = NodeKind::Inner;
        else if (x.norm() >= R_out) F.kind[idx] = NodeKind::Outer;
    }

    // Kuhn neighbours: +-(corner masks 1..7).
    std::vector<std::array<std::int64_t, 3>> nbr;
    for (int mask = 1; mask < 8; ++mask) {
        const std::array<std::int64_t, 3> o{mask & 1, (mask >> 1) & 1, (mask >> 2) & 1};
        nbr.push_back(o);
        nbr.push_back({-o[0], -o[1], -o[2]});
    }
    auto snap = [&](std::int64_t idx) {
        Vec3 y = domain.project(L.lattice_position(idx));
        for (int d = 0; d < 3; ++d) {
            if (F.mirror[d] && std::abs(L.lattice_position(idx)[d]) < 1e-14) y[d] = 0.0;
        }
        return y;
    };
    // Neighbour index with reflection across mirror planes, or -1.
    auto neighbour = [&](std::int64_t i, std::int64_t j, std::int64_t k, const std::array<std::int64_t, 3>& o) {
        std::int64_t id[3] = {i + o[0], j + o[1], k + o[2]};
        for (int d = 0; d < 3; ++d) {
            if (id[d] < 0 && F.mirror[d]) id[d] = -id[d];
            if (id[d] < 0 || id[d] >= L.n[d]) return std::int64_t{-1};
        }
        return L.index(id[0], id[1], id[2]);
    };
    std::vector<std::pair<std::int64_t, Vec3>> moves;
    for (std::int64_t idx = 0; idx < N; ++idx) {
        if (F.kind[idx] == NodeKind::Free && domain.distance_estimate(L.lattice_position(idx)) < kSnapDistance * h) {
            F.kind[idx] = NodeKind::Boundary;
            moves.emplace_back(idx, Vec3::Zero());
        }
    }
    std::vector<std::int64_t> inner_moves;
    for (std::int64_t i = 0; i < L.n[0]; ++i) {
        for (std::int64_t j = 0; j < L.n[1]; ++j) {
            for (std::int64_t k = 0; k < L.n[2]; ++k) {
                const std::int64_t idx = L.index(i, j, k);
                if (F.kind[idx] != NodeKind::Inner) continue;
                for (const auto& o : nbr) {
                    const std::int64_t q = neighbour(i, j, k, o);
                    if (q >= 0 && F.kind[q] == NodeKind::Free) {
                        inner_moves.push_back(idx);
                        break;
                    }
                }
            }
        }
    }
    for (std::int64_t idx : inner_moves) {
        F.kind[idx] = NodeKind::Boundary;
        moves.emplace_back(idx, Vec3::Zero());
    }
#pragma omp parallel for schedule(static)
    for (std::size_t m = 0; m < moves.size(); ++m) moves[m].second = snap(moves[m].first);
    for (const auto& [idx, y] : moves) L.moved[idx] = y;

    // Damp moves that flatten or invert tetrahedra carrying a free node.
    const double vref = h * h * h / 6.0;
    const auto& tets = kuhn_tetrahedra();
    std::array<double, 6> lattice_sign{};
    for (int t = 0; t < 6; ++t) {
        std::array<Vec3, 4> x;
        for (int q = 0; q < 4; ++q) {
            const int c = tets[t][q];
            x[q] = Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1);
        }
        lattice_sign[t] = (x[1] - x[0]).dot((x[2] - x[0]).cross(x[3] - x[0])) > 0 ? 1.0 : -1.0;
    }
    auto moved_cubes = [&]() {
        std::vector<std::int64_t> cubes;
        for (const auto& [idx, y] : L.moved) {
            const std::int64_t k = idx % L.n[2];
            const std::int64_t j = (idx / L.n[2]) % L.n[1];
            const std::int64_t i = idx / (L.n[1] * L.n[2]);
            for (std::int64_t a = i - 1; a <= i; ++a)
                for (std::int64_t b = j - 1; b <= j; ++b)
                    for (std::int64_t c = k - 1; c <= k; ++c)
                        if (a >= 0 && b >= 0 && c >= 0 && a < L.n[0] - 1 && b < L.n[1] - 1 && c < L.n[2] - 1)
                            cubes.push_back(L.index(a, b, c));
        }
        std::sort(cubes.begin(), cubes.end());
        cubes.erase(std::unique(cubes.begin(), cubes.end()), cubes.end());
        return cubes;
    };
    for (int round = 0; round <= 8; ++round) {
        std::vector<std::int64_t> offenders;
        for (std::int64_t base : moved_cubes()) {
            for (int t = 0; t < 6; ++t) {
                std::array<std::int64_t, 4> nodes;
                bool has_free = false, has_moved = false;
                std::array<Vec3, 4> x;
                for (int q = 0; q < 4; ++q) {
                    nodes[q] = base + corner_offset(L, tets[t][q]);
                    has_free = has_free || F.kind[nodes[q]] == NodeKind::Free;
                    has_moved = has_moved || L.moved.count(nodes[q]);
                    x[q] = L.position(nodes[q]);
                }
                if (!has_free || !has_moved) continue;
                const double vol = lattice_sign[t] * (x[1] - x[0]).dot((x[2] - x[0]).cross(x[3] - x[0])) / 6.0;
                if (vol < kMinVolumeRatio * vref) {
                    // Inside nodes give way first; they keep u = 1 wherever they sit.
                    bool inner_moved = false;
                    for (auto nd : nodes) inner_moved = inner_moved || (phi[nd] < 0 && L.moved.count(nd));
                    for (auto nd : nodes)
                        if (L.moved.count(nd) && (!inner_moved || phi[nd] < 0)) offenders.push_back(nd);
                }
            }
        }
        if (offenders.empty()) break;
        std::sort(offenders.begin(), offenders.end());
        offenders.erase(std::unique(offenders.begin(), offenders.end()), offenders.end());
        for (auto nd : offenders) {
            if (round < 8) {
                const Vec3 base = L.lattice_position(nd);
                L.moved[nd] = base + 0.5 * (L.moved[nd] - base);
            } else {
                L.moved.erase(nd);
                if (phi[nd] >= 0) F.kind[nd] = NodeKind::Free;
            }
        }
    }
    // Exterior nodes whose damped move no longer reaches the boundary stay free.
    for (auto it = L.moved.begin(); it != L.moved.end();) {
        if (phi[it->first] >= 0 && domain.distance_estimate(it->second) > 1e-3 * h) {
            F.kind[it->first] = NodeKind::Free;
            it = L.moved.erase(it);
        } else {
            ++it;
        }
    }

    const std::int64_t ncubes = (L.n[0] - 1) * (L.n[1] - 1) * (L.n[2] - 1);
    F.cube_irregular.assign(static_cast<std::size_t>(ncubes), -1);
    for (std::int64_t cidx : moved_cubes()) {
        const std::int64_t k = cidx % L.n[2];
        const std::int64_t j = (cidx / L.n[2]) % L.n[1];
        const std::int64_t i = cidx / (L.n[1] * L.n[2]);
        std::array<TetGeometry, 6> geo;
        for (int t = 0; t < 6; ++t) {
            std::array<Vec3, 4> x;
            for (int q = 0; q < 4; ++q) x[q] = L.position(cidx + corner_offset(L, tets[t][q]));
            geo[t] = geometry_from_points(x);
        }
        F.cube_irregular[F.cube_index(i, j, k)] = static_cast<std::int32_t>(F.irregular.size());
        F.irregular.push_back(geo);
    }
    for (std::int64_t idx = 0; idx < N; ++idx) {
        if (F.kind[idx] == NodeKind::Inner || F.kind[idx] == NodeKind::Boundary) L.values[idx] = 1.0;
    }
    return F;
}

double tail_energy(double p, int n, double R_out, double capacity) {
    const double alpha = (n - p) / (p - 1.0);
    const double c = std::pow(capacity, 1.0 / (p - 1.0));
    return std::pow(alpha * c, p) * sphere_area(n) * std::pow(R_out, -alpha) / alpha;
}

double field_energy(const PotentialField& F, std::optional<double> capacity) {
    const LatticeField& L = F.lattice;
    const auto& tets = kuhn_tetrahedra();
    std::array<std::int64_t, 8> off{};
    for (int c = 0; c < 8; ++c) off[c] = corner_offset(L, c);
    std::vector<double> slab(static_cast<std::size_t>(L.n[0] - 1), 0.0);
    const double p = F.p;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < L.n[0] - 1; ++i) {
        double s = 0.0;
        for (std::int64_t j = 0; j + 1 < L.n[1]; ++j) {
            for (std::int64_t k = 0; k + 1 < L.n[2]; ++k) {
                const std::int64_t base = L.index(i, j, k);
                bool all_one = true;
                for (int c = 0; c < 8; ++c) {
                    const NodeKind kd = F.kind[base + off[c]];
                    all_one = all_one && (kd == NodeKind::Inner || kd == NodeKind::Boundary);
                }
                if (all_one) continue;
                for (int t = 0; t < 6; ++t) {
                    Vec3 centroid = Vec3::Zero();
                    Eigen::Vector4d u;
                    for (int q = 0; q < 4; ++q) {
                        const std::int64_t nd = base + off[tets[t][q]];
                        centroid += L.position(nd);
                        u(q) = L.values[nd];
                    }
                    if ((centroid / 4.0).norm() >= F.R_out) continue;
                    const TetGeometry g = F.tet_geometry(i, j, k, t);
                    const double gn = (g.B * u).norm();
                    if (gn > 0) s += g.volume * std::pow(gn, p);
                }
            }
        }
        slab[i] = s;
    }
    double total = 0.0;
    for (double s : slab) total += s;
    return F.multiplicity() * total +
           tail_energy(p, F.dimension, F.R_out, capacity.value_or(F.capacity_imposed));
}

namespace {

// Weighted least-squares fit of u - 1 in the signed distance z (so u = 1 on the
// boundary exactly) and tangential coordinates, over non-inner nodes near x0.
bool fit_normal_derivative(const PotentialField& F, const Vec3& x0, const Vec3& nrm, double& du) {
    constexpr int kTerms = 11;
    const ImplicitDomain& dom = *F.domain;
    const LatticeField& L = F.lattice;
    const double h = L.h;
    const double reach = 3.0 * h;
    const Vec3 t1 = nrm.unitOrthogonal();
    const Vec3 t2 = nrm.cross(t1);
    const Vec3 centre = x0 + 1.5 * h * nrm;
    std::int64_t lo[3], hi[3];
    for (int d = 0; d < 3; ++d) {
        lo[d] = static_cast<std::int64_t>(std::floor((centre[d] - reach - L.origin[d]) / h)) - 1;
        hi[d] = static_cast<std::int64_t>(std::ceil((centre[d] + reach - L.origin[d]) / h)) + 1;
    }
    std::vector<std::array<double, kTerms>> rows;
    std::vector<double> rhs, wts;
    for (std::int64_t a = lo[0]; a <= hi[0]; ++a) {
        for (std::int64_t b = lo[1]; b <= hi[1]; ++b) {
            for (std::int64_t c = lo[2]; c <= hi[2]; ++c) {
                std::int64_t id[3] = {a, b, c};
                bool flip[3] = {false, false, false};
                for (int d = 0; d < 3; ++d) {
                    if (id[d] < 0 && F.mirror[d]) {
                        id[d] = -id[d];
                        flip[d] = true;
                    }
                    if (id[d] < 0 || id[d] >= L.n[d]) return false;
                }
                const std::int64_t idx = L.index(id[0], id[1], id[2]);
                const NodeKind kd = F.kind[idx];
                if (kd == NodeKind::Inner) continue;
                Vec3 x = L.position(idx);
                for (int d = 0; d < 3; ++d)
                    if (flip[d]) x[d] = -x[d];
                const Vec3 r = x - centre;
                if (r.norm() > reach) continue;
                const double z = kd == NodeKind::Boundary ? 0.0 : dom.distance_estimate(x);
                if (z < 0.0) continue;
                const Vec3 e = x - x0;
                const double s = e.dot(t1) / h, t = e.dot(t2) / h, zz = z / h;
                rows.push_back({zz, zz * zz, zz * zz * zz, zz * s, zz * t, zz * s * s, zz * t * t, zz * s * t,
                                zz * zz * s, zz * zz * t, zz * zz * zz * zz});
                rhs.push_back(L.values[idx] - 1.0);
                wts.push_back(std::exp(-r.squaredNorm() / (4.0 * h * h)));
            }
        }
    }
    if (rows.size() < 2 * kTerms) return false;
    Eigen::MatrixXd M(rows.size(), kTerms);
    Eigen::VectorXd y(rows.size());
    for (std::size_t q = 0; q < rows.size(); ++q) {
        const double sw = std::sqrt(wts[q]);
        for (int j = 0; j < kTerms; ++j) M(q, j) = sw * rows[q][j];
        y(q) = sw * rhs[q];
    }
    du = M.colPivHouseholderQr().solve(y)(0) / h;
    return std::isfinite(du);
}

}  // namespace

BoundaryGradient boundary_gradient(const PotentialField& F, const SurfaceMesh& mesh) {
    const std::size_t nv = mesh.vertices.size();
    if (mesh.normal.size() != nv) throw PreconditionError("boundary_gradient: mesh normals missing");
    if (!F.domain) throw PreconditionError("boundary_gradient: field carries no domain");
    const PotentialField* coarse = F.coarse && F.coarse->domain ? F.coarse.get() : nullptr;
    BoundaryGradient out;
    out.grad_norm.assign(nv, 0.0);
    out.normal_derivative.assign(nv, 0.0);
    out.probe_outside.assign(nv, 0);
    out.extrapolated = coarse != nullptr;
#pragma omp parallel for schedule(dynamic, 256)
    for (std::size_t v = 0; v < nv; ++v) {
        double fine = 0.0, rough = 0.0;
        if (!fit_normal_derivative(F, mesh.vertices[v], mesh.normal[v], fine)) {
            out.probe_outside[v] = 1;
            continue;
        }
        double du = fine;
        if (coarse && fit_normal_derivative(*coarse, mesh.vertices[v], mesh.normal[v], rough)) {
            const double ratio = F.lattice.h / coarse->lattice.h;
            du = (fine - ratio * rough) / (1.0 - ratio);
        }
        out.normal_derivative[v] = du;
        out.grad_norm[v] = std::abs(du);
    }
    for (char c : out.probe_outside) out.flagged += c ? 1 : 0;
    return out;
}

}  // namespace pcaplab
