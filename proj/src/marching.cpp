#include "pcaplab/marching.hpp"

#include <algorithm>
#include <cmath>

#include "pcaplab/errors.hpp"

namespace pcaplab {

namespace {

std::int64_t corner_offset(const LatticeField& f, int corner) {
    return ((corner & 1) ? f.n[1] * f.n[2] : 0) + ((corner & 2) ? f.n[2] : 0) + ((corner & 4) ? 1 : 0);
}

double tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return std::abs((b - a).dot((c - a).cross(d - a))) / 6.0;
}

std::int64_t lattice_count(double extent, double h) {
    const double cells = extent / h;
    const double r = std::round(cells);
    const double c = std::abs(cells - r) < 1e-9 * std::max(1.0, cells) ? r : std::ceil(cells);
    return static_cast<std::int64_t>(c) + 1;
}

}  // namespace

Vec3 LatticeField::lattice_position(std::int64_t idx) const {
    const std::int64_t k = idx % n[2];
    const std::int64_t j = (idx / n[2]) % n[1];
    const std::int64_t i = idx / (n[1] * n[2]);
    return origin + h * Vec3(static_cast<double>(i), static_cast<double>(j), static_cast<double>(k));
}

Vec3 LatticeField::position(std::int64_t idx) const {
    if (!moved.empty()) {
        auto it = moved.find(idx);
        if (it != moved.end()) return it->second;
    }
    return lattice_position(idx);
}

const std::array<std::array<int, 4>, 6>& kuhn_tetrahedra() {
    static const std::array<std::array<int, 4>, 6> tets = [] {
        std::array<std::array<int, 4>, 6> out{};
        std::array<int, 3> perm{0, 1, 2};
        int t = 0;
        do {
            const int a = 1 << perm[0];
            const int b = a | (1 << perm[1]);
            out[t++] = {0, a, b, 7};
        } while (std::next_permutation(perm.begin(), perm.end()));
        return out;
    }();
    return tets;
}

std::array<std::int64_t, 4> kuhn_tet_nodes(const LatticeField& f, std::int64_t i, std::int64_t j, std::int64_t k,
                                           int t) {
    const std::int64_t base = f.index(i, j, k);
    const auto& tet = kuhn_tetrahedra()[t];
    return {base + corner_offset(f, tet[0]), base + corner_offset(f, tet[1]), base + corner_offset(f, tet[2]),
            base + corner_offset(f, tet[3])};
}

SurfaceMesh isosurface(const LatticeField& f, double level, Facing facing, std::vector<std::int64_t>* tri_source) {
    SurfaceMesh mesh;
    if (tri_source) tri_source->clear();
    std::unordered_map<std::int64_t, int> vertex_of_edge;
    const auto& tets = kuhn_tetrahedra();
    std::array<std::int64_t, 8> off{};
    for (int c = 0; c < 8; ++c) off[c] = corner_offset(f, c);

    auto above = [&](double v) { return v >= level; };
    auto edge_vertex = [&](std::int64_t base, int ca, int cb) {
        // Kuhn edges join nested corner masks; key on the lower node and the bit difference.
        if ((ca & cb) != ca) std::swap(ca, cb);
        const std::int64_t lo = base + off[ca];
        const std::int64_t key = lo * 8 + (ca ^ cb);
        auto it = vertex_of_edge.find(key);
        if (it != vertex_of_edge.end()) return it->second;
        const std::int64_t hi = base + off[cb];
        const double va = f.values[lo], vb = f.values[hi];
        const double t = (level - va) / (vb - va);
        const Vec3 pa = f.position(lo), pb = f.position(hi);
        const int id = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(pa + t * (pb - pa));
        vertex_of_edge.emplace(key, id);
        return id;
    };

    for (std::int64_t i = 0; i + 1 < f.n[0]; ++i) {
        for (std::int64_t j = 0; j + 1 < f.n[1]; ++j) {
            for (std::int64_t k = 0; k + 1 < f.n[2]; ++k) {
                const std::int64_t base = f.index(i, j, k);
                int count_above = 0;
                for (int c = 0; c < 8; ++c) count_above += above(f.values[base + off[c]]);
                if (count_above == 0 || count_above == 8) continue;
                for (int t = 0; t < 6; ++t) {
                    const auto& tet = tets[t];
                    std::array<int, 4> up{}, down{};
                    int nu = 0, nd = 0;
                    for (int c : tet) {
                        if (above(f.values[base + off[c]])) up[nu++] = c;
                        else down[nd++] = c;
                    }
                    if (nu == 0 || nd == 0) continue;
                    Vec3 cu = Vec3::Zero(), cd = Vec3::Zero();
                    for (int q = 0; q < nu; ++q) cu += f.position(base + off[up[q]]);
                    for (int q = 0; q < nd; ++q) cd += f.position(base + off[down[q]]);
                    Vec3 dir = cu / nu - cd / nd;
                    if (facing == Facing::TowardDecreasing) dir = -dir;
                    auto emit = [&](int a, int b, int c) {
                        const Vec3 nrm = (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]);
                        if (nrm.dot(dir) < 0) std::swap(b, c);
                        mesh.triangles.push_back({a, b, c});
                        if (tri_source) tri_source->push_back(base * 6 + t);
                    };
                    if (nu == 1 || nd == 1) {
                        const int apex = (nu == 1) ? up[0] : down[0];
                        const auto& rest = (nu == 1) ? down : up;
                        emit(edge_vertex(base, apex, rest[0]), edge_vertex(base, apex, rest[1]),
                             edge_vertex(base, apex, rest[2]));
                    } else {
                        // Quad with cyclic order u0-d0, u0-d1, u1-d1, u1-d0.
                        const int a = edge_vertex(base, up[0], down[0]);
                        const int b = edge_vertex(base, up[0], down[1]);
                        const int c = edge_vertex(base, up[1], down[1]);
                        const int d = edge_vertex(base, up[1], down[0]);
                        emit(a, b, c);
                        emit(a, c, d);
                    }
                }
            }
        }
    }
    update_vertex_geometry(mesh);
    return mesh;
}

double sublevel_volume(const LatticeField& f, double level) {
    const auto& tets = kuhn_tetrahedra();
    std::array<std::int64_t, 8> off{};
    for (int c = 0; c < 8; ++c) off[c] = corner_offset(f, c);
    double total = 0.0;
    for (std::int64_t i = 0; i + 1 < f.n[0]; ++i) {
        for (std::int64_t j = 0; j + 1 < f.n[1]; ++j) {
            double column = 0.0;
            for (std::int64_t k = 0; k + 1 < f.n[2]; ++k) {
                const std::int64_t base = f.index(i, j, k);
                int below = 0;
                for (int c = 0; c < 8; ++c) below += f.values[base + off[c]] < level;
                if (below == 0) continue;
                for (const auto& tet : tets) {
                    std::array<Vec3, 4> p;
                    std::array<double, 4> v;
                    std::array<int, 4> lo{}, hi{};
                    int nl = 0, nh = 0;
                    for (int q = 0; q < 4; ++q) {
                        p[q] = f.position(base + off[tet[q]]);
                        v[q] = f.values[base + off[tet[q]]];
                        if (v[q] < level) lo[nl++] = q;
                        else hi[nh++] = q;
                    }
                    if (nl == 0) continue;
                    const double vol = tet_volume(p[0], p[1], p[2], p[3]);
                    auto cut = [&](int a, int b) {
                        return p[a] + (level - v[a]) / (v[b] - v[a]) * (p[b] - p[a]);
                    };
                    if (nh == 0) {
                        column += vol;
                    } else if (nl == 1) {
                        column += tet_volume(p[lo[0]], cut(lo[0], hi[0]), cut(lo[0], hi[1]), cut(lo[0], hi[2]));
                    } else if (nl == 3) {
                        column += vol - tet_volume(p[hi[0]], cut(hi[0], lo[0]), cut(hi[0], lo[1]), cut(hi[0], lo[2]));
                    } else {
                        // Convex prism a,A1,A2 / b,B1,B2 with lateral edges a-b, A1-B1, A2-B2.
                        const Vec3& a = p[lo[0]];
                        const Vec3& b = p[lo[1]];
                        const Vec3 a1 = cut(lo[0], hi[0]), a2 = cut(lo[0], hi[1]);
                        const Vec3 b1 = cut(lo[1], hi[0]), b2 = cut(lo[1], hi[1]);
                        column += tet_volume(a, a1, a2, b2) + tet_volume(a, a1, b2, b1) + tet_volume(a, b1, b2, b);
                    }
                }
            }
            total += column;
        }
    }
    return total;
}

double isoline_length(const std::vector<double>& values, std::int64_t nx, std::int64_t ny, double h, double level) {
    if (static_cast<std::int64_t>(values.size()) != nx * ny) throw PreconditionError("isoline_length: size mismatch");
    static constexpr int tris[2][3][2] = {{{0, 0}, {1, 0}, {1, 1}}, {{0, 0}, {0, 1}, {1, 1}}};
    double total = 0.0;
    for (std::int64_t i = 0; i + 1 < nx; ++i) {
        for (std::int64_t j = 0; j + 1 < ny; ++j) {
            for (const auto& tri : tris) {
                std::array<Eigen::Vector2d, 3> p;
                std::array<double, 3> v;
                for (int q = 0; q < 3; ++q) {
                    p[q] = Eigen::Vector2d(static_cast<double>(i + tri[q][0]), static_cast<double>(j + tri[q][1])) * h;
                    v[q] = values[(i + tri[q][0]) * ny + j + tri[q][1]];
                }
                std::array<Eigen::Vector2d, 2> ends;
                int m = 0;
                for (int q = 0; q < 3; ++q) {
                    const int r = (q + 1) % 3;
                    if ((v[q] >= level) != (v[r] >= level)) {
                        ends[m++] = p[q] + (level - v[q]) / (v[r] - v[q]) * (p[r] - p[q]);
                    }
                }
                if (m == 2) total += (ends[1] - ends[0]).norm();
            }
        }
    }
    return total;
}

LatticeField sample_levelset(const ImplicitDomain& domain, double h) {
    if (!(h > 0)) throw PreconditionError("grid spacing must be positive");
    const Box& box = domain.bounding_box();
    LatticeField f;
    f.origin = box.lo;
    f.h = h;
    for (int d = 0; d < 3; ++d) f.n[d] = d < domain.dimension() ? lattice_count(box.extent()[d], h) : 1;
    f.values.resize(static_cast<std::size_t>(f.node_count()));
    const double floor_mag = 1e-7 * h;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < f.n[0]; ++i) {
        for (std::int64_t j = 0; j < f.n[1]; ++j) {
            for (std::int64_t k = 0; k < f.n[2]; ++k) {
                const std::int64_t idx = f.index(i, j, k);
                double v = domain.levelset(f.lattice_position(idx));
                // Keep nodes off the zero set so no crossing lands exactly on a node.
                if (std::abs(v) < floor_mag) v = v < 0 ? -floor_mag : floor_mag;
                f.values[idx] = v;
            }
        }
    }
    return f;
}

SurfaceMesh extract_boundary_mesh(const ImplicitDomain& domain, double h, int smoothing_rounds) {
    if (domain.dimension() != 3) throw PreconditionError("extract_boundary_mesh: only n = 3 domains are meshed");
    if (!(h > 0) || h > domain.info().feature_size / 8.0 * (1.0 + 1e-12)) {
        throw PreconditionError("extract_boundary_mesh: resolution must be at most 1/8 of the feature size " +
                                std::to_string(domain.info().feature_size));
    }
    const LatticeField f = sample_levelset(domain, h);
    SurfaceMesh mesh = isosurface(f, 0.0, Facing::TowardIncreasing);
    require_closed_manifold(mesh);

    const auto nbr = vertex_neighbours(mesh);
    const std::size_t nv = mesh.vertices.size();
#pragma omp parallel for schedule(static)
    for (std::size_t v = 0; v < nv; ++v) mesh.vertices[v] = domain.project(mesh.vertices[v]);
    std::vector<Vec3> next(nv);
    for (int round = 0; round < smoothing_rounds; ++round) {
        update_vertex_geometry(mesh);
#pragma omp parallel for schedule(static)
        for (std::size_t v = 0; v < nv; ++v) {
            Vec3 c = Vec3::Zero();
            for (int w : nbr[v]) c += mesh.vertices[w];
            c /= static_cast<double>(nbr[v].size());
            Vec3 d = c - mesh.vertices[v];
            const Vec3& nrm = mesh.normal[v];
            d -= d.dot(nrm) * nrm;
            next[v] = domain.project(mesh.vertices[v] + 0.5 * d);
        }
        mesh.vertices.swap(next);
    }
    update_vertex_geometry(mesh);
    for (std::size_t v = 0; v < nv; ++v) {
        if (!(mesh.vertex_area[v] > 0)) throw MeshError("extracted mesh has a vertex with zero area");
    }
    return mesh;
}

}  // namespace pcaplab
