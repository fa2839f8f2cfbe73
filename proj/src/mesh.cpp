#include "pcaplab/mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "pcaplab/errors.hpp"

namespace pcaplab {

namespace {

std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (lo << 32) | hi;
}

// Skips blank lines and '#' comments.
bool next_data_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
}

}  // namespace

double triangle_area(const SurfaceMesh& mesh, std::size_t t) {
    const auto& tri = mesh.triangles[t];
    const Vec3& a = mesh.vertices[tri[0]];
    const Vec3& b = mesh.vertices[tri[1]];
    const Vec3& c = mesh.vertices[tri[2]];
    return 0.5 * (b - a).cross(c - a).norm();
}

void update_vertex_geometry(SurfaceMesh& mesh) {
    const std::size_t nv = mesh.vertices.size();
    mesh.vertex_area.assign(nv, 0.0);
    mesh.normal.assign(nv, Vec3::Zero());
    for (const auto& tri : mesh.triangles) {
        const Vec3& a = mesh.vertices[tri[0]];
        const Vec3& b = mesh.vertices[tri[1]];
        const Vec3& c = mesh.vertices[tri[2]];
        const Vec3 twice_area_normal = (b - a).cross(c - a);
        const double third = twice_area_normal.norm() / 6.0;
        for (int k = 0; k < 3; ++k) {
            mesh.vertex_area[tri[k]] += third;
            mesh.normal[tri[k]] += twice_area_normal;
        }
    }
    for (auto& n : mesh.normal) {
        const double len = n.norm();
        if (len > 0) n /= len;
    }
}

double total_area(const SurfaceMesh& mesh) {
    double sum = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) sum += triangle_area(mesh, t);
    return sum;
}

double enclosed_volume(const SurfaceMesh& mesh) {
    double six_vol = 0.0;
    for (const auto& tri : mesh.triangles) {
        six_vol += mesh.vertices[tri[0]].dot(mesh.vertices[tri[1]].cross(mesh.vertices[tri[2]]));
    }
    return six_vol / 6.0;
}

EdgeReport analyse_edges(const SurfaceMesh& mesh) {
    // For each undirected edge count uses and the signed traversal direction.
    struct Use {
        int count = 0;
        int direction = 0;
    };
    std::unordered_map<std::uint64_t, Use> edges;
    edges.reserve(mesh.triangles.size() * 2);
    for (const auto& tri : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const int a = tri[k];
            const int b = tri[(k + 1) % 3];
            auto& use = edges[edge_key(a, b)];
            ++use.count;
            use.direction += (a < b) ? 1 : -1;
        }
    }
    EdgeReport r;
    r.edge_count = edges.size();
    for (const auto& [key, use] : edges) {
        if (use.count == 1) ++r.boundary_edges;
        else if (use.count > 2) ++r.nonmanifold_edges;
        else if (use.direction != 0) ++r.misoriented_edges;
    }
    return r;
}

int euler_characteristic(const SurfaceMesh& mesh) {
    const auto report = analyse_edges(mesh);
    return static_cast<int>(mesh.vertices.size()) - static_cast<int>(report.edge_count) +
           static_cast<int>(mesh.triangles.size());
}

void require_closed_manifold(const SurfaceMesh& mesh) {
    if (mesh.triangles.empty()) throw MeshError("mesh has no triangles");
    const auto r = analyse_edges(mesh);
    if (!r.closed_orientable()) {
        std::ostringstream msg;
        msg << "mesh is not a closed oriented manifold: " << r.boundary_edges << " boundary, "
            << r.nonmanifold_edges << " non-manifold, " << r.misoriented_edges
            << " misoriented edges";
        throw MeshError(msg.str());
    }
}

std::vector<std::vector<int>> vertex_neighbours(const SurfaceMesh& mesh) {
    std::vector<std::vector<int>> nbr(mesh.vertices.size());
    for (const auto& tri : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            nbr[tri[k]].push_back(tri[(k + 1) % 3]);
            nbr[tri[k]].push_back(tri[(k + 2) % 3]);
        }
    }
    for (auto& list : nbr) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return nbr;
}

SurfaceMesh read_off(std::istream& in) {
    std::string line;
    if (!next_data_line(in, line)) throw MeshError("OFF: empty input");
    std::istringstream header(line);
    std::string magic;
    header >> magic;
    if (magic != "OFF") throw MeshError("OFF: missing 'OFF' header");
    long nv = -1, nf = -1, ne = 0;
    if (!(header >> nv)) {
        if (!next_data_line(in, line)) throw MeshError("OFF: missing counts line");
        std::istringstream counts(line);
        counts >> nv >> nf >> ne;
    } else {
        header >> nf >> ne;
    }
    if (nv < 0 || nf < 0) throw MeshError("OFF: malformed counts line");

    SurfaceMesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        if (!next_data_line(in, line)) throw MeshError("OFF: truncated vertex list");
        std::istringstream ls(line);
        Vec3 v;
        if (!(ls >> v.x() >> v.y() >> v.z())) throw MeshError("OFF: malformed vertex line");
        mesh.vertices.push_back(v);
    }
    for (long f = 0; f < nf; ++f) {
        if (!next_data_line(in, line)) throw MeshError("OFF: truncated face list");
        std::istringstream ls(line);
        int k = 0;
        if (!(ls >> k) || k < 3) throw MeshError("OFF: faces need at least three vertices");
        std::vector<int> idx(static_cast<std::size_t>(k));
        for (auto& i : idx) {
            if (!(ls >> i) || i < 0 || i >= nv) throw MeshError("OFF: face index out of range");
        }
        for (int j = 1; j + 1 < k; ++j) mesh.triangles.push_back({idx[0], idx[j], idx[j + 1]});
    }
    update_vertex_geometry(mesh);
    return mesh;
}

SurfaceMesh read_off_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open OFF file '" + path + "'");
    return read_off(in);
}

void write_off(std::ostream& out, const SurfaceMesh& mesh) {
    out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.triangles.size() << " 0\n";
    out << std::setprecision(17);
    for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void write_off_file(const std::string& path, const SurfaceMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot write OFF file '" + path + "'");
    write_off(out, mesh);
}

}  // namespace pcaplab
