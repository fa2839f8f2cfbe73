#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "pcaplab/potential.hpp"

namespace pcaplab {

namespace {

template <typename T>
void put(std::ostream& out, T v) {
    static_assert(std::endian::native == std::endian::little);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw MeshError("lattice file truncated");
    return v;
}

}  // namespace

void write_lattice_binary(std::ostream& out, const char* magic, const LatticeField& f, int dimension) {
    if (std::strlen(magic) != 5) throw PreconditionError("lattice magic must have 5 characters");
    if (dimension != 2 && dimension != 3) throw PreconditionError("lattice dimension must be 2 or 3");
    out.write(magic, 5);
    put<std::int64_t>(out, dimension);
    for (int d = 0; d < dimension; ++d) put<double>(out, f.origin[d]);
    put<double>(out, f.h);
    for (int d = 0; d < dimension; ++d) put<std::int64_t>(out, f.n[d]);
    out.write(reinterpret_cast<const char*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!out) throw MeshError("failed to write lattice data");
}

LatticeField read_lattice_binary(std::istream& in, const char* magic, int& dimension) {
    char tag[5];
    in.read(tag, 5);
    if (!in || std::memcmp(tag, magic, 5) != 0) throw MeshError(std::string("expected magic ") + magic);
    dimension = static_cast<int>(get<std::int64_t>(in));
    if (dimension != 2 && dimension != 3) throw MeshError("unsupported lattice dimension");
    LatticeField f;
    for (int d = 0; d < dimension; ++d) f.origin[d] = get<double>(in);
    f.h = get<double>(in);
    f.n = {1, 1, 1};
    for (int d = 0; d < dimension; ++d) {
        f.n[d] = get<std::int64_t>(in);
        if (f.n[d] <= 0 || f.n[d] > (std::int64_t{1} << 20)) throw MeshError("invalid lattice extent");
    }
    f.values.resize(static_cast<std::size_t>(f.node_count()));
    in.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!in) throw MeshError("lattice file truncated");
    return f;
}

void save_field(const std::string& path, const PotentialField& field) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MeshError("cannot open " + path);
    write_lattice_binary(out, "PCAP1", field.lattice, 3);
}

LatticeField load_field_lattice(const std::string& path, int& dimension) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MeshError("cannot open " + path);
    return read_lattice_binary(in, "PCAP1", dimension);
}

}  // namespace pcaplab
