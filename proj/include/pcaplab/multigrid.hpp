#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace pcaplab {

/// Node vector with zero padding on both sides so stencil neighbours of any
/// lattice node can be read without bounds checks.
class PaddedVector {
public:
    PaddedVector() = default;
    PaddedVector(std::int64_t size, std::int64_t pad) : pad_(pad), buf_(static_cast<std::size_t>(size + 2 * pad), 0.0) {}
    double* data() { return buf_.data() + pad_; }
    const double* data() const { return buf_.data() + pad_; }
    double& operator[](std::int64_t i) { return buf_[static_cast<std::size_t>(i + pad_)]; }
    double operator[](std::int64_t i) const { return buf_[static_cast<std::size_t>(i + pad_)]; }
    void fill(double v) { std::fill(buf_.begin(), buf_.end(), v); }

private:
    std::int64_t pad_ = 0;
    std::vector<double> buf_;
};

/// Symmetric operator on a lattice. Coefficients are stored for the diagonal
/// and for a fixed list of "positive" offsets; the entry for -o at node i is the
/// +o entry of node i - o. Rows and columns of inactive nodes are zero.
struct StencilOperator {
    std::array<std::int64_t, 3> n{0, 0, 0};
    std::vector<std::array<int, 3>> offsets;
    std::vector<std::int64_t> linear_offset;
    std::vector<double> coef;   // (offsets.size() + 1) per node, diagonal first
    std::vector<char> active;
    std::int64_t pad = 0;

    void configure(std::array<std::int64_t, 3> dims, std::vector<std::array<int, 3>> positive_offsets);
    int width() const { return static_cast<int>(offsets.size()) + 1; }
    std::int64_t node_count() const { return n[0] * n[1] * n[2]; }
    std::int64_t index(std::int64_t i, std::int64_t j, std::int64_t k) const { return (i * n[1] + j) * n[2] + k; }
    PaddedVector make_vector() const { return PaddedVector(node_count(), pad); }

    void apply(const PaddedVector& x, PaddedVector& y) const;
    /// One multicolour Gauss-Seidel sweep; colours by index parity, in
    /// ascending order when forward, descending otherwise.
    void gauss_seidel(const PaddedVector& b, PaddedVector& x, bool forward) const;
};

/// Kuhn-lattice offsets (corner masks 1..7).
std::vector<std::array<int, 3>> kuhn_offsets();
/// The 13 lexicographically positive offsets of the 27-point stencil.
std::vector<std::array<int, 3>> box_offsets();

/// Geometric multigrid with trilinear prolongation and Galerkin coarse
/// operators, used as a symmetric V(1,1) preconditioner.
class Multigrid {
public:
    /// `fine` must stay alive while the hierarchy is used.
    void build(const StencilOperator& fine, std::int64_t coarsest_nodes = 1000);
    /// z = V-cycle applied to r (z overwritten).
    void precondition(const PaddedVector& r, PaddedVector& z);
    int levels() const { return static_cast<int>(ops_.size()) + 1; }

private:
    const StencilOperator* fine_ = nullptr;
    std::vector<StencilOperator> ops_;  // coarse levels 1..L
    std::vector<std::int64_t> dense_nodes_;
    Eigen::LDLT<Eigen::MatrixXd> dense_;
    std::vector<PaddedVector> rhs_, sol_, res_;

    const StencilOperator& op(int level) const { return level == 0 ? *fine_ : ops_[level - 1]; }
    void cycle(int level);
};

struct PcgResult {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

/// Preconditioned conjugate gradients for A x = b on the active nodes, x = 0 initially.
PcgResult pcg(const StencilOperator& A, Multigrid& mg, const PaddedVector& b, PaddedVector& x, double rel_tol,
              int max_iterations);

}  // namespace pcaplab
