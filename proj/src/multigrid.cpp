#include "pcaplab/multigrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "pcaplab/errors.hpp"

namespace pcaplab {

namespace {

double dot(const PaddedVector& a, const PaddedVector& b, std::int64_t n) {
    return Eigen::Map<const Eigen::VectorXd>(a.data(), n).dot(Eigen::Map<const Eigen::VectorXd>(b.data(), n));
}

// Code of offset d in {-1,0,1}^3 within box_offsets(), 0 for the diagonal, -1 for the negative half.
int box_code(int dx, int dy, int dz) {
    static const std::array<int, 27> table = [] {
        std::array<int, 27> t{};
        t.fill(-1);
        t[13] = 0;
        const auto offs = box_offsets();
        for (std::size_t q = 0; q < offs.size(); ++q) {
            t[(offs[q][0] + 1) * 9 + (offs[q][1] + 1) * 3 + offs[q][2] + 1] = static_cast<int>(q) + 1;
        }
        return t;
    }();
    return table[(dx + 1) * 9 + (dy + 1) * 3 + dz + 1];
}

// Coarse parents of fine index f along one axis.
int parents(std::int64_t f, std::int64_t nc, std::int64_t* idx, double* w) {
    if (f % 2 == 0) {
        idx[0] = f / 2;
        w[0] = 1.0;
        return 1;
    }
    int m = 0;
    for (std::int64_t c : {(f - 1) / 2, (f + 1) / 2}) {
        if (c >= 0 && c < nc) {
            idx[m] = c;
            w[m] = 0.5;
            ++m;
        }
    }
    return m;
}

}  // namespace

std::vector<std::array<int, 3>> kuhn_offsets() {
    std::vector<std::array<int, 3>> out;
    for (int mask = 1; mask < 8; ++mask) out.push_back({mask & 1, (mask >> 1) & 1, (mask >> 2) & 1});
    return out;
}

std::vector<std::array<int, 3>> box_offsets() {
    std::vector<std::array<int, 3>> out;
    for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dz = -1; dz <= 1; ++dz) {
                const bool positive = dx > 0 || (dx == 0 && (dy > 0 || (dy == 0 && dz > 0)));
                if (positive) out.push_back({dx, dy, dz});
            }
        }
    }
    return out;
}

void StencilOperator::configure(std::array<std::int64_t, 3> dims, std::vector<std::array<int, 3>> positive_offsets) {
    n = dims;
    offsets = std::move(positive_offsets);
    linear_offset.clear();
    pad = 1;
    for (const auto& o : offsets) {
        const std::int64_t lin = (o[0] * n[1] + o[1]) * n[2] + o[2];
        linear_offset.push_back(lin);
        pad = std::max(pad, std::abs(lin) + 1);
    }
    coef.assign(static_cast<std::size_t>((node_count() + 2 * pad) * width()), 0.0);
    active.assign(static_cast<std::size_t>(node_count()), 0);
}

void StencilOperator::apply(const PaddedVector& xv, PaddedVector& yv) const {
    const int w = width();
    const int K = w - 1;
    const double* c = coef.data() + pad * w;
    const double* x = xv.data();
    double* y = yv.data();
    const std::int64_t N = node_count();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < N; ++i) {
        if (!active[i]) {
            y[i] = 0.0;
            continue;
        }
        const double* ci = c + i * w;
        double s = ci[0] * x[i];
        for (int q = 0; q < K; ++q) {
            const std::int64_t o = linear_offset[q];
            s += ci[q + 1] * x[i + o] + c[(i - o) * w + q + 1] * x[i - o];
        }
        y[i] = s;
    }
}

void StencilOperator::gauss_seidel(const PaddedVector& bv, PaddedVector& xv, bool forward) const {
    const int w = width();
    const int K = w - 1;
    const double* c = coef.data() + pad * w;
    const double* b = bv.data();
    double* x = xv.data();
    for (int step = 0; step < 8; ++step) {
        const int color = forward ? step : 7 - step;
        const std::int64_t i0 = color & 1, j0 = (color >> 1) & 1, k0 = (color >> 2) & 1;
#pragma omp parallel for schedule(static)
        for (std::int64_t i = i0; i < n[0]; i += 2) {
            for (std::int64_t j = j0; j < n[1]; j += 2) {
                for (std::int64_t k = k0; k < n[2]; k += 2) {
                    const std::int64_t idx = index(i, j, k);
                    if (!active[idx]) continue;
                    const double* ci = c + idx * w;
                    double s = b[idx];
                    for (int q = 0; q < K; ++q) {
                        const std::int64_t o = linear_offset[q];
                        s -= ci[q + 1] * x[idx + o] + c[(idx - o) * w + q + 1] * x[idx - o];
                    }
                    x[idx] = s / ci[0];
                }
            }
        }
    }
}

void Multigrid::build(const StencilOperator& fine, std::int64_t coarsest_nodes) {
    fine_ = &fine;
    ops_.clear();
    const StencilOperator* cur = &fine;
    auto active_count = [](const StencilOperator& A) {
        return static_cast<std::int64_t>(std::count(A.active.begin(), A.active.end(), 1));
    };
    while (active_count(*cur) > coarsest_nodes) {
        bool divisible = true;
        for (int d = 0; d < 3; ++d) divisible = divisible && (cur->n[d] - 1) % 2 == 0 && cur->n[d] >= 3;
        if (!divisible) break;
        StencilOperator C;
        C.configure({(cur->n[0] - 1) / 2 + 1, (cur->n[1] - 1) / 2 + 1, (cur->n[2] - 1) / 2 + 1}, box_offsets());
        const StencilOperator& F = *cur;
        const int fw = F.width();
        const int FK = fw - 1;
        const double* fc = F.coef.data() + F.pad * fw;
        const int cw = C.width();
        double* cc = C.coef.data() + C.pad * cw;
#pragma omp parallel for schedule(static)
        for (std::int64_t I = 0; I < C.n[0]; ++I) {
            for (std::int64_t J = 0; J < C.n[1]; ++J) {
                for (std::int64_t K = 0; K < C.n[2]; ++K) {
                    const std::int64_t cidx = C.index(I, J, K);
                    double* row = cc + cidx * cw;
                    bool any = false;
                    for (int dx = -1; dx <= 1; ++dx) {
                        const std::int64_t fi = 2 * I + dx;
                        if (fi < 0 || fi >= F.n[0]) continue;
                        for (int dy = -1; dy <= 1; ++dy) {
                            const std::int64_t fj = 2 * J + dy;
                            if (fj < 0 || fj >= F.n[1]) continue;
                            for (int dz = -1; dz <= 1; ++dz) {
                                const std::int64_t fk = 2 * K + dz;
                                if (fk < 0 || fk >= F.n[2]) continue;
                                const std::int64_t f = F.index(fi, fj, fk);
                                if (!F.active[f]) continue;
                                any = true;
                                const double wi = (dx ? 0.5 : 1.0) * (dy ? 0.5 : 1.0) * (dz ? 0.5 : 1.0);
                                // Row f of the fine operator: diagonal and both stencil halves.
                                for (int q = -FK; q <= FK; ++q) {
                                    std::array<int, 3> o{0, 0, 0};
                                    double a;
                                    if (q == 0) {
                                        a = fc[f * fw];
                                    } else if (q > 0) {
                                        o = F.offsets[q - 1];
                                        a = fc[f * fw + q];
                                    } else {
                                        const auto& po = F.offsets[-q - 1];
                                        o = {-po[0], -po[1], -po[2]};
                                        a = fc[(f - F.linear_offset[-q - 1]) * fw - q];
                                    }
                                    if (a == 0.0) continue;
                                    const std::int64_t gj[3] = {fi + o[0], fj + o[1], fk + o[2]};
                                    std::int64_t pi[3][2];
                                    double pw[3][2];
                                    int pm[3];
                                    bool inside = true;
                                    for (int d = 0; d < 3; ++d) {
                                        if (gj[d] < 0 || gj[d] >= F.n[d]) inside = false;
                                    }
                                    if (!inside) continue;
                                    for (int d = 0; d < 3; ++d) pm[d] = parents(gj[d], C.n[d], pi[d], pw[d]);
                                    const std::int64_t base[3] = {I, J, K};
                                    for (int ax = 0; ax < pm[0]; ++ax) {
                                        for (int ay = 0; ay < pm[1]; ++ay) {
                                            for (int az = 0; az < pm[2]; ++az) {
                                                const int code = box_code(static_cast<int>(pi[0][ax] - base[0]),
                                                                          static_cast<int>(pi[1][ay] - base[1]),
                                                                          static_cast<int>(pi[2][az] - base[2]));
                                                if (code < 0) continue;
                                                row[code] += wi * a * pw[0][ax] * pw[1][ay] * pw[2][az];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    C.active[cidx] = any && row[0] > 0.0;
                }
            }
        }
        // Entries pointing at inactive coarse nodes are structurally zero; clear them.
        for (std::int64_t idx = 0; idx < C.node_count(); ++idx) {
            double* row = cc + idx * cw;
            if (!C.active[idx]) {
                std::fill(row, row + cw, 0.0);
                continue;
            }
            for (int q = 0; q < cw - 1; ++q) {
                const std::int64_t t = idx + C.linear_offset[q];
                if (t < 0 || t >= C.node_count() || !C.active[t]) row[q + 1] = 0.0;
            }
        }
        ops_.push_back(std::move(C));
        cur = &ops_.back();
    }

    const StencilOperator& last = ops_.empty() ? fine : ops_.back();
    dense_nodes_.clear();
    std::vector<std::int64_t> slot(static_cast<std::size_t>(last.node_count()), -1);
    for (std::int64_t idx = 0; idx < last.node_count(); ++idx) {
        if (last.active[idx]) {
            slot[idx] = static_cast<std::int64_t>(dense_nodes_.size());
            dense_nodes_.push_back(idx);
        }
    }
    const std::int64_t m = static_cast<std::int64_t>(dense_nodes_.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    const int lw = last.width();
    const double* lc = last.coef.data() + last.pad * lw;
    for (std::int64_t a = 0; a < m; ++a) {
        const std::int64_t idx = dense_nodes_[a];
        A(a, a) = lc[idx * lw];
        for (int q = 0; q < lw - 1; ++q) {
            const std::int64_t t = idx + last.linear_offset[q];
            if (t < 0 || t >= last.node_count() || slot[t] < 0) continue;
            A(a, slot[t]) += lc[idx * lw + q + 1];
            A(slot[t], a) += lc[idx * lw + q + 1];
        }
    }
    dense_.compute(A);

    const int L = levels();
    rhs_.clear();
    sol_.clear();
    res_.clear();
    for (int l = 0; l < L; ++l) {
        rhs_.push_back(op(l).make_vector());
        sol_.push_back(op(l).make_vector());
        res_.push_back(op(l).make_vector());
    }
}

void Multigrid::cycle(int level) {
    const StencilOperator& A = op(level);
    PaddedVector& x = sol_[level];
    const PaddedVector& b = rhs_[level];
    if (level == levels() - 1) {
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(dense_nodes_.size()));
        for (std::size_t a = 0; a < dense_nodes_.size(); ++a) rhs(a) = b[dense_nodes_[a]];
        const Eigen::VectorXd sol = dense_.solve(rhs);
        x.fill(0.0);
        for (std::size_t a = 0; a < dense_nodes_.size(); ++a) x[dense_nodes_[a]] = sol(a);
        return;
    }
    x.fill(0.0);
    A.gauss_seidel(b, x, true);
    PaddedVector& r = res_[level];
    A.apply(x, r);
    const std::int64_t N = A.node_count();
    for (std::int64_t i = 0; i < N; ++i) r[i] = A.active[i] ? b[i] - r[i] : 0.0;

    const StencilOperator& C = op(level + 1);
    PaddedVector& bc = rhs_[level + 1];
#pragma omp parallel for schedule(static)
    for (std::int64_t I = 0; I < C.n[0]; ++I) {
        for (std::int64_t J = 0; J < C.n[1]; ++J) {
            for (std::int64_t K = 0; K < C.n[2]; ++K) {
                const std::int64_t cidx = C.index(I, J, K);
                double s = 0.0;
                if (C.active[cidx]) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const std::int64_t fi = 2 * I + dx;
                        if (fi < 0 || fi >= A.n[0]) continue;
                        for (int dy = -1; dy <= 1; ++dy) {
                            const std::int64_t fj = 2 * J + dy;
                            if (fj < 0 || fj >= A.n[1]) continue;
                            for (int dz = -1; dz <= 1; ++dz) {
                                const std::int64_t fk = 2 * K + dz;
                                if (fk < 0 || fk >= A.n[2]) continue;
                                s += (dx ? 0.5 : 1.0) * (dy ? 0.5 : 1.0) * (dz ? 0.5 : 1.0) * r[A.index(fi, fj, fk)];
                            }
                        }
                    }
                }
                bc[cidx] = s;
            }
        }
    }
    cycle(level + 1);
    const PaddedVector& xc = sol_[level + 1];
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < A.n[0]; ++i) {
        std::int64_t pi[2], pj[2], pk[2];
        double wi[2], wj[2], wk[2];
        const int mi = parents(i, C.n[0], pi, wi);
        for (std::int64_t j = 0; j < A.n[1]; ++j) {
            const int mj = parents(j, C.n[1], pj, wj);
            for (std::int64_t k = 0; k < A.n[2]; ++k) {
                const std::int64_t f = A.index(i, j, k);
                if (!A.active[f]) continue;
                const int mk = parents(k, C.n[2], pk, wk);
                double s = 0.0;
                for (int a = 0; a < mi; ++a)
                    for (int b2 = 0; b2 < mj; ++b2)
                        for (int c = 0; c < mk; ++c) s += wi[a] * wj[b2] * wk[c] * xc[C.index(pi[a], pj[b2], pk[c])];
                x[f] += s;
            }
        }
    }
    A.gauss_seidel(b, x, false);
}

void Multigrid::precondition(const PaddedVector& r, PaddedVector& z) {
    rhs_[0] = r;
    cycle(0);
    z = sol_[0];
}

PcgResult pcg(const StencilOperator& A, Multigrid& mg, const PaddedVector& b, PaddedVector& x, double rel_tol,
              int max_iterations) {
    const std::int64_t N = A.node_count();
    PcgResult res;
    x.fill(0.0);
    PaddedVector r = b;
    const double bnorm = std::sqrt(dot(b, b, N));
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }
    PaddedVector z = A.make_vector(), q = A.make_vector();
    mg.precondition(r, z);
    PaddedVector d = z;
    double rz = dot(r, z, N);
    for (int it = 1; it <= max_iterations; ++it) {
        A.apply(d, q);
        const double dq = dot(d, q, N);
        if (!(dq > 0)) break;
        const double alpha = rz / dq;
        double* xp = x.data();
        double* rp = r.data();
        const double* dp = d.data();
        const double* qp = q.data();
        for (std::int64_t i = 0; i < N; ++i) {
            xp[i] += alpha * dp[i];
            rp[i] -= alpha * qp[i];
        }
        res.iterations = it;
        res.relative_residual = std::sqrt(dot(r, r, N)) / bnorm;
        if (res.relative_residual <= rel_tol) {
            res.converged = true;
            break;
        }
        mg.precondition(r, z);
        const double rz_new = dot(r, z, N);
        const double beta = rz_new / rz;
        rz = rz_new;
        double* dpw = d.data();
        const double* zp = z.data();
        for (std::int64_t i = 0; i < N; ++i) dpw[i] = zp[i] + beta * dpw[i];
    }
    return res;
}

}  // namespace pcaplab
