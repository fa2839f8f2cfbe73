#include "pcaplab/quantities.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "pcaplab/constants.hpp"
#include "pcaplab/curvature.hpp"
#include "pcaplab/numfmt.hpp"

namespace pcaplab {

namespace {

constexpr int kBins = 200;
constexpr int kSavitzkyGolayHalfWidth = 5;
constexpr std::size_t kMinCellsPerBin = 50;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

double normalisation(double p, int n) { return std::pow((p - 1.0) / (n - p), p - 1.0) / sphere_area(n); }

// Tetrahedra of slab i (cubes with lower corner index i) that carry a free node.
template <typename Fn>
void for_each_tet_in_slab(const PotentialField& F, std::int64_t i, Fn&& fn) {
    const LatticeField& L = F.lattice;
    for (std::int64_t j = 0; j + 1 < L.n[1]; ++j) {
        for (std::int64_t k = 0; k + 1 < L.n[2]; ++k) {
            const std::int64_t base = L.index(i, j, k);
            bool any_free = false;
            for (int c = 0; c < 8 && !any_free; ++c) {
                const std::int64_t q = base + ((c & 1) ? L.n[1] * L.n[2] : 0) + ((c & 2) ? L.n[2] : 0) + ((c & 4) ? 1 : 0);
                any_free = F.kind[q] == NodeKind::Free;
            }
            if (!any_free) continue;
            for (int t = 0; t < 6; ++t) {
                
                fn(j, k, t, kuhn_tet_nodes(L, i, j, k, t), F.tet_geometry(i, j, k, t));
            }
        }
    }
}

// Volume fraction of {f < c} for the linear interpolant of sorted vertex values.
double fraction_below(const std::array<double, 4>& f, double c) {
    if (c <= f[0]) return 0.0;
    if (c >= f[3]) return 1.0;
    if (c <= f[1]) return std::pow(c - f[0], 3) / ((f[1] - f[0]) * (f[2] - f[0]) * (f[3] - f[0]));
    if (c >= f[2]) return 1.0 - std::pow(f[3] - c, 3) / ((f[3] - f[0]) * (f[3] - f[1]) * (f[3] - f[2]));
    const double lo = f[1] - f[0], hi = f[3] - f[2], mid = f[2] - f[1];
    if (std::max(lo, hi) <= 1e-6 * mid) {
        const double a = 0.5 * (f[0] + f[1]), b = 0.5 * (f[2] + f[3]);
        const double x = (c - a) / (b - a);
        return x * x * (3.0 - 2.0 * x);
    }
    if (hi >= lo) {
        const double above = std::pow(f[3] - c, 3) / ((f[3] - f[0]) * (f[3] - f[1]) * hi) -
                             std::pow(f[2] - c, 3) / ((f[2] - f[0]) * (f[2] - f[1]) * hi);
        return 1.0 - above;
    }
    return std::pow(c - f[0], 3) / (lo * (f[2] - f[0]) * (f[3] - f[0])) -
           std::pow(c - f[1], 3) / (lo * (f[2] - f[1]) * (f[3] - f[1]));
}

double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at) {
    if (x.empty()) return kNaN;
    if (at <= x.front()) return y.front();
    if (at >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), at);
    const std::size_t k = static_cast<std::size_t>(it - x.begin());
    const double w = (at - x[k - 1]) / (x[k] - x[k - 1]);
    return (1 - w) * y[k - 1] + w * y[k];
}

}  // namespace

double fraction_below_sorted(const std::array<double, 4>& f, double c) { return fraction_below(f, c); }

double cap_from_energy(const PotentialField& field) {
    return normalisation(field.p, field.dimension) * field_energy(field);
}

double cap_from_flux(const PotentialField& field, const SurfaceMesh& mesh, const BoundaryGradient& grad) {
    if (grad.grad_norm.size() != mesh.vertices.size()) throw PreconditionError("cap_from_flux: size mismatch");
    std::vector<double> integrand(mesh.vertices.size());
    for (std::size_t v = 0; v < integrand.size(); ++v) integrand[v] = std::pow(grad.grad_norm[v], field.p - 1.0);
    return normalisation(field.p, field.dimension) * boundary_integral(mesh, integrand);
}

CapacityReport capacity_report(const PotentialField& field, const SurfaceMesh& mesh, const BoundaryGradient& grad) {
    CapacityReport r;
    r.cap_energy = cap_from_energy(field);
    r.cap_flux = cap_from_flux(field, mesh, grad);
    r.cap_used = 0.5 * (r.cap_energy + r.cap_flux);
    r.discrepancy = std::abs(r.cap_energy - r.cap_flux) / r.cap_used;
    return r;
}

double cap_from_normalised(double C, double p, int n) {
    return std::pow((n - p) / (p - 1.0), p - 1.0) * sphere_area(n) * C;
}

double up_limit_zero(double C, double p, int n) {
    if (!(C > 0)) throw PreconditionError("up_limit_zero: capacity must be positive");
    return std::pow((n - p) / (p - 1.0), p) * sphere_area(n) * std::pow(C, (n - p - 1.0) / (n - p));
}

DerivativeAtOne up_derivative_at_one(const SurfaceMesh& mesh, const BoundaryGradient& grad, double p, int n) {
    const std::size_t nv = mesh.vertices.size();
    if (mesh.H.size() != nv || grad.grad_norm.size() != nv || mesh.vertex_area.size() != nv) {
        throw PreconditionError("up_derivative_at_one: curvatures or boundary gradient missing");
    }
    const double k = (p - 1.0) * (n - 1.0) / (n - p);
    DerivativeAtOne d;
    for (std::size_t v = 0; v < nv; ++v) {
        const double g = grad.grad_norm[v];
        const double term = mesh.vertex_area[v] * std::pow(g, p - 1.0) * (mesh.H[v] - k * g) / (p - 1.0);
        d.value += term;
        // Scale of the positive contribution: the curvature part where H > 0.
        d.positive_part += mesh.vertex_area[v] * std::pow(g, p - 1.0) * std::max(mesh.H[v], 0.0) / (p - 1.0);
        if (term < 0) d.negative_part += term;
    }
    return d;
}

std::vector<Vec3> recovered_gradients(const PotentialField& F) {
    const LatticeField& L = F.lattice;
    const std::int64_t N = L.node_count();
    std::vector<Vec3> acc(static_cast<std::size_t>(N), Vec3::Zero());
    std::vector<double> weight(static_cast<std::size_t>(N), 0.0);
    const std::int64_t slabs = L.n[0] - 1;
    for (int parity = 0; parity < 2; ++parity) {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t i = parity; i < slabs; i += 2) {
            for_each_tet_in_slab(F, i, [&](std::int64_t, std::int64_t, int, const std::array<std::int64_t, 4>& nodes,
                                           const TetGeometry& g) {
                if (g.volume == 0.0) return;
                Eigen::Vector4d u;
                for (int q = 0; q < 4; ++q) u(q) = L.values[nodes[q]];
                const Vec3 grad = g.B * u;
                for (int q = 0; q < 4; ++q) {
                    acc[nodes[q]] += g.volume * grad;
                    weight[nodes[q]] += g.volume;
                }
            });
        }
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t idx = 0; idx < N; ++idx) {
        if (weight[idx] > 0) acc[idx] /= weight[idx];
        const std::int64_t id[3] = {idx / (L.n[1] * L.n[2]), (idx / L.n[2]) % L.n[1], idx % L.n[2]};
        for (int d = 0; d < 3; ++d) {
            if (F.mirror[d] && id[d] == 0) acc[idx][d] = 0.0;  // symmetric across the plane
        }
    }
    return acc;
}

bool sample_recovered_gradient(const PotentialField& F, const std::vector<Vec3>& nodal, const Vec3& x, Vec3& g) {
    PotentialField::Location loc;
    if (!F.locate(x, loc)) return false;
    if (loc.inside_domain) {
        g.setZero();
        return true;
    }
    g.setZero();
    for (int q = 0; q < 4; ++q) g += loc.weights(q) * nodal[loc.nodes[q]];
    for (int d = 0; d < 3; ++d) {
        if (loc.flipped[d]) g[d] = -g[d];
    }
    return true;
}

double lowest_resolved_level(const PotentialField& F) {
    double top = 0.0;
    for (std::int64_t idx = 0; idx < F.lattice.node_count(); ++idx) {
        if (F.kind[idx] == NodeKind::Outer) top = std::max(top, F.lattice.values[idx]);
    }
    return top;
}

namespace {

// Both routes of U_p at the requested levels; entries stay NaN below the lowest resolved level.
void level_integrals(const PotentialField& F, const std::vector<double>& taus, UpProfile& up) {
    const double p = F.p;
    const int n = F.dimension;
    const LatticeField& L = F.lattice;
    const double mult = F.multiplicity();
    const std::size_t m = taus.size();
    up.U.assign(m, kNaN);
    up.U_coarea.assign(m, kNaN);
    up.U_isosurface.assign(m, kNaN);
    up.U_err.assign(m, kNaN);
    up.sparse.assign(m, 0);
    const double floor_level = lowest_resolved_level(F);

    // Coarea route: Q(tau) = int_{u > tau} |Du|^{p+1}, per slab for a fixed summation order.
    const std::int64_t slabs = L.n[0] - 1;
    std::vector<std::array<double, kBins + 1>> partial_q(static_cast<std::size_t>(slabs));
    std::vector<std::array<double, kBins + 1>> partial_full(static_cast<std::size_t>(slabs));
    std::vector<std::array<std::size_t, kBins>> partial_count(static_cast<std::size_t>(slabs));
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < slabs; ++i) {
        auto& q = partial_q[i];
        auto& full = partial_full[i];
        auto& cnt = partial_count[i];
        q.fill(0.0);
        full.fill(0.0);
        cnt.fill(0);
        for_each_tet_in_slab(F, i, [&](std::int64_t, std::int64_t, int, const std::array<std::int64_t, 4>& nodes,
                                       const TetGeometry& g) {
            if (g.volume == 0.0) return;
            Eigen::Vector4d u;
            std::array<double, 4> f;
            for (int c = 0; c < 4; ++c) f[c] = u(c) = L.values[nodes[c]];
            std::sort(f.begin(), f.end());
            const double mean = 0.25 * (f[0] + f[1] + f[2] + f[3]);
            cnt[std::clamp(static_cast<int>(mean * kBins), 0, kBins - 1)] += 1;
            const double w = g.volume * std::pow((g.B * u).norm(), p + 1.0);
            if (w == 0.0) return;
            const int k_full = std::clamp(static_cast<int>(std::floor(f[0] * kBins)), -1, kBins);
            if (k_full >= 0) full[k_full] += w;
            const int k_end = std::min(kBins, static_cast<int>(std::ceil(f[3] * kBins)));
            for (int k = k_full + 1; k <= k_end; ++k) {
                const double tau = static_cast<double>(k) / kBins;
                q[k] += w * (1.0 - fraction_below(f, tau));
            }
        });
    }
    std::array<double, kBins + 1> Q{}, full{};
    std::array<std::size_t, kBins> counts{};
    for (std::int64_t i = 0; i < slabs; ++i) {
        for (int k = 0; k <= kBins; ++k) {
            Q[k] += partial_q[i][k];
            full[k] += partial_full[i][k];
        }
        for (int k = 0; k < kBins; ++k) counts[k] += partial_count[i][k];
    }
    double running = 0.0;
    for (int k = kBins; k >= 0; --k) {
        running += full[k];
        Q[k] = mult * (Q[k] + running);
    }
    std::vector<double> edge(kBins + 1), G(kBins + 1);
    for (int k = 0; k <= kBins; ++k) {
        edge[k] = static_cast<double>(k) / kBins;
        const int hw = std::min({kSavitzkyGolayHalfWidth, k, kBins - k});
        if (hw == 0) {
            G[k] = k == 0 ? -(Q[1] - Q[0]) * kBins : -(Q[kBins] - Q[kBins - 1]) * kBins;
            continue;
        }
        double num = 0.0, den = 0.0;
        for (int j = -hw; j <= hw; ++j) {
            num += j * Q[k + j];
            den += static_cast<double>(j) * j;
        }
        G[k] = -num / den * kBins;
    }

    const std::vector<Vec3> nodal = recovered_gradients(F);
    const double expo = (n - 1.0) / (n - p);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t s = 0; s < m; ++s) {
        const double tau = taus[s];
        if (!(tau > floor_level)) continue;
        const std::size_t bin = static_cast<std::size_t>(std::clamp(static_cast<int>(tau * kBins), 0, kBins - 1));
        up.sparse[s] = counts[bin] < kMinCellsPerBin;
        up.U_coarea[s] = std::pow(tau, -expo) * interpolate(edge, G, tau);

        std::vector<std::int64_t> src;
        const SurfaceMesh iso = isosurface(L, tau, Facing::TowardDecreasing, &src);
        double integral = 0.0;
        for (std::size_t tri = 0; tri < iso.triangles.size(); ++tri) {
            const std::int64_t base = src[tri] / 6;
            const int t = static_cast<int>(src[tri] % 6);
            const std::int64_t ci = base / (L.n[1] * L.n[2]), cj = (base / L.n[2]) % L.n[1], ck = base % L.n[2];
            const TetGeometry tg = F.tet_geometry(ci, cj, ck, t);
            const auto nodes = kuhn_tet_nodes(L, ci, cj, ck, t);
            const Vec3 x0 = L.position(nodes[0]);
            const auto& tv = iso.triangles[tri];
            double sum = 0.0;
            for (int c = 0; c < 3; ++c) {
                Eigen::Vector4d lam = tg.B.transpose() * (iso.vertices[tv[c]] - x0);
                lam(0) += 1.0;
                Vec3 g = Vec3::Zero();
                for (int q = 0; q < 4; ++q) g += lam(q) * nodal[nodes[q]];
                sum += std::pow(g.norm(), p);
            }
            integral += triangle_area(iso, tri) * sum / 3.0;
        }
        up.U_isosurface[s] = std::pow(tau, -expo) * mult * integral;
        up.U[s] = 0.5 * (up.U_coarea[s] + up.U_isosurface[s]);
        up.U_err[s] = 0.5 * std::abs(up.U_coarea[s] - up.U_isosurface[s]);
    }
}

}  // namespace

UpProfile up_profile(const PotentialField& F, const SurfaceMesh& mesh, const BoundaryGradient& grad,
                     const std::vector<double>& taus, double capacity) {
    const double p = F.p;
    const int n = F.dimension;
    for (double t : taus) {
        if (!(t > 0.0 && t < 1.0)) throw PreconditionError("up_profile: levels must lie in (0, 1)");
    }
    UpProfile up;
    up.p = p;
    up.n = n;
    up.taus = taus;
    up.capacity = capacity;
    level_integrals(F, taus, up);
    const std::size_t m = taus.size();
    // Discretisation error from the previous nested level where available.
    if (F.coarse) {
        UpProfile rough;
        level_integrals(*F.coarse, taus, rough);
        for (std::size_t s = 0; s < m; ++s) {
            if (std::isfinite(up.U[s]) && std::isfinite(rough.U[s])) {
                up.U_err[s] = std::max(up.U_err[s], std::abs(up.U[s] - rough.U[s]));
            }
        }
    }
    const double floor_level = lowest_resolved_level(F);
    for (std::size_t s = 0; s < m; ++s) {
        if (std::isnan(up.U[s])) {
            up.warnings.push_back("level " + format_number(taus[s]) +
                                  " is not enclosed by the truncated region (lowest resolved level " +
                                  format_number(floor_level) + ")");
        } else if (up.sparse[s]) {
            up.warnings.push_back("level " + format_number(taus[s]) + " falls in a bin with fewer than 50 cells");
        }
    }

    std::vector<double> up_integrand(mesh.vertices.size());
    for (std::size_t v = 0; v < up_integrand.size(); ++v) up_integrand[v] = std::pow(grad.grad_norm[v], p);
    up.U_at_one = boundary_integral(mesh, up_integrand);
    const DerivativeAtOne d = up_derivative_at_one(mesh, grad, p, n);
    up.dU_at_one = d.value;
    up.dU_positive_part = d.positive_part;
    up.dU_negative_part = d.negative_part;
    up.U_limit_zero = up_limit_zero(capacity, p, n);
    return up;
}

PhiProfile phi_profile(const UpProfile& up, int samples) {
    if (samples < 3) throw PreconditionError("phi_profile: at least 3 samples");
    PhiProfile phi;
    const double p = up.p, n = up.n;
    phi.beta = (n - p) / ((n - 2.0) * (p - 1.0));
    // Knots in s (ascending): tau = 1 first, then the resolved samples.
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t k = 0; k < up.taus.size(); ++k) {
        if (std::isfinite(up.U[k])) order.emplace_back(-std::log(up.taus[k]) / phi.beta, k);
    }
    std::sort(order.begin(), order.end());
    std::vector<double> ks{0.0}, kU{up.U_at_one}, kE{order.empty() ? 0.0 : up.U_err[order.front().second]};
    for (const auto& [s, k] : order) {
        ks.push_back(s);
        kU.push_back(up.U[k]);
        kE.push_back(up.U_err[k]);
    }
    const double s_max = ks.back();
    phi.s.resize(samples);
    phi.Phi.resize(samples);
    phi.Phi_err.resize(samples);
    phi.dPhi.resize(samples);
    for (int k = 0; k < samples; ++k) {
        phi.s[k] = s_max * k / (samples - 1);
        phi.Phi[k] = interpolate(ks, kU, phi.s[k]);
        phi.Phi_err[k] = interpolate(ks, kE, phi.s[k]);
    }
    for (int k = 0; k < samples; ++k) {
        const int a = std::max(0, k - 1), b = std::min(samples - 1, k + 1);
        phi.dPhi[k] = (phi.Phi[b] - phi.Phi[a]) / (phi.s[b] - phi.s[a]);
    }
    return phi;
}

double mon2_combination(const PhiProfile& phi, std::size_t k, double lambda) {
    const double e = std::exp(phi.beta * phi.s[k]);
    return (e - lambda) / e * phi.dPhi[k] - phi.beta * phi.Phi[k];
}

EffectiveCheck effective_check_I(const UpProfile& up, double tol) {
    EffectiveCheck c;
    c.name = "effective_I";
    c.value = up.dU_at_one;
    c.scale = up.dU_positive_part;
    c.threshold = -tol * c.scale;
    c.pass = c.value >= c.threshold;
    c.detail = "dU(1) = " + format_number(c.value) + ", positive-part scale " + format_number(c.scale);
    return c;
}

EffectiveCheck effective_check_II(const UpProfile& up, const PhiProfile& phi, std::vector<Mon2Sample>* samples,
                                  double tol) {
    EffectiveCheck c;
    c.name = "effective_II";
    c.value = up.U_limit_zero;
    c.threshold = up.U_at_one * (1.0 + tol);
    c.scale = up.U_at_one;
    bool ok = c.value <= c.threshold;
    const std::size_t N = phi.s.size();
    const double s_max = phi.s.back();
    auto err = [&](std::size_t k, double lambda) {
        const std::size_t a = k == 0 ? 0 : k - 1, b = std::min(N - 1, k + 1);
        const double d_err = (phi.Phi_err[a] + phi.Phi_err[b]) / (phi.s[b] - phi.s[a]);
        const double e = std::exp(phi.beta * phi.s[k]);
        return std::abs((e - lambda) / e) * d_err + phi.beta * phi.Phi_err[k];
    };
    std::size_t violations = 0;
    for (double lambda : {0.25, 0.5, 0.75}) {
        for (std::size_t i = 0; i < N; ++i) {
            if (phi.s[i] > 0.1 * s_max) continue;
            for (std::size_t j = 0; j < N; ++j) {
                if (phi.s[j] < 0.9 * s_max) continue;
                Mon2Sample m;
                m.lambda = lambda;
                m.s = phi.s[i];
                m.S = phi.s[j];
                m.left = mon2_combination(phi, i, lambda);
                m.right = mon2_combination(phi, j, lambda);
                m.error_bar = err(i, lambda) + err(j, lambda);
                m.violated = m.left - m.right > m.error_bar;
                violations += m.violated;
                if (samples) samples->push_back(m);
            }
        }
    }
    ok = ok && violations == 0;
    c.pass = ok;
    c.detail = "U(0+) = " + format_number(up.U_limit_zero) + ", U(1) = " + format_number(up.U_at_one) + ", " +
               std::to_string(violations) + " mon_2 violations";
    return c;
}

AsymptoticResiduals asymptotic_residuals(const PotentialField& F, double C) {
    if (!(C > 0)) throw PreconditionError("asymptotic_residuals: capacity must be positive");
    const double alpha = F.alpha();
    const double target = std::pow(C, 1.0 / (F.p - 1.0));
    const std::vector<Vec3> nodal = recovered_gradients(F);
    AsymptoticResiduals r;
    constexpr int kDirections = 96;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (double frac : {0.7, 0.8, 0.9}) {
        const double radius = frac * F.R_out;
        for (int k = 0; k < kDirections; ++k) {
            const double z = 1.0 - (2.0 * k + 1.0) / kDirections;
            const double rho = std::sqrt(1.0 - z * z);
            const Vec3 dir(rho * std::cos(golden * k), rho * std::sin(golden * k), z);
            const Vec3 x = radius * dir;
            double u;
            Vec3 g;
            if (!F.sample(x, u) || !sample_recovered_gradient(F, nodal, x, g)) continue;
            const double mu = u * std::pow(radius, alpha);
            const double mg = g.norm() * std::pow(radius, alpha + 1.0) / alpha;
            r.res_u = std::max(r.res_u, std::abs(target / mu - 1.0));
            r.res_grad = std::max(r.res_grad, std::abs(target / mg - 1.0));
            ++r.samples;
        }
    }
    return r;
}

JetEvaluator radial_jet(const RadialSolution& sol) {
    if (sol.n != 3) throw PreconditionError("radial_jet: n = 3 only");
    return [sol](const Vec3& x) {
        const double r = x.norm();
        const Vec3 e = x / r;
        const double d1 = sol.du(r), d2 = sol.d2u(r);
        LocalJet j;
        j.value = sol.u(r);
        j.gradient = d1 * e;
        j.hessian = d2 * e * e.transpose() + (d1 / r) * (Mat3::Identity() - e * e.transpose());
        return j;
    };
}

JetEvaluator lattice_jet(const PotentialField& F, int stride) {
    if (stride < 1) throw PreconditionError("lattice_jet: stride must be positive");
    return [&F, stride](const Vec3& x) {
        const LatticeField& L = F.lattice;
        const double d = stride * L.h;
        auto node_jet = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
            auto v = [&](int a, int b, int c) { return F.node_value(i + a * stride, j + b * stride, k + c * stride); };
            LocalJet jet;
            jet.value = v(0, 0, 0);
            const int e[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
            for (int a = 0; a < 3; ++a) {
                const double up = v(e[a][0], e[a][1], e[a][2]), dn = v(-e[a][0], -e[a][1], -e[a][2]);
                jet.gradient[a] = (up - dn) / (2 * d);
                jet.hessian(a, a) = (up - 2 * jet.value + dn) / (d * d);
                for (int b = a + 1; b < 3; ++b) {
                    const int s[3] = {e[a][0] + e[b][0], e[a][1] + e[b][1], e[a][2] + e[b][2]};
                    const int t[3] = {e[a][0] - e[b][0], e[a][1] - e[b][1], e[a][2] - e[b][2]};
                    const double pp = v(s[0], s[1], s[2]), mm = v(-s[0], -s[1], -s[2]);
                    const double pm = v(t[0], t[1], t[2]), mp = v(-t[0], -t[1], -t[2]);
                    jet.hessian(a, b) = jet.hessian(b, a) = (pp - pm - mp + mm) / (4 * d * d);
                }
            }
            return jet;
        };
        // Reflect into the computational region and blend the 8 surrounding nodes.
        Vec3 y = x;
        std::array<bool, 3> flip{false, false, false};
        for (int a = 0; a < 3; ++a) {
            if (F.mirror[a] && y[a] < 0) {
                y[a] = -y[a];
                flip[a] = true;
            }
        }
        const Vec3 xi = (y - L.origin) / L.h;
        std::int64_t c[3];
        double f[3];
        for (int a = 0; a < 3; ++a) {
            c[a] = static_cast<std::int64_t>(std::floor(xi[a]));
            f[a] = xi[a] - c[a];
        }
        LocalJet out;
        out.value = 0.0;
        for (int corner = 0; corner < 8; ++corner) {
            double w = 1.0;
            std::int64_t id[3];
            for (int a = 0; a < 3; ++a) {
                const int bit = (corner >> a) & 1;
                id[a] = c[a] + bit;
                w *= bit ? f[a] : 1.0 - f[a];
            }
            if (w == 0.0) continue;
            const LocalJet nj = node_jet(id[0], id[1], id[2]);
            out.value += w * nj.value;
            out.gradient += w * nj.gradient;
            out.hessian += w * nj.hessian;
        }
        for (int a = 0; a < 3; ++a) {
            if (!flip[a]) continue;
            out.gradient[a] = -out.gradient[a];
            out.hessian.row(a) *= -1.0;
            out.hessian.col(a) *= -1.0;
        }
        return out;
    };
}

KatoResult kato_residual(const JetEvaluator& jet, const Vec3& x, double p, int n, double gradient_scale) {
    if (n != 3) throw PreconditionError("kato_residual: jets are three-dimensional");
    const LocalJet J = jet(x);
    if (!J.gradient.allFinite() || !J.hessian.allFinite()) throw PreconditionError("kato_residual: jet unavailable");
    const double w = J.gradient.norm();
    if (!(w >= 0.1 * gradient_scale)) throw PreconditionError("kato_residual: near-critical point");
    const Vec3 nu = J.gradient / w;
    const Mat3 P = Mat3::Identity() - nu * nu.transpose();
    const Mat3& A = J.hessian;
    const Vec3 dw = A * nu;                // D|Du|
    const Vec3 dw_t = P * dw;              // tangential part
    const Mat3 h = -(P * A * P) / w;       // level-set second fundamental form
    const double H = h.trace();
    const double traceless = h.squaredNorm() - H * H / (n - 1.0);
    const double c = (p - 1.0) * (p - 1.0) / (n - 1.0);
    const double t1 = A.squaredNorm(), t2 = (1.0 + c) * dw.squaredNorm();
    const double t3 = w * w * traceless, t4 = (1.0 - c) * dw_t.squaredNorm();
    KatoResult k;
    k.lhs = t1 - t2;
    k.rhs = t3 + t4;
    k.residual = k.lhs - k.rhs;
    k.scale = std::max({std::abs(t1), std::abs(t2), std::abs(t3), std::abs(t4)});
    k.relative = k.scale > 0 ? std::abs(k.residual) / k.scale : 0.0;
    k.grad_norm = w;
    return k;
}

KatoResult kato_residual_radial(const RadialSolution& sol, double r) {
    if (!(r > sol.R)) throw PreconditionError("kato_residual_radial: r must exceed R");
    const double d1 = sol.du(r), d2 = sol.d2u(r);
    const double n = sol.n, c = (sol.p - 1.0) * (sol.p - 1.0) / (n - 1.0);
    const double t1 = d2 * d2 + (n - 1.0) * (d1 / r) * (d1 / r);
    const double t2 = (1.0 + c) * d2 * d2;
    KatoResult k;
    k.lhs = t1 - t2;
    k.rhs = 0.0;  // umbilical level sets, no tangential variation of |Du|
    k.residual = k.lhs;
    k.scale = std::max(t1, t2);
    k.relative = std::abs(k.residual) / k.scale;
    k.grad_norm = std::abs(d1);
    return k;
}

double talenti_constant(int n, double p) {
    if (!(p > 1.0 && p < n)) throw PreconditionError("talenti_constant: need 1 < p < n");
    const double nn = n;
    const double gam = std::tgamma(1.0 + nn / 2.0) * std::tgamma(nn) / (std::tgamma(nn / p) * std::tgamma(1.0 + nn - nn / p));
    return 1.0 / (std::sqrt(M_PI) * std::pow(nn, 1.0 / p)) * std::pow((p - 1.0) / (nn - p), (p - 1.0) / p) *
           std::pow(gam, 1.0 / nn);
}

double talenti_q(int n, double p) {
    if (!(p > 1.0 && p < n)) throw PreconditionError("talenti_q: need 1 < p < n");
    const double pstar = p * n / (n - p);
    return 1.0 + pstar * (p - 1.0) / p;
}

double xu3_gap(double cap1, double cap_p, int n, double p) {
    const double q = talenti_q(n, p);
    return q * std::pow(talenti_constant(n, p), q - 1.0) * std::pow(cap_p, (n - 1.0) / (n - p)) - cap1;
}

void write_up_profile_csv(std::ostream& out, const UpProfile& up) {
    out << "tau,U_coarea,U_isosurface,U_err\n";
    for (std::size_t k = 0; k < up.taus.size(); ++k) {
        out << format_number(up.taus[k]) << ',' << format_number(up.U_coarea[k]) << ','
            << format_number(up.U_isosurface[k]) << ',' << format_number(up.U_err[k]) << '\n';
    }
}

namespace {
nlohmann::json rounded(const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(std::isfinite(x) ? nlohmann::json(round12(x)) : nlohmann::json(nullptr));
    return a;
}
}  // namespace

nlohmann::json to_json(const UpProfile& up) {
    nlohmann::json j;
    j["p"] = round12(up.p);
    j["n"] = up.n;
    j["tau"] = rounded(up.taus);
    j["U"] = rounded(up.U);
    j["U_coarea"] = rounded(up.U_coarea);
    j["U_isosurface"] = rounded(up.U_isosurface);
    j["U_err"] = rounded(up.U_err);
    j["U_limit_zero"] = round12(up.U_limit_zero);
    j["U_at_one"] = round12(up.U_at_one);
    j["dU_at_one"] = round12(up.dU_at_one);
    j["dU_positive_part"] = round12(up.dU_positive_part);
    j["capacity"] = round12(up.capacity);
    j["warnings"] = up.warnings;
    return j;
}

nlohmann::json to_json(const CapacityReport& r) {
    return {{"cap_energy", round12(r.cap_energy)},
            {"cap_flux", round12(r.cap_flux)},
            {"cap_used", round12(r.cap_used)},
            {"discrepancy", round12(r.discrepancy)}};
}

nlohmann::json to_json(const PhiProfile& phi) {
    return {{"beta", round12(phi.beta)}, {"s", rounded(phi.s)}, {"Phi", rounded(phi.Phi)},
            {"dPhi", rounded(phi.dPhi)}, {"Phi_err", rounded(phi.Phi_err)}};
}

nlohmann::json to_json(const EffectiveCheck& c) {
    return {{"name", c.name},
            {"verdict", c.pass ? "PASS" : "FAIL"},
            {"value", round12(c.value)},
            {"threshold", round12(c.threshold)},
            {"scale", round12(c.scale)},
            {"detail", c.detail}};
}

nlohmann::json to_json(const KatoResult& k) {
    return {{"lhs", round12(k.lhs)},         {"rhs", round12(k.rhs)},           {"residual", round12(k.residual)},
            {"scale", round12(k.scale)},     {"relative", round12(k.relative)}, {"grad_norm", round12(k.grad_norm)}};
}

}  // namespace pcaplab
