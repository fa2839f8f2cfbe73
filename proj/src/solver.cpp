#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "pcaplab/constants.hpp"
#include "pcaplab/multigrid.hpp"
#include "pcaplab/potential.hpp"

namespace pcaplab {

namespace {

constexpr std::int64_t kChunk = 2048;

struct Stage {
    PotentialField& F;
    double eps;
    std::array<std::int64_t, 8> off{};
    std::array<std::vector<std::int64_t>, 8> cubes_by_color;  // lower-corner node indices
    std::vector<std::int64_t> cubes;                          // all active cubes, ascending
    StencilOperator A;

    Stage(PotentialField& field, double epsilon) : F(field), eps(epsilon) {
        const LatticeField& L = F.lattice;
        for (int c = 0; c < 8; ++c)
            off[c] = ((c & 1) ? L.n[1] * L.n[2] : 0) + ((c & 2) ? L.n[2] : 0) + ((c & 4) ? 1 : 0);
        for (std::int64_t i = 0; i + 1 < L.n[0]; ++i) {
            for (std::int64_t j = 0; j + 1 < L.n[1]; ++j) {
                for (std::int64_t k = 0; k + 1 < L.n[2]; ++k) {
                    const std::int64_t base = L.index(i, j, k);
                    bool any_free = false;
                    for (int c = 0; c < 8; ++c) any_free = any_free || F.kind[base + off[c]] == NodeKind::Free;
                    if (!any_free) continue;
                    cubes.push_back(base);
                    cubes_by_color[(i & 1) | ((j & 1) << 1) | ((k & 1) << 2)].push_back(base);
                }
            }
        }
        A.configure(L.n, kuhn_offsets());
        for (std::int64_t idx = 0; idx < L.node_count(); ++idx) A.active[idx] = F.kind[idx] == NodeKind::Free;
    }

    void cube_coords(std::int64_t base, std::int64_t& i, std::int64_t& j, std::int64_t& k) const {
        const auto& n = F.lattice.n;
        k = base % n[2];
        j = (base / n[2]) % n[1];
        i = base / (n[1] * n[2]);
    }

    // Regularised energy of the reduced domain for nodal values u.
    double energy(const std::vector<double>& u) const {
        const auto& tets = kuhn_tetrahedra();
        const double p = F.p, e2 = eps * eps;
        const std::int64_t nc = static_cast<std::int64_t>(cubes.size());
        const std::int64_t nchunks = (nc + kChunk - 1) / kChunk;
        std::vector<double> partial(static_cast<std::size_t>(nchunks), 0.0);
#pragma omp parallel for schedule(static)
        for (std::int64_t ch = 0; ch < nchunks; ++ch) {
            double s = 0.0;
            for (std::int64_t q = ch * kChunk; q < std::min(nc, (ch + 1) * kChunk); ++q) {
                const std::int64_t base = cubes[q];
                std::int64_t i, j, k;
                cube_coords(base, i, j, k);
                for (int t = 0; t < 6; ++t) {
                    const TetGeometry g = F.tet_geometry(i, j, k, t);
                    Eigen::Vector4d uv;
                    for (int c = 0; c < 4; ++c) uv(c) = u[base + off[tets[t][c]]];
                    const double s2 = (g.B * uv).squaredNorm() + e2;
                    s += g.volume * std::pow(s2, 0.5 * p);
                }
            }
            partial[ch] = s;
        }
        double total = 0.0;
        for (double s : partial) total += s;
        return total;
    }

    // Gradient into grad (free nodes) and the Hessian into A.
    void assemble(const std::vector<double>& u, PaddedVector& grad) {
        const auto& tets = kuhn_tetrahedra();
        const double p = F.p, e2 = eps * eps;
        std::fill(A.coef.begin(), A.coef.end(), 0.0);
        grad.fill(0.0);
        double* c = A.coef.data() + A.pad * 8;
        double* gr = grad.data();
        for (int color = 0; color < 8; ++color) {
            const auto& list = cubes_by_color[color];
            const std::int64_t nc = static_cast<std::int64_t>(list.size());
#pragma omp parallel for schedule(static)
            for (std::int64_t q = 0; q < nc; ++q) {
                const std::int64_t base = list[q];
                std::int64_t i, j, k;
                cube_coords(base, i, j, k);
                for (int t = 0; t < 6; ++t) {
                    const auto& tet = tets[t];
                    std::array<std::int64_t, 4> nd;
                    std::array<bool, 4> fr;
                    Eigen::Vector4d uv;
                    bool any = false;
                    for (int a = 0; a < 4; ++a) {
                        nd[a] = base + off[tet[a]];
                        fr[a] = F.kind[nd[a]] == NodeKind::Free;
                        any = any || fr[a];
                        uv(a) = u[nd[a]];
                    }
                    if (!any) continue;
                    const TetGeometry g = F.tet_geometry(i, j, k, t);
                    if (g.volume == 0.0) continue;
                    const Vec3 gv = g.B * uv;
                    const double s2 = gv.squaredNorm() + e2;
                    const double sp = std::pow(s2, 0.5 * p - 1.0);
                    const double w = g.volume * p * sp;
                    const Eigen::Vector4d bg = g.B.transpose() * gv;
                    const Eigen::Matrix4d H =
                        w * (g.B.transpose() * g.B + ((p - 2.0) / s2) * (bg * bg.transpose()));
                    for (int a = 0; a < 4; ++a) {
                        if (!fr[a]) continue;
                        gr[nd[a]] += w * bg(a);
                        c[nd[a] * 8] += H(a, a);
                        for (int b = a + 1; b < 4; ++b) {
                            if (!fr[b]) continue;
                            // Kuhn vertices form a chain of corner masks, so b is above a.
                            c[nd[a] * 8 + (tet[b] ^ tet[a])] += H(a, b);
                        }
                    }
                }
            }
        }
    }
};

struct NewtonStats {
    int iterations = 0;
    double energy = 0.0;
    double residual = 0.0;
};

NewtonStats newton(PotentialField& F, double eps, const SolveOptions& opt, std::vector<double>* log) {
    Stage S(F, eps);
    std::vector<double>& u = F.lattice.values;
    const std::int64_t N = F.lattice.node_count();
    PaddedVector grad = S.A.make_vector(), rhs = S.A.make_vector(), step = S.A.make_vector();
    std::vector<double> trial(u.size());
    double E = S.energy(u);
    if (log) log->push_back(E);
    NewtonStats st;
    Multigrid mg;
    for (int it = 1; it <= opt.max_newton; ++it) {
        S.assemble(u, grad);
        double gmax = 0.0;
        for (std::int64_t i = 0; i < N; ++i) {
            gmax = std::max(gmax, std::abs(grad[i]));
            rhs[i] = -grad[i];
        }
        st.residual = gmax;
        mg.build(S.A);
        const PcgResult pr = pcg(S.A, mg, rhs, step, 1e-3, 200);
        double slope = 0.0;
        for (std::int64_t i = 0; i < N; ++i) slope += grad[i] * step[i];
        if (!(slope < 0)) {
            st.iterations = it;
            break;
        }
        double t = 1.0;
        double E_new = E;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            for (std::int64_t i = 0; i < N; ++i) trial[i] = u[i] + t * step[i];
            E_new = S.energy(trial);
            if (E_new <= E + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        st.iterations = it;
        if (opt.verbose) {
            std::fprintf(stderr, "    newton %2d  E=%.12e  dec=%.3e  pcg=%d (%.1e)  t=%.3g  eps=%.3e\n", it, E,
                         -slope, pr.iterations, pr.relative_residual, t, eps);
        }
        if (!accepted) break;
        u.swap(trial);
        const double drop = E - E_new;
        E = E_new;
        if (log) log->push_back(E);
        if (-0.5 * slope <= opt.energy_tolerance * std::abs(E) && drop <= opt.energy_tolerance * std::abs(E)) {
            st.energy = E;
            return st;
        }
        if (t == 1.0 && -0.5 * slope <= 1e-3 * opt.energy_tolerance * std::abs(E)) {
            st.energy = E;
            return st;
        }
        if (it == opt.max_newton) {
            throw NonConvergence("exterior solve: relative energy decrease " + std::to_string(drop / std::abs(E)) +
                                 " after " + std::to_string(it) + " Newton iterations");
        }
    }
    st.energy = E;
    return st;
}

double initial_capacity(const ImplicitDomain& domain, double p) {
    const double r = std::max(domain.info().inradius, 1e-3 * std::max(1.0, domain.info().circumradius));
    return std::pow(r, 3.0 - p);
}

void set_outer(PotentialField& F, double capacity) {
    for (std::int64_t idx = 0; idx < F.lattice.node_count(); ++idx) {
        if (F.kind[idx] == NodeKind::Outer) F.lattice.values[idx] = F.far_profile(F.lattice.lattice_position(idx), capacity);
    }
}

double capacity_from(const PotentialField& F, double imposed) {
    const double n = F.dimension, p = F.p;
    return std::pow((p - 1.0) / (n - p), p - 1.0) * field_energy(F, imposed) / sphere_area(F.dimension);
}

}  // namespace

PotentialField solve_exterior(const ImplicitDomain& domain, const SolveOptions& opt) {
    const int n = domain.dimension();
    const double p = opt.p;
    if (n != 3) throw PreconditionError("solve_exterior: only n = 3 is discretised");
    if (!(p >= 1.05 - 1e-12) || !(p <= std::min(2.8, n - 0.2) + 1e-12)) {
        throw PreconditionError("solve_exterior: p must lie in [1.05, " + std::to_string(std::min(2.8, n - 0.2)) + "]");
    }
    const double circ = domain.info().circumradius;
    if (!(opt.R_out >= 3.0 * circ * (1.0 - 1e-12))) {
        throw PreconditionError("solve_exterior: R_out must be at least 3 x circumradius (" + std::to_string(3 * circ) +
                                ")");
    }
    if (!(opt.h > 0) || opt.h > domain.info().feature_size / 4.0 * (1.0 + 1e-12)) {
        throw PreconditionError("solve_exterior: h must resolve the smallest feature (h <= " +
                                std::to_string(domain.info().feature_size / 4.0) + ")");
    }
    const int levels = std::max(1, opt.nested_levels);
    // Cells per half-axis: covers R_out and keeps the coarsest nested lattice divisible by 8.
    const std::int64_t unit = (std::int64_t{1} << (levels - 1)) * 8;
    const std::int64_t cells = ((static_cast<std::int64_t>(std::ceil(opt.R_out / opt.h - 1e-9)) + unit - 1) / unit) * unit;
    const double eps_final = opt.epsilon_final_factor / opt.h;

    double C = opt.initial_capacity.value_or(initial_capacity(domain, p));
    std::vector<OuterIteration> outer;
    std::vector<double> final_log;
    PotentialField prev;
    bool have_prev = false;
    double eps_used = eps_final;

    for (int s = levels - 1; s >= 0; --s) {
        const double hs = opt.h * std::ldexp(1.0, s);
        const std::int64_t cs = cells >> s;
        PotentialField F = make_exterior_lattice(domain, p, hs, opt.R_out, cs);
        set_outer(F, C);
        const double c_lin = std::pow(C, 1.0 / (p - 1.0));
        for (std::int64_t idx = 0; idx < F.lattice.node_count(); ++idx) {
            if (F.kind[idx] != NodeKind::Free) continue;
            const Vec3 x = F.lattice.position(idx);
            double v;
            if (have_prev && prev.sample(x, v)) F.lattice.values[idx] = std::clamp(v, 0.0, 1.0);
            else F.lattice.values[idx] = std::min(1.0, c_lin * std::pow(x.norm(), -F.alpha()));
        }
        if (opt.verbose) std::fprintf(stderr, "level h=%.5f cells=%lld C=%.8f\n", hs, static_cast<long long>(cs), C);

        if (!have_prev) {
            // Continuation in the regularisation on the coarsest lattice.
            for (double eps = opt.epsilon0 / circ; eps > eps_final; eps *= 0.5) newton(F, eps, opt, nullptr);
            std::vector<double> gk, ck;
            for (int pass = 0; pass < opt.far_field_passes; ++pass) {
                const NewtonStats st = newton(F, eps_final, opt, nullptr);
                const double est = capacity_from(F, C);
                outer.push_back({hs, C, est, field_energy(F, C), st.iterations});
                if (opt.verbose) std::fprintf(stderr, "  pass %d: C imposed %.8f estimated %.8f\n", pass, C, est);
                ck.push_back(C);
                gk.push_back(est - C);
                if (pass + 1 == opt.far_field_passes) {
                    C = est;
                    break;
                }
                double next = est;
                const std::size_t m = ck.size();
                if (m >= 2 && gk[m - 1] != gk[m - 2]) {
                    next = ck[m - 1] - gk[m - 1] * (ck[m - 1] - ck[m - 2]) / (gk[m - 1] - gk[m - 2]);
                    if (!(next > 0.5 * est && next < 2.0 * est)) next = est;
                }
                C = next;
                set_outer(F, C);
            }
        } else {
            std::vector<double>* log = (s == 0) ? &final_log : nullptr;
            const NewtonStats st = newton(F, eps_final, opt, log);
            const double est = capacity_from(F, C);
            outer.push_back({hs, C, est, field_energy(F, C), st.iterations});
            if (opt.verbose) std::fprintf(stderr, "  C imposed %.8f estimated %.8f\n", C, est);
            if (s == 0) {
                F.capacity_imposed = C;
                F.capacity_estimate = est;
            }
            C = est;
        }
        F.epsilon = eps_used;
        if (s == 0 && have_prev) {
            prev.coarse.reset();
            F.coarse = std::make_shared<const PotentialField>(std::move(prev));
        }
        prev = std::move(F);
        have_prev = true;
    }

    PotentialField& F = prev;
    if (levels == 1) {
        F.capacity_imposed = outer.back().capacity_imposed;
        F.capacity_estimate = outer.back().capacity_estimated;
    }
    F.outer_log = outer;
    F.energy_log = final_log;
    {
        Stage S(F, eps_final);
        F.regularized_energy = S.energy(F.lattice.values);
        PaddedVector g = S.A.make_vector();
        S.assemble(F.lattice.values, g);
        double gmax = 0.0;
        for (std::int64_t i = 0; i < F.lattice.node_count(); ++i) gmax = std::max(gmax, std::abs(g[i]));
        F.residual_norm = gmax;
    }
    double lo = 0.0, hi = 1.0;
    for (std::int64_t idx = 0; idx < F.lattice.node_count(); ++idx) {
        lo = std::min(lo, F.lattice.values[idx]);
        hi = std::max(hi, F.lattice.values[idx]);
    }
    if (lo < -1e-6 || hi > 1.0 + 1e-6) {
        F.warnings.push_back("PrecisionLoss: discrete maximum principle violated by " +
                             std::to_string(std::max(-lo, hi - 1.0)) + " before projection");
    }
    for (double& v : F.lattice.values) v = std::clamp(v, 0.0, 1.0);
    F.energy = field_energy(F, F.capacity_imposed);
    return F;
}

}  // namespace pcaplab
