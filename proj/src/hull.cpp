#include "pcaplab/hull.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "pcaplab/numfmt.hpp"
#include "pcaplab/quantities.hpp"

namespace pcaplab {

namespace {

// Kuhn simplices of the unit d-cube as corner paths 0 -> ... -> 2^d - 1.
std::vector<std::array<int, 4>> kuhn_paths(int d) {
    std::vector<std::array<int, 4>> out;
    std::array<int, 3> perm{0, 1, 2};
    do {
        if (d == 2 && perm[2] != 2) continue;
        std::array<int, 4> path{0, 0, 0, 0};
        for (int r = 0; r < d; ++r) path[r + 1] = path[r] | (1 << perm[r]);
        out.push_back(path);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

struct Incidence {
    int simplex;
    int row;
    double sign;
};

class TvProblem {
public:
    TvProblem(const HullField& f, double h, double ratio) : f_(f), d_(f.dimension), h_(h) {
        const auto& n = f.grid.n;
        paths_ = kuhn_paths(d_);
        cells_[0] = n[0] - 1;
        cells_[1] = n[1] - 1;
        cells_[2] = d_ == 3 ? n[2] - 1 : 1;
        vol_ = std::pow(h, d_) / (d_ == 3 ? 6.0 : 2.0);
        for (int c = 0; c < 8; ++c) offset_[c] = ((c & 1) ? n[1] * n[2] : 0) + ((c & 2) ? n[2] : 0) + ((c & 4) ? 1 : 0);
        for (int m = 0; m < (1 << d_); ++m) {
            for (int s = 0; s < static_cast<int>(paths_.size()); ++s) {
                for (int q = 0; q <= d_; ++q) {
                    if (paths_[s][q] != m) continue;
                    if (q > 0) incidence_[m].push_back({s, q - 1, 1.0});
                    if (q < d_) incidence_[m].push_back({s, q, -1.0});
                }
            }
        }
        const std::int64_t N = f.grid.node_count();
        for (std::int64_t c = 0; c < cells_[0] * cells_[1] * cells_[2]; ++c) {
            const std::int64_t base = cell_base(c);
            bool any_free = false;
            for (int q = 0; q < (1 << d_); ++q) any_free = any_free || is_free(base + offset_[q]);
            if (any_free) active_cells_.push_back(c);
        }
        for (std::int64_t i = 0; i < N; ++i) {
            if (is_free(i)) free_nodes_.push_back(i);
        }
        y_.assign(static_cast<std::size_t>(cells_[0] * cells_[1] * cells_[2]) * paths_.size() * d_, 0.0);
        tau_.assign(static_cast<std::size_t>(N), 0.0);
        const double w = vol_ / h_;
        for (std::int64_t i : free_nodes_) {
            double count = 0.0;
            visit_incident(i, [&](std::int64_t, const Incidence&) { count += 1.0; });
            tau_[i] = ratio / (w * count);
        }
        sigma_ = h_ / (2.0 * vol_ * ratio);
    }

    const std::vector<std::int64_t>& free_nodes() const { return free_nodes_; }

    void dual_step(const std::vector<double>& vbar) {
        const std::size_t S = paths_.size();
        const double w = vol_ / h_;
#pragma omp parallel for schedule(static)
        for (std::size_t a = 0; a < active_cells_.size(); ++a) {
            const std::int64_t c = active_cells_[a];
            const std::int64_t base = cell_base(c);
            for (std::size_t s = 0; s < S; ++s) {
                double* y = &y_[(static_cast<std::size_t>(c) * S + s) * d_];
                double norm2 = 0.0;
                for (int r = 0; r < d_; ++r) {
                    const double g = w * (vbar[base + offset_[paths_[s][r + 1]]] - vbar[base + offset_[paths_[s][r]]]);
                    y[r] += sigma_ * g;
                    norm2 += y[r] * y[r];
                }
                if (norm2 > 1.0) {
                    const double scale = 1.0 / std::sqrt(norm2);
                    for (int r = 0; r < d_; ++r) y[r] *= scale;
                }
            }
        }
    }

    // K^T y at node i.
    double adjoint(std::int64_t i) const {
        double acc = 0.0;
        const std::size_t S = paths_.size();
        visit_incident(i, [&](std::int64_t c, const Incidence& inc) {
            acc += inc.sign * y_[(static_cast<std::size_t>(c) * S + inc.simplex) * d_ + inc.row];
        });
        return acc * vol_ / h_;
    }

    void primal_step(std::vector<double>& v) const {
#pragma omp parallel for schedule(static)
        for (std::size_t a = 0; a < free_nodes_.size(); ++a) {
            const std::int64_t i = free_nodes_[a];
            v[i] = std::clamp(v[i] - tau_[i] * adjoint(i), f_.lower_bound[i], 1.0);
        }
    }

    double primal_value(const std::vector<double>& v) const {
        const std::size_t S = paths_.size();
        const double w = vol_ / h_;
        double total = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : total)
        for (std::size_t a = 0; a < active_cells_.size(); ++a) {
            const std::int64_t base = cell_base(active_cells_[a]);
            for (std::size_t s = 0; s < S; ++s) {
                double norm2 = 0.0;
                for (int r = 0; r < d_; ++r) {
                    const double g = v[base + offset_[paths_[s][r + 1]]] - v[base + offset_[paths_[s][r]]];
                    norm2 += g * g;
                }
                total += w * std::sqrt(norm2);
            }
        }
        return total;
    }

    // min over admissible v of <K^T y, v>.
    double dual_value() const {
        double total = 0.0;
        const std::int64_t N = f_.grid.node_count();
#pragma omp parallel for schedule(static) reduction(+ : total)
        for (std::int64_t i = 0; i < N; ++i) {
            if (f_.box_mask[i]) continue;
            const double a = adjoint(i);
            total += f_.obstacle_mask[i] ? a : (a >= 0.0 ? a * f_.lower_bound[i] : a);
        }
        return total;
    }

private:
    bool is_free(std::int64_t i) const { return !f_.obstacle_mask[i] && !f_.box_mask[i]; }

    std::int64_t cell_base(std::int64_t c) const {
        const std::int64_t ck = c % cells_[2], cj = (c / cells_[2]) % cells_[1], ci = c / (cells_[1] * cells_[2]);
        return f_.grid.index(ci, cj, ck);
    }

    template <typename Fn>
    void visit_incident(std::int64_t i, Fn&& fn) const {
        const auto& n = f_.grid.n;
        const std::int64_t id[3] = {i / (n[1] * n[2]), (i / n[2]) % n[1], i % n[2]};
        for (int m = 0; m < (1 << d_); ++m) {
            std::int64_t cell[3];
            bool ok = true;
            for (int a = 0; a < 3; ++a) {
                cell[a] = id[a] - ((m >> a) & 1);
                ok = ok && cell[a] >= 0 && cell[a] < cells_[a];
            }
            if (!ok) continue;
            const std::int64_t c = (cell[0] * cells_[1] + cell[1]) * cells_[2] + cell[2];
            for (const Incidence& inc : incidence_[m]) fn(c, inc);
        }
    }

    const HullField& f_;
    int d_;
    double h_;
    double vol_ = 0.0;
    double sigma_ = 0.0;
    std::array<std::int64_t, 3> cells_{};
    std::array<std::int64_t, 8> offset_{};
    std::vector<std::array<int, 4>> paths_;
    std::array<std::vector<Incidence>, 8> incidence_;
    std::vector<std::int64_t> active_cells_;
    std::vector<std::int64_t> free_nodes_;
    std::vector<double> y_;
    std::vector<double> tau_;
};

double cross(const std::array<double, 2>& o, const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

bool on_segment(const std::array<double, 2>& p, const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return std::min(a[0], b[0]) <= p[0] && p[0] <= std::max(a[0], b[0]) && std::min(a[1], b[1]) <= p[1] &&
           p[1] <= std::max(a[1], b[1]);
}

bool segments_intersect(const std::array<double, 2>& a, const std::array<double, 2>& b, const std::array<double, 2>& c,
                        const std::array<double, 2>& d) {
    const double d1 = cross(c, d, a), d2 = cross(c, d, b), d3 = cross(a, b, c), d4 = cross(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    return (d1 == 0 && on_segment(a, c, d)) || (d2 == 0 && on_segment(b, c, d)) || (d3 == 0 && on_segment(c, a, b)) ||
           (d4 == 0 && on_segment(d, a, b));
}

}  // namespace

int HullField::multiplicity() const {
    int m = 1;
    for (int d = 0; d < dimension; ++d) m *= mirror[d] ? 2 : 1;
    return m;
}

double hull_level_measure(const HullField& field, double level) {
    if (field.dimension == 2) {
        return field.multiplicity() * isoline_length(field.grid.values, field.grid.n[0], field.grid.n[1], field.grid.h, level);
    }
    return field.multiplicity() * total_area(isosurface(field.grid, level, Facing::TowardDecreasing));
}

HullField minimise_tv_obstacle(const ImplicitDomain& domain, const HullOptions& options) {
    const int d = domain.dimension();
    if (d != 2 && d != 3) throw PreconditionError("minimise_tv_obstacle: dimension must be 2 or 3");
    if (!(options.h > 0)) throw PreconditionError("minimise_tv_obstacle: spacing must be positive");
    if (options.margin_fraction < 0.25) throw PreconditionError("minimise_tv_obstacle: box margin below 25% of the diameter");
    if (!(options.ramp_cells >= 0)) throw PreconditionError("minimise_tv_obstacle: ramp width must be non-negative");
    if (!(options.threshold > 0 && options.threshold < 1)) throw PreconditionError("minimise_tv_obstacle: threshold in (0,1)");
    const ShapeInfo& info = domain.info();
    const Vec3 tight_lo = (info.bounding_box.lo.array() + info.margin).matrix();
    const Vec3 tight_hi = (info.bounding_box.hi.array() - info.margin).matrix();
    double diameter = 0.0;
    for (int a = 0; a < d; ++a) diameter += std::pow(tight_hi[a] - tight_lo[a], 2);
    const double margin = options.margin_fraction * std::sqrt(diameter);
    if (!(margin > 0)) throw PreconditionError("minimise_tv_obstacle: degenerate bounding box");

    HullField F;
    F.dimension = d;
    F.threshold_level = options.threshold;
    F.grid.h = options.h;
    F.grid.n = {1, 1, 1};
    for (int a = 0; a < d; ++a) {
        F.mirror[a] = info.mirror[a];
        const double lo = F.mirror[a] ? 0.0 : tight_lo[a] - margin;
        const double hi = tight_hi[a] + margin;
        F.grid.origin[a] = lo;
        F.grid.n[a] = static_cast<std::int64_t>(std::ceil((hi - lo) / options.h)) + 1;
    }
    const std::int64_t N = F.grid.node_count();
    const double ramp = options.ramp_cells * options.h;
    F.grid.values.assign(static_cast<std::size_t>(N), 0.0);
    F.obstacle_mask.assign(static_cast<std::size_t>(N), 0);
    F.box_mask.assign(static_cast<std::size_t>(N), 0);
    F.lower_bound.assign(static_cast<std::size_t>(N), 0.0);
    for (std::int64_t i = 0; i < N; ++i) {
        const std::int64_t id[3] = {i / (F.grid.n[1] * F.grid.n[2]), (i / F.grid.n[2]) % F.grid.n[1], i % F.grid.n[2]};
        bool face = false;
        for (int a = 0; a < d; ++a) face = face || id[a] == F.grid.n[a] - 1 || (!F.mirror[a] && id[a] == 0);
        if (face) {
            F.box_mask[i] = 1;
            continue;
        }
        const double chi = std::clamp(0.5 - domain.distance_estimate(F.grid.lattice_position(i)) / ramp, 0.0, 1.0);
        F.lower_bound[i] = chi;
        F.grid.values[i] = chi;
        F.obstacle_mask[i] = chi == 1.0;
    }

    const double ratio = options.step_ratio > 0 ? options.step_ratio : (F.dimension == 2 ? 1.0 : 0.02);
    TvProblem problem(F, options.h, ratio);
    const double mult = F.multiplicity();
    std::vector<double>& v = F.grid.values;
    std::vector<double> best = v, previous = v, vbar = v;
    double best_primal = std::numeric_limits<double>::infinity();
    double best_dual = -std::numeric_limits<double>::infinity();
    bool converged = false;
    int it = 0;
    if (options.verbose) std::fprintf(stderr, "tv initial primal %.10g\n", mult * problem.primal_value(v));
    while (it < options.max_iterations) {
        problem.dual_step(vbar);
        previous = v;
        problem.primal_step(v);
        for (std::int64_t i : problem.free_nodes()) vbar[i] = 2.0 * v[i] - previous[i];
        ++it;
        if (it % options.check_every != 0 && it != options.max_iterations) continue;
        const double primal = mult * problem.primal_value(v);
        if (primal < best_primal) {
            best_primal = primal;
            best = v;
        }
        best_dual = std::max(best_dual, mult * problem.dual_value());
        F.tv_log.push_back(best_primal);
        if (options.verbose && it % (options.check_every * 100) == 0) {
            std::fprintf(stderr, "tv it %d primal %.10g dual %.10g gap %.3e\n", it, best_primal, best_dual,
                         (best_primal - best_dual) / best_primal);
        }
        if (best_primal - best_dual <= options.gap_tolerance * best_primal) {
            converged = true;
            break;
        }
    }
    v = best;
    F.iterations = it;
    F.tv_energy = best_primal;
    F.dual_bound = best_dual;
    F.gap = best_primal - best_dual;
    if (!converged) {
        throw NonConvergence("minimise_tv_obstacle: relative gap " + format_number(F.gap / F.tv_energy) + " after " +
                             std::to_string(it) + " iterations (target " + format_number(options.gap_tolerance) + ")");
    }
    F.hull_set.assign(static_cast<std::size_t>(N), 0);
    for (std::int64_t i = 0; i < N; ++i) F.hull_set[i] = F.obstacle_mask[i] || v[i] >= F.threshold_level;
    for (double level : {0.3, 0.5, 0.7}) F.perimeter_sweep.push_back({level, hull_level_measure(F, level)});
    F.perimeter_estimate = hull_level_measure(F, F.threshold_level);
    if (std::abs(F.perimeter_estimate - F.tv_energy) > 0.05 * F.tv_energy) {
        F.warnings.push_back("thresholded perimeter " + format_number(F.perimeter_estimate) +
                             " differs from the total variation " + format_number(F.tv_energy) + " by more than 5%");
    }
    return F;
}

double convex_hull_2d_oracle(const std::vector<std::array<double, 2>>& polygon) {
    const std::size_t m = polygon.size();
    if (m < 3) throw PreconditionError("convex_hull_2d_oracle: need at least three vertices");
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            const bool adjacent = b == a + 1 || (a == 0 && b == m - 1);
            if (adjacent) continue;
            if (segments_intersect(polygon[a], polygon[(a + 1) % m], polygon[b], polygon[(b + 1) % m])) {
                throw PreconditionError("convex_hull_2d_oracle: polygon is self-intersecting");
            }
        }
        if (polygon[a] == polygon[(a + 1) % m]) throw PreconditionError("convex_hull_2d_oracle: repeated vertex");
    }
    std::vector<std::array<double, 2>> pts = polygon;
    std::sort(pts.begin(), pts.end());
    std::vector<std::array<double, 2>> hull(2 * m);
    std::size_t k = 0;
    for (std::size_t i = 0; i < m; ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = m - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    double perimeter = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        perimeter += std::hypot(b[0] - a[0], b[1] - a[1]);
    }
    return perimeter;
}

std::array<double, 2> extrapolate_in_h(const std::vector<double>& c) {
    if (c.empty()) throw PreconditionError("extrapolate_in_h: no levels");
    if (c.size() == 1) return {c[0], 0.0};
    if (c.size() >= 3) {
        const double d_fine = c[0] - c[1], d_coarse = c[1] - c[2];
        if (d_fine * d_coarse > 0 && std::abs(d_fine) < std::abs(d_coarse)) {
            const double correction = d_fine * d_fine / (d_coarse - d_fine);
            return {c[0] + correction, 0.5 * std::abs(correction)};
        }
    }
    return {c[0], std::abs(c[0] - c[1])};
}

CapExtrapolation extrapolate_capacities(const std::vector<double>& p, const std::vector<double>& C,
                                        const std::vector<double>& C_err, int n) {
    const std::size_t m = p.size();
    if (m < 4 || C.size() != m || C_err.size() != m) {
        throw PreconditionError("extrapolate_capacities: need at least 4 matching samples");
    }
    CapExtrapolation e;
    e.n = n;
    e.p = p;
    e.C = C;
    e.C_err = C_err;
    Eigen::MatrixXd X(m, 3);
    Eigen::VectorXd y(m), raw(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double x = p[i] - 1.0;
        X(i, 0) = 1.0;
        X(i, 1) = x;
        X(i, 2) = x * x;
        y(i) = C[i];
        e.cap.push_back(cap_from_normalised(C[i], p[i], n));
        raw(i) = e.cap.back();
    }
    const Eigen::Matrix3d XtX_inv = (X.transpose() * X).inverse();
    const Eigen::MatrixXd W = XtX_inv * X.transpose();
    const Eigen::Vector3d coef = W * y;
    const double s2 = (X * coef - y).squaredNorm() / static_cast<double>(m - 3);
    double propagated = 0.0;
    for (std::size_t i = 0; i < m; ++i) propagated += std::abs(W(0, i)) * C_err[i];
    const double area = sphere_area(n);
    e.estimate = area * coef(0);
    e.error_bar = area * (std::sqrt(s2 * XtX_inv(0, 0)) + propagated);
    e.raw_estimate = (W * raw)(0);

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    int up = 0, down = 0;
    for (std::size_t k = 1; k < m; ++k) {
        const double diff = e.cap[order[k]] - e.cap[order[k - 1]];
        up += diff > 0;
        down += diff < 0;
    }
    e.monotone = up == 0 || down == 0;
    if (!e.monotone) {
        e.error_bar *= 2.0;
        e.warnings.push_back("Cap_p is not monotone in p; error bar doubled");
    }
    return e;
}

CapExtrapolation cap_limit_extrapolation(const ImplicitDomain& domain, const std::vector<double>& p_list,
                                         const SolveOptions& base, const SolveObserver& observer) {
    if (p_list.size() < 4) throw PreconditionError("cap_limit_extrapolation: at least 4 values of p");
    for (std::size_t k = 0; k < p_list.size(); ++k) {
        if (!(p_list[k] >= 1.05 && p_list[k] <= 1.5)) throw PreconditionError("cap_limit_extrapolation: p outside [1.05, 1.5]");
        if (k > 0 && !(p_list[k] < p_list[k - 1])) throw PreconditionError("cap_limit_extrapolation: p must descend");
    }
    std::vector<double> C, err;
    std::vector<std::vector<double>> levels_per_p;
    Warnings warnings;
    for (double p : p_list) {
        std::vector<double> levels;
        for (int k = 0; k < 3; ++k) {
            SolveOptions o = base;
            o.p = p;
            o.h = base.h * (1 << k);
            o.initial_capacity.reset();
            PotentialField F;
            try {
                F = solve_exterior(domain, o);
            } catch (const PreconditionError&) {
                if (k == 0) throw;
                break;
            }
            levels.push_back(cap_from_energy(F));
            if (observer) observer(p, o.h, F);
            if (k == 0) {
                for (const auto& w : F.warnings) warnings.push_back("p = " + format_number(p) + ": " + w);
            }
        }
        const auto [value, error] = extrapolate_in_h(levels);
        C.push_back(value);
        err.push_back(error);
        levels_per_p.push_back(levels);
    }
    CapExtrapolation e = extrapolate_capacities(p_list, C, err, domain.dimension());
    e.C_levels = levels_per_p;
    e.warnings.insert(e.warnings.begin(), warnings.begin(), warnings.end());
    return e;
}

OutwardMinimisingVerdict is_outward_minimising(double perimeter, double boundary_area, double tolerance) {
    OutwardMinimisingVerdict v;
    v.perimeter = perimeter;
    v.boundary_area = boundary_area;
    v.tolerance = tolerance;
    v.relative_difference = std::abs(perimeter - boundary_area) / boundary_area;
    v.outward_minimising = v.relative_difference <= tolerance;
    return v;
}

void save_hull(const std::string& path, const HullField& field) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MeshError("cannot open " + path);
    write_lattice_binary(out, "HULL1", field.grid, field.dimension);
}

nlohmann::json to_json(const HullField& f) {
    nlohmann::json sweep = nlohmann::json::array();
    for (const auto& [level, measure] : f.perimeter_sweep) sweep.push_back({{"level", level}, {"perimeter", round12(measure)}});
    std::size_t hull_nodes = 0;
    for (char c : f.hull_set) hull_nodes += c != 0;
    return {{"dimension", f.dimension},
            {"h", round12(f.grid.h)},
            {"multiplicity", f.multiplicity()},
            {"threshold_level", f.threshold_level},
            {"perimeter_estimate", round12(f.perimeter_estimate)},
            {"perimeter_sweep", sweep},
            {"tv_energy", round12(f.tv_energy)},
            {"dual_bound", round12(f.dual_bound)},
            {"relative_gap", round12(f.gap / f.tv_energy)},
            {"iterations", f.iterations},
            {"hull_nodes", hull_nodes},
            {"warnings", f.warnings}};
}

nlohmann::json to_json(const CapExtrapolation& e) {
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t k = 0; k < e.p.size(); ++k) {
        nlohmann::json levels = nlohmann::json::array();
        if (k < e.C_levels.size()) {
            for (double c : e.C_levels[k]) levels.push_back(round12(c));
        }
        samples.push_back({{"p", round12(e.p[k])},
                           {"C", round12(e.C[k])},
                           {"C_err", round12(e.C_err[k])},
                           {"C_levels", levels},
                           {"cap", round12(e.cap[k])}});
    }
    return {{"samples", samples},
            {"estimate", round12(e.estimate)},
            {"error_bar", round12(e.error_bar)},
            {"raw_estimate", round12(e.raw_estimate)},
            {"monotone", e.monotone},
            {"warnings", e.warnings}};
}

nlohmann::json to_json(const OutwardMinimisingVerdict& v) {
    return {{"outward_minimising", v.outward_minimising},
            {"perimeter", round12(v.perimeter)},
            {"boundary_area", round12(v.boundary_area)},
            {"relative_difference", round12(v.relative_difference)},
            {"tolerance", v.tolerance}};
}

}  // namespace pcaplab
