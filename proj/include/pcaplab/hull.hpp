#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pcaplab/marching.hpp"
#include "pcaplab/potential.hpp"
#include "pcaplab/shapes.hpp"

namespace pcaplab {

struct HullOptions {
    double h = 1.0 / 16.0;
    double margin_fraction = 0.25;  // box margin per side, times the diameter bound
    double gap_tolerance = 1e-6;    // relative primal-dual gap
    int max_iterations = 200000;
    int check_every = 50;
    double threshold = 0.5;
    double ramp_cells = 3.0;        // width of the obstacle ramp in units of h
    double step_ratio = 0.0;        // primal steps times, dual step divided by, this factor; 0 picks 1 in 2D, 0.02 in 3D
    bool verbose = false;
};

/// Relaxed indicator of the outward minimising hull on a uniform lattice,
/// P1 on the Kuhn simplices, reduced by the reflection symmetries of the domain.
struct HullField {
    LatticeField grid;                 // values hold v; n[2] == 1 in the plane
    int dimension = 3;
    std::array<bool, 3> mirror{false, false, false};
    std::vector<char> obstacle_mask;   // v pinned to 1
    std::vector<double> lower_bound;   // obstacle ramp chi: v >= chi
    std::vector<char> box_mask;        // v pinned to 0
    double threshold_level = 0.5;
    std::vector<char> hull_set;        // v >= threshold_level
    double perimeter_estimate = 0.0;   // level-set measure at threshold_level, full space
    std::vector<std::array<double, 2>> perimeter_sweep;  // (level, measure)
    double tv_energy = 0.0;            // full space
    double dual_bound = 0.0;
    double gap = 0.0;                  // tv_energy - dual_bound
    int iterations = 0;
    std::vector<double> tv_log;        // best primal value at each check
    Warnings warnings;

    int multiplicity() const;
    const std::vector<double>& v() const { return grid.values; }
};

/// Minimises the total variation of v in [0,1] with v = 0 on the box faces
/// and v >= chi, where chi = clamp(1/2 - d/(ramp_cells h), 0, 1) for the signed distance d
/// to the boundary (nodes with chi = 1 form the obstacle mask), by diagonally
/// preconditioned primal-dual iterations.
/// Throws NonConvergence when the relative gap stays above the tolerance
/// after max_iterations.
HullField minimise_tv_obstacle(const ImplicitDomain& domain, const HullOptions& options = {});

/// Measure of {v = level} (area in 3D, length in 2D) over the full space.
double hull_level_measure(const HullField& field, double level);

/// Perimeter of the convex hull of a simple polygon (monotone chain).
/// Throws PreconditionError on fewer than three vertices or self-intersections.
double convex_hull_2d_oracle(const std::vector<std::array<double, 2>>& polygon);

struct CapExtrapolation {
    int n = 3;
    std::vector<double> p;
    std::vector<double> C;          // normalised capacity per p (extrapolated in h)
    std::vector<double> C_err;
    std::vector<std::vector<double>> C_levels;  // energy capacities at h, 2h, 4h
    std::vector<double> cap;        // Cap_p = ((n-p)/(p-1))^{p-1} |S^{n-1}| C_p
    double estimate = 0.0;          // |S^{n-1}| times the fit of C_p at p = 1
    double error_bar = 0.0;
    double raw_estimate = 0.0;      // quadratic fit of Cap_p itself at p = 1
    bool monotone = true;
    Warnings warnings;
};

/// Capacity at spacing h from solves at h, 2h, 4h (finest first): Aitken's
/// extrapolation when three levels converge monotonically (error bar half the
/// correction), otherwise the finest value with the last level difference as
/// error bar.
std::array<double, 2> extrapolate_in_h(const std::vector<double>& levels);

/// Quadratic least-squares fit of C_p against p - 1; Cap_p carries the factor
/// ((n-p)/(p-1))^{p-1}, which tends to 1 but is not polynomial in p - 1, so it
/// is divided out before fitting. The error bar is the standard error of the
/// intercept plus the propagated per-point errors, doubled when Cap_p is not
/// monotone in p.
CapExtrapolation extrapolate_capacities(const std::vector<double>& p, const std::vector<double>& C,
                                        const std::vector<double>& C_err, int n = 3);

using SolveObserver = std::function<void(double p, double h, const PotentialField& field)>;

/// Solves for each p (at least 4 values in [1.05, 1.5], descending) at
/// base.h and the coarser spacings the solver accepts, then extrapolates.
/// The observer, when set, sees every solved field.
CapExtrapolation cap_limit_extrapolation(const ImplicitDomain& domain, const std::vector<double>& p_list,
                                         const SolveOptions& base, const SolveObserver& observer = {});

struct OutwardMinimisingVerdict {
    bool outward_minimising = false;
    double perimeter = 0.0;
    double boundary_area = 0.0;
    double relative_difference = 0.0;
    double tolerance = 0.05;
};

OutwardMinimisingVerdict is_outward_minimising(double perimeter, double boundary_area, double tolerance = 0.05);

void save_hull(const std::string& path, const HullField& field);
nlohmann::json to_json(const HullField& field);
nlohmann::json to_json(const CapExtrapolation& e);
nlohmann::json to_json(const OutwardMinimisingVerdict& v);

}  // namespace pcaplab
