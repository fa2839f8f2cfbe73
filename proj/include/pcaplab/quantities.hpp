#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "pcaplab/potential.hpp"
#include "pcaplab/radial.hpp"

namespace pcaplab {

struct CapacityReport {
    double cap_energy = 0.0;
    double cap_flux = 0.0;
    double cap_used = 0.0;
    double discrepancy = 0.0;  // |cap_energy - cap_flux| / cap_used
};

/// ((p-1)/(n-p))^{p-1} |S^{n-1}|^{-1} times the total energy of the field.
double cap_from_energy(const PotentialField& field);
/// Same normalisation applied to the boundary flux of |Du|^{p-1}.
double cap_from_flux(const PotentialField& field, const SurfaceMesh& mesh, const BoundaryGradient& grad);
CapacityReport capacity_report(const PotentialField& field, const SurfaceMesh& mesh, const BoundaryGradient& grad);

/// Volume fraction of {f < c} for the linear interpolant on a tetrahedron
/// with sorted vertex values f.
double fraction_below_sorted(const std::array<double, 4>& f, double c);

/// Normalised capacity Cap_p = ((n-p)/(p-1))^{p-1} |S^{n-1}| C_p.
double cap_from_normalised(double C, double p, int n);

struct UpProfile {
    double p = 0.0;
    int n = 3;
    std::vector<double> taus;
    std::vector<double> U;             // mean of the two routes
    std::vector<double> U_coarea;
    std::vector<double> U_isosurface;
    std::vector<double> U_err;         // half-spread of the two routes
    std::vector<char> sparse;          // coarea bin with fewer than 50 cells
    double U_limit_zero = 0.0;
    double U_at_one = 0.0;
    double dU_at_one = 0.0;
    double dU_positive_part = 0.0;     // integral of the positive part of the bracket
    double dU_negative_part = 0.0;
    double capacity = 0.0;             // C_p used for U_limit_zero
    Warnings warnings;
};

/// lim_{tau -> 0} U_p(tau) = ((n-p)/(p-1))^p |S^{n-1}| C_p^{(n-p-1)/(n-p)}.
double up_limit_zero(double C, double p, int n);

struct DerivativeAtOne {
    double value = 0.0;
    double positive_part = 0.0;
    double negative_part = 0.0;  // <= 0
};

/// (1/(p-1)) int |Du|^{p-1} [H - ((p-1)(n-1)/(n-p)) |Du|] over the boundary.
DerivativeAtOne up_derivative_at_one(const SurfaceMesh& mesh, const BoundaryGradient& grad, double p, int n);

/// Per-node gradients recovered by volume-weighted averaging of the
/// surrounding element gradients (elements with a free node only).
std::vector<Vec3> recovered_gradients(const PotentialField& field);
/// P1 interpolation of recovered gradients; false outside the lattice.
bool sample_recovered_gradient(const PotentialField& field, const std::vector<Vec3>& nodal, const Vec3& x, Vec3& g);

/// U_p(tau) by the coarea route (200 bins of u, exact element fractions,
/// Savitzky-Golay differencing of the super-level integral of |Du|^{p+1})
/// and by the isosurface route (marching tetrahedra on {u = tau}, |Du|^p from
/// recovered gradients). Levels the lattice cannot enclose yield NaN and a
/// warning. The mesh must carry curvatures for the derivative at one.
UpProfile up_profile(const PotentialField& field, const SurfaceMesh& mesh, const BoundaryGradient& grad,
                     const std::vector<double>& taus, double capacity);

/// Lowest level whose set {u = tau} stays inside the truncated region.
double lowest_resolved_level(const PotentialField& field);

struct PhiProfile {
    double beta = 0.0;  // (n-p)/((n-2)(p-1))
    std::vector<double> s;
    std::vector<double> Phi;
    std::vector<double> dPhi;
    std::vector<double> Phi_err;
};

/// Phi(s) = U(exp(-beta s)) on a uniform s-grid from 0 (tau = 1, U_at_one)
/// to the smallest resolved tau, interpolating U linearly in log tau.
PhiProfile phi_profile(const UpProfile& up, int samples = 41);

struct EffectiveCheck {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
    double scale = 0.0;
    std::string detail;
};

struct Mon2Sample {
    double lambda = 0.0;
    double s = 0.0, S = 0.0;
    double left = 0.0, right = 0.0;
    double error_bar = 0.0;
    bool violated = false;
};

/// PASS iff dU_at_one >= -tol * positive part.
EffectiveCheck effective_check_I(const UpProfile& up, double tol = 0.05);
/// PASS iff U_limit_zero <= U_at_one (1 + tol) and no mon_2 sample is violated
/// beyond its error bar.
EffectiveCheck effective_check_II(const UpProfile& up, const PhiProfile& phi, std::vector<Mon2Sample>* samples = nullptr,
                                  double tol = 0.05);
/// Left side of the mon_2 combination at s.
double mon2_combination(const PhiProfile& phi, std::size_t k, double lambda);

struct AsymptoticResiduals {
    double res_u = 0.0;
    double res_grad = 0.0;
    std::size_t samples = 0;
};

/// Max relative deviations of u |x|^alpha and |Du| |x|^{alpha+1}/alpha from
/// C^{1/(p-1)} over a shell 0.7 R_out <= |x| <= 0.9 R_out.
AsymptoticResiduals asymptotic_residuals(const PotentialField& field, double C);

/// Value, gradient and Hessian at a point.
struct LocalJet {
    double value = 0.0;
    Vec3 gradient = Vec3::Zero();
    Mat3 hessian = Mat3::Zero();
};
using JetEvaluator = std::function<LocalJet(const Vec3&)>;

/// Closed-form jet of the radial solution centred at the origin (n = 3).
JetEvaluator radial_jet(const RadialSolution& sol);
/// Centred differences of spacing stride * h at the lattice nodes around x,
/// blended trilinearly.
JetEvaluator lattice_jet(const PotentialField& field, int stride = 1);

struct KatoResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
    double scale = 0.0;      // largest term
    double relative = 0.0;   // |residual| / scale
    double grad_norm = 0.0;
};

/// Flat-metric Kato identity
///   |D^2u|^2 - (1 + (p-1)^2/(n-1)) |D|Du||^2
///     = |Du|^2 |h - H/(n-1) g^T|^2 + (1 - (p-1)^2/(n-1)) |D^T|Du||^2,
/// with h, H the level-set second fundamental form and mean curvature.
/// Throws PreconditionError when |Du| < 0.1 * gradient_scale.
KatoResult kato_residual(const JetEvaluator& jet, const Vec3& x, double p, int n, double gradient_scale);
/// Same identity for the radial solution in any dimension, from u', u''.
KatoResult kato_residual_radial(const RadialSolution& sol, double r);

/// Best constant of the Sobolev inequality in Talenti's form.
double talenti_constant(int n, double p);
/// q = 1 + p*(p-1)/p with p* = pn/(n-p).
double talenti_q(int n, double p);
/// q T^{q-1} Cap_p^{(n-1)/(n-p)} - Cap_1 (unnormalised capacities).
double xu3_gap(double cap1, double cap_p, int n, double p);

void write_up_profile_csv(std::ostream& out, const UpProfile& up);
nlohmann::json to_json(const UpProfile& up);
nlohmann::json to_json(const CapacityReport& r);
nlohmann::json to_json(const PhiProfile& phi);
nlohmann::json to_json(const EffectiveCheck& c);
nlohmann::json to_json(const KatoResult& k);

}  // namespace pcaplab
