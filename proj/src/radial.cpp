#include "pcaplab/radial.hpp"

#include <cmath>

#include "pcaplab/constants.hpp"
#include "pcaplab/errors.hpp"

namespace pcaplab {

RadialSolution radial_potential(double R, double p, int n) {
    if (!(R > 0) || !std::isfinite(R)) throw PreconditionError("radial_potential: R must be positive");
    if (n < 2) throw PreconditionError("radial_potential: n must be at least 2");
    if (!(p > 1.0) || !(p < n)) throw PreconditionError("radial_potential: p must lie in (1, n)");
    RadialSolution s;
    s.R = R;
    s.p = p;
    s.n = n;
    s.alpha = (n - p) / (p - 1.0);
    return s;
}

double RadialSolution::u(double r) const { return std::pow(R / r, alpha); }

double RadialSolution::du(double r) const { return -alpha * std::pow(R, alpha) * std::pow(r, -alpha - 1.0); }

double RadialSolution::d2u(double r) const {
    return alpha * (alpha + 1.0) * std::pow(R, alpha) * std::pow(r, -alpha - 2.0);
}

double RadialSolution::capacity() const { return std::pow(R, n - p); }

double RadialSolution::energy() const {
    return std::pow((n - p) / (p - 1.0), p - 1.0) * sphere_area(n) * capacity();
}

}  // namespace pcaplab
