#include "pcaplab/constants.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pcaplab {

double sphere_area(int n) {
    if (n < 1) throw std::invalid_argument("sphere_area: dimension must be >= 1");
    const double half = 0.5 * n;
    return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
}

double ball_volume(int n) { return sphere_area(n) / n; }

ShapeConstants shape_constants(int n) {
    ShapeConstants c;
    c.n = n;
    c.sphere_area = sphere_area(n);
    c.ball_volume = c.sphere_area / n;
    return c;
}

}  // namespace pcaplab
