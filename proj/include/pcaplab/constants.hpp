#pragma once

#include <Eigen/Dense>

namespace pcaplab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat2 = Eigen::Matrix2d;

/// Measures of the unit sphere S^{n-1} and the unit ball B^n.
struct ShapeConstants {
    int n = 3;
    double sphere_area = 0.0;  // |S^{n-1}| = 2 pi^{n/2} / Gamma(n/2)
    double ball_volume = 0.0;  // |B^n| = |S^{n-1}| / n
};

ShapeConstants shape_constants(int n);
double sphere_area(int n);
double ball_volume(int n);

}  // namespace pcaplab
