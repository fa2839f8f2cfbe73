#pragma once

namespace pcaplab {

/// Closed-form p-capacitary potential of the ball B_R in R^n:
/// u(r) = (R / r)^alpha with alpha = (n - p) / (p - 1).
struct RadialSolution {
    double R = 1.0;
    double p = 2.0;
    int n = 3;
    double alpha = 1.0;

    double u(double r) const;
    double du(double r) const;            // u'(r) (negative)
    double d2u(double r) const;           // u''(r)
    double grad_norm(double r) const { return -du(r); }
    double capacity() const;              // normalised C_p = R^{n-p}
    /// Full-space p-Dirichlet energy of u outside B_R.
    double energy() const;
};

/// Throws PreconditionError unless R > 0 and 1 < p < n.
RadialSolution radial_potential(double R, double p, int n);

}  // namespace pcaplab
