#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

namespace anosov {

// Points on the torus R^d/Z^d are stored with coordinates in [0,1).
// Lift points are unconstrained vectors in R^d on the universal cover.
using TorusPoint = Eigen::VectorXd;
using LiftPoint = Eigen::VectorXd;

using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

inline double wrap_unit(double t) {
    double r = t - std::floor(t);
    if (r >= 1.0) r = 0.0; // guard against floor rounding at 1.0-eps
    return r;
}

inline TorusPoint wrap(const LiftPoint& x) {
    TorusPoint r(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) r[i] = wrap_unit(x[i]);
    return r;
}

// Displacement y-x reduced to the fundamental cell (-1/2, 1/2]^d.
inline Eigen::VectorXd torus_displacement(const TorusPoint& x, const TorusPoint& y) {
    Eigen::VectorXd d = y - x;
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] -= std::round(d[i]);
    return d;
}

inline double torus_distance(const TorusPoint& x, const TorusPoint& y) {
    return torus_displacement(x, y).norm();
}

enum class LeafKind { Stable, Unstable };

// Truncated series with an a-posteriori tail estimate.  The tail bound comes
// from measured contraction rates inflated by a safety margin; it is an
// empirical error indicator, not a rigorous bound.
struct SeriesValue {
    double value = 0.0;
    int truncation = 0;
    double tail_bound = 0.0;
};

} // namespace anosov
