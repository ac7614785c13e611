#pragma once

#include <map>
#include <vector>

#include "torus_map.hpp"
#include "types.hpp"

namespace anosov {

// Topological conjugacy h with h o f1 = f2 o h, C0-close to the identity,
// evaluated pointwise by orbit shadowing: the f1-orbit of x is a pseudo-orbit
// for f2, and one sequence-space Newton solve finds the genuine f2-orbit
// tracking it.  Both maps must share the same linear part.
struct ConjugacyMap {
    PerturbedMap f1, f2;
    int window;   // maximal orbit half-length N
    double tol;   // settle tolerance for the shadowed point

    ConjugacyMap(PerturbedMap f1_, PerturbedMap f2_, int window_ = 192,
                 double tol_ = 1e-11);

    // Optional exact-query cache, off by default so repeated evaluations stay
    // interpolation-free.
    bool use_cache = false;
    mutable std::map<std::vector<double>, TorusPoint> cache;
};

TorusPoint conjugate_point(const ConjugacyMap& q, const TorusPoint& x);

// sup over a uniform grid (grid_size points per axis) of the composition
// defect dist(h(f1 x), f2(h x)).
double conjugacy_defect(const ConjugacyMap& q, int grid_size);

// Slope of log dist(h(x_s), h(base)) against log dist(x_s, base), where x_s
// sits at leaf parameter s from base along the chosen f1-leaf.  Scales must
// span at least two decades; throws inconclusive when displacements sink
// below noise.
double holder_exponent_estimate(const ConjugacyMap& q, const TorusPoint& base,
                                LeafKind direction,
                                const std::vector<double>& scales);

// Conjugacy H of f to its linear model (H o f = L o H) on the cover, as the
// identity plus a geometric series in the perturbation along the orbit.  Used
// as a validated fast path and as the coordinate system on leaf space.
LiftPoint linear_model_conjugacy(const PerturbedMap& f, const LiftPoint& z,
                                 double tol = 1e-12);

// Inverse of H by contraction iteration (H is a small perturbation of id).
LiftPoint linear_model_conjugacy_inverse(const PerturbedMap& f,
                                         const LiftPoint& target,
                                         double tol = 1e-12);

// Stable coordinate of H (one-dimensional stable bundle only): constant on
// unstable leaves of the cover and strictly ordered across them.
double leaf_order_coordinate(const PerturbedMap& f, const LiftPoint& z,
                             double tol = 1e-12);

// Point of W^kind(base) on the cover whose model-chart parameter is param
// (coordinates in the orthonormal basis of the linear E^s or E^u).
LiftPoint model_leaf_point(const PerturbedMap& f, const LiftPoint& base,
                           LeafKind kind, const Eigen::VectorXd& param,
                           double tol = 1e-12);

} // namespace anosov
