#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "torus_map.hpp"
#include "types.hpp"

namespace anosov {

// Local invariant-leaf chart through a point.  Parameters live in the
// orthonormal tangent frame at the base; sample(param) returns the leaf point
// on the cover sheet of the anchor.  Evaluation shoots a seed from the far end
// of a finite orbit segment (depth iterates) and pins the base parameter by a
// chord solve, so charts are exact up to the recorded pullback truncation
// instead of interpolated.  Charts are immutable and safe to share.
struct LeafChart {
    LiftPoint anchor;       // lift of the base point, in [0,1)^d
    LeafKind kind;
    int param_dim = 0;
    double radius = 0;
    int depth = 0;          // orbit length used by the dynamical construction
    double noise = 1e-13;   // parameter pinning floor of the sampler
    Eigen::MatrixXd frame;  // d x param_dim orthonormal tangent basis at base
    std::function<LiftPoint(const Eigen::VectorXd&)> sample;
    std::vector<std::pair<Eigen::VectorXd, LiftPoint>> table;  // diagnostic nodes

    LiftPoint operator()(const Eigen::VectorXd& param) const { return sample(param); }
    LiftPoint at(double t) const;  // param_dim == 1 convenience

    // Chart parameter of a nearby leaf point; *off_leaf (if given) receives
    // the distance from y to the chart, which is the on-leaf test residual.
    Eigen::VectorXd locate(const LiftPoint& y, double* off_leaf = nullptr) const;
};

// Product-structure scale derived from the perturbation budget.
double default_chart_radius(const PerturbedMap& f);

// radius <= 0 selects the default radius; resolution <= 1 skips the table.
LeafChart leaf_chart(const PerturbedMap& f, const TorusPoint& x, LeafKind kind,
                     double radius = 0.0, int resolution = 5);

struct HolonomyResult {
    TorusPoint image;
    double residual = 0;       // gap between the two leaves at the solution
    int extension_depth = 0;   // forward iterations used to reach chart range
};

// Stable holonomy Hol_{a,b}: slides x along W^s to the unstable leaf of b,
// with b on the stable leaf of a and x on the unstable leaf of a.  Points
// beyond chart range are handled by pushing everything forward until the
// stable separation fits, solving there, and pulling back.
HolonomyResult holonomy(const PerturbedMap& f, const TorusPoint& a,
                        const TorusPoint& b, const TorusPoint& x);

// log of the unstable Jacobian of Hol_{a,b} at x, as the telescoping sum of
// unstable log-Jacobians along the forward orbits of x and of its holonomy
// image (re-projected onto W^s(x) so orbit iteration cannot amplify its
// residual).  force_truncation >= 0 overrides the tail-driven stopping rule;
// either mode stops once the pair distance bottoms out at the noise floor.
SeriesValue holonomy_jacobian_series(const PerturbedMap& f, const TorusPoint& a,
                                     const TorusPoint& b, const TorusPoint& x,
                                     double tol = 1e-11,
                                     int force_truncation = -1);

// log of the conditional density of the natural forward-invariant volume on
// the unstable leaf of a, normalized to 1 at a; summed over backward orbits.
SeriesValue srb_density(const PerturbedMap& f, const TorusPoint& a,
                        const TorusPoint& x, double tol = 1e-11,
                        int force_truncation = -1);

struct SrbHolonomyIdentity {
    double lhs = 0;            // log of the density-weighted holonomy Jacobian
    double rhs = 0;            // path functional of log J^u along a -> x -> Hol(x) -> b
    double gap = 0;            // |lhs - rhs|
    double combined_tail = 0;  // sum of the participating series tail bounds
};

// Cross-check that the density-weighted holonomy Jacobian agrees with the
// path functional of log J^u along the remaining three sides of the
// quadrilateral a, b, Hol(x), x.  Defined in the path-functional translation
// unit.
SrbHolonomyIdentity srb_holonomy_identity_check(const PerturbedMap& f,
                                                const TorusPoint& a,
                                                const TorusPoint& b,
                                                const TorusPoint& x,
                                                double tol = 1e-10);

// Signed affine parameter of y on the one-dimensional stable leaf of x: the
// leaf-arc integral from x to y of the forward density
// prod_{n>=0} J^s f(f^n .) / J^s f(f^n x), which transforms by the factor
// frame(f x)^T Df(x) frame(x) under the dynamics.
double stable_affine_parameter(const PerturbedMap& f, const TorusPoint& x,
                               const TorusPoint& y);

}  // namespace anosov
