#pragma once

#include <utility>
#include <vector>

#include "manifolds.hpp"
#include "observable.hpp"
#include "shadow.hpp"
#include "torus_map.hpp"
#include "types.hpp"

namespace anosov {

// One leg of a us-adapted path, on the universal cover.  Both endpoints lie
// on a common stable (S) or unstable (U) leaf; leaf_residual records how well
// they do, measured through the conjugacy to the linear model.
struct Leg {
    LeafKind kind = LeafKind::Stable;
    LiftPoint start;
    LiftPoint end;
    double leaf_residual = 0.0;
};

// Path of alternating-or-not legs whose endpoints chain on the cover.
struct UsPath {
    std::vector<Leg> legs;
};

// Closed path: the last endpoint returns to the first start modulo the
// lattice; homology_class holds the integer displacement picked up around
// the loop (zero iff null-homologous).
struct UsLoop {
    std::vector<Leg> legs;
    IntVector homology_class;

    bool null_homologous() const { return homology_class.isZero(); }
};

// Measures the leaf residual of (start, end) and packages the leg; rejects
// pairs whose transverse model coordinates differ by more than max_residual.
Leg make_leg(const PerturbedMap& f, LeafKind kind, const LiftPoint& start,
             const LiftPoint& end, double max_residual = 1e-8);

// Validates chaining (consecutive lifts coincide to 1e-10) / closure and
// computes the homology class for loops.
UsPath make_path(const PerturbedMap& f, std::vector<Leg> legs);
UsLoop make_loop(const PerturbedMap& f, std::vector<Leg> legs);

// Reverses orientation: legs in reverse order with swapped endpoints.
UsPath reverse_path(const UsPath& path);

// Path functional of one leg:
//   S:  sum_{n>=0} phi(f^n start) - phi(f^n end)
//   U:  sum_{n<0}  phi(f^n end) - phi(f^n start)
// with a geometric tail bound from the observable's Lipschitz constant and
// the map's nominal rates.
SeriesValue pcf_leg(const PerturbedMap& f, const Observable& phi, const Leg& leg,
                    double tol = 1e-10);

// Sum over legs; values and tail bounds add.
SeriesValue pcf_path(const PerturbedMap& f, const Observable& phi,
                     const UsPath& path, double tol = 1e-10);
SeriesValue pcf_loop(const PerturbedMap& f, const Observable& phi,
                     const UsLoop& loop, double tol = 1e-10);

// Four-leg loop functional rho^phi_{a,b}(x) for b on W^s(a) and x on
// W^u_loc(a): legs a->b (S), b->Hol(x) (U), Hol(x)->x (S), x->a (U), with the
// holonomy image computed once and shared between legs.
SeriesValue simple_pcf(const PerturbedMap& f, const TorusPoint& a,
                       const TorusPoint& b, const TorusPoint& x,
                       const Observable& phi, double tol = 1e-10);

// Leafwise gradient of x -> rho^phi_{a,b}(x) along the unstable directions at
// x: central differences over the unstable chart at scales step and step/2,
// Richardson-extrapolated; returned as an ambient vector in E^u(x).
Eigen::VectorXd simple_pcf_gradient(const PerturbedMap& f, const TorusPoint& a,
                                    const TorusPoint& b, const TorusPoint& x,
                                    const Observable& phi, double step = 1e-4);

// Splits a null-homologous alternating loop into four-leg loops whose path
// functionals sum to the original: repeatedly takes the unstable leg whose
// leaf-order coordinate is extremal, intersects the unstable leaf before it
// with the stable leaf after it, and splits off one four-leg loop.  Requires
// a one-dimensional stable bundle.
std::vector<UsLoop> loop_decompose(const PerturbedMap& f, const UsLoop& loop);

// Rank analysis of the span of simple-PCF gradients at x.
struct MatchingKernelReport {
    TorusPoint point;
    Eigen::MatrixXd gradients;            // rows: ambient leafwise gradients
    std::vector<double> singular_values;  // of the rows in unstable coordinates
    int numeric_rank = 0;
    int kernel_dim = 0;
    Eigen::MatrixXd kernel_basis;  // columns: ambient vectors in E^u(x)
    bool rank_ambiguous = false;   // singular values within 10x of the cutoff
    double cross_check_gap = 0;    // |rho^{phi1}_{a,b}(x) - rho^{phi2}_{h a, h b}(h x)|
    double cross_check_tail = 0;   // budget for the gap from the series tails
};

// Assembles gradient rows of rho^{phi1}_{a,b} at x for each pair, plus rows
// of rho^{phi1}_{a,b} composed with f1 when f1(x) stays within holonomy reach
// of a; decides the numeric rank by a relative singular-value cutoff of
// 1e-6 times the largest one, and reports the kernel inside E^u(x).  The h
// cross-check compares each pair's functional with its phi2 counterpart at
// the transported points.  Row assembly runs in parallel over pairs.
MatchingKernelReport matching_kernel(
    const PerturbedMap& f1, const PerturbedMap& f2, const ConjugacyMap& h,
    const TorusPoint& x,
    const std::vector<std::pair<TorusPoint, TorusPoint>>& pairs,
    const Observable& phi1, const Observable& phi2, double tol = 1e-9);

}  // namespace anosov
