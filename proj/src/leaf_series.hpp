#pragma once

// Internal helpers for leafwise pair series.  The sums over forward or
// backward orbits of two nearby points on one leaf are evaluated in model
// coordinates, where the dynamics is exactly linear, so pair separation can
// never leak into the transverse direction no matter how many terms are
// taken.  Ambient points are reconstructed per step from warm-started
// conjugacy solves.

#include <algorithm>
#include <cmath>

#include "anosovlab/manifolds.hpp"
#include "anosovlab/shadow.hpp"
#include "anosovlab/torus_map.hpp"

namespace anosov::detail {

// Solve H(z) = target for z, warm-started from a nearby guess.  The guess is
// typically one map step away from a previous solution, so a couple of
// fixed-point corrections suffice instead of a cold solve.
inline LiftPoint model_preimage_from(const PerturbedMap& f, const LiftPoint& target,
                                     LiftPoint z, double tol) {
    if (f.is_linear()) return target;
    for (int it = 0; it < 40; ++it) {
        Eigen::VectorXd err = linear_model_conjugacy(f, z, 0.1 * tol) - target;
        err = err.array() - err.array().round();  // sheets of the cover
        if (err.lpNorm<Eigen::Infinity>() < tol) return z;
        z -= err;
    }
    return linear_model_conjugacy_inverse(f, target, tol);
}

// Walks a pair of points lying on one leaf through the map (or its inverse),
// keeping their separation as an exact vector in the leaf's model
// coordinates.  The walk is centered: both tracks sit at center +- w/2, so
// swapping the endpoints reproduces the identical floating-point solves with
// the roles exchanged and pair series negate exactly under reversal.
class LeafPairWalk {
public:
    LeafPairWalk(const PerturbedMap& f, LeafKind kind, const LiftPoint& start,
                 const LiftPoint& end, bool backward)
        : f_(f) {
        const LinearSplitting& ls = f.splitting();
        basis_ = kind == LeafKind::Stable ? ls.basis_s : ls.basis_u;
        model_ = backward ? f.linear_inverse_matrix() : f.linear_matrix();
        step_ = basis_.transpose() * model_ * basis_;
        backward_ = backward;

        const Eigen::VectorXd ha = linear_model_conjugacy(f, start, 1e-13);
        const Eigen::VectorXd hb = linear_model_conjugacy(f, end, 1e-13);
        w_ = basis_.transpose() * (hb - ha);
        center_ = 0.5 * (ha + hb);
        // The off-leaf part of the input displacement is split evenly between
        // the two tracks; the inputs only determine the leaf up to it.
        dropped_ = 0.5 * ((hb - ha) - basis_ * w_).norm();
        stretch_ = 1.0 / (1.0 - std::min(0.5, f.contraction_factor()));

        p_ = wrap(start);
        c_ = wrap(end);
        d_ = torus_distance(p_, c_);
    }

    void advance() {
        center_ = wrap(model_ * center_);
        w_ = step_ * w_;
        const Eigen::VectorXd half = basis_ * (0.5 * w_);
        const LiftPoint seed_p = backward_ ? f_.inverse_eval(p_) : f_.eval(p_);
        const LiftPoint seed_c = backward_ ? f_.inverse_eval(c_) : f_.eval(c_);
        p_ = wrap(model_preimage_from(f_, center_ - half, seed_p, 1e-13));
        c_ = wrap(model_preimage_from(f_, center_ + half, seed_c, 1e-13));
        d_ = std::min(torus_distance(p_, c_) + 3e-13, stretch_ * w_.norm());
    }

    const TorusPoint& principal() const { return p_; }
    const TorusPoint& companion() const { return c_; }
    // Upper bound on the separation of the two tracks.
    double d() const { return d_; }
    double dropped() const { return dropped_; }

private:
    const PerturbedMap& f_;
    Eigen::MatrixXd basis_, model_, step_;
    Eigen::VectorXd center_, w_;
    TorusPoint p_, c_;
    double d_ = 0.0, dropped_ = 0.0, stretch_ = 1.0;
    bool backward_ = false;
};

}  // namespace anosov::detail
