#pragma once

#include <optional>
#include <vector>

#include "torus_map.hpp"
#include "types.hpp"

namespace anosov {

// One scalar trigonometric term a * sin/cos(2 pi <k, x>).
struct TrigTerm {
    IntVector frequency;
    double amplitude = 0.0;
    enum class Kind { Sin, Cos } kind = Kind::Sin;
};

// Scalar observable on the torus.  Trig polynomials and coboundaries evaluate
// in closed form; the Jacobian variants read the splitting frames of their
// map at each query point.
class Observable {
  public:
    enum class Variant { TrigPoly, LogJu, LogJs, LogJFull, Coboundary };

    static Observable trig_poly(std::vector<TrigTerm> terms, int dim);
    static Observable log_ju(PerturbedMap f);
    static Observable log_js(PerturbedMap f);
    static Observable log_jfull(PerturbedMap f);
    // u - u o f + c for a trig polynomial u.
    static Observable coboundary_of(std::vector<TrigTerm> u, double c, PerturbedMap f);

    Variant variant() const { return variant_; }
    int dim() const { return dim_; }
    double constant() const { return c_; }
    const std::vector<TrigTerm>& terms() const { return terms_; }
    bool has_map() const { return map_.has_value(); }
    const PerturbedMap& map() const;

    double operator()(const TorusPoint& x) const;
    // Gradient on the torus: exact for trig/coboundary variants, central
    // finite differences for the Jacobian variants.
    Eigen::VectorXd gradient(const TorusPoint& x) const;
    // Upper bound on |grad|: closed-form for trig/coboundary, sampled and
    // inflated for the Jacobian variants (cached after the first call).
    double lipschitz_bound() const;

  private:
    Observable() = default;

    Variant variant_ = Variant::TrigPoly;
    int dim_ = 0;
    std::vector<TrigTerm> terms_;
    double c_ = 0.0;
    std::optional<PerturbedMap> map_;
    mutable double lip_cache_ = -1.0;
};

} // namespace anosov
