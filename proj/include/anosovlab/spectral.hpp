#pragma once

#include <complex>
#include <vector>

#include "errors.hpp"
#include "types.hpp"

namespace anosov {

// Element of GL(d,Z): integer matrix with determinant +-1, d >= 2.
class IntegerAutomorphism {
  public:
    explicit IntegerAutomorphism(IntMatrix entries);

    int dim() const { return static_cast<int>(entries_.rows()); }
    const IntMatrix& entries() const { return entries_; }
    std::int64_t det() const { return det_; }

    IntegerAutomorphism inverse() const;          // exact, via adjugate
    IntMatrix power(int k) const;                 // exact, k may be negative

    // Characteristic polynomial coefficients, ascending order, monic:
    // p(x) = c[0] + c[1] x + ... + c[d-1] x^{d-1} + x^d.
    std::vector<std::int64_t> char_poly() const;

    Eigen::MatrixXd as_double() const { return entries_.cast<double>(); }

  private:
    IntMatrix entries_;
    std::int64_t det_;
};

struct SpectralData {
    std::vector<std::complex<double>> eigenvalues; // with multiplicity
    std::vector<double> moduli_stable;             // sorted, < 1, with multiplicity
    std::vector<double> moduli_unstable;           // sorted, > 1, deduplicated
    double mu = std::numeric_limits<double>::quiet_NaN(); // 1/(largest stable modulus)
    bool hyperbolic = false;
    int dim_stable = 0;   // eigenvalue count with multiplicity
    int dim_unstable = 0;
};

struct GenericityReport {
    bool hyperbolic = false;
    bool irreducible = false;
    bool no_three_equal_moduli = false;
    bool equal_moduli_only_conjugate_pairs = false;
    bool generic = false;
};

// Expansion/contraction bounds: d(f^n x, f^n y) on stable leaves decays like
// C^{-1} mu_plus^{-n} .. C mu_minus^{-n}, unstable grows like lambda_-^n .. lambda_+^n.
struct RateBounds {
    double mu_minus = 0, mu_plus = 0;
    double lambda_minus = 0, lambda_plus = 0;
    double C = 1;
};

struct BunchingParams {
    double b_s = 0;
    double b_u = 0;
};

struct RateConditionQuery {
    double kappa = 1.0;    // transverse Holder exponent, in (0,1]
    double eta = 0.0;      // target conjugacy regularity
    double alpha = 0.0;    // periodic-data regularity
    RateBounds rates;
    BunchingParams bunching;
};

struct RegularityResult {
    double k = 0;
    bool admissible = false;
};

struct BrinPinchingResult {
    bool first = false;
    bool second = false;
};

// Eigenvalues by exact integer characteristic polynomial plus an in-house
// simultaneous root iteration; moduli partitioned at 1 with relative tol.
// Supported for d <= 6.
SpectralData spectral_analysis(const IntegerAutomorphism& M, double tol = 1e-9);

// True iff the characteristic polynomial has no nontrivial factor over Q.
// Exact integer arithmetic (rational-root test + bounded factor search), d <= 6.
bool is_irreducible(const IntegerAutomorphism& M);

GenericityReport genericity_check(const IntegerAutomorphism& M, double tol = 1e-9);

BunchingParams bunching_from_rates(const RateBounds& r);

// True iff mu_minus^(-min{kappa, kappa*b_u, b_s - 1}) * lambda_plus < 1 (strict).
bool gmt_rate_condition(const RateConditionQuery& q);

// Codimension-one bunching: (log mu)^2 - (log xi_l)^2 > log mu * (log xi_l - log xi_1),
// strict. Requires a one-dimensional stable modulus set.
bool codim1_bunching_check(const SpectralData& s);

// k = (2 eta + 2)/(2 eta + 1); admissible iff k > eta, equivalently 2 eta^2 - eta - 2 < 0.
RegularityResult matching_regularity_k(double eta);

// first:  1 + log lambda_minus / log lambda_plus > log mu_plus / log mu_minus
// second: 1 + log mu_minus / log mu_plus > log lambda_plus / log lambda_minus
BrinPinchingResult brin_pinching_check(const RateBounds& r);

void validate_rates(const RateBounds& r); // throws invalid_input on violation

// Roots of a monic integer polynomial (ascending coefficients, leading 1
// implied absent), with multiplicity. Exposed for reuse and testing.
std::vector<std::complex<double>> integer_poly_roots(const std::vector<std::int64_t>& coeffs);

} // namespace anosov
