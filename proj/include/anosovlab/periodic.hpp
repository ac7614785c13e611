#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "errors.hpp"
#include "torus_map.hpp"
#include "types.hpp"

namespace anosov {

// One periodic point of the lifted map: F^period(base) = base + lattice.
// base is the canonical representative in [0,1)^d.  smith holds the mixed
// radix coordinates of the linear seed the orbit was continued from, which
// identify the same orbit across two maps sharing a linear part.
struct PeriodicOrbit {
    LiftPoint base;
    int period = 1;
    int minimal_period = 1;
    IntVector lattice;
    double residual = 0.0;
    IntVector smith;
    TorusPoint seed;
};

// Jacobian data of Df^period at the orbit: determinants of the restriction to
// the stable/unstable frames, the full determinant, and the spectrum.
struct PeriodicData {
    double jac_s = 1.0;
    double jac_u = 1.0;
    double jac_full = 1.0;
    Eigen::VectorXcd spectrum;
};

// Invariant factors (absolute values of the Smith diagonal) of L^k - I.
// Their product is |det(L^k - I)|, the number of period-k points.
std::vector<std::int64_t> period_equation_divisors(const IntegerAutomorphism& L,
                                                   int k);

// All solutions of (L^k - I) x = 0 mod Z^d on the torus, in a deterministic
// order: the j-th point has mixed-radix digits of j (last divisor fastest) as
// its coordinates in the Smith basis.
std::vector<TorusPoint> linear_fixed_points(const IntegerAutomorphism& L, int k);

// Newton continuation of a linear period-k seed into the perturbed map.  The
// lattice class is pinned by the seed; steps are damped by 1/2 whenever the
// residual fails to decrease.  Throws continuation_failed on divergence.
PeriodicOrbit continue_orbit(const PerturbedMap& f, const TorusPoint& seed, int k,
                             double tol = 1e-11);

PeriodicData periodic_data(const PerturbedMap& f, const PeriodicOrbit& orbit);

struct OrbitCatalog {
    int k_max = 0;
    std::vector<PeriodicOrbit> orbits;
    // Seeds whose continuation failed, as (period, seed index) pairs.
    std::vector<std::pair<int, std::int64_t>> failures;
};

// Continues every linear seed for k = 1..k_max.  Rows are per periodic point
// (an orbit of minimal period p contributes p rows at each multiple of p).
OrbitCatalog orbit_catalog(const PerturbedMap& f, int k_max, double tol = 1e-11);

void export_catalog_csv(std::ostream& os, const PerturbedMap& f,
                        const std::vector<PeriodicOrbit>& orbits);

} // namespace anosov
