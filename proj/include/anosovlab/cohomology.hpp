#pragma once

#include <cstddef>
#include <vector>

#include "observable.hpp"
#include "periodic.hpp"
#include "torus_map.hpp"

namespace anosov {

// Outcome of a periodic-sum obstruction scan.  Witness indices point into the
// orbit list the test was given: the two rows whose averages are extreme, so
// together they realize the largest pairwise disagreement.
struct LivshitsReport {
    double candidate_c = 0;        // mean of the per-orbit Birkhoff averages
    double max_deviation = 0;      // largest |average - candidate_c|
    int orbits_used = 0;
    double threshold = 0;          // decision threshold actually applied
    bool obstructed = false;       // max_deviation > threshold
    std::size_t witness_low = 0;   // row with the smallest average
    std::size_t witness_high = 0;  // row with the largest average
    std::vector<double> averages;  // per-row averages, aligned with the input
};

// Sum of phi over one cycle starting at the orbit base.
double birkhoff_sum(const PerturbedMap& f, const Observable& phi,
                    const PeriodicOrbit& orbit);

// Periodic-sum criterion for phi minus a constant being a coboundary: all
// periodic averages of such an observable agree, so a spread above threshold
// is an obstruction witness.  threshold <= 0 selects 100x the accumulated
// evaluation-error estimate; the applied value is recorded in the report.
// Averages are computed in parallel over rows.
LivshitsReport livshits_constant_test(const PerturbedMap& f, const Observable& phi,
                                      const std::vector<PeriodicOrbit>& catalog,
                                      double threshold = 0.0);

// One paired orbit in a Jacobian comparison.  Gaps are signed, first map
// minus second, so swapping the maps negates every row.
struct MatchRow {
    int period = 0;
    IntVector smith;  // linear-seed identity shared by the paired rows
    double log_js_1 = 0, log_ju_1 = 0;
    double log_js_2 = 0, log_ju_2 = 0;
    double gap_s = 0, gap_u = 0;
};

struct MatchReport {
    std::vector<MatchRow> rows;  // ordered as the first catalog
    double max_gap_s = 0, max_gap_u = 0;  // absolute values
    double threshold = 0;
    bool stable_match = false, unstable_match = false, full_match = false;
    std::size_t witness_s = 0, witness_u = 0;  // rows realizing the max gaps
};

// Compares stable/unstable log-Jacobian sums of two maps orbit by orbit.
// Both catalogs must be continued from the same linear seeds; rows pair by
// (period, seed identity), never by position search, and any row without a
// partner raises pairing_incomplete.  tol <= 0 selects 100x the periodic-data
// error estimate.
MatchReport jacobian_matching_test(const PerturbedMap& f1, const PerturbedMap& f2,
                                   const OrbitCatalog& cat1,
                                   const OrbitCatalog& cat2, double tol = 0.0);

// Periodic-sum test of log J^u.  Constant averages are the coincidence
// criterion for the forward-volume measure and the entropy-maximizing one;
// a spread is evidence the two invariant measures differ.
LivshitsReport srb_equals_mme_test(const PerturbedMap& f,
                                   const std::vector<PeriodicOrbit>& catalog,
                                   double threshold = 0.0);

} // namespace anosov
