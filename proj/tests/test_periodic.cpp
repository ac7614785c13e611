#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "anosovlab/periodic.hpp"
#include "fixtures.hpp"

using namespace anosov;

namespace {

std::int64_t det_lk_minus_i(const IntegerAutomorphism& L, int k) {
    Eigen::MatrixXd m = L.power(k).cast<double>();
    m -= Eigen::MatrixXd::Identity(L.dim(), L.dim());
    return static_cast<std::int64_t>(std::llround(std::abs(m.determinant())));
}

} // namespace

TEST_CASE("linear fixed point counts match the determinant") {
    auto L2 = fixtures::cat_matrix();
    // |det(L^k - I)| for the cat map, k = 1..6.
    const std::int64_t cat_counts[] = {1, 5, 16, 45, 121, 320};
    for (int k = 1; k <= 6; ++k) {
        auto pts = linear_fixed_points(L2, k);
        CHECK(static_cast<std::int64_t>(pts.size()) == cat_counts[k - 1]);
        CHECK(static_cast<std::int64_t>(pts.size()) == det_lk_minus_i(L2, k));
    }
    auto L3 = fixtures::t3_matrix();
    const std::int64_t t3_counts[] = {1, 1, 1, 5};
    for (int k = 1; k <= 4; ++k) {
        auto pts = linear_fixed_points(L3, k);
        CHECK(static_cast<std::int64_t>(pts.size()) == t3_counts[k - 1]);
        CHECK(static_cast<std::int64_t>(pts.size()) == det_lk_minus_i(L3, k));
    }
}

TEST_CASE("linear fixed points solve the period equation and are distinct") {
    for (int k : {1, 2, 3, 4, 5}) {
        auto L = fixtures::cat_matrix();
        auto pts = linear_fixed_points(L, k);
        Eigen::MatrixXd Lk = L.power(k).cast<double>();
        std::set<std::pair<std::int64_t, std::int64_t>> keys;
        for (const TorusPoint& x : pts) {
            Eigen::VectorXd r = Lk * x - x;
            for (Eigen::Index i = 0; i < r.size(); ++i)
                CHECK(std::abs(r[i] - std::round(r[i])) < 1e-9);
            // Distinctness via rounded rational coordinates.
            keys.insert({static_cast<std::int64_t>(std::llround(x[0] * 720720)),
                         static_cast<std::int64_t>(std::llround(x[1] * 720720))});
        }
        CHECK(keys.size() == pts.size());
        // Origin is always a solution.
        bool has_origin = false;
        for (const TorusPoint& x : pts)
            if (x.norm() < 1e-12) has_origin = true;
        CHECK(has_origin);
    }
}

TEST_CASE("invariant factors multiply to the point count and chain by divisibility") {
    auto L = fixtures::cat_matrix();
    for (int k : {2, 3, 4, 5, 6}) {
        auto div = period_equation_divisors(L, k);
        std::int64_t prod = 1;
        for (std::size_t i = 0; i < div.size(); ++i) {
            CHECK(div[i] > 0);
            if (i + 1 < div.size()) CHECK(div[i + 1] % div[i] == 0);
            prod *= div[i];
        }
        CHECK(prod == det_lk_minus_i(L, k));
    }
}

TEST_CASE("continuation at epsilon 0 returns the seed") {
    PerturbedMap f = fixtures::linear_cat();
    for (const TorusPoint& seed : linear_fixed_points(f.linear(), 3)) {
        PeriodicOrbit o = continue_orbit(f, seed, 3);
        CHECK(o.residual < 1e-11);
        CHECK(torus_distance(wrap(o.base), seed) < 1e-10);
        CHECK(o.period == 3);
    }
}

TEST_CASE("continuation moves seeds by O(epsilon)") {
    PerturbedMap f = fixtures::perturbed_cat(1e-3);
    auto seeds = linear_fixed_points(f.linear(), 2);
    CHECK(seeds.size() == 5);
    for (const TorusPoint& seed : seeds) {
        PeriodicOrbit o = continue_orbit(f, seed, 2, 1e-11);
        CHECK(o.residual < 1e-11);
        CHECK(torus_distance(wrap(o.base), seed) < 20 * 1e-3);
        // Lattice class is consistent with the final point.
        LiftPoint z = o.base;
        for (int j = 0; j < 2; ++j) z = f.eval_lift(z);
        for (Eigen::Index i = 0; i < z.size(); ++i)
            CHECK(std::abs(z[i] - o.base[i] - static_cast<double>(o.lattice[i])) <
                  1e-9);
    }
}

TEST_CASE("catalog counts persist under perturbation") {
    PerturbedMap f2 = fixtures::perturbed_cat(1e-3);
    OrbitCatalog cat2 = orbit_catalog(f2, 6);
    CHECK(cat2.failures.empty());
    const std::int64_t cat_counts[] = {1, 5, 16, 45, 121, 320};
    for (int k = 1; k <= 6; ++k) {
        std::set<std::pair<std::int64_t, std::int64_t>> distinct;
        for (const PeriodicOrbit& o : cat2.orbits) {
            if (o.period != k) continue;
            CHECK(o.residual < 1e-10);
            distinct.insert({static_cast<std::int64_t>(std::llround(o.base[0] * 1e7)),
                             static_cast<std::int64_t>(std::llround(o.base[1] * 1e7))});
        }
        CHECK(static_cast<std::int64_t>(distinct.size()) == cat_counts[k - 1]);
    }

    PerturbedMap f3 = fixtures::perturbed_t3(1e-3);
    OrbitCatalog cat3 = orbit_catalog(f3, 4);
    CHECK(cat3.failures.empty());
    const std::int64_t t3_counts[] = {1, 1, 1, 5};
    for (int k = 1; k <= 4; ++k) {
        std::int64_t n = 0;
        for (const PeriodicOrbit& o : cat3.orbits)
            if (o.period == k) ++n;
        CHECK(n == t3_counts[k - 1]);
    }
}

TEST_CASE("minimal periods follow divisor filtering") {
    PerturbedMap f = fixtures::perturbed_cat(1e-3);
    OrbitCatalog cat = orbit_catalog(f, 4);
    std::int64_t fixed_in_k4 = 0, true_k4 = 0;
    for (const PeriodicOrbit& o : cat.orbits) {
        CHECK(o.period % o.minimal_period == 0);
        if (o.period == 4) {
            if (o.minimal_period == 1) ++fixed_in_k4;
            if (o.minimal_period == 4) ++true_k4;
            CHECK(o.minimal_period != 3);
        }
    }
    // 45 period-4 points: 1 fixed, 4 of minimal period 2, 40 of minimal 4.
    CHECK(fixed_in_k4 == 1);
    CHECK(true_k4 == 40);
}

TEST_CASE("periodic data of linear models equals eigenvalue products") {
    PerturbedMap f = fixtures::linear_cat();
    PeriodicOrbit o = continue_orbit(f, TorusPoint::Zero(2), 1);
    PeriodicData d = periodic_data(f, o);
    const double phi2 = (3.0 + std::sqrt(5.0)) / 2.0;
    CHECK(std::abs(d.jac_u - phi2) < 1e-10);
    CHECK(std::abs(d.jac_s - 1.0 / phi2) < 1e-10);
    CHECK(std::abs(std::abs(d.jac_full) - 1.0) < 1e-10);

    PerturbedMap g = fixtures::linear_t3();
    PeriodicOrbit o3 = continue_orbit(g, TorusPoint::Zero(3), 1);
    PeriodicData d3 = periodic_data(g, o3);
    double rho = 1.3;
    for (int i = 0; i < 60; ++i)
        rho -= (rho * rho * rho - rho - 1.0) / (3 * rho * rho - 1);
    CHECK(std::abs(d3.jac_u - rho) < 1e-10);
    CHECK(std::abs(std::abs(d3.jac_s) - 1.0 / rho) < 1e-10);
    CHECK(std::abs(std::abs(d3.jac_full) - 1.0) < 1e-10);
    // Unstable pair is complex for the unperturbed model.
    int complex_count = 0;
    for (Eigen::Index i = 0; i < d3.spectrum.size(); ++i)
        if (std::abs(d3.spectrum[i].imag()) > 1e-8) ++complex_count;
    CHECK(complex_count == 2);
}

TEST_CASE("block determinant identity holds along perturbed catalogs") {
    for (PerturbedMap f :
         {fixtures::perturbed_cat(1e-3), fixtures::perturbed_t3(1e-3)}) {
        OrbitCatalog cat = orbit_catalog(f, 3);
        for (const PeriodicOrbit& o : cat.orbits) {
            PeriodicData d = periodic_data(f, o);
            CHECK(std::abs(std::abs(d.jac_full) -
                           std::abs(d.jac_s) * std::abs(d.jac_u)) < 1e-8);
            // Spectrum magnitude product equals |jac_full|.
            double p = 1;
            for (Eigen::Index i = 0; i < d.spectrum.size(); ++i)
                p *= std::abs(d.spectrum[i]);
            CHECK(std::abs(p - std::abs(d.jac_full)) < 1e-7);
        }
    }
}

TEST_CASE("volume-preserving projection keeps jac_full at the linear determinant") {
    PerturbedMap f(fixtures::t3_matrix(), fixtures::t3_jac_bump_modes(), 0.05, true);
    double det_l = f.linear_matrix().determinant();
    OrbitCatalog cat = orbit_catalog(f, 3);
    CHECK(!cat.orbits.empty());
    for (const PeriodicOrbit& o : cat.orbits) {
        PeriodicData d = periodic_data(f, o);
        CHECK(std::abs(std::abs(d.jac_full) - std::abs(det_l)) < 1e-8);
    }
}

TEST_CASE("periodic data is invariant under base rotation") {
    PerturbedMap f = fixtures::perturbed_cat(1e-3);
    OrbitCatalog cat = orbit_catalog(f, 3);
    for (const PeriodicOrbit& o : cat.orbits) {
        if (o.period != 3) continue;
        PeriodicData d0 = periodic_data(f, o);
        PeriodicOrbit rotated = continue_orbit(f, f.eval(wrap(o.base)), 3);
        PeriodicData d1 = periodic_data(f, rotated);
        CHECK(std::abs(d0.jac_s - d1.jac_s) < 1e-9 * std::max(1.0, std::abs(d0.jac_s)));
        CHECK(std::abs(d0.jac_u - d1.jac_u) < 1e-9 * std::max(1.0, std::abs(d0.jac_u)));
        CHECK(std::abs(d0.jac_full - d1.jac_full) <
              1e-9 * std::max(1.0, std::abs(d0.jac_full)));
    }
}

TEST_CASE("smith coordinates identify orbits across two maps with one linear part") {
    PerturbedMap f1 = fixtures::perturbed_cat(1e-3);
    PerturbedMap f2 = fixtures::linear_cat();
    OrbitCatalog c1 = orbit_catalog(f1, 3);
    OrbitCatalog c2 = orbit_catalog(f2, 3);
    REQUIRE(c1.orbits.size() == c2.orbits.size());
    for (std::size_t i = 0; i < c1.orbits.size(); ++i) {
        CHECK(c1.orbits[i].period == c2.orbits[i].period);
        CHECK((c1.orbits[i].smith.array() == c2.orbits[i].smith.array()).all());
        CHECK(torus_distance(wrap(c1.orbits[i].base), wrap(c2.orbits[i].base)) < 0.05);
    }
}

TEST_CASE("degenerate and invalid inputs are rejected") {
    IntMatrix m(2, 2);
    m << 0, 1, -1, 0; // rotation by 90 degrees: L^4 = I
    IntegerAutomorphism rot(m);
    CHECK_THROWS_AS(linear_fixed_points(rot, 4), invalid_input);
    CHECK_THROWS_AS(linear_fixed_points(fixtures::cat_matrix(), 0), invalid_input);
    PerturbedMap f = fixtures::perturbed_cat(1e-3);
    TorusPoint bad(2);
    bad << 0.3141, 0.2718; // not a linear periodic point
    CHECK_THROWS_AS(continue_orbit(f, bad, 1), invalid_input);
}

TEST_CASE("csv export lists one row per point with stable formatting") {
    PerturbedMap f = fixtures::perturbed_cat(1e-3);
    OrbitCatalog cat = orbit_catalog(f, 2);
    std::ostringstream a, b;
    export_catalog_csv(a, f, cat.orbits);
    export_catalog_csv(b, f, cat.orbits);
    CHECK(a.str() == b.str());
    std::istringstream in(a.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "period,min_period,m0,m1,x0,x1,jac_s,jac_u,jac_full,residual");
    std::int64_t rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 6); // 1 fixed point + 5 period-2 points
}
