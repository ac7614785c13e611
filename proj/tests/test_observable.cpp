#include <doctest.h>

#include <cmath>
#include <random>

#include "anosovlab/observable.hpp"
#include "anosovlab/periodic.hpp"
#include "fixtures.hpp"

using namespace anosov;

TEST_CASE("trig polynomials evaluate and differentiate in closed form") {
    std::vector<TrigTerm> terms;
    TrigTerm t;
    t.frequency.resize(2);
    t.frequency << 1, -2;
    t.amplitude = 0.7;
    t.kind = TrigTerm::Kind::Sin;
    terms.push_back(t);
    t.frequency << 3, 1;
    t.amplitude = -0.4;
    t.kind = TrigTerm::Kind::Cos;
    terms.push_back(t);
    Observable phi = Observable::trig_poly(terms, 2);

    TorusPoint x(2);
    x << 0.21, 0.685;
    const double tau = 2 * M_PI;
    double expect = 0.7 * std::sin(tau * (x[0] - 2 * x[1])) -
                    0.4 * std::cos(tau * (3 * x[0] + x[1]));
    CHECK(std::abs(phi(x) - expect) < 1e-15);

    // Periodicity under integer shifts.
    TorusPoint y = x;
    y[0] += 3.0;
    y[1] -= 2.0;
    CHECK(std::abs(phi(y) - phi(x)) < 1e-12);

    // Gradient vs central differences.
    const double h = 1e-6;
    for (int i = 0; i < 2; ++i) {
        TorusPoint xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        double fd = (phi(xp) - phi(xm)) / (2 * h);
        CHECK(std::abs(phi.gradient(x)[i] - fd) < 1e-8);
    }
}

TEST_CASE("coboundary evaluates exactly as u - u o f + c") {
    std::mt19937_64 rng(21);
    PerturbedMap f = fixtures::perturbed_cat(1e-2);
    auto u_terms = fixtures::random_trig_terms(2, rng);
    Observable u = Observable::trig_poly(u_terms, 2);
    Observable phi = Observable::coboundary_of(u_terms, 0.37, f);
    for (int i = 0; i < 50; ++i) {
        TorusPoint x = fixtures::random_point(2, rng);
        CHECK(std::abs(phi(x) - (u(x) - u(f.eval(x)) + 0.37)) < 1e-14);
    }
}

TEST_CASE("coboundary gradient matches finite differences") {
    std::mt19937_64 rng(22);
    PerturbedMap f = fixtures::perturbed_t3(1e-2);
    auto u_terms = fixtures::random_trig_terms(3, rng);
    Observable phi = Observable::coboundary_of(u_terms, -0.1, f);
    const double h = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
        TorusPoint x = fixtures::random_point(3, rng);
        Eigen::VectorXd g = phi.gradient(x);
        for (int i = 0; i < 3; ++i) {
            TorusPoint xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            double fd = (phi(xp) - phi(xm)) / (2 * h);
            CHECK(std::abs(g[i] - fd) < 1e-7);
        }
    }
}

TEST_CASE("jacobian observables are constant for linear models") {
    PerturbedMap f = fixtures::linear_cat();
    Observable ju = Observable::log_ju(f);
    Observable js = Observable::log_js(f);
    Observable jf = Observable::log_jfull(f);
    const double phi2 = (3.0 + std::sqrt(5.0)) / 2.0;
    std::mt19937_64 rng(23);
    for (int i = 0; i < 10; ++i) {
        TorusPoint x = fixtures::random_point(2, rng);
        CHECK(std::abs(ju(x) - std::log(phi2)) < 1e-9);
        CHECK(std::abs(js(x) + std::log(phi2)) < 1e-9);
        CHECK(std::abs(jf(x)) < 1e-12);
    }

    PerturbedMap g = fixtures::linear_t3();
    Observable ju3 = Observable::log_ju(g);
    Observable js3 = Observable::log_js(g);
    double rho = 1.3;
    for (int i = 0; i < 60; ++i)
        rho -= (rho * rho * rho - rho - 1.0) / (3 * rho * rho - 1);
    for (int i = 0; i < 5; ++i) {
        TorusPoint x = fixtures::random_point(3, rng);
        CHECK(std::abs(ju3(x) - std::log(rho)) < 1e-9);
        CHECK(std::abs(js3(x) + std::log(rho)) < 1e-9);
    }
}

TEST_CASE("log-det splitting identity telescopes around periodic cycles") {
    // Pointwise, log|det Df| differs from the sum of the restricted log-dets
    // by the angle defect log|det[B_s B_u]| at x vs f(x); that defect is a
    // coboundary, so it cancels exactly over a periodic cycle.
    for (PerturbedMap f :
         {fixtures::perturbed_cat(1e-2), fixtures::perturbed_t3(1e-2)}) {
        Observable ju = Observable::log_ju(f);
        Observable js = Observable::log_js(f);
        Observable jf = Observable::log_jfull(f);
        OrbitCatalog cat = orbit_catalog(f, 3);
        for (const PeriodicOrbit& o : cat.orbits) {
            double sum = 0;
            TorusPoint x = wrap(o.base);
            for (int j = 0; j < o.period; ++j) {
                sum += jf(x) - ju(x) - js(x);
                x = f.eval(x);
            }
            CHECK(std::abs(sum) < 1e-8);
        }
    }
}

TEST_CASE("birkhoff log-Jacobian sums match periodic data determinants") {
    PerturbedMap f = fixtures::perturbed_cat(1e-3);
    OrbitCatalog cat = orbit_catalog(f, 3);
    Observable ju = Observable::log_ju(f);
    Observable js = Observable::log_js(f);
    for (const PeriodicOrbit& o : cat.orbits) {
        PeriodicData d = periodic_data(f, o);
        double su = 0, ss = 0;
        TorusPoint x = wrap(o.base);
        for (int j = 0; j < o.period; ++j) {
            su += ju(x);
            ss += js(x);
            x = f.eval(x);
        }
        CHECK(std::abs(su - std::log(std::abs(d.jac_u))) < 1e-8);
        CHECK(std::abs(ss - std::log(std::abs(d.jac_s))) < 1e-8);
    }
}

TEST_CASE("perturbed log J^u varies but averages near the linear value") {
    PerturbedMap f = fixtures::perturbed_cat(3e-2);
    Observable ju = Observable::log_ju(f);
    const double lv = std::log((3.0 + std::sqrt(5.0)) / 2.0);
    std::mt19937_64 rng(25);
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 40; ++i) {
        double v = ju(fixtures::random_point(2, rng));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        CHECK(std::abs(v - lv) < 0.5);
    }
    CHECK(hi - lo > 1e-3); // genuinely nonconstant at this epsilon
}

TEST_CASE("lipschitz bounds dominate sampled difference quotients") {
    std::mt19937_64 rng(26);
    PerturbedMap f = fixtures::perturbed_cat(1e-2);
    std::vector<Observable> obs;
    obs.push_back(Observable::trig_poly(fixtures::random_trig_terms(2, rng), 2));
    obs.push_back(
        Observable::coboundary_of(fixtures::random_trig_terms(2, rng), 0.2, f));
    obs.push_back(Observable::log_ju(f));
    obs.push_back(Observable::log_jfull(f));
    for (const Observable& phi : obs) {
        double lip = phi.lipschitz_bound();
        CHECK(lip >= 0);
        for (int i = 0; i < 30; ++i) {
            TorusPoint x = fixtures::random_point(2, rng);
            TorusPoint y = x;
            std::uniform_real_distribution<double> d(-1e-4, 1e-4);
            for (int j = 0; j < 2; ++j) y[j] += d(rng);
            double q = std::abs(phi(x) - phi(y)) / torus_distance(x, y);
            CHECK(q <= lip * 1.01 + 1e-9);
        }
    }
}

TEST_CASE("observable input validation") {
    CHECK_THROWS_AS(Observable::trig_poly({}, 0), invalid_input);
    TrigTerm bad;
    bad.frequency = IntVector::Zero(2);
    bad.amplitude = 1.0;
    bad.kind = TrigTerm::Kind::Sin;
    CHECK_THROWS_AS(Observable::trig_poly({bad}, 2), invalid_input);
    Observable phi = Observable::trig_poly({}, 2); // empty sum is the zero function
    TorusPoint x(2);
    x << 0.5, 0.25;
    CHECK(phi(x) == 0.0);
    TorusPoint wrong(3);
    wrong << 0.1, 0.2, 0.3;
    CHECK_THROWS_AS(phi(wrong), invalid_input);
    CHECK_THROWS_AS(phi.map(), invalid_input);
}
