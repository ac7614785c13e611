#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "anosovlab/cohomology.hpp"
#include "anosovlab/periodic.hpp"
#include "fixtures.hpp"

using namespace anosov;

namespace {

std::vector<TrigTerm> small_u() {
    std::vector<TrigTerm> u(2);
    u[0].frequency.resize(2);
    u[0].frequency << 1, 0;
    u[0].amplitude = 0.4;
    u[0].kind = TrigTerm::Kind::Sin;
    u[1].frequency.resize(2);
    u[1].frequency << 1, 1;
    u[1].amplitude = -0.3;
    u[1].kind = TrigTerm::Kind::Cos;
    return u;
}

Observable coordinate_wave() {
    std::vector<TrigTerm> t(1);
    t[0].frequency.resize(2);
    t[0].frequency << 1, 0;
    t[0].amplitude = 1.0;
    t[0].kind = TrigTerm::Kind::Cos;
    return Observable::trig_poly(std::move(t), 2);
}

// T f T^{-1} for the translation T x = x + v, built in closed form: the added
// constant is (I - L) v / eps and every mode is split by the angle-addition
// rules so that p_new(x) = p(x - v) exactly.
PerturbedMap translate_conjugate(const PerturbedMap& f, const Eigen::VectorXd& v) {
    const double eps = f.epsilon();
    std::vector<FourierMode> out;
    for (const FourierMode& m : f.modes()) {
        const double theta =
            2.0 * std::numbers::pi * m.frequency.cast<double>().dot(v);
        FourierMode a = m, b = m;
        if (m.kind == FourierMode::Kind::Sin) {
            a.coefficient = m.coefficient * std::cos(theta);
            b.kind = FourierMode::Kind::Cos;
            b.coefficient = -m.coefficient * std::sin(theta);
        } else {
            a.coefficient = m.coefficient * std::cos(theta);
            b.kind = FourierMode::Kind::Sin;
            b.coefficient = m.coefficient * std::sin(theta);
        }
        out.push_back(std::move(a));
        out.push_back(std::move(b));
    }
    FourierMode c;
    c.frequency = IntVector::Zero(v.size());
    c.kind = FourierMode::Kind::Cos;
    c.coefficient = (v - f.linear().as_double() * v) / eps;
    out.push_back(std::move(c));
    return PerturbedMap(f.linear(), std::move(out), eps);
}

// Image of a periodic orbit under x -> x + v, with lattice and residual
// refreshed for the translated map.
PeriodicOrbit translate_orbit(const PerturbedMap& f2, const PeriodicOrbit& o,
                              const Eigen::VectorXd& v) {
    PeriodicOrbit t = o;
    t.base = wrap(o.base + v);
    LiftPoint y = t.base;
    for (int k = 0; k < t.period; ++k) y = f2.eval_lift(y);
    Eigen::VectorXd shift = y - t.base;
    t.lattice = shift.array().round().cast<std::int64_t>().matrix();
    t.residual = (shift - t.lattice.cast<double>()).cwiseAbs().maxCoeff();
    return t;
}

} // namespace

TEST_CASE("birkhoff sums of a pure constant are exact multiples") {
    PerturbedMap f = fixtures::perturbed_cat(1e-3);
    OrbitCatalog cat = orbit_catalog(f, 3);
    Observable phi = Observable::coboundary_of({}, 0.375, f);
    for (const PeriodicOrbit& o : cat.orbits)
        CHECK(birkhoff_sum(f, phi, o) == 0.375 * o.period);

    LivshitsReport rep = livshits_constant_test(f, phi, cat.orbits);
    CHECK(rep.candidate_c == doctest::Approx(0.375).epsilon(1e-14));
    CHECK(rep.max_deviation < 1e-14);
    CHECK(!rep.obstructed);
    CHECK(rep.orbits_used == static_cast<int>(cat.orbits.size()));
    CHECK(rep.averages.size() == cat.orbits.size());
    CHECK(rep.threshold > 0);
}

TEST_CASE("coboundary averages telescope to the constant") {
    PerturbedMap f = fixtures::perturbed_cat(1e-3);
    OrbitCatalog cat = orbit_catalog(f, 4);
    const double c = 0.3125;
    Observable phi = Observable::coboundary_of(small_u(), c, f);

    LivshitsReport rep = livshits_constant_test(f, phi, cat.orbits);
    CHECK(std::abs(rep.candidate_c - c) < 1e-8);
    CHECK(rep.max_deviation < 1e-8);
    CHECK(!rep.obstructed);
    for (double a : rep.averages) CHECK(std::abs(a - c) < 1e-8);
}

TEST_CASE("birkhoff averages are invariant under cyclic rotation of the orbit") {
    PerturbedMap f = fixtures::perturbed_cat(1e-3);
    OrbitCatalog cat = orbit_catalog(f, 3);
    Observable phi = coordinate_wave();
    for (const PeriodicOrbit& o : cat.orbits) {
        if (o.period < 2) continue;
        PeriodicOrbit rot = o;
        rot.base = f.eval(wrap(o.base));
        const double a = birkhoff_sum(f, phi, o) / o.period;
        const double b = birkhoff_sum(f, phi, rot) / rot.period;
        CHECK(std::abs(a - b) < 1e-9);
    }
}

TEST_CASE("volume-projected maps have vanishing full-Jacobian averages") {
    PerturbedMap f(fixtures::t3_matrix(),
                   {fixtures::mode({1, 1, 0}, {0.4, -0.3, 0.5}, FourierMode::Kind::Sin)},
                   0.05, true);
    OrbitCatalog cat = orbit_catalog(f, 4);
    LivshitsReport rep = livshits_constant_test(f, Observable::log_jfull(f), cat.orbits);
    CHECK(std::abs(rep.candidate_c) < 1e-10);
    CHECK(rep.max_deviation < 1e-10);
    CHECK(!rep.obstructed);

    // Determinant factorizes over the splitting on every orbit.
    for (std::size_t i = 0; i < cat.orbits.size(); i += 3) {
        PeriodicData d = periodic_data(f, cat.orbits[i]);
        CHECK(std::abs(std::log(std::abs(d.jac_full)) -
                       std::log(std::abs(d.jac_s)) - std::log(std::abs(d.jac_u))) <
              1e-8);
    }
}

TEST_CASE("a generic wave is flagged as obstructed with extreme witnesses") {
    PerturbedMap f = fixtures::perturbed_cat(1e-3);
    OrbitCatalog cat = orbit_catalog(f, 4);
    LivshitsReport rep = livshits_constant_test(f, coordinate_wave(), cat.orbits);
    CHECK(rep.obstructed);
    CHECK(rep.max_deviation > 0.01);
    CHECK(rep.averages[rep.witness_high] >= rep.averages[rep.witness_low]);
    const double spread_low = std::abs(rep.averages[rep.witness_low] - rep.candidate_c);
    const double spread_high = std::abs(rep.averages[rep.witness_high] - rep.candidate_c);
    CHECK(rep.max_deviation == doctest::Approx(std::max(spread_low, spread_high)));
    for (double a : rep.averages) {
        CHECK(a >= rep.averages[rep.witness_low] - 1e-15);
        CHECK(a <= rep.averages[rep.witness_high] + 1e-15);
    }
}

TEST_CASE("explicit threshold overrides the automatic estimate") {
    PerturbedMap f = fixtures::perturbed_cat(1e-3);
    OrbitCatalog cat = orbit_catalog(f, 3);
    Observable phi = coordinate_wave();
    LivshitsReport loose = livshits_constant_test(f, phi, cat.orbits, 10.0);
    LivshitsReport strict = livshits_constant_test(f, phi, cat.orbits);
    CHECK(loose.threshold == 10.0);
    CHECK(!loose.obstructed);
    CHECK(strict.obstructed);
    CHECK(loose.candidate_c == strict.candidate_c);
    CHECK(loose.max_deviation == strict.max_deviation);
}

TEST_CASE("livshits test rejects an empty catalog") {
    PerturbedMap f = fixtures::perturbed_cat(1e-3);
    CHECK_THROWS_AS(livshits_constant_test(f, coordinate_wave(), {}), invalid_input);
}

TEST_CASE("matching a map against itself gives identically zero gaps") {
    PerturbedMap f = fixtures::perturbed_t3(1e-3);
    OrbitCatalog cat = orbit_catalog(f, 4);
    MatchReport rep = jacobian_matching_test(f, f, cat, cat);
    CHECK(rep.rows.size() == cat.orbits.size());
    CHECK(rep.full_match);
    CHECK(rep.stable_match);
    CHECK(rep.unstable_match);
    CHECK(rep.max_gap_s == 0.0);
    CHECK(rep.max_gap_u == 0.0);
    for (const MatchRow& r : rep.rows) {
        CHECK(r.gap_s == 0.0);
        CHECK(r.gap_u == 0.0);
        CHECK(r.log_js_1 == r.log_js_2);
        CHECK(r.log_ju_1 == r.log_ju_2);
    }
}

TEST_CASE("translation conjugates have matching periodic jacobian data") {
    PerturbedMap f1 = fixtures::perturbed_cat(1e-3);
    Eigen::VectorXd v(2);
    v << 0.3, 0.45;
    PerturbedMap f2 = translate_conjugate(f1, v);

    // Pointwise conjugacy check: f2(x + v) = f1(x) + v on the torus.
    std::mt19937_64 rng(611);
    for (int i = 0; i < 12; ++i) {
        TorusPoint x = fixtures::random_point(2, rng);
        TorusPoint lhs = f2.eval(wrap(x + v));
        TorusPoint rhs = wrap(f1.eval(x) + v);
        CHECK(torus_distance(lhs, rhs) < 1e-12);
    }

    OrbitCatalog cat1 = orbit_catalog(f1, 4);
    OrbitCatalog cat2 = cat1;
    for (PeriodicOrbit& o : cat2.orbits) o = translate_orbit(f2, o, v);
    for (const PeriodicOrbit& o : cat2.orbits) CHECK(o.residual < 1e-9);

    MatchReport rep = jacobian_matching_test(f1, f2, cat1, cat2);
    CHECK(rep.full_match);
    CHECK(rep.max_gap_s < 1e-9);
    CHECK(rep.max_gap_u < 1e-9);
}

TEST_CASE("a jacobian bump against the linear model is caught with a witness") {
    PerturbedMap bump(fixtures::t3_matrix(), fixtures::t3_jac_bump_modes(), 1e-3);
    PerturbedMap lin = fixtures::linear_t3();
    OrbitCatalog cat1 = orbit_catalog(bump, 4);
    OrbitCatalog cat2 = orbit_catalog(lin, 4);

    MatchReport rep = jacobian_matching_test(bump, lin, cat1, cat2);
    CHECK(!rep.full_match);
    CHECK(!rep.unstable_match);
    CHECK(rep.max_gap_u > rep.threshold);
    CHECK(rep.max_gap_u > 1e-5);
    CHECK(std::abs(rep.rows[rep.witness_u].gap_u) == rep.max_gap_u);

    // Swapping the maps negates every row and keeps the witnesses.
    MatchReport swp = jacobian_matching_test(lin, bump, cat2, cat1);
    REQUIRE(swp.rows.size() == rep.rows.size());
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        CHECK(swp.rows[i].gap_s == -rep.rows[i].gap_s);
        CHECK(swp.rows[i].gap_u == -rep.rows[i].gap_u);
        CHECK(swp.rows[i].period == rep.rows[i].period);
    }
    CHECK(swp.max_gap_u == rep.max_gap_u);
    CHECK(swp.witness_u == rep.witness_u);
}

TEST_CASE("rows without partners abort the pairing") {
    PerturbedMap f = fixtures::perturbed_t3(1e-3);
    OrbitCatalog cat1 = orbit_catalog(f, 4);
    OrbitCatalog cat2 = cat1;
    cat2.orbits.pop_back();
    CHECK_THROWS_AS(jacobian_matching_test(f, f, cat1, cat2), pairing_incomplete);
    CHECK_THROWS_AS(jacobian_matching_test(f, f, cat2, cat1), pairing_incomplete);

    OrbitCatalog dup = cat1;
    dup.orbits.push_back(dup.orbits.front());
    CHECK_THROWS_AS(jacobian_matching_test(f, f, cat1, dup), pairing_incomplete);
}

TEST_CASE("srb-mme coincidence holds for the linear model") {
    PerturbedMap f = fixtures::linear_cat();
    OrbitCatalog cat = orbit_catalog(f, 4);
    LivshitsReport rep = srb_equals_mme_test(f, cat.orbits);
    const double log_lambda = std::log((3.0 + std::sqrt(5.0)) / 2.0);
    CHECK(std::abs(rep.candidate_c - log_lambda) < 1e-9);
    CHECK(rep.max_deviation < 1e-9);
    CHECK(!rep.obstructed);
}

TEST_CASE("srb-mme dichotomy flags a volume-preserving perturbation") {
    PerturbedMap f(fixtures::t3_matrix(),
                   {fixtures::mode({1, 1, 0}, {0.4, -0.3, 0.5}, FourierMode::Kind::Sin)},
                   0.05, true);
    OrbitCatalog cat = orbit_catalog(f, 4);
    LivshitsReport rep = srb_equals_mme_test(f, cat.orbits);
    CHECK(rep.obstructed);
    CHECK(rep.max_deviation > 1e-5);
    // Unstable pair of the linear part has modulus^2 = the inverse stable root.
    const double log_ju_linear = -std::log(0.7548776662466928);
    CHECK(std::abs(rep.candidate_c - log_ju_linear) < 0.1);

    // The verdict is stable under a modest threshold sweep below the spread.
    for (double t : {rep.max_deviation * 0.5, rep.max_deviation * 0.1}) {
        LivshitsReport swept = srb_equals_mme_test(f, cat.orbits, t);
        CHECK(swept.obstructed);
        CHECK(swept.candidate_c == rep.candidate_c);
    }
    LivshitsReport cleared = srb_equals_mme_test(f, cat.orbits, 2 * rep.max_deviation);
    CHECK(!cleared.obstructed);
}
