#pragma once

#include <random>

#include "anosovlab/observable.hpp"
#include "anosovlab/torus_map.hpp"

namespace fixtures {

using namespace anosov;

inline IntegerAutomorphism cat_matrix() {
    IntMatrix m(2, 2);
    m << 2, 1, 1, 1;
    return IntegerAutomorphism(m);
}

// Inverse companion of x^3 - x - 1: one real stable eigenvalue ~0.75488 and an
// unstable complex pair of modulus ~1.15096.
inline IntegerAutomorphism t3_matrix() {
    IntMatrix m(3, 3);
    m << -1, 0, 1, 1, 0, 0, 0, 1, 0;
    return IntegerAutomorphism(m);
}

inline FourierMode mode(std::initializer_list<std::int64_t> freq,
                        std::initializer_list<double> coef, FourierMode::Kind kind) {
    FourierMode m;
    m.frequency.resize(static_cast<Eigen::Index>(freq.size()));
    m.coefficient.resize(static_cast<Eigen::Index>(coef.size()));
    Eigen::Index i = 0;
    for (auto v : freq) m.frequency[i++] = v;
    i = 0;
    for (auto v : coef) m.coefficient[i++] = v;
    m.kind = kind;
    return m;
}

inline std::vector<FourierMode> cat_modes() {
    return {mode({1, 2}, {0.3, -0.2}, FourierMode::Kind::Sin),
            mode({2, -1}, {0.15, 0.25}, FourierMode::Kind::Cos)};
}

// Fixes the origin (sin modes only); used where a constructed fixed point helps.
inline std::vector<FourierMode> cat_modes_fixing_origin() {
    return {mode({1, 2}, {0.3, -0.2}, FourierMode::Kind::Sin),
            mode({2, -1}, {0.15, 0.25}, FourierMode::Kind::Sin)};
}

inline std::vector<FourierMode> t3_modes() {
    return {mode({1, 0, 0}, {0.2, 0.3, -0.1}, FourierMode::Kind::Sin),
            mode({0, 1, 1}, {-0.25, 0.1, 0.2}, FourierMode::Kind::Cos)};
}

inline std::vector<FourierMode> t3_modes_fixing_origin() {
    return {mode({1, 0, 0}, {0.2, 0.3, -0.1}, FourierMode::Kind::Sin),
            mode({0, 1, 1}, {-0.25, 0.1, 0.2}, FourierMode::Kind::Sin)};
}

// Single mode vanishing at the origin whose derivative there tilts the
// unstable Jacobian away from the linear value.
inline std::vector<FourierMode> t3_jac_bump_modes() {
    return {mode({1, 1, 0}, {0.3, -0.2, 0.25}, FourierMode::Kind::Sin)};
}

inline PerturbedMap perturbed_cat(double eps) {
    return PerturbedMap(cat_matrix(), cat_modes(), eps);
}

inline PerturbedMap perturbed_t3(double eps) {
    return PerturbedMap(t3_matrix(), t3_modes(), eps);
}

inline PerturbedMap linear_cat() { return PerturbedMap(cat_matrix(), {}, 0.0); }
inline PerturbedMap linear_t3() { return PerturbedMap(t3_matrix(), {}, 0.0); }

inline TorusPoint random_point(int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TorusPoint x(d);
    for (int i = 0; i < d; ++i) x[i] = u(rng);
    return x;
}

inline std::vector<anosov::TrigTerm> random_trig_terms(int dim, std::mt19937_64& rng,
                                                       int n_terms = 4,
                                                       std::int64_t kmax = 2) {
    std::uniform_int_distribution<std::int64_t> ki(-kmax, kmax);
    std::uniform_real_distribution<double> amp(-0.5, 0.5);
    std::uniform_int_distribution<int> which(0, 1);
    std::vector<anosov::TrigTerm> terms;
    while (static_cast<int>(terms.size()) < n_terms) {
        anosov::TrigTerm t;
        t.frequency.resize(dim);
        for (int i = 0; i < dim; ++i) t.frequency[i] = ki(rng);
        if (t.frequency.isZero()) continue;
        t.amplitude = amp(rng);
        t.kind = which(rng) ? anosov::TrigTerm::Kind::Sin : anosov::TrigTerm::Kind::Cos;
        terms.push_back(std::move(t));
    }
    return terms;
}

} // namespace fixtures
