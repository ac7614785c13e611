#include "anosovlab/cohomology.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <string>
#include <thread>
#include <utility>

#include "anosovlab/errors.hpp"

namespace anosov {
namespace {

// Evaluation-error scale of one periodic average: the orbit residual carried
// through the observable's modulus of continuity plus per-point rounding.
double average_error_estimate(const Observable& phi,
                              const std::vector<PeriodicOrbit>& catalog) {
    double worst_res = 0.0;
    int p_max = 1;
    for (const PeriodicOrbit& o : catalog) {
        worst_res = std::max(worst_res, o.residual);
        p_max = std::max(p_max, o.period);
    }
    return phi.lipschitz_bound() * worst_res + 1e-12 * p_max;
}

std::size_t worker_count(std::size_t jobs) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    return std::min<std::size_t>(jobs, hw);
}

// Strided parallel map over [0, n).
template <typename Fn>
void parallel_rows(std::size_t n, Fn&& fn) {
    const std::size_t workers = worker_count(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::future<void>> jobs;
    jobs.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        }));
    for (auto& job : jobs) job.get();
}

std::string seed_key(const PeriodicOrbit& o) {
    std::string key = std::to_string(o.period);
    for (Eigen::Index i = 0; i < o.smith.size(); ++i) {
        key += ':';
        key += std::to_string(o.smith[i]);
    }
    return key;
}

}  // namespace

double birkhoff_sum(const PerturbedMap& f, const Observable& phi,
                    const PeriodicOrbit& orbit) {
    double sum = 0.0;
    TorusPoint x = wrap(orbit.base);
    for (int k = 0; k < orbit.period; ++k) {
        sum += phi(x);
        x = f.eval(x);
    }
    return sum;
}

LivshitsReport livshits_constant_test(const PerturbedMap& f, const Observable& phi,
                                      const std::vector<PeriodicOrbit>& catalog,
                                      double threshold) {
    if (catalog.empty())
        throw invalid_input("periodic-sum test needs a nonempty catalog");
    phi.lipschitz_bound();  // warm the cache before the parallel section

    LivshitsReport rep;
    rep.orbits_used = static_cast<int>(catalog.size());
    rep.averages.resize(catalog.size());
    parallel_rows(catalog.size(), [&](std::size_t i) {
        rep.averages[i] = birkhoff_sum(f, phi, catalog[i]) / catalog[i].period;
    });

    double mean = 0.0;
    for (double a : rep.averages) mean += a;
    mean /= static_cast<double>(rep.averages.size());
    rep.candidate_c = mean;

    for (std::size_t i = 0; i < rep.averages.size(); ++i) {
        if (rep.averages[i] < rep.averages[rep.witness_low]) rep.witness_low = i;
        if (rep.averages[i] > rep.averages[rep.witness_high]) rep.witness_high = i;
    }
    rep.max_deviation = std::max(std::abs(rep.averages[rep.witness_low] - mean),
                                 std::abs(rep.averages[rep.witness_high] - mean));
    rep.threshold =
        threshold > 0 ? threshold : 100.0 * average_error_estimate(phi, catalog);
    rep.obstructed = rep.max_deviation > rep.threshold;
    return rep;
}

MatchReport jacobian_matching_test(const PerturbedMap& f1, const PerturbedMap& f2,
                                   const OrbitCatalog& cat1,
                                   const OrbitCatalog& cat2, double tol) {
    std::map<std::string, std::size_t> partner;
    for (std::size_t i = 0; i < cat2.orbits.size(); ++i)
        partner.emplace(seed_key(cat2.orbits[i]), i);
    if (partner.size() != cat2.orbits.size())
        throw pairing_incomplete("second catalog has duplicate seed identities");

    std::vector<std::size_t> pair_of(cat1.orbits.size());
    for (std::size_t i = 0; i < cat1.orbits.size(); ++i) {
        auto it = partner.find(seed_key(cat1.orbits[i]));
        if (it == partner.end())
            throw pairing_incomplete("orbit has no partner with the same seed");
        pair_of[i] = it->second;
    }
    if (cat1.orbits.size() != cat2.orbits.size())
        throw pairing_incomplete("catalogs enumerate different seed sets");

    MatchReport rep;
    rep.rows.resize(cat1.orbits.size());
    int k_max = 1;
    parallel_rows(cat1.orbits.size(), [&](std::size_t i) {
        const PeriodicOrbit& o1 = cat1.orbits[i];
        const PeriodicOrbit& o2 = cat2.orbits[pair_of[i]];
        const PeriodicData d1 = periodic_data(f1, o1);
        const PeriodicData d2 = periodic_data(f2, o2);
        MatchRow& row = rep.rows[i];
        row.period = o1.period;
        row.smith = o1.smith;
        row.log_js_1 = std::log(std::abs(d1.jac_s));
        row.log_ju_1 = std::log(std::abs(d1.jac_u));
        row.log_js_2 = std::log(std::abs(d2.jac_s));
        row.log_ju_2 = std::log(std::abs(d2.jac_u));
        row.gap_s = row.log_js_1 - row.log_js_2;
        row.gap_u = row.log_ju_1 - row.log_ju_2;
    });
    for (const PeriodicOrbit& o : cat1.orbits) k_max = std::max(k_max, o.period);

    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        if (std::abs(rep.rows[i].gap_s) > rep.max_gap_s) {
            rep.max_gap_s = std::abs(rep.rows[i].gap_s);
            rep.witness_s = i;
        }
        if (std::abs(rep.rows[i].gap_u) > rep.max_gap_u) {
            rep.max_gap_u = std::abs(rep.rows[i].gap_u);
            rep.witness_u = i;
        }
    }
    rep.threshold = tol > 0 ? tol : 100.0 * 3e-10 * k_max;
    rep.stable_match = rep.max_gap_s <= rep.threshold;
    rep.unstable_match = rep.max_gap_u <= rep.threshold;
    rep.full_match = rep.stable_match && rep.unstable_match;
    return rep;
}

LivshitsReport srb_equals_mme_test(const PerturbedMap& f,
                                   const std::vector<PeriodicOrbit>& catalog,
                                   double threshold) {
    return livshits_constant_test(f, Observable::log_ju(f), catalog, threshold);
}

}  // namespace anosov
