#include "anosovlab/periodic.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>

namespace anosov {
namespace {

using i128 = __int128;
using Mat128 = std::vector<std::vector<i128>>;

i128 iabs(i128 v) { return v < 0 ? -v : v; }

Mat128 to_mat128(const IntMatrix& m) {
    Mat128 a(static_cast<std::size_t>(m.rows()),
             std::vector<i128>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
    return a;
}

// Smith normal form of A by row/column operations; only the column transform
// V is tracked (solutions live in the column basis).  Sizes here are tiny
// (d <= 6), so the textbook smallest-pivot scheme is plenty.
struct Smith {
    std::vector<std::int64_t> diag; // absolute invariant factors
    Mat128 V;
};

Smith smith_form(const IntMatrix& m) {
    const std::size_t d = static_cast<std::size_t>(m.rows());
    Mat128 A = to_mat128(m);
    Mat128 V(d, std::vector<i128>(d, 0));
    for (std::size_t i = 0; i < d; ++i) V[i][i] = 1;

    auto swap_rows = [&](std::size_t a, std::size_t b) { std::swap(A[a], A[b]); };
    auto swap_cols = [&](std::size_t a, std::size_t b) {
        for (std::size_t i = 0; i < d; ++i) {
            std::swap(A[i][a], A[i][b]);
            std::swap(V[i][a], V[i][b]);
        }
    };

    for (std::size_t t = 0; t < d; ++t) {
        for (;;) {
            // Smallest nonzero entry of the trailing block to (t, t).
            std::size_t pi = d, pj = d;
            for (std::size_t i = t; i < d; ++i)
                for (std::size_t j = t; j < d; ++j)
                    if (A[i][j] != 0 &&
                        (pi == d || iabs(A[i][j]) < iabs(A[pi][pj]))) {
                        pi = i;
                        pj = j;
                    }
            if (pi == d)
                throw invalid_input("period equation is degenerate (det = 0)");
            if (pi != t) swap_rows(pi, t);
            if (pj != t) swap_cols(pj, t);

            bool dirty = false;
            for (std::size_t i = t + 1; i < d; ++i) {
                if (A[i][t] == 0) continue;
                i128 q = A[i][t] / A[t][t];
                for (std::size_t j = t; j < d; ++j) A[i][j] -= q * A[t][j];
                if (A[i][t] != 0) dirty = true;
            }
            for (std::size_t j = t + 1; j < d; ++j) {
                if (A[t][j] == 0) continue;
                i128 q = A[t][j] / A[t][t];
                for (std::size_t i = t; i < d; ++i) A[i][j] -= q * A[i][t];
                for (std::size_t i = 0; i < d; ++i) V[i][j] -= q * V[i][t];
                if (A[t][j] != 0) dirty = true;
            }
            if (dirty) continue;

            // Divisibility fix-up so the diagonal is a genuine invariant
            // factor chain: fold a non-divisible row into row t and redo.
            bool fixed = true;
            for (std::size_t i = t + 1; i < d && fixed; ++i)
                for (std::size_t j = t + 1; j < d && fixed; ++j)
                    if (A[i][j] % A[t][t] != 0) {
                        for (std::size_t c = t; c < d; ++c) A[t][c] += A[i][c];
                        fixed = false;
                    }
            if (fixed) break;
        }
    }

    Smith s;
    s.diag.resize(d);
    for (std::size_t i = 0; i < d; ++i)
        s.diag[i] = static_cast<std::int64_t>(iabs(A[i][i]));
    s.V = std::move(V);
    return s;
}

IntMatrix period_matrix(const IntegerAutomorphism& L, int k) {
    if (k < 1) throw invalid_input("period must be at least 1");
    IntMatrix m = L.power(k);
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, i) -= 1;
    return m;
}

// Digits of idx in the mixed radix given by the invariant factors, last
// factor fastest.  This fixes the enumeration order of linear_fixed_points
// and the smith coordinates recorded in catalogs.
IntVector mixed_radix_digits(std::int64_t idx, const std::vector<std::int64_t>& radix) {
    IntVector digits(static_cast<Eigen::Index>(radix.size()));
    for (std::size_t i = radix.size(); i-- > 0;) {
        digits[static_cast<Eigen::Index>(i)] = idx % radix[i];
        idx /= radix[i];
    }
    return digits;
}

} // namespace

std::vector<std::int64_t> period_equation_divisors(const IntegerAutomorphism& L,
                                                   int k) {
    return smith_form(period_matrix(L, k)).diag;
}

std::vector<TorusPoint> linear_fixed_points(const IntegerAutomorphism& L, int k) {
    Smith s = smith_form(period_matrix(L, k));
    const int d = L.dim();
    std::int64_t count = 1;
    for (std::int64_t f : s.diag) count *= f;

    std::vector<TorusPoint> pts;
    pts.reserve(static_cast<std::size_t>(count));
    for (std::int64_t idx = 0; idx < count; ++idx) {
        IntVector digits = mixed_radix_digits(idx, s.diag);
        TorusPoint x = TorusPoint::Zero(d);
        for (int i = 0; i < d; ++i) {
            double yi = static_cast<double>(digits[i]) / static_cast<double>(s.diag[static_cast<std::size_t>(i)]);
            for (int r = 0; r < d; ++r)
                x[r] += static_cast<double>(static_cast<std::int64_t>(
                            s.V[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)])) *
                        yi;
        }
        pts.push_back(wrap(x));
    }
    return pts;
}

PeriodicOrbit continue_orbit(const PerturbedMap& f, const TorusPoint& seed, int k,
                             double tol) {
    if (k < 1) throw invalid_input("period must be at least 1");
    const int d = f.d();
    const IntMatrix pk = period_matrix(f.linear(), k); // L^k - I

    // Lattice class pinned by the seed: m = (L^k - I) seed when the seed
    // solves the linear period equation; otherwise the seed must already be
    // periodic for f itself (e.g. a rotated base), and m is read off its
    // orbit displacement.
    IntVector m(d);
    {
        Eigen::VectorXd md = pk.cast<double>() * seed;
        double defect = 0;
        for (int i = 0; i < d; ++i)
            defect = std::max(defect, std::abs(md[i] - std::round(md[i])));
        if (defect > 1e-6) {
            LiftPoint z = seed;
            for (int j = 0; j < k; ++j) z = f.eval_lift(z);
            md = z - seed;
            defect = 0;
            for (int i = 0; i < d; ++i)
                defect = std::max(defect, std::abs(md[i] - std::round(md[i])));
            if (defect > 1e-6)
                throw invalid_input(
                    "seed is neither a linear periodic point nor periodic for f");
        }
        for (int i = 0; i < d; ++i)
            m[i] = static_cast<std::int64_t>(std::llround(md[i]));
    }

    auto residual_vec = [&](const LiftPoint& x) {
        LiftPoint z = x;
        for (int j = 0; j < k; ++j) z = f.eval_lift(z);
        return LiftPoint(z - x - m.cast<double>());
    };

    LiftPoint x = seed;
    Eigen::VectorXd g = residual_vec(x);
    double res = g.norm();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);

    for (int iter = 0; iter < 50 && res > tol; ++iter) {
        // DG = DF^k - I via the chain rule along the current orbit.
        Eigen::MatrixXd J = I;
        LiftPoint z = x;
        for (int j = 0; j < k; ++j) {
            J = f.derivative(wrap(z)) * J;
            z = f.eval_lift(z);
        }
        Eigen::VectorXd step = (J - I).partialPivLu().solve(-g);

        double scale = 1.0;
        LiftPoint xn;
        Eigen::VectorXd gn;
        double rn = 0;
        bool accepted = false;
        for (int h = 0; h < 30; ++h) {
            xn = x + scale * step;
            gn = residual_vec(xn);
            rn = gn.norm();
            if (rn < res || rn < tol) {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) throw continuation_failed("newton step stalled");
        x = xn;
        g = gn;
        res = rn;
        if ((x - seed).lpNorm<Eigen::Infinity>() > 0.25)
            throw continuation_failed("continuation escaped the seed basin");
    }
    if (res > tol) throw continuation_failed("newton did not reach tolerance");

    // Canonical representative in [0,1)^d; the lattice class shifts by
    // (L^k - I) t when the lift shifts by the integer vector t.
    IntVector t(d);
    for (int i = 0; i < d; ++i)
        t[i] = static_cast<std::int64_t>(std::floor(x[i]));
    PeriodicOrbit orbit;
    orbit.base = x - t.cast<double>();
    for (int i = 0; i < d; ++i)
        orbit.base[i] = wrap_unit(orbit.base[i]); // guard floor rounding
    orbit.period = k;
    orbit.lattice = m - pk * t;
    {
        LiftPoint z = orbit.base;
        for (int j = 0; j < k; ++j) z = f.eval_lift(z);
        orbit.residual = (z - orbit.base - orbit.lattice.cast<double>()).norm();
    }
    orbit.seed = seed;

    // Minimal period by divisor filtering.
    orbit.minimal_period = k;
    for (int j = 1; j < k; ++j) {
        if (k % j != 0) continue;
        TorusPoint z = wrap(orbit.base);
        for (int s = 0; s < j; ++s) z = f.eval(z);
        if (torus_distance(z, wrap(orbit.base)) < 1e-8) {
            orbit.minimal_period = j;
            break;
        }
    }
    return orbit;
}

PeriodicData periodic_data(const PerturbedMap& f, const PeriodicOrbit& orbit) {
    const int k = orbit.period;
    const int ds = f.splitting().dim_s, du = f.splitting().dim_u;

    std::vector<TorusPoint> pts(static_cast<std::size_t>(k));
    pts[0] = wrap(orbit.base);
    for (int j = 1; j < k; ++j)
        pts[static_cast<std::size_t>(j)] = f.eval(pts[static_cast<std::size_t>(j - 1)]);

    std::vector<SplittingFrame> fr(pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j) fr[j] = splitting_at(f, pts[j]);

    Eigen::MatrixXd Ms = Eigen::MatrixXd::Identity(ds, ds);
    Eigen::MatrixXd Mu = Eigen::MatrixXd::Identity(du, du);
    Eigen::MatrixXd full = Eigen::MatrixXd::Identity(f.d(), f.d());
    for (int j = 0; j < k; ++j) {
        const std::size_t cur = static_cast<std::size_t>(j);
        const std::size_t nxt = static_cast<std::size_t>((j + 1) % k);
        Eigen::MatrixXd Df = f.derivative(pts[cur]);
        if (ds > 0)
            Ms = (fr[nxt].stable_basis.transpose() * Df * fr[cur].stable_basis) * Ms;
        if (du > 0)
            Mu = (fr[nxt].unstable_basis.transpose() * Df * fr[cur].unstable_basis) * Mu;
        full = Df * full;
    }

    PeriodicData data;
    data.jac_s = ds > 0 ? Ms.determinant() : 1.0;
    data.jac_u = du > 0 ? Mu.determinant() : 1.0;
    data.jac_full = full.determinant();
    data.spectrum = Eigen::EigenSolver<Eigen::MatrixXd>(full).eigenvalues();
    return data;
}

OrbitCatalog orbit_catalog(const PerturbedMap& f, int k_max, double tol) {
    if (k_max < 1) throw invalid_input("k_max must be at least 1");
    OrbitCatalog cat;
    cat.k_max = k_max;
    for (int k = 1; k <= k_max; ++k) {
        std::vector<std::int64_t> radix = period_equation_divisors(f.linear(), k);
        std::vector<TorusPoint> seeds = linear_fixed_points(f.linear(), k);
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            try {
                PeriodicOrbit orbit = continue_orbit(f, seeds[i], k, tol);
                orbit.smith = mixed_radix_digits(static_cast<std::int64_t>(i), radix);
                cat.orbits.push_back(std::move(orbit));
            } catch (const continuation_failed&) {
                cat.failures.emplace_back(k, static_cast<std::int64_t>(i));
            }
        }
    }
    return cat;
}

void export_catalog_csv(std::ostream& os, const PerturbedMap& f,
                        const std::vector<PeriodicOrbit>& orbits) {
    const int d = f.d();
    os << "period,min_period";
    for (int i = 0; i < d; ++i) os << ",m" << i;
    for (int i = 0; i < d; ++i) os << ",x" << i;
    os << ",jac_s,jac_u,jac_full,residual\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << buf;
    };
    for (const PeriodicOrbit& o : orbits) {
        PeriodicData data = periodic_data(f, o);
        os << o.period << ',' << o.minimal_period;
        for (int i = 0; i < d; ++i) os << ',' << o.lattice[i];
        for (int i = 0; i < d; ++i) {
            os << ',';
            num(o.base[i]);
        }
        os << ',';
        num(data.jac_s);
        os << ',';
        num(data.jac_u);
        os << ',';
        num(data.jac_full);
        os << ',';
        num(o.residual);
        os << '\n';
    }
}

} // namespace anosov
