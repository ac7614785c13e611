#include "anosovlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace anosov {

namespace {

using i64 = std::int64_t;
using i128 = __int128;
using cplx = std::complex<double>;

// ---- exact integer helpers -------------------------------------------------

i64 det_bareiss(IntMatrix m) {
    const int n = static_cast<int>(m.rows());
    if (n == 0) return 1;
    i128 prev = 1;
    Eigen::Matrix<i128, Eigen::Dynamic, Eigen::Dynamic> a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = m(i, j);
    int sign = 1;
    for (int k = 0; k < n - 1; ++k) {
        if (a(k, k) == 0) {
            int piv = -1;
            for (int i = k + 1; i < n; ++i)
                if (a(i, k) != 0) { piv = i; break; }
            if (piv < 0) return 0;
            for (int j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            sign = -sign;
        }
        for (int i = k + 1; i < n; ++i)
            for (int j = k + 1; j < n; ++j)
                a(i, j) = (a(i, j) * a(k, k) - a(i, k) * a(k, j)) / prev;
        prev = a(k, k);
    }
    return sign * static_cast<i64>(a(n - 1, n - 1));
}

IntMatrix minor_of(const IntMatrix& m, int row, int col) {
    const int n = static_cast<int>(m.rows());
    IntMatrix out(n - 1, n - 1);
    for (int i = 0, ii = 0; i < n; ++i) {
        if (i == row) continue;
        for (int j = 0, jj = 0; j < n; ++j) {
            if (j == col) continue;
            out(ii, jj++) = m(i, j);
        }
        ++ii;
    }
    return out;
}

// ---- integer polynomials, ascending coefficients, leading entry last -------

using IPoly = std::vector<i64>;

int degree(const IPoly& p) {
    for (int i = static_cast<int>(p.size()) - 1; i >= 0; --i)
        if (p[i] != 0) return i;
    return -1;
}

void trim(IPoly& p) { p.resize(static_cast<std::size_t>(degree(p)) + 1); }

IPoly derivative(const IPoly& p) {
    if (p.size() <= 1) return {0};
    IPoly d(p.size() - 1);
    for (std::size_t i = 1; i < p.size(); ++i)
        d[i - 1] = static_cast<i64>(i) * p[i];
    trim(d);
    return d;
}

i64 content(const IPoly& p) {
    i64 g = 0;
    for (i64 c : p) g = std::gcd(g, std::abs(c));
    return g == 0 ? 1 : g;
}

void make_primitive(IPoly& p) {
    i64 g = content(p);
    for (i64& c : p) c /= g;
    if (degree(p) >= 0 && p[static_cast<std::size_t>(degree(p))] < 0)
        for (i64& c : p) c = -c;
}

// Pseudo-remainder of a by b (b nonzero), primitive-PRS style.
IPoly pseudo_rem(IPoly a, const IPoly& b) {
    const int db = degree(b);
    const i64 lb = b[static_cast<std::size_t>(db)];
    int da = degree(a);
    while (da >= db && degree(a) >= 0) {
        std::vector<i128> wide(a.begin(), a.end());
        const i64 la = a[static_cast<std::size_t>(da)];
        for (std::size_t i = 0; i < a.size(); ++i) wide[i] = i128(a[i]) * lb;
        for (int i = 0; i <= db; ++i)
            wide[static_cast<std::size_t>(da - db + i)] -= i128(la) * b[static_cast<std::size_t>(i)];
        IPoly next(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            i128 v = wide[i];
            if (v > std::numeric_limits<i64>::max() || v < std::numeric_limits<i64>::min())
                throw invalid_input("integer polynomial arithmetic overflow");
            next[i] = static_cast<i64>(v);
        }
        a = std::move(next);
        trim(a);
        make_primitive(a);
        da = degree(a);
    }
    return a;
}

IPoly poly_gcd(IPoly a, IPoly b) {
    make_primitive(a);
    make_primitive(b);
    if (degree(a) < degree(b)) std::swap(a, b);
    while (degree(b) >= 0) {
        IPoly r = pseudo_rem(a, b);
        a = std::move(b);
        b = std::move(r);
    }
    make_primitive(a);
    return a;
}

// Exact division assuming b | a and b monic-or-primitive with exact quotient.
IPoly poly_div_exact(const IPoly& a, const IPoly& b) {
    const int da = degree(a), db = degree(b);
    if (db < 0) throw invalid_input("division by zero polynomial");
    IPoly q(static_cast<std::size_t>(da - db + 1), 0), r = a;
    const i64 lb = b[static_cast<std::size_t>(db)];
    for (int k = da - db; k >= 0; --k) {
        i64 lead = r[static_cast<std::size_t>(k + db)];
        if (lead % lb != 0) throw invalid_input("inexact polynomial division");
        i64 c = lead / lb;
        q[static_cast<std::size_t>(k)] = c;
        for (int i = 0; i <= db; ++i)
            r[static_cast<std::size_t>(k + i)] -= c * b[static_cast<std::size_t>(i)];
    }
    return q;
}

double eval_abs(const IPoly& p, cplx z) {
    cplx v = 0;
    for (int i = static_cast<int>(p.size()) - 1; i >= 0; --i)
        v = v * z + static_cast<double>(p[static_cast<std::size_t>(i)]);
    return std::abs(v);
}

// Aberth-Ehrlich iteration for a square-free monic double polynomial.
std::vector<cplx> aberth(const std::vector<double>& c) {
    const int n = static_cast<int>(c.size()); // leading 1 implied
    std::vector<cplx> z(static_cast<std::size_t>(n));
    double radius = 0;
    for (int i = 0; i < n; ++i) radius = std::max(radius, std::abs(c[static_cast<std::size_t>(i)]));
    radius = 1.0 + radius;
    for (int k = 0; k < n; ++k) {
        double a = 2.0 * M_PI * (k + 0.37) / n + 0.5;
        z[static_cast<std::size_t>(k)] = radius * cplx(std::cos(a), std::sin(a));
    }
    for (int it = 0; it < 300; ++it) {
        double worst = 0;
        for (int k = 0; k < n; ++k) {
            cplx zk = z[static_cast<std::size_t>(k)], p = 0, dp = 0;
            for (int i = n; i >= 0; --i) {
                dp = dp * zk + p;
                p = p * zk + (i == n ? 1.0 : c[static_cast<std::size_t>(i)]);
            }
            if (std::abs(dp) < 1e-300) { z[static_cast<std::size_t>(k)] += 1e-6; continue; }
            cplx w = p / dp, s = 0;
            for (int j = 0; j < n; ++j)
                if (j != k) s += 1.0 / (zk - z[static_cast<std::size_t>(j)]);
            cplx corr = w / (1.0 - w * s);
            z[static_cast<std::size_t>(k)] -= corr;
            worst = std::max(worst, std::abs(corr) / (1.0 + std::abs(zk)));
        }
        if (worst < 1e-15) break;
    }
    return z;
}

std::vector<cplx> roots_square_free(const IPoly& p) {
    const int n = degree(p);
    std::vector<double> monic(static_cast<std::size_t>(n));
    const double lead = static_cast<double>(p[static_cast<std::size_t>(n)]);
    for (int i = 0; i < n; ++i)
        monic[static_cast<std::size_t>(i)] = static_cast<double>(p[static_cast<std::size_t>(i)]) / lead;
    std::vector<cplx> z = aberth(monic);

    // Snap near-real roots onto the axis and polish with Newton.
    for (cplx& r : z) {
        if (std::abs(r.imag()) < 1e-8 * (1.0 + std::abs(r))) r = cplx(r.real(), 0.0);
        for (int it = 0; it < 5; ++it) {
            cplx v = 0, dv = 0;
            for (int i = n; i >= 0; --i) {
                dv = dv * r + v;
                v = v * r + (i == n ? 1.0 : monic[static_cast<std::size_t>(i)]);
            }
            if (std::abs(dv) < 1e-300) break;
            r -= v / dv;
        }
        if (std::abs(r.imag()) < 1e-12 * (1.0 + std::abs(r))) r = cplx(r.real(), 0.0);
    }
    // Enforce exact conjugate symmetry among genuinely complex roots.
    std::vector<bool> used(z.size(), false);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (used[i] || z[i].imag() == 0.0) continue;
        std::size_t best = i;
        double bd = std::numeric_limits<double>::max();
        for (std::size_t j = 0; j < z.size(); ++j) {
            if (j == i || used[j] || z[j].imag() == 0.0) continue;
            double d = std::abs(z[j] - std::conj(z[i]));
            if (d < bd) { bd = d; best = j; }
        }
        if (best != i) {
            cplx m = 0.5 * (z[i] + std::conj(z[best]));
            z[i] = m;
            z[best] = std::conj(m);
            used[i] = used[best] = true;
        }
    }
    return z;
}

} // namespace

IntegerAutomorphism::IntegerAutomorphism(IntMatrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() < 2 || entries_.rows() != entries_.cols())
        throw invalid_input("integer automorphism needs a square matrix of dimension >= 2");
    det_ = det_bareiss(entries_);
    if (det_ != 1 && det_ != -1)
        throw invalid_input("matrix is not unimodular (|det| != 1)");
}

IntegerAutomorphism IntegerAutomorphism::inverse() const {
    const int n = dim();
    IntMatrix adj(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            i64 c = det_bareiss(minor_of(entries_, i, j));
            adj(j, i) = ((i + j) % 2 == 0 ? c : -c);
        }
    return IntegerAutomorphism(IntMatrix(det_ * adj));
}

IntMatrix IntegerAutomorphism::power(int k) const {
    IntMatrix base = k >= 0 ? entries_ : inverse().entries();
    int n = std::abs(k);
    IntMatrix out = IntMatrix::Identity(dim(), dim());
    for (int i = 0; i < n; ++i) out = IntMatrix(out * base);
    return out;
}

std::vector<std::int64_t> IntegerAutomorphism::char_poly() const {
    // Faddeev-LeVerrier; all divisions are exact.
    const int n = dim();
    IntMatrix Mk = entries_;
    std::vector<i64> c(static_cast<std::size_t>(n) + 1, 0);
    c[static_cast<std::size_t>(n)] = 1;
    i64 tr = Mk.trace();
    c[static_cast<std::size_t>(n - 1)] = -tr;
    for (int k = 2; k <= n; ++k) {
        IntMatrix shifted = Mk + c[static_cast<std::size_t>(n - k + 1)] * IntMatrix::Identity(n, n);
        Mk = IntMatrix(entries_ * shifted);
        c[static_cast<std::size_t>(n - k)] = -Mk.trace() / k;
    }
    c.pop_back(); // drop the implied leading 1
    return c;
}

std::vector<cplx> integer_poly_roots(const std::vector<std::int64_t>& coeffs) {
    IPoly p(coeffs);
    p.push_back(1); // monic
    trim(p);
    const int n = degree(p);
    if (n <= 0) return {};

    // Square-free chain: p_i collects roots of multiplicity > i.
    std::vector<IPoly> chain{p};
    while (degree(chain.back()) >= 1) {
        IPoly g = poly_gcd(chain.back(), derivative(chain.back()));
        if (degree(g) < 1) break;
        chain.push_back(g);
    }
    IPoly sf = chain.size() > 1 ? poly_div_exact(chain[0], chain[1]) : chain[0];
    make_primitive(sf);
    std::vector<cplx> simple = roots_square_free(sf);

    std::vector<cplx> out;
    for (cplx r : simple) {
        int mult = 1;
        double scale = std::pow(1.0 + std::abs(r), degree(p));
        for (std::size_t i = 1; i < chain.size(); ++i)
            if (eval_abs(chain[i], r) < 1e-6 * scale * (1.0 + std::abs(static_cast<double>(content(chain[i])))))
                ++mult;
        for (int m = 0; m < mult; ++m) out.push_back(r);
    }
    if (static_cast<int>(out.size()) != n)
        throw no_convergence("eigenvalue multiplicity accounting failed");
    return out;
}

SpectralData spectral_analysis(const IntegerAutomorphism& M, double tol) {
    if (M.dim() > 6)
        throw unsupported_dimension("spectral analysis supports dimension <= 6");
    SpectralData out;
    out.eigenvalues = integer_poly_roots(M.char_poly());
    std::vector<double> unstable_all;
    out.hyperbolic = true;
    for (const cplx& ev : out.eigenvalues) {
        double m = std::abs(ev);
        if (std::abs(m - 1.0) <= tol) {
            out.hyperbolic = false;
        } else if (m < 1.0) {
            out.moduli_stable.push_back(m);
        } else {
            unstable_all.push_back(m);
        }
    }
    std::sort(out.moduli_stable.begin(), out.moduli_stable.end());
    std::sort(unstable_all.begin(), unstable_all.end());
    out.dim_stable = static_cast<int>(out.moduli_stable.size());
    out.dim_unstable = static_cast<int>(unstable_all.size());
    for (double m : unstable_all) {
        if (out.moduli_unstable.empty() || m - out.moduli_unstable.back() > tol * m)
            out.moduli_unstable.push_back(m);
    }
    if (!out.moduli_stable.empty()) out.mu = 1.0 / out.moduli_stable.back();
    return out;
}

bool is_irreducible(const IntegerAutomorphism& M) {
    if (M.dim() > 6)
        throw unsupported_dimension("irreducibility test supports dimension <= 6");
    IPoly p(M.char_poly());
    p.push_back(1);
    const int d = degree(p);

    // Linear factors x - r need r | p(0) = +-1, so only p(+-1) matter.
    auto eval_int = [&](i64 x) {
        i64 v = 0;
        for (int i = d; i >= 0; --i) v = v * x + p[static_cast<std::size_t>(i)];
        return v;
    };
    const i64 p1 = eval_int(1), pm1 = eval_int(-1);
    if (p1 == 0 || pm1 == 0) return false;
    if (d == 1) return true;

    // Landau bound on factor coefficients via the 2-norm of p.
    double norm2 = 0;
    for (i64 c : p) norm2 += static_cast<double>(c) * static_cast<double>(c);
    const double mahler = std::sqrt(norm2);

    auto divides_exactly = [&](const IPoly& g) {
        IPoly r = p;
        const int dg = degree(g);
        for (int k = d - dg; k >= 0; --k) {
            i64 c = r[static_cast<std::size_t>(k + dg)];
            if (c == 0) continue;
            for (int i = 0; i <= dg; ++i)
                r[static_cast<std::size_t>(k + i)] -= c * g[static_cast<std::size_t>(i)];
        }
        return degree(r) < 0;
    };
    auto eval_poly_int = [](const IPoly& g, i64 x) {
        i64 v = 0;
        for (int i = degree(g); i >= 0; --i) v = v * x + g[static_cast<std::size_t>(i)];
        return v;
    };

    for (int m = 2; m <= d / 2; ++m) {
        // Landau-Mignotte: |g_j| <= C(m,j) * mahler for any monic factor g.
        std::vector<i64> bound(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            double b = 1;
            for (int t = 0; t < j; ++t) b = b * (m - t) / (t + 1);
            bound[static_cast<std::size_t>(j)] = static_cast<i64>(std::ceil(b * mahler)) + 1;
        }
        IPoly g(static_cast<std::size_t>(m) + 1, 0);
        g[static_cast<std::size_t>(m)] = 1;
        // Enumerate middle coefficients; the constant one is forced to +-1.
        std::vector<i64> idx(static_cast<std::size_t>(m) - 1, 0);
        for (i64 c0 : {i64(1), i64(-1)}) {
            g[0] = c0;
            for (std::size_t j = 1; j < static_cast<std::size_t>(m); ++j) idx[j - 1] = -bound[j];
            bool done = false;
            while (!done) {
                for (std::size_t j = 1; j < static_cast<std::size_t>(m); ++j)
                    g[j] = idx[j - 1];
                i64 g1 = eval_poly_int(g, 1), gm1 = eval_poly_int(g, -1);
                if (g1 != 0 && gm1 != 0 && p1 % g1 == 0 && pm1 % gm1 == 0 && divides_exactly(g))
                    return false;
                // odometer increment
                std::size_t pos = 0;
                while (pos < idx.size()) {
                    if (++idx[pos] <= bound[pos + 1]) break;
                    idx[pos] = -bound[pos + 1];
                    ++pos;
                }
                if (pos == idx.size()) done = true;
            }
        }
    }
    return true;
}

GenericityReport genericity_check(const IntegerAutomorphism& M, double tol) {
    GenericityReport rep;
    SpectralData s = spectral_analysis(M, tol);
    rep.hyperbolic = s.hyperbolic;
    rep.irreducible = is_irreducible(M);

    // Cluster eigenvalues by modulus with relative tolerance.
    std::vector<std::pair<double, cplx>> evs;
    for (const cplx& ev : s.eigenvalues) evs.emplace_back(std::abs(ev), ev);
    std::sort(evs.begin(), evs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    rep.no_three_equal_moduli = true;
    rep.equal_moduli_only_conjugate_pairs = true;
    std::size_t i = 0;
    while (i < evs.size()) {
        std::size_t j = i + 1;
        while (j < evs.size() && evs[j].first - evs[i].first <= tol * evs[j].first) ++j;
        const std::size_t count = j - i;
        if (count >= 3) {
            rep.no_three_equal_moduli = false;
            rep.equal_moduli_only_conjugate_pairs = false;
        } else if (count == 2) {
            const cplx a = evs[i].second, b = evs[i + 1].second;
            const bool conj_pair = std::abs(a.imag()) > tol * (1.0 + std::abs(a)) &&
                                   std::abs(b - std::conj(a)) <= tol * (1.0 + std::abs(a));
            if (!conj_pair) rep.equal_moduli_only_conjugate_pairs = false;
        }
        i = j;
    }
    rep.generic = rep.hyperbolic && rep.irreducible && rep.no_three_equal_moduli &&
                  rep.equal_moduli_only_conjugate_pairs;
    return rep;
}

void validate_rates(const RateBounds& r) {
    if (!(r.mu_minus > 1 && r.mu_plus > 1 && r.lambda_minus > 1 && r.lambda_plus > 1))
        throw invalid_input("all rates must be > 1");
    if (!(r.mu_minus <= r.mu_plus) || !(r.lambda_minus <= r.lambda_plus))
        throw invalid_input("rate ordering violated (minus must not exceed plus)");
    if (!(r.C >= 1)) throw invalid_input("rate constant C must be >= 1");
}

BunchingParams bunching_from_rates(const RateBounds& r) {
    validate_rates(r);
    BunchingParams b;
    b.b_s = (std::log(r.lambda_minus) + std::log(r.mu_minus)) / std::log(r.lambda_plus);
    b.b_u = (std::log(r.mu_minus) + std::log(r.lambda_minus)) / std::log(r.mu_plus);
    return b;
}

bool gmt_rate_condition(const RateConditionQuery& q) {
    if (!(q.kappa > 0 && q.kappa <= 1)) throw invalid_input("kappa must lie in (0,1]");
    validate_rates(q.rates);
    const double expo =
        std::min({q.kappa, q.kappa * q.bunching.b_u, q.bunching.b_s - 1.0});
    return std::pow(q.rates.mu_minus, -expo) * q.rates.lambda_plus < 1.0;
}

bool codim1_bunching_check(const SpectralData& s) {
    if (s.dim_stable != 1)
        throw unsupported_signature("codimension-one bunching needs a 1-D stable modulus set");
    if (s.moduli_unstable.empty())
        throw unsupported_signature("no unstable spectrum");
    const double lm = std::log(s.mu);
    const double x1 = std::log(s.moduli_unstable.front());
    const double xl = std::log(s.moduli_unstable.back());
    return lm * lm - xl * xl > lm * (xl - x1);
}

RegularityResult matching_regularity_k(double eta) {
    if (!(eta > 0)) throw invalid_input("eta must be positive");
    RegularityResult r;
    r.k = (2.0 * eta + 2.0) / (2.0 * eta + 1.0);
    r.admissible = r.k > eta;
    return r;
}

BrinPinchingResult brin_pinching_check(const RateBounds& r) {
    validate_rates(r);
    BrinPinchingResult out;
    out.first = 1.0 + std::log(r.lambda_minus) / std::log(r.lambda_plus) >
                std::log(r.mu_plus) / std::log(r.mu_minus);
    out.second = 1.0 + std::log(r.mu_minus) / std::log(r.mu_plus) >
                 std::log(r.lambda_plus) / std::log(r.lambda_minus);
    return out;
}

} // namespace anosov
