#include "anosovlab/shadow.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>

namespace anosov {
namespace {

// Truncation depth for a geometric series with the given per-term factor and
// leading scale so the tail stays below tol.
int series_depth(double factor, double scale, double tol, int cap = 600) {
    if (scale <= 0) return 1;
    if (factor >= 1.0) throw no_convergence("series factor is not contracting");
    double n = std::log(tol * (1 - factor) / (scale + tol)) / std::log(factor);
    int depth = static_cast<int>(std::ceil(n)) + 2;
    return std::clamp(depth, 2, cap);
}

// One sequence-space Newton solve of the shadowing system at fixed window.
// Everything is kept in fundamental-cell coordinates: the pseudo-orbit is a
// list of torus representatives, and the integer jumps m_n reconciling
// F2(p_n) with p_{n+1} on the cover are fixed ahead of the solve.  (A naive
// formulation on lifted orbits is hopeless: backward lifts grow like the
// expansion rate to the window length and their rounding floor swamps tol.)
// Unknown orbit (y_n) near (p_n), interior rows y_{n+1} + m_n - F2(y_n),
// stable-projection pinning at -N and unstable pinning at +N.
LiftPoint shadow_once(const PerturbedMap& f2, const std::vector<TorusPoint>& pseudo,
                      int N, double tol) {
    const int d = f2.d();
    const int n_pts = 2 * N + 1;
    const int dim = d * n_pts;
    const LinearSplitting& ls = f2.splitting();

    std::vector<Eigen::VectorXd> jumps(static_cast<std::size_t>(n_pts - 1));
    for (int i = 0; i + 1 < n_pts; ++i) {
        Eigen::VectorXd gap = f2.eval_lift(pseudo[static_cast<std::size_t>(i)]) -
                              pseudo[static_cast<std::size_t>(i + 1)];
        Eigen::VectorXd m(d);
        for (int r = 0; r < d; ++r) m[r] = std::round(gap[r]);
        if ((gap - m).lpNorm<Eigen::Infinity>() > 0.45)
            throw shadowing_failed("pseudo-orbit jump is not close to a lattice vector");
        jumps[static_cast<std::size_t>(i)] = m;
    }

    Eigen::VectorXd y(dim);
    for (int i = 0; i < n_pts; ++i)
        y.segment(static_cast<Eigen::Index>(i) * d, d) =
            pseudo[static_cast<std::size_t>(i)];

    auto residual = [&](const Eigen::VectorXd& cur) {
        Eigen::VectorXd g(dim);
        for (int i = 0; i + 1 < n_pts; ++i)
            g.segment(static_cast<Eigen::Index>(i) * d, d) =
                cur.segment(static_cast<Eigen::Index>(i + 1) * d, d) +
                jumps[static_cast<std::size_t>(i)] -
                f2.eval_lift(cur.segment(static_cast<Eigen::Index>(i) * d, d));
        // Boundary rows: no stable deviation enters at the left end, no
        // unstable deviation at the right end.
        Eigen::VectorXd dev_l =
            cur.segment(0, d) - pseudo.front();
        Eigen::VectorXd dev_r =
            cur.segment(static_cast<Eigen::Index>(n_pts - 1) * d, d) - pseudo.back();
        Eigen::Index row = static_cast<Eigen::Index>(n_pts - 1) * d;
        g.segment(row, ls.dim_s) = ls.basis_s.transpose() * dev_l;
        g.segment(row + ls.dim_s, ls.dim_u) = ls.basis_u.transpose() * dev_r;
        return g;
    };

    Eigen::VectorXd g = residual(y);
    double res = g.lpNorm<Eigen::Infinity>();
    for (int iter = 0; iter < 30 && res > tol; ++iter) {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(dim) * (static_cast<std::size_t>(d) + 1));
        for (int i = 0; i + 1 < n_pts; ++i) {
            Eigen::MatrixXd Df = f2.derivative(
                wrap(y.segment(static_cast<Eigen::Index>(i) * d, d)));
            for (int r = 0; r < d; ++r) {
                trip.emplace_back(i * d + r, (i + 1) * d + r, 1.0);
                for (int c = 0; c < d; ++c)
                    trip.emplace_back(i * d + r, i * d + c, -Df(r, c));
            }
        }
        const int row0 = (n_pts - 1) * d;
        for (int r = 0; r < ls.dim_s; ++r)
            for (int c = 0; c < d; ++c)
                trip.emplace_back(row0 + r, c, ls.basis_s(c, r));
        for (int r = 0; r < ls.dim_u; ++r)
            for (int c = 0; c < d; ++c)
                trip.emplace_back(row0 + ls.dim_s + r, (n_pts - 1) * d + c,
                                  ls.basis_u(c, r));

        Eigen::SparseMatrix<double> J(dim, dim);
        J.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(J);
        if (lu.info() != Eigen::Success)
            throw shadowing_failed("shadowing system factorization failed");
        Eigen::VectorXd step = lu.solve(-g);

        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h < 25; ++h) {
            Eigen::VectorXd yn = y + scale * step;
            Eigen::VectorXd gn = residual(yn);
            double rn = gn.lpNorm<Eigen::Infinity>();
            if (rn < res || rn < tol) {
                y = yn;
                g = gn;
                res = rn;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) throw shadowing_failed("shadowing newton stalled");
    }
    if (res > tol) throw shadowing_failed("shadowing newton did not converge");
    return y.segment(static_cast<Eigen::Index>(N) * d, d);
}

} // namespace

ConjugacyMap::ConjugacyMap(PerturbedMap f1_, PerturbedMap f2_, int window_,
                           double tol_)
    : f1(std::move(f1_)), f2(std::move(f2_)), window(window_), tol(tol_) {
    if (f1.d() != f2.d() || f1.linear().entries() != f2.linear().entries())
        throw invalid_input("conjugacy requires maps sharing one linear model");
    if (window < 4) throw invalid_input("shadowing window too short");
    if (tol <= 0) throw invalid_input("tolerance must be positive");
}

TorusPoint conjugate_point(const ConjugacyMap& q, const TorusPoint& x) {
    if (x.size() != q.f1.d()) throw invalid_input("point dimension mismatch");
    std::vector<double> key;
    if (q.use_cache) {
        key.assign(x.data(), x.data() + x.size());
        auto it = q.cache.find(key);
        if (it != q.cache.end()) return it->second;
    }

    LiftPoint y_prev;
    bool have_prev = false;
    for (int N = std::min(8, q.window);; N = std::min(2 * N, q.window)) {
        std::vector<TorusPoint> pseudo(static_cast<std::size_t>(2 * N + 1));
        pseudo[static_cast<std::size_t>(N)] = wrap(x);
        for (int n = 1; n <= N; ++n) {
            pseudo[static_cast<std::size_t>(N + n)] =
                q.f1.eval(pseudo[static_cast<std::size_t>(N + n - 1)]);
            pseudo[static_cast<std::size_t>(N - n)] =
                q.f1.inverse_eval(pseudo[static_cast<std::size_t>(N - n + 1)]);
        }
        LiftPoint y0 = shadow_once(q.f2, pseudo, N, q.tol);
        if (have_prev && (y0 - y_prev).norm() < q.tol) {
            TorusPoint h = wrap(y0);
            if (q.use_cache) q.cache.emplace(std::move(key), h);
            return h;
        }
        y_prev = y0;
        have_prev = true;
        if (N == q.window)
            throw window_too_small("shadowed point did not settle within the window");
    }
}

double conjugacy_defect(const ConjugacyMap& q, int grid_size) {
    if (grid_size < 1) throw invalid_input("grid size must be positive");
    const int d = q.f1.d();
    std::int64_t total = 1;
    for (int i = 0; i < d; ++i) total *= grid_size;
    double worst = 0;
    for (std::int64_t idx = 0; idx < total; ++idx) {
        TorusPoint x(d);
        std::int64_t t = idx;
        for (int i = 0; i < d; ++i) {
            x[i] = static_cast<double>(t % grid_size) / grid_size;
            t /= grid_size;
        }
        TorusPoint lhs = conjugate_point(q, q.f1.eval(x));
        TorusPoint rhs = q.f2.eval(conjugate_point(q, x));
        worst = std::max(worst, torus_distance(lhs, rhs));
    }
    return worst;
}

double holder_exponent_estimate(const ConjugacyMap& q, const TorusPoint& base,
                                LeafKind direction,
                                const std::vector<double>& scales) {
    if (scales.size() < 3) throw invalid_input("need at least three scales");
    double lo = *std::min_element(scales.begin(), scales.end());
    double hi = *std::max_element(scales.begin(), scales.end());
    if (lo <= 0) throw invalid_input("scales must be positive");
    if (hi / lo < 100.0) throw invalid_input("scales must span two decades");

    const Eigen::MatrixXd& basis = direction == LeafKind::Stable
                                       ? q.f1.splitting().basis_s
                                       : q.f1.splitting().basis_u;
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(basis.cols());
    dir[0] = 1.0;

    TorusPoint hb = conjugate_point(q, base);
    std::vector<double> xs, ys;
    for (double s : scales) {
        LiftPoint leaf = model_leaf_point(q.f1, base, direction, s * dir);
        TorusPoint hx = conjugate_point(q, wrap(leaf));
        // Regress image displacement against the actual source displacement,
        // not the chart parameter: the chart is built from the model
        // conjugacy, so the parameter itself is already a straightened
        // coordinate and would hide the exponent.
        double disp_x = torus_distance(wrap(leaf), base);
        double disp_h = torus_distance(hx, hb);
        if (std::min(disp_x, disp_h) < 1e3 * q.tol) continue; // below noise
        xs.push_back(std::log(disp_x));
        ys.push_back(std::log(disp_h));
    }
    if (xs.size() < 3)
        throw inconclusive("holder regression has no displacements above noise");

    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx < 1e-12) throw inconclusive("holder regression is degenerate");
    return sxy / sxx;
}

LiftPoint linear_model_conjugacy(const PerturbedMap& f, const LiftPoint& z,
                                 double tol) {
    if (z.size() != f.d()) throw invalid_input("point dimension mismatch");
    if (f.is_linear()) return z;
    const LinearSplitting& ls = f.splitting();
    const double eps = f.epsilon();

    // Contraction per term: stable side advances by L forward powers applied
    // to stable components, unstable side by L^{-1} powers on unstable ones.
    const SpectralData& sp = f.spectral();
    double sigma_s = sp.moduli_stable.empty() ? 0.0 : sp.moduli_stable.back();
    double sigma_u = 0.0;
    for (double m : sp.moduli_unstable) sigma_u = std::max(sigma_u, 1.0 / m);
    double scale = eps * f.p_sup() * 4.0;

    // Both sums run in invariant-subspace coordinates.  Iterating L or L^-1
    // on full vectors would amplify rounding noise in the complementary
    // subspace by the expansion rate per term, which destroys long series;
    // restricted to its own subspace each weight matrix is a contraction.
    const Eigen::MatrixXd& Bs = ls.basis_s;
    const Eigen::MatrixXd& Bu = ls.basis_u;

    // Unstable correction: sum_{n>=0} L^{-(n+1)} P_u g(f^n z), by Horner from
    // the deepest collected term.
    int Nu = series_depth(sigma_u, scale, tol);
    std::vector<Eigen::VectorXd> gu(static_cast<std::size_t>(Nu));
    {
        LiftPoint w = z;
        for (int n = 0; n < Nu; ++n) {
            gu[static_cast<std::size_t>(n)] =
                Bu.transpose() * (ls.proj_u * (eps * f.perturbation(wrap(w))));
            w = f.eval_lift(w);
        }
    }
    Eigen::MatrixXd Uinv =
        (Bu.transpose() * f.linear_matrix() * Bu).inverse(); // L^-1 on E^u
    Eigen::VectorXd cu = Eigen::VectorXd::Zero(ls.dim_u);
    for (int n = Nu - 1; n >= 0; --n)
        cu = Uinv * (gu[static_cast<std::size_t>(n)] + cu);

    // Stable correction: -sum_{n>=1} L^{n-1} P_s g(f^{-n} z).
    int Ns = series_depth(sigma_s, scale, tol);
    std::vector<Eigen::VectorXd> gs(static_cast<std::size_t>(Ns));
    {
        LiftPoint w = z;
        for (int n = 0; n < Ns; ++n) {
            w = f.inverse_lift(w);
            gs[static_cast<std::size_t>(n)] =
                Bs.transpose() * (ls.proj_s * (eps * f.perturbation(wrap(w))));
        }
    }
    Eigen::MatrixXd S = Bs.transpose() * f.linear_matrix() * Bs; // L on E^s
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(ls.dim_s);
    for (int n = Ns - 1; n >= 0; --n)
        cs = S * cs + gs[static_cast<std::size_t>(n)];

    return z + Bu * cu - Bs * cs;
}

LiftPoint linear_model_conjugacy_inverse(const PerturbedMap& f,
                                         const LiftPoint& target, double tol) {
    if (f.is_linear()) return target;
    // Fast path: solve H(z) = target by z <- z - (H(z) - target).  The
    // correction term of H is only Hölder, so its local Lipschitz constant can
    // exceed 1 once eps is a few percent; bail out on stall instead of
    // spinning through the full iteration budget.
    const double tol_eff = tol * std::max(1.0, target.lpNorm<Eigen::Infinity>());
    LiftPoint z = target;
    double best_err = std::numeric_limits<double>::infinity();
    int stalled = 0;
    for (int iter = 0; iter < 200 && stalled < 25; ++iter) {
        LiftPoint image = linear_model_conjugacy(f, z, tol * 0.1);
        Eigen::VectorXd err = image - target;
        if (err.norm() < tol_eff) return z;
        if (err.norm() < 0.5 * best_err) {
            best_err = err.norm();
            stalled = 0;
        } else {
            ++stalled;
        }
        z -= err;
    }
    // Robust path: H^{-1} is itself the conjugacy from the linear model to f
    // (H^{-1} o L = f o H^{-1}), so evaluate it by orbit shadowing.  Both H
    // and H^{-1} commute with deck translations, which transports the wrapped
    // answer back to the requested sheet of the cover.
    PerturbedMap model(f.linear(), {}, 0.0);
    ConjugacyMap q(model, f, 256, std::min(tol, 1e-11));
    TorusPoint wrapped = conjugate_point(q, wrap(target));
    Eigen::VectorXd jump = wrapped - target;
    jump = jump.array() - jump.array().round();
    return target + jump;
}

double leaf_order_coordinate(const PerturbedMap& f, const LiftPoint& z,
                             double tol) {
    const LinearSplitting& ls = f.splitting();
    if (ls.dim_s != 1)
        throw unsupported_signature("leaf order needs a one-dimensional stable bundle");
    return (ls.left_s * linear_model_conjugacy(f, z, tol))(0);
}

LiftPoint model_leaf_point(const PerturbedMap& f, const LiftPoint& base,
                           LeafKind kind, const Eigen::VectorXd& param,
                           double tol) {
    const LinearSplitting& ls = f.splitting();
    const Eigen::MatrixXd& basis =
        kind == LeafKind::Stable ? ls.basis_s : ls.basis_u;
    if (param.size() != basis.cols())
        throw invalid_input("leaf parameter dimension mismatch");
    LiftPoint target = linear_model_conjugacy(f, base, tol) + basis * param;
    return linear_model_conjugacy_inverse(f, target, tol);
}

} // namespace anosov
