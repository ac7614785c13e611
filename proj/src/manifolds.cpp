#include "anosovlab/manifolds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "anosovlab/errors.hpp"
#include "anosovlab/observable.hpp"
#include "anosovlab/shadow.hpp"
#include "leaf_series.hpp"

namespace anosov {
namespace {

// Immutable evaluation state shared by all copies of a chart's sampler.
struct ChartState {
    PerturbedMap f;
    LeafKind kind;
    int depth = 0;
    TorusPoint far;             // wrapped orbit endpoint carrying the seed disk
    Eigen::MatrixXd far_frame;  // adapted tangent frame at far
    LiftPoint anchor;
    Eigen::MatrixXd frame;      // adapted tangent frame at the base
    Eigen::MatrixXd chord;      // seed-parameter -> base-parameter linear model
    double tol_param = 1e-13;

    ChartState(PerturbedMap f_, LeafKind k) : f(std::move(f_)), kind(k) {}
};

LiftPoint chart_shot(const ChartState& st, const Eigen::VectorXd& seed) {
    TorusPoint p = wrap(st.far + st.far_frame * seed);
    if (st.kind == LeafKind::Stable) {
        for (int j = 0; j < st.depth; ++j) p = st.f.inverse_eval(p);
    } else {
        for (int j = 0; j < st.depth; ++j) p = st.f.eval(p);
    }
    return st.anchor + torus_displacement(wrap(st.anchor), p);
}

LiftPoint chart_solve(const ChartState& st, const Eigen::VectorXd& target) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(st.chord);
    Eigen::VectorXd seed = lu.solve(target);
    for (int it = 0; it < 40; ++it) {
        LiftPoint y = chart_shot(st, seed);
        Eigen::VectorXd res = st.frame.transpose() * (y - st.anchor) - target;
        if (res.lpNorm<Eigen::Infinity>() < st.tol_param) return y;
        seed -= lu.solve(res);
    }
    throw chart_failed("leaf chart parameter solve did not converge");
}

}  // namespace

LiftPoint LeafChart::at(double t) const {
    if (param_dim != 1) throw invalid_input("scalar chart access needs param_dim == 1");
    return sample(Eigen::VectorXd::Constant(1, t));
}

Eigen::VectorXd LeafChart::locate(const LiftPoint& y, double* off_leaf) const {
    Eigen::VectorXd param = frame.transpose() * (y - anchor);
    Eigen::VectorXd best_param = param;
    Eigen::VectorXd best_diff = Eigen::VectorXd::Zero(y.size());
    double best = std::numeric_limits<double>::infinity();
    int stalled = 0;
    const double floor_res = std::max(1e-13, 2.0 * noise);
    for (int it = 0; it < 60 && stalled < 6; ++it) {
        Eigen::VectorXd diff = sample(param) - y;
        Eigen::VectorXd res = frame.transpose() * diff;
        if (param.lpNorm<Eigen::Infinity>() > 1.5 * radius)
            throw out_of_chart("point parameter exceeds the chart radius");
        const double rn = res.lpNorm<Eigen::Infinity>();
        if (rn < best) {
            best = rn;
            best_param = param;
            best_diff = diff - frame * res;
            stalled = 0;
        } else {
            ++stalled;
        }
        if (best < floor_res) break;
        param -= res;
    }
    if (best > 1e-8) throw no_convergence("chart point location did not settle");
    if (off_leaf) *off_leaf = best_diff.norm();
    return best_param;
}

double default_chart_radius(const PerturbedMap& f) {
    return std::clamp(0.04 * (1.0 - f.contraction_factor()), 0.004, 0.1);
}

LeafChart leaf_chart(const PerturbedMap& f, const TorusPoint& x, LeafKind kind,
                     double radius, int resolution) {
    const TorusPoint xw = wrap(x);
    const SplittingFrame base_frame = splitting_at(f, xw);
    Eigen::MatrixXd frame =
        kind == LeafKind::Stable ? base_frame.stable_basis : base_frame.unstable_basis;
    const int m = static_cast<int>(frame.cols());
    const double r = radius > 0 ? radius : default_chart_radius(f);
    if (r > 0.25) throw invalid_input("chart radius exceeds the product-structure scale");

    LeafChart chart;
    chart.anchor = xw;
    chart.kind = kind;
    chart.param_dim = m;
    chart.radius = r;
    chart.frame = frame;

    if (f.is_linear()) {
        LiftPoint anchor = chart.anchor;
        chart.sample = [anchor, frame](const Eigen::VectorXd& p) {
            return LiftPoint(anchor + frame * p);
        };
        chart.depth = 0;
    } else {
        const RateBounds nr = f.nominal_rates();
        const double expand = kind == LeafKind::Stable ? nr.mu_plus : nr.lambda_plus;
        const double shrink =
            kind == LeafKind::Stable ? 1.0 / nr.mu_minus : 1.0 / nr.lambda_minus;
        // Rounding in the n-fold pullback grows like expand^n; cap the depth so
        // the parameter noise stays below 1e-9.
        const int cap =
            std::min(64, static_cast<int>(std::floor(std::log(3.0e4) / std::log(expand))));
        if (cap < 6) throw chart_failed("rounding growth leaves no usable pullback depth");

        std::vector<TorusPoint> orbit{xw};
        for (int j = 0; j < cap; ++j)
            orbit.push_back(kind == LeafKind::Stable ? f.eval(orbit.back())
                                                     : f.inverse_eval(orbit.back()));

        auto make_state = [&](int n) {
            ChartState st(f, kind);
            st.depth = n;
            st.far = orbit[static_cast<std::size_t>(n)];
            SplittingFrame ff = splitting_at(f, st.far);
            st.far_frame = kind == LeafKind::Stable ? ff.stable_basis : ff.unstable_basis;
            st.anchor = chart.anchor;
            st.frame = frame;
            st.tol_param = std::max(1e-13, 3e-14 * std::pow(expand, n));
            const double h = std::max(1e-13, 0.05 * r * std::pow(shrink, n));
            Eigen::VectorXd q0 =
                frame.transpose() * (chart_shot(st, Eigen::VectorXd::Zero(m)) - st.anchor);
            Eigen::MatrixXd J(m, m);
            for (int i = 0; i < m; ++i) {
                Eigen::VectorXd probe = Eigen::VectorXd::Zero(m);
                probe(i) = h;
                J.col(i) =
                    (frame.transpose() * (chart_shot(st, probe) - st.anchor) - q0) / h;
            }
            st.chord = J;
            return st;
        };

        std::vector<Eigen::VectorXd> probes;
        for (int i = 0; i < m; ++i) {
            Eigen::VectorXd p = Eigen::VectorXd::Zero(m);
            p(i) = r;
            probes.push_back(p);
            probes.push_back(-p);
        }

        int n = std::min(4, cap - 2);
        ChartState st = make_state(n);
        std::vector<LiftPoint> prev;
        for (const auto& p : probes) prev.push_back(chart_solve(st, p));
        bool settled = false;
        while (n + 2 <= cap) {
            n += 2;
            ChartState next = make_state(n);
            double inc = 0;
            std::vector<LiftPoint> cur;
            for (std::size_t i = 0; i < probes.size(); ++i) {
                cur.push_back(chart_solve(next, probes[i]));
                inc = std::max(inc, (cur[i] - prev[i]).norm());
            }
            st = std::move(next);
            prev = std::move(cur);
            if (inc < std::max(1e-11, 10 * st.tol_param)) {
                settled = true;
                break;
            }
        }
        if (!settled) throw chart_failed("leaf chart pullback increments did not settle");
        chart.depth = n;
        chart.noise = st.tol_param;
        auto state = std::make_shared<const ChartState>(std::move(st));
        chart.sample = [state](const Eigen::VectorXd& p) { return chart_solve(*state, p); };
    }

    if (resolution >= 2) {
        std::vector<Eigen::VectorXd> nodes;
        if (m == 1) {
            for (int i = 0; i < resolution; ++i)
                nodes.push_back(Eigen::VectorXd::Constant(
                    1, -r + 2.0 * r * i / (resolution - 1)));
        } else {
            for (int i = 0; i < resolution; ++i)
                for (int j = 0; j < resolution; ++j) {
                    Eigen::VectorXd p(2);
                    p << -r + 2.0 * r * i / (resolution - 1),
                        -r + 2.0 * r * j / (resolution - 1);
                    nodes.push_back(p);
                }
        }
        for (const auto& p : nodes) chart.table.emplace_back(p, chart.sample(p));
    }
    return chart;
}

HolonomyResult holonomy(const PerturbedMap& f, const TorusPoint& a,
                        const TorusPoint& b, const TorusPoint& x) {
    const LinearSplitting& ls = f.splitting();
    if (ls.dim_s != 1)
        throw unsupported_signature("holonomy requires a one-dimensional stable bundle");
    const TorusPoint aw = wrap(a), bw = wrap(b), xw = wrap(x);
    if (torus_distance(aw, bw) < 1e-14) return HolonomyResult{xw, 0.0, 0};

    const LiftPoint A = aw;
    LiftPoint B = A + torus_displacement(aw, bw);
    LiftPoint X = A + torus_displacement(aw, xw);
    const double r = default_chart_radius(f);
    const double s_ab = (ls.basis_s.transpose() * (B - A)).norm();
    const double u_x = (ls.basis_u.transpose() * (X - A)).norm();

    int k = 0;
    bool fits;
    if (!f.is_linear()) {
        const RateBounds nr = f.nominal_rates();
        const double shrink_s = 1.0 / nr.mu_minus;
        while (k < 200 && s_ab * std::pow(shrink_s, k) > 0.45 * r) ++k;
        fits = k < 200 && u_x * std::pow(nr.lambda_plus, k) <= 0.8 * r;
    } else {
        fits = s_ab <= 0.45 * r && u_x <= 0.8 * r;
    }
    if (!fits) {
        // Pushing forward trades stable separation for unstable growth, and
        // here no exponent balances the two.  Splitting the stable span into
        // model-coordinate pieces divides s while leaving u alone, so compose
        // holonomies along intermediate points of W^s(a) instead.
        const double cap = 0.8 * r;
        const int pieces = static_cast<int>(std::ceil(s_ab / (0.36 * r)));
        if (u_x > cap || pieces < 2 || pieces > 64)
            throw out_of_chart("holonomy data cannot be brought into one chart");
        const LiftPoint ha = linear_model_conjugacy(f, A, 1e-13);
        const LiftPoint hb = linear_model_conjugacy(f, B, 1e-13);
        HolonomyResult acc{xw, 0.0, 0};
        TorusPoint cur_a = wrap(A);
        for (int j = 1; j <= pieces; ++j) {
            const double t = static_cast<double>(j) / pieces;
            const TorusPoint mj =
                j == pieces ? wrap(B)
                            : wrap(linear_model_conjugacy_inverse(
                                  f, LiftPoint(ha + t * (hb - ha)), 1e-12));
            const HolonomyResult piece = holonomy(f, cur_a, mj, acc.image);
            acc.image = piece.image;
            acc.residual += piece.residual;
            acc.extension_depth = std::max(acc.extension_depth, piece.extension_depth);
            cur_a = mj;
        }
        return acc;
    }

    LiftPoint Ak = A, Bk = B, Xk = X;
    for (int j = 0; j < k; ++j) {
        Ak = f.eval_lift(Ak);
        Bk = f.eval_lift(Bk);
        Xk = f.eval_lift(Xk);
    }
    const Eigen::VectorXd shift = Ak.array().floor();
    Bk -= shift;
    Xk -= shift;

    LeafChart cs = leaf_chart(f, wrap(Xk), LeafKind::Stable, r, 0);
    LeafChart cu = leaf_chart(f, wrap(Bk), LeafKind::Unstable, r, 0);
    const Eigen::VectorXd dx = Xk - cs.anchor;  // integer sheet offsets
    const Eigen::VectorXd db = Bk - cu.anchor;

    const int du = cu.param_dim;
    Eigen::MatrixXd J0(f.d(), 1 + du);
    J0 << cs.frame, -cu.frame;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J0);
    Eigen::VectorXd z = -lu.solve(Xk - Bk);

    LiftPoint y_best = Xk;
    double best = std::numeric_limits<double>::infinity();
    int stalled = 0;
    for (int it = 0; it < 60 && stalled < 10; ++it) {
        LiftPoint ys = cs.sample(z.head(1)) + dx;
        LiftPoint yu = cu.sample(z.tail(du)) + db;
        Eigen::VectorXd G = ys - yu;
        const double gn = G.norm();
        if (gn < best) {
            best = gn;
            y_best = ys;
            stalled = 0;
        } else {
            ++stalled;
        }
        if (best < 1e-10) break;
        z -= lu.solve(G);
        if (std::abs(z(0)) > 1.4 * r || z.tail(du).lpNorm<Eigen::Infinity>() > 1.4 * r)
            throw out_of_chart("holonomy intersection leaves the chart");
    }
    if (best > 1e-7)
        throw no_convergence("holonomy intersection did not converge");

    TorusPoint y = wrap(y_best);
    for (int j = 0; j < k; ++j) y = f.inverse_eval(y);
    return HolonomyResult{y, best, k};
}

SeriesValue holonomy_jacobian_series(const PerturbedMap& f, const TorusPoint& a,
                                     const TorusPoint& b, const TorusPoint& x,
                                     double tol, int force_truncation) {
    if (tol <= 0) throw invalid_input("tolerance must be positive");
    const HolonomyResult hol = holonomy(f, a, b, x);
    const Observable ju = Observable::log_ju(f);
    const double lip = ju.lipschitz_bound();
    const double rate =
        f.is_linear() ? 0.5 : std::min(0.99, 1.1 / f.nominal_rates().mu_minus);

    const TorusPoint xw = wrap(x);
    const LiftPoint X = xw;
    const LiftPoint Y = X + torus_displacement(xw, hol.image);
    detail::LeafPairWalk walk(f, LeafKind::Stable, X, Y, false);
    SeriesValue out;
    for (int n = 0; n < 20000; ++n) {
        out.value += ju(walk.principal()) - ju(walk.companion());
        out.truncation = n + 1;
        walk.advance();
        const double geom = lip * walk.d() / (1.0 - rate);
        out.tail_bound = geom + lip * (walk.dropped() / (1.0 - rate) +
                                       3e-13 * out.truncation);
        if (force_truncation >= 0) {
            if (out.truncation >= force_truncation) return out;
            continue;
        }
        if (geom < tol) return out;
    }
    throw no_convergence("holonomy Jacobian series tail did not reach tolerance");
}

SeriesValue srb_density(const PerturbedMap& f, const TorusPoint& a,
                        const TorusPoint& x, double tol, int force_truncation) {
    if (tol <= 0) throw invalid_input("tolerance must be positive");
    const TorusPoint aw = wrap(a), xw = wrap(x);
    if (torus_distance(aw, xw) < 1e-14 && force_truncation < 0)
        return SeriesValue{0.0, 0, 0.0};
    const Observable ju = Observable::log_ju(f);
    const double lip = ju.lipschitz_bound();
    const double rate =
        f.is_linear() ? 0.5 : std::min(0.99, 1.1 / f.nominal_rates().lambda_minus);

    const LiftPoint A = aw;
    const LiftPoint X = A + torus_displacement(aw, xw);
    detail::LeafPairWalk walk(f, LeafKind::Unstable, A, X, true);
    SeriesValue out;
    for (int m = 1; m < 20000; ++m) {
        walk.advance();
        out.value += ju(walk.principal()) - ju(walk.companion());
        out.truncation = m;
        const double geom = lip * walk.d() * rate / (1.0 - rate);
        out.tail_bound = geom + lip * (walk.dropped() / (1.0 - rate) +
                                       3e-13 * out.truncation);
        if (force_truncation >= 0) {
            if (out.truncation >= force_truncation) return out;
            continue;
        }
        if (geom < tol) return out;
    }
    throw no_convergence("density series tail did not reach tolerance");
}

double stable_affine_parameter(const PerturbedMap& f, const TorusPoint& x,
                               const TorusPoint& y) {
    if (f.splitting().dim_s != 1)
        throw unsupported_signature(
            "affine parameter requires a one-dimensional stable bundle");
    const TorusPoint xw = wrap(x), yw = wrap(y);
    const Eigen::VectorXd disp = torus_displacement(xw, yw);
    if (disp.norm() < 1e-15) return 0.0;

    const double span = std::abs((f.splitting().basis_s.transpose() * disp)(0));
    const double r_needed = 1.35 * span + 0.01;
    if (r_needed > 0.25) throw out_of_chart("points are too far apart along the leaf");
    const double r = std::max(default_chart_radius(f), r_needed);
    LeafChart chart = leaf_chart(f, xw, LeafKind::Stable, r, 0);

    double off = 0;
    const double t_y = chart.locate(chart.anchor + disp, &off)(0);
    if (off > 1e-7) throw invalid_input("y does not lie on the stable leaf of x");
    if (std::abs(t_y) < 1e-15) return 0.0;

    const Observable js = Observable::log_js(f);
    const double lip = js.lipschitz_bound();
    const double rate =
        f.is_linear() ? 0.5 : std::min(0.99, 1.1 / f.nominal_rates().mu_minus);

    auto log_density = [&](const LiftPoint& z) {
        detail::LeafPairWalk walk(f, LeafKind::Stable, z, LiftPoint(chart.anchor),
                                  false);
        double sum = 0;
        for (int n = 0; n < 20000; ++n) {
            sum += js(walk.principal()) - js(walk.companion());
            walk.advance();
            if (lip * walk.d() / (1.0 - rate) < 1e-12) return sum;
        }
        throw no_convergence("stable density series did not converge");
    };
    auto integrand = [&](double t) {
        const LiftPoint z = chart.at(t);
        const TorusPoint zw = wrap(z);
        const Eigen::VectorXd tangent = splitting_at(f, zw).stable_basis.col(0);
        const double speed = 1.0 / std::abs((chart.frame.transpose() * tangent)(0));
        return std::exp(log_density(z)) * speed;
    };

    // Composite Simpson over the chart parameter; the integrand is smooth at
    // these radii so 24 panels are far inside the 1e-9 additivity budget.
    const int panels = 24;
    const double h = t_y / panels;
    double total = integrand(0.0) + integrand(t_y);
    for (int i = 1; i < panels; ++i)
        total += integrand(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return total * h / 3.0;
}

}  // namespace anosov
