#include "anosovlab/pcf.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <utility>

#include "anosovlab/errors.hpp"
#include "leaf_series.hpp"

namespace anosov {
namespace {

// Transverse model-coordinate mismatch of a candidate leg.
double leg_residual(const PerturbedMap& f, LeafKind kind, const LiftPoint& start,
                    const LiftPoint& end) {
    const LinearSplitting& ls = f.splitting();
    const Eigen::VectorXd diff = linear_model_conjugacy(f, end, 1e-13) -
                                 linear_model_conjugacy(f, start, 1e-13);
    return kind == LeafKind::Stable ? (ls.proj_u * diff).norm()
                                    : (ls.proj_s * diff).norm();
}

void check_chain(const std::vector<Leg>& legs, bool closed) {
    for (std::size_t i = 0; i + 1 < legs.size(); ++i)
        if ((legs[i].end - legs[i + 1].start).lpNorm<Eigen::Infinity>() > 1e-10)
            throw invalid_leg("path legs do not chain");
    if (closed && !legs.empty()) {
        const Eigen::VectorXd disp = legs.back().end - legs.front().start;
        for (Eigen::Index i = 0; i < disp.size(); ++i)
            if (std::abs(disp[i] - std::round(disp[i])) > 1e-10)
                throw invalid_leg("loop does not close modulo the lattice");
    }
}

// Geometric series shared by both leg kinds.
SeriesValue leg_series(const PerturbedMap& f, const Observable& phi,
                       const Leg& leg, double tol) {
    const double lip = phi.lipschitz_bound();
    const RateBounds nr = f.nominal_rates();
    const bool stable = leg.kind == LeafKind::Stable;
    const double rate = std::min(0.99, 1.1 / (stable ? nr.mu_minus : nr.lambda_minus));

    detail::LeafPairWalk walk(f, leg.kind, leg.start, leg.end, !stable);
    SeriesValue out;
    for (int n = 0; n < 20000; ++n) {
        if (stable) {
            out.value += phi(walk.principal()) - phi(walk.companion());
            out.truncation = n + 1;
            walk.advance();
        } else {
            walk.advance();
            out.value += phi(walk.companion()) - phi(walk.principal());
            out.truncation = n + 1;
        }
        const double geom = stable ? lip * walk.d() / (1.0 - rate)
                                   : lip * walk.d() * rate / (1.0 - rate);
        out.tail_bound = geom + lip * (walk.dropped() / (1.0 - rate) +
                                       3e-13 * out.truncation);
        if (geom < tol) return out;
    }
    throw no_convergence("leg series tail did not reach tolerance");
}

// Merges runs of same-kind legs, cyclically for loops, and checks that the
// result alternates.
std::vector<Leg> merge_alternating(const PerturbedMap& f, std::vector<Leg> legs) {
    if (legs.size() >= 2) {
        // rotate so the seam separates different kinds
        std::size_t pivot = 0;
        while (pivot < legs.size() && legs[pivot].kind == legs.back().kind) ++pivot;
        if (pivot == legs.size())
            throw invalid_input("loop legs all lie on one leaf kind");
        std::rotate(legs.begin(), legs.begin() + pivot, legs.end());
    }
    std::vector<Leg> merged;
    for (const Leg& leg : legs) {
        if (!merged.empty() && merged.back().kind == leg.kind) {
            merged.back() = make_leg(f, leg.kind, merged.back().start, leg.end);
        } else {
            merged.push_back(leg);
        }
    }
    for (std::size_t i = 0; i + 1 < merged.size(); ++i)
        if (merged[i].kind == merged[i + 1].kind)
            throw invalid_input("loop legs do not alternate after merging");
    return merged;
}

}  // namespace

Leg make_leg(const PerturbedMap& f, LeafKind kind, const LiftPoint& start,
             const LiftPoint& end, double max_residual) {
    Leg leg{kind, start, end, 0.0};
    if ((start - end).lpNorm<Eigen::Infinity>() < 1e-14) return leg;
    leg.leaf_residual = leg_residual(f, kind, start, end);
    if (leg.leaf_residual > max_residual)
        throw invalid_leg("leg endpoints do not share a leaf");
    return leg;
}

UsPath make_path(const PerturbedMap& f, std::vector<Leg> legs) {
    (void)f;
    if (legs.empty()) throw invalid_leg("path needs at least one leg");
    check_chain(legs, false);
    return UsPath{std::move(legs)};
}

UsLoop make_loop(const PerturbedMap& f, std::vector<Leg> legs) {
    (void)f;
    if (legs.empty()) throw invalid_leg("loop needs at least one leg");
    check_chain(legs, true);
    const Eigen::VectorXd disp = legs.back().end - legs.front().start;
    IntVector cls(disp.size());
    for (Eigen::Index i = 0; i < disp.size(); ++i)
        cls[i] = static_cast<std::int64_t>(std::llround(disp[i]));
    return UsLoop{std::move(legs), std::move(cls)};
}

UsPath reverse_path(const UsPath& path) {
    UsPath rev;
    rev.legs.reserve(path.legs.size());
    for (auto it = path.legs.rbegin(); it != path.legs.rend(); ++it)
        rev.legs.push_back(Leg{it->kind, it->end, it->start, it->leaf_residual});
    return rev;
}

SeriesValue pcf_leg(const PerturbedMap& f, const Observable& phi, const Leg& leg,
                    double tol) {
    if (tol <= 0) throw invalid_input("tolerance must be positive");
    if ((leg.start - leg.end).lpNorm<Eigen::Infinity>() < 1e-14)
        return SeriesValue{0.0, 0, 0.0};
    if (leg.leaf_residual > 1e-6)
        throw invalid_leg("leg endpoints do not share a leaf");
    return leg_series(f, phi, leg, tol);
}

SeriesValue pcf_path(const PerturbedMap& f, const Observable& phi,
                     const UsPath& path, double tol) {
    check_chain(path.legs, false);
    SeriesValue out;
    for (const Leg& leg : path.legs) {
        const SeriesValue v = pcf_leg(f, phi, leg, tol);
        out.value += v.value;
        out.tail_bound += v.tail_bound;
        out.truncation = std::max(out.truncation, v.truncation);
    }
    return out;
}

SeriesValue pcf_loop(const PerturbedMap& f, const Observable& phi,
                     const UsLoop& loop, double tol) {
    check_chain(loop.legs, true);
    SeriesValue out;
    for (const Leg& leg : loop.legs) {
        const SeriesValue v = pcf_leg(f, phi, leg, tol);
        out.value += v.value;
        out.tail_bound += v.tail_bound;
        out.truncation = std::max(out.truncation, v.truncation);
    }
    return out;
}

SeriesValue simple_pcf(const PerturbedMap& f, const TorusPoint& a,
                       const TorusPoint& b, const TorusPoint& x,
                       const Observable& phi, double tol) {
    const TorusPoint aw = wrap(a), bw = wrap(b), xw = wrap(x);
    if (torus_distance(aw, xw) < 1e-14) return SeriesValue{0.0, 0, 0.0};

    const LiftPoint A = aw;
    const LiftPoint B = A + torus_displacement(aw, bw);
    const LiftPoint X = A + torus_displacement(aw, xw);

    // Corner of the quadrilateral: W^u(b) meets W^s(x).  Solved through the
    // model product structure rather than the chart intersection; the result
    // is the same point but with a residual at solver tolerance, and it
    // varies smoothly with x, which finite-difference callers rely on.
    const LinearSplitting& ls = f.splitting();
    const LiftPoint hb = linear_model_conjugacy(f, B, 1e-13);
    const LiftPoint hx = linear_model_conjugacy(f, X, 1e-13);
    const LiftPoint Y = linear_model_conjugacy_inverse(
        f, ls.proj_s * hb + ls.proj_u * hx, 1e-13);

    const Leg legs[4] = {
        make_leg(f, LeafKind::Stable, A, B),
        make_leg(f, LeafKind::Unstable, B, Y),
        make_leg(f, LeafKind::Stable, Y, X),
        make_leg(f, LeafKind::Unstable, X, A),
    };
    SeriesValue out;
    for (const Leg& leg : legs) {
        const SeriesValue v = pcf_leg(f, phi, leg, tol);
        out.value += v.value;
        out.tail_bound += v.tail_bound;
        out.truncation = std::max(out.truncation, v.truncation);
    }
    return out;
}

Eigen::VectorXd simple_pcf_gradient(const PerturbedMap& f, const TorusPoint& a,
                                    const TorusPoint& b, const TorusPoint& x,
                                    const Observable& phi, double step) {
    if (step <= 0) throw invalid_input("step must be positive");
    LeafChart chart = leaf_chart(f, wrap(x), LeafKind::Unstable, 0.0, 0);
    const int du = chart.param_dim;

    auto value_at = [&](const Eigen::VectorXd& param) {
        return simple_pcf(f, a, b, wrap(chart(param)), phi).value;
    };
    auto central = [&](double s) {
        Eigen::VectorXd g(du);
        for (int i = 0; i < du; ++i) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(du);
            e(i) = s;
            g(i) = (value_at(e) - value_at(-e)) / (2.0 * s);
        }
        return g;
    };
    const Eigen::VectorXd coarse = central(step);
    const Eigen::VectorXd fine = central(step / 2.0);
    const Eigen::VectorXd param_grad = (4.0 * fine - coarse) / 3.0;
    return chart.frame * param_grad;
}

std::vector<UsLoop> loop_decompose(const PerturbedMap& f, const UsLoop& loop) {
    if (!loop.null_homologous())
        throw invalid_input("loop is not null-homologous");
    if (f.splitting().dim_s != 1)
        throw unsupported_signature(
            "loop decomposition requires a one-dimensional stable bundle");

    std::vector<Leg> legs = merge_alternating(f, loop.legs);
    if (legs.size() < 4 || legs.size() % 2 != 0)
        throw invalid_input("loop must have at least four alternating legs");

    std::vector<UsLoop> out;
    while (legs.size() > 4) {
        // unstable leg with the extremal leaf-order coordinate
        const std::size_t n = legs.size();
        std::size_t j = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (legs[i].kind != LeafKind::Unstable) continue;
            const double o = leaf_order_coordinate(f, legs[i].start);
            if (o > best) {
                best = o;
                j = i;
            }
        }

        const Leg& prev = legs[(j + n - 1) % n];
        const Leg& next = legs[(j + 1) % n];
        const LiftPoint w = prev.start;
        const LiftPoint p = prev.end;
        const LiftPoint r = legs[j].end;
        const LiftPoint t = next.end;

        // q = W^u(w) cap W^s(t), read off from the model product structure
        LiftPoint q;
        try {
            const LinearSplitting& ls = f.splitting();
            const LiftPoint target = ls.proj_s * linear_model_conjugacy(f, w, 1e-13) +
                                     ls.proj_u * linear_model_conjugacy(f, t, 1e-13);
            q = linear_model_conjugacy_inverse(f, target, 1e-12);
        } catch (const no_convergence& e) {
            throw decomposition_failed(std::string("leaf intersection failed: ") +
                                       e.what());
        }

        out.push_back(make_loop(
            f, {make_leg(f, LeafKind::Stable, w, p),
                Leg{LeafKind::Unstable, p, r, legs[j].leaf_residual},
                make_leg(f, LeafKind::Stable, r, q),
                make_leg(f, LeafKind::Unstable, q, w)}));

        // shrink: the unstable leg before prev is rerouted to q, bridged to t
        // by a stable leg, and the four legs around the maximum drop out
        std::vector<Leg> rest;
        rest.reserve(n - 2);
        const Leg& lead = legs[(j + n - 2) % n];
        rest.push_back(make_leg(f, LeafKind::Unstable, lead.start, q));
        rest.push_back(make_leg(f, LeafKind::Stable, q, t));
        for (std::size_t i = 0; i + 4 < n; ++i)
            rest.push_back(legs[(j + 2 + i) % n]);
        legs = merge_alternating(f, std::move(rest));
    }
    out.push_back(make_loop(f, std::move(legs)));
    return out;
}

MatchingKernelReport matching_kernel(
    const PerturbedMap& f1, const PerturbedMap& f2, const ConjugacyMap& h,
    const TorusPoint& x, const std::vector<std::pair<TorusPoint, TorusPoint>>& pairs,
    const Observable& phi1, const Observable& phi2, double tol) {
    if (pairs.empty()) throw invalid_input("matching kernel needs at least one pair");
    phi1.lipschitz_bound();  // warm the caches before the parallel section
    phi2.lipschitz_bound();

    const TorusPoint xw = wrap(x);
    LeafChart chart = leaf_chart(f1, xw, LeafKind::Unstable, 0.0, 0);
    const int du = chart.param_dim;
    const double step = 1e-4;

    auto fd_row = [&](const TorusPoint& a, const TorusPoint& b, bool composed) {
        auto value_at = [&](const Eigen::VectorXd& param) {
            TorusPoint z = wrap(chart(param));
            if (composed) z = f1.eval(z);
            return simple_pcf(f1, a, b, z, phi1, tol).value;
        };
        auto central = [&](double s) {
            Eigen::VectorXd g(du);
            for (int i = 0; i < du; ++i) {
                Eigen::VectorXd e = Eigen::VectorXd::Zero(du);
                e(i) = s;
                g(i) = (value_at(e) - value_at(-e)) / (2.0 * s);
            }
            return g;
        };
        const Eigen::VectorXd coarse = central(step);
        const Eigen::VectorXd fine = central(step / 2.0);
        return Eigen::VectorXd((4.0 * fine - coarse) / 3.0);
    };

    auto assemble_pair = [&](std::size_t i) {
        std::vector<Eigen::VectorXd> rows;
        const TorusPoint a = wrap(pairs[i].first), b = wrap(pairs[i].second);
        rows.push_back(fd_row(a, b, false));
        try {
            holonomy(f1, a, b, wrap(f1.eval(xw)));  // reachability probe
            rows.push_back(fd_row(a, b, true));
        } catch (const error&) {
            // f1(x) outside the pair's holonomy reach: composed row skipped
        }
        return rows;
    };

    std::vector<std::future<std::vector<Eigen::VectorXd>>> jobs;
    jobs.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i)
        jobs.push_back(std::async(std::launch::async, assemble_pair, i));
    std::vector<Eigen::VectorXd> rows;
    for (auto& job : jobs)
        for (Eigen::VectorXd& row : job.get()) rows.push_back(std::move(row));

    MatchingKernelReport rep;
    rep.point = xw;
    Eigen::MatrixXd param_rows(static_cast<Eigen::Index>(rows.size()), du);
    for (std::size_t i = 0; i < rows.size(); ++i)
        param_rows.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    rep.gradients = param_rows * chart.frame.transpose();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(param_rows,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd sv = svd.singularValues();
    rep.singular_values.assign(sv.data(), sv.data() + sv.size());
    const double s_max = sv.size() > 0 ? sv(0) : 0.0;
    // relative cutoff, floored by the finite-difference noise of the rows so
    // that all-noise gradient sets read as rank zero
    const double noise_floor = 30.0 * (tol + 1e-9) / step;
    const double cutoff = std::max(1e-6 * s_max, noise_floor);
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff) ++rep.numeric_rank;
        if (sv(i) > cutoff / 10.0 && sv(i) < cutoff * 10.0)
            rep.rank_ambiguous = true;
    }
    rep.kernel_dim = du - rep.numeric_rank;
    rep.kernel_basis =
        chart.frame * svd.matrixV().rightCols(rep.kernel_dim);

    // matching relation rho^{phi1}_{a,b}(y) = rho^{phi2}_{h a, h b}(h y) at y = x
    {
        const TorusPoint a = wrap(pairs.front().first);
        const TorusPoint b = wrap(pairs.front().second);
        TorusPoint y = xw;
        if (torus_distance(y, a) < 1e-12) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(du);
            e(0) = 0.3 * chart.radius;
            y = wrap(chart(e));
        }
        const SeriesValue lhs = simple_pcf(f1, a, b, y, phi1, tol);
        const TorusPoint ha = conjugate_point(h, a);
        const TorusPoint hb = conjugate_point(h, b);
        const TorusPoint hy = conjugate_point(h, y);
        const SeriesValue rhs = simple_pcf(f2, ha, hb, hy, phi2, tol);
        const double defect =
            torus_distance(wrap(f2.eval(hy)), conjugate_point(h, f1.eval(y)));
        const double lips = phi1.lipschitz_bound() + phi2.lipschitz_bound();
        rep.cross_check_gap = std::abs(lhs.value - rhs.value);
        rep.cross_check_tail =
            lhs.tail_bound + rhs.tail_bound + 20.0 * lips * (defect + h.tol);
    }
    return rep;
}

SrbHolonomyIdentity srb_holonomy_identity_check(const PerturbedMap& f,
                                                const TorusPoint& a,
                                                const TorusPoint& b,
                                                const TorusPoint& x, double tol) {
    const Observable ju = Observable::log_ju(f);
    const HolonomyResult hol = holonomy(f, a, b, x);
    const SeriesValue jac = holonomy_jacobian_series(f, a, b, x, tol);
    const SeriesValue th_x = srb_density(f, a, x, tol);
    const SeriesValue th_y = srb_density(f, b, hol.image, tol);
    const SeriesValue rho = simple_pcf(f, a, b, x, ju, tol);

    const LiftPoint A = wrap(a);
    const LiftPoint B = A + torus_displacement(wrap(a), wrap(b));
    const SeriesValue anchor = pcf_leg(f, ju, make_leg(f, LeafKind::Stable, A, B), tol);

    SrbHolonomyIdentity out;
    out.lhs = jac.value + th_y.value - th_x.value;
    out.rhs = anchor.value - rho.value;
    out.gap = std::abs(out.lhs - out.rhs);
    out.combined_tail = jac.tail_bound + th_x.tail_bound + th_y.tail_bound +
                        rho.tail_bound + anchor.tail_bound +
                        2.0 * ju.lipschitz_bound() * hol.residual;
    return out;
}

}  // namespace anosov
