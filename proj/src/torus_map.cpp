#include "anosovlab/torus_map.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

namespace anosov {

namespace {

// Thin QR with positive diagonal, so frames are reproducible.
Eigen::MatrixXd qr_pos(const Eigen::MatrixXd& A) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
    Eigen::MatrixXd R = Q.transpose() * A;
    for (Eigen::Index j = 0; j < A.cols(); ++j)
        if (R(j, j) < 0) Q.col(j) = -Q.col(j);
    return Q;
}

void canonical_sign(Eigen::MatrixXd& B) {
    for (Eigen::Index j = 0; j < B.cols(); ++j) {
        Eigen::Index imax = 0;
        B.col(j).cwiseAbs().maxCoeff(&imax);
        if (B(imax, j) < 0) B.col(j) = -B.col(j);
    }
}

LinearSplitting build_splitting(const Eigen::MatrixXd& L, const SpectralData& sd) {
    const int d = static_cast<int>(L.rows());
    LinearSplitting out;
    Eigen::EigenSolver<Eigen::MatrixXd> es(L);
    if (es.info() != Eigen::Success) throw no_convergence("eigen decomposition failed");

    std::vector<Eigen::VectorXd> cols_s, cols_u;
    std::vector<double> real_stable_eig;
    std::vector<bool> used(static_cast<std::size_t>(d), false);
    for (int i = 0; i < d; ++i) {
        if (used[static_cast<std::size_t>(i)]) continue;
        std::complex<double> lam = es.eigenvalues()[i];
        double m = std::abs(lam);
        if (std::abs(lam.imag()) < 1e-12 * (1.0 + m)) {
            Eigen::VectorXd v = es.eigenvectors().col(i).real();
            Eigen::Index imax = 0;
            v.cwiseAbs().maxCoeff(&imax);
            if (v(imax) < 0) v = -v;
            v.normalize();
            if (m < 1.0) {
                cols_s.push_back(v);
                real_stable_eig.push_back(lam.real());
            } else {
                cols_u.push_back(v);
            }
            used[static_cast<std::size_t>(i)] = true;
        } else {
            // Complex pair: use the member with positive imaginary part, with a
            // canonical phase, and consume its conjugate partner.
            int partner = -1;
            for (int j = i + 1; j < d; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                if (std::abs(es.eigenvalues()[j] - std::conj(lam)) < 1e-8 * (1.0 + m)) {
                    partner = j;
                    break;
                }
            }
            Eigen::VectorXcd v = es.eigenvectors().col(lam.imag() > 0 ? i : partner);
            if (lam.imag() < 0) lam = std::conj(lam);
            Eigen::Index imax = 0;
            v.cwiseAbs().maxCoeff(&imax);
            v *= std::conj(v(imax)) / std::abs(v(imax));
            Eigen::VectorXd re = v.real(), im = v.imag();
            if (m < 1.0) {
                cols_s.push_back(re);
                cols_s.push_back(im);
            } else {
                cols_u.push_back(re);
                cols_u.push_back(im);
            }
            used[static_cast<std::size_t>(i)] = true;
            if (partner >= 0) used[static_cast<std::size_t>(partner)] = true;
        }
    }
    out.dim_s = static_cast<int>(cols_s.size());
    out.dim_u = static_cast<int>(cols_u.size());
    if (out.dim_s + out.dim_u != d) throw no_convergence("splitting dimensions inconsistent");

    Eigen::MatrixXd V(d, d);
    for (int j = 0; j < out.dim_s; ++j) V.col(j) = cols_s[static_cast<std::size_t>(j)];
    for (int j = 0; j < out.dim_u; ++j) V.col(out.dim_s + j) = cols_u[static_cast<std::size_t>(j)];
    Eigen::MatrixXd Vinv = V.inverse();
    Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(d, d);
    for (int j = out.dim_s; j < d; ++j) sel(j, j) = 1.0;
    out.proj_u = V * sel * Vinv;
    out.proj_s = Eigen::MatrixXd::Identity(d, d) - out.proj_u;

    if (out.dim_s > 0) {
        out.basis_s = qr_pos(V.leftCols(out.dim_s));
        canonical_sign(out.basis_s);
    } else {
        out.basis_s.resize(d, 0);
    }
    if (out.dim_u > 0) {
        out.basis_u = qr_pos(V.rightCols(out.dim_u));
        canonical_sign(out.basis_u);
    } else {
        out.basis_u.resize(d, 0);
    }

    if (out.dim_s == 1 && !real_stable_eig.empty()) {
        out.kappa_s = real_stable_eig.front();
        Eigen::RowVectorXd l = Vinv.row(0); // stable column sits first in V
        double scale = l * out.basis_s.col(0);
        out.left_s = l / scale;
        if ((out.left_s * L - out.kappa_s * out.left_s).norm() > 1e-9 * L.norm())
            throw no_convergence("left stable functional residual too large");
    }
    (void)sd;
    return out;
}

} // namespace

PerturbedMap::PerturbedMap(IntegerAutomorphism linear, std::vector<FourierMode> modes,
                           double epsilon, bool volume_preserving_projection)
    : linear_(std::move(linear)), modes_(std::move(modes)), eps_(epsilon),
      vol_proj_(volume_preserving_projection) {
    const int d = linear_.dim();
    if (eps_ < 0) throw invalid_input("epsilon must be >= 0");
    L_ = linear_.as_double();
    IntegerAutomorphism inv = linear_.inverse();
    Linv_ = inv.as_double();
    for (const FourierMode& m : modes_) {
        if (m.frequency.size() != d || m.coefficient.size() != d)
            throw invalid_input("mode frequency/coefficient dimension mismatch");
        if (m.frequency.isZero() && m.kind == FourierMode::Kind::Sin)
            throw invalid_input("sin mode with zero frequency is identically zero");
    }

    if (vol_proj_) {
        // Exact unimodularity: with k_i^T L^{-1} c_j = 0 for all pairs the matrix
        // sum_i t_i L^{-1} c_i k_i^T is nilpotent and traceless, so det DF == det L
        // identically; own-frequency orthogonality keeps p divergence-free.
        std::vector<Eigen::VectorXd> adj_rows;
        for (const FourierMode& m : modes_) {
            if (m.frequency.isZero()) continue;
            adj_rows.push_back(inv.entries().cast<double>().transpose() *
                               m.frequency.cast<double>());
        }
        bool any_alive = false;
        for (FourierMode& m : modes_) {
            if (m.frequency.isZero()) { any_alive = true; continue; }
            Eigen::MatrixXd rows(static_cast<Eigen::Index>(adj_rows.size()) + 1, d);
            rows.row(0) = m.frequency.cast<double>().transpose();
            for (std::size_t r = 0; r < adj_rows.size(); ++r)
                rows.row(static_cast<Eigen::Index>(r) + 1) = adj_rows[r].transpose();
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows.transpose(), Eigen::ComputeThinU);
            double smax = svd.singularValues()(0);
            Eigen::VectorXd c = m.coefficient;
            for (Eigen::Index j = 0; j < svd.singularValues().size(); ++j) {
                if (svd.singularValues()(j) > 1e-12 * smax) {
                    Eigen::VectorXd u = svd.matrixU().col(j);
                    c -= u * (u.dot(c));
                }
            }
            m.coefficient = c;
            if (c.norm() > 1e-13) any_alive = true;
        }
        if (!any_alive && !modes_.empty())
            throw invalid_input("volume-preserving projection annihilates all modes");
    }

    for (const FourierMode& m : modes_) {
        p_sup_ += m.coefficient.norm();
        dp_sup_ += 2.0 * M_PI * m.coefficient.norm() * m.frequency.cast<double>().norm();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Linv_);
    linv_norm_ = svd.singularValues()(0);
    budget_ = dp_sup_ > 0 ? 1.0 / (linv_norm_ * dp_sup_) : std::numeric_limits<double>::infinity();

    spectral_ = spectral_analysis(linear_);
    split_ = build_splitting(L_, spectral_);
}

Eigen::VectorXd PerturbedMap::perturbation(const TorusPoint& x) const {
    const TorusPoint w = wrap(x);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d());
    for (const FourierMode& m : modes_) {
        double theta = 2.0 * M_PI * m.frequency.cast<double>().dot(w);
        out += (m.kind == FourierMode::Kind::Sin ? std::sin(theta) : std::cos(theta)) *
               m.coefficient;
    }
    return out;
}

Eigen::MatrixXd PerturbedMap::perturbation_derivative(const TorusPoint& x) const {
    const TorusPoint w = wrap(x);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d(), d());
    for (const FourierMode& m : modes_) {
        if (m.frequency.isZero()) continue;
        double theta = 2.0 * M_PI * m.frequency.cast<double>().dot(w);
        double s = m.kind == FourierMode::Kind::Sin ? std::cos(theta) : -std::sin(theta);
        out += (2.0 * M_PI * s) * m.coefficient * m.frequency.cast<double>().transpose();
    }
    return out;
}

LiftPoint PerturbedMap::eval_lift(const LiftPoint& x) const {
    return L_ * x + eps_ * perturbation(x);
}

TorusPoint PerturbedMap::eval(const TorusPoint& x) const { return wrap(eval_lift(x)); }

Eigen::MatrixXd PerturbedMap::derivative(const TorusPoint& x) const {
    return L_ + eps_ * perturbation_derivative(x);
}

LiftPoint PerturbedMap::inverse_lift(const LiftPoint& y, double tol) const {
    if (contraction_factor() >= 0.95)
        throw invalid_input("epsilon exceeds the inverse-iteration contraction budget");
    // Far out on the cover the absolute increment bottoms out at the rounding
    // floor of the lift coordinates, so the tolerance scales with the point.
    const double tol_eff = tol * std::max(1.0, y.lpNorm<Eigen::Infinity>());
    LiftPoint x = Linv_ * y;
    for (int it = 0; it < 300; ++it) {
        LiftPoint xn = Linv_ * (y - eps_ * perturbation(x));
        double step = (xn - x).norm();
        x = xn;
        if (step <= tol_eff) return x;
    }
    throw no_convergence("inverse iteration did not reach tolerance");
}

TorusPoint PerturbedMap::inverse_eval(const TorusPoint& y, double tol) const {
    return wrap(inverse_lift(y, tol));
}

RateBounds PerturbedMap::nominal_rates() const {
    if (!spectral_.hyperbolic) throw not_anosov_evidence("linear model is not hyperbolic");
    RateBounds r;
    const double gamma = 1.0 - std::min(0.5, contraction_factor());
    r.mu_minus = spectral_.mu * gamma;
    r.mu_plus = (1.0 / spectral_.moduli_stable.front()) / gamma;
    r.lambda_minus = spectral_.moduli_unstable.front() * gamma;
    r.lambda_plus = spectral_.moduli_unstable.back() / gamma;
    Eigen::MatrixXd V(d(), d());
    V << split_.basis_s, split_.basis_u;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(V);
    r.C = (svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1)) /
          gamma;
    return r;
}

bool PerturbedMap::operator==(const PerturbedMap& o) const {
    if (linear_.entries() != o.linear_.entries() || eps_ != o.eps_ ||
        vol_proj_ != o.vol_proj_ || modes_.size() != o.modes_.size())
        return false;
    for (std::size_t i = 0; i < modes_.size(); ++i) {
        if (modes_[i].kind != o.modes_[i].kind ||
            modes_[i].frequency != o.modes_[i].frequency ||
            modes_[i].coefficient != o.modes_[i].coefficient)
            return false;
    }
    return true;
}

SplittingFrame splitting_at(const PerturbedMap& f, const TorusPoint& x, int K,
                            double target_residual) {
    if (!f.spectral().hyperbolic)
        throw not_anosov_evidence("splitting requires a hyperbolic linear model");
    const LinearSplitting& ls = f.splitting();
    const int ds = ls.dim_s, du = ls.dim_u;

    const RateBounds nom = f.nominal_rates();
    const double gap = 1.0 / (nom.lambda_minus * nom.mu_minus);
    int k0 = K > 0 ? K
                   : std::clamp(static_cast<int>(std::ceil(std::log(target_residual) /
                                                           std::log(gap))) + 8,
                                10, 400);

    SplittingFrame best;
    best.residual = std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 6; ++attempt, k0 = K > 0 ? k0 : k0 * 3 / 2) {
        if (k0 > 400) break;
        // Orbit segments through x.
        std::vector<TorusPoint> bwd(static_cast<std::size_t>(k0) + 1);
        std::vector<TorusPoint> fwd(static_cast<std::size_t>(k0) + 2);
        bwd[0] = wrap(x);
        for (int j = 1; j <= k0; ++j) bwd[static_cast<std::size_t>(j)] =
            f.inverse_eval(bwd[static_cast<std::size_t>(j - 1)]);
        fwd[0] = wrap(x);
        for (int j = 1; j <= k0 + 1; ++j) fwd[static_cast<std::size_t>(j)] =
            f.eval(fwd[static_cast<std::size_t>(j - 1)]);

        auto push_u = [&](int start) {
            // Seed at f^{-start}(x), push forward to depth-0 of that chain.
            Eigen::MatrixXd B = ls.basis_u;
            for (int j = start; j >= 1; --j)
                B = qr_pos(f.derivative(bwd[static_cast<std::size_t>(j)]) * B);
            return B;
        };
        auto pull_s = [&](int start_idx, int steps) {
            // Seed at fwd[start_idx], pull back "steps" times.
            Eigen::MatrixXd B = ls.basis_s;
            for (int j = 0; j < steps; ++j) {
                Eigen::MatrixXd Df =
                    f.derivative(fwd[static_cast<std::size_t>(start_idx - 1 - j)]);
                B = qr_pos(Df.partialPivLu().solve(B));
            }
            return B;
        };

        Eigen::MatrixXd Bu_x = du > 0 ? push_u(k0) : Eigen::MatrixXd(f.d(), 0);
        Eigen::MatrixXd Bs_x = ds > 0 ? pull_s(k0, k0) : Eigen::MatrixXd(f.d(), 0);

        // Independent frames at f(x): chains of the same depth, seeded one step
        // apart, so the defect measures genuine convergence.
        double res = 0;
        if (du > 0) {
            // Chain for f(x) seeded one step apart from the chain for x, so the
            // defect below measures the power-iteration increment.
            Eigen::MatrixXd Bu_fx = qr_pos(f.derivative(bwd[0]) * push_u(k0 - 1));
            Eigen::MatrixXd Y = f.derivative(bwd[0]) * Bu_x;
            Eigen::JacobiSVD<Eigen::MatrixXd> sv(Y);
            double smin = sv.singularValues()(sv.singularValues().size() - 1);
            res = std::max(res, (Y - Bu_fx * (Bu_fx.transpose() * Y)).norm() / smin);
        }
        if (ds > 0) {
            Eigen::MatrixXd Bs_fx = pull_s(k0 + 1, k0); // frame at f(x)
            Eigen::MatrixXd Y = f.derivative(bwd[0]) * Bs_x;
            Eigen::JacobiSVD<Eigen::MatrixXd> sv(Y);
            double smin = sv.singularValues()(sv.singularValues().size() - 1);
            res = std::max(res, (Y - Bs_fx * (Bs_fx.transpose() * Y)).norm() / smin);
        }

        if (res < best.residual) {
            best.point = bwd[0];
            best.stable_basis = Bs_x;
            best.unstable_basis = Bu_x;
            best.residual = res;
        }
        if (best.residual <= target_residual || K > 0) break;
    }
    // With an explicit K the caller wants the frame at that depth, whatever the
    // residual; only the adaptive mode promises resolution.
    if (K == 0 && best.residual > std::max(target_residual, 1e-8))
        throw splitting_not_resolved("splitting residual stayed above tolerance");
    canonical_sign(best.stable_basis);
    canonical_sign(best.unstable_basis);
    return best;
}

TorusPoint sample_point(int index, int dim) {
    static const double primes[] = {2, 3, 5, 7, 11, 13};
    TorusPoint x(dim);
    for (int j = 0; j < dim; ++j) {
        double a = std::sqrt(primes[j % 6]);
        a -= std::floor(a);
        x[j] = wrap_unit(0.5 + (index + 1) * a);
    }
    return x;
}

RateBounds estimate_rates(const PerturbedMap& f, int sample_size, int n_steps) {
    if (sample_size < 1 || n_steps < 1)
        throw invalid_input("rate estimation needs positive sample size and window");
    const int ds = f.splitting().dim_s, du = f.splitting().dim_u;
    double mu_minus = std::numeric_limits<double>::infinity(), mu_plus = 0;
    double la_minus = std::numeric_limits<double>::infinity(), la_plus = 0;

    struct Prefix {
        double smax_s, smin_s, smax_u, smin_u;
        int n;
    };
    std::vector<Prefix> prefixes;

    for (int i = 0; i < sample_size; ++i) {
        TorusPoint x = sample_point(i, f.d());
        std::vector<TorusPoint> orbit(static_cast<std::size_t>(n_steps) + 1);
        orbit[0] = x;
        for (int j = 1; j <= n_steps; ++j)
            orbit[static_cast<std::size_t>(j)] = f.eval(orbit[static_cast<std::size_t>(j - 1)]);
        std::vector<SplittingFrame> fr(orbit.size());
        for (std::size_t j = 0; j < orbit.size(); ++j) fr[j] = splitting_at(f, orbit[j]);

        Eigen::MatrixXd Ps = Eigen::MatrixXd::Identity(ds, ds);
        Eigen::MatrixXd Pu = Eigen::MatrixXd::Identity(du, du);
        for (int j = 1; j <= n_steps; ++j) {
            Eigen::MatrixXd Df = f.derivative(orbit[static_cast<std::size_t>(j - 1)]);
            if (ds > 0)
                Ps = (fr[static_cast<std::size_t>(j)].stable_basis.transpose() * Df *
                      fr[static_cast<std::size_t>(j - 1)].stable_basis) *
                     Ps;
            if (du > 0)
                Pu = (fr[static_cast<std::size_t>(j)].unstable_basis.transpose() * Df *
                      fr[static_cast<std::size_t>(j - 1)].unstable_basis) *
                     Pu;
            Prefix p{};
            p.n = j;
            if (ds > 0) {
                Eigen::JacobiSVD<Eigen::MatrixXd> sv(Ps);
                p.smax_s = sv.singularValues()(0);
                p.smin_s = sv.singularValues()(ds - 1);
            }
            if (du > 0) {
                Eigen::JacobiSVD<Eigen::MatrixXd> sv(Pu);
                p.smax_u = sv.singularValues()(0);
                p.smin_u = sv.singularValues()(du - 1);
            }
            prefixes.push_back(p);
            if (j == n_steps) {
                if (ds > 0) {
                    mu_minus = std::min(mu_minus, std::pow(p.smax_s, -1.0 / j));
                    mu_plus = std::max(mu_plus, std::pow(p.smin_s, -1.0 / j));
                }
                if (du > 0) {
                    la_minus = std::min(la_minus, std::pow(p.smin_u, 1.0 / j));
                    la_plus = std::max(la_plus, std::pow(p.smax_u, 1.0 / j));
                }
            }
        }
    }
    // Hyperbolic unimodular matrices always carry both subspaces.
    if (mu_minus <= 1.0)
        throw not_anosov_evidence("stable contraction factor crossed 1");
    if (la_minus <= 1.0)
        throw not_anosov_evidence("unstable expansion factor crossed 1");

    double C = 1.0;
    for (const Prefix& p : prefixes) {
        if (ds > 0) {
            C = std::max(C, p.smax_s * std::pow(mu_minus, p.n));
            C = std::max(C, std::pow(mu_plus, -p.n) / p.smin_s);
        }
        if (du > 0) {
            C = std::max(C, p.smax_u / std::pow(la_plus, p.n));
            C = std::max(C, std::pow(la_minus, p.n) / p.smin_u);
        }
    }
    RateBounds r{mu_minus, mu_plus, la_minus, la_plus, 1.1 * C};
    validate_rates(r);
    return r;
}

} // namespace anosov
