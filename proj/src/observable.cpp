#include "anosovlab/observable.hpp"

#include <cmath>
#include <numbers>

namespace anosov {
namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

void validate_terms(const std::vector<TrigTerm>& terms, int dim) {
    if (dim < 1) throw invalid_input("observable dimension must be positive");
    for (const TrigTerm& t : terms) {
        if (t.frequency.size() != dim)
            throw invalid_input("trig term frequency dimension mismatch");
        if (t.kind == TrigTerm::Kind::Sin && t.frequency.isZero())
            throw invalid_input("sin term with zero frequency vanishes");
    }
}

double eval_terms(const std::vector<TrigTerm>& terms, const TorusPoint& x) {
    double v = 0;
    for (const TrigTerm& t : terms) {
        double phase = two_pi * t.frequency.cast<double>().dot(x);
        v += t.amplitude *
             (t.kind == TrigTerm::Kind::Sin ? std::sin(phase) : std::cos(phase));
    }
    return v;
}

Eigen::VectorXd grad_terms(const std::vector<TrigTerm>& terms, int dim,
                           const TorusPoint& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    for (const TrigTerm& t : terms) {
        double phase = two_pi * t.frequency.cast<double>().dot(x);
        double deriv = t.amplitude * two_pi *
                       (t.kind == TrigTerm::Kind::Sin ? std::cos(phase)
                                                      : -std::sin(phase));
        g += deriv * t.frequency.cast<double>();
    }
    return g;
}

double lip_terms(const std::vector<TrigTerm>& terms) {
    double lip = 0;
    for (const TrigTerm& t : terms)
        lip += std::abs(t.amplitude) * two_pi * t.frequency.cast<double>().norm();
    return lip;
}

double restricted_log_det(const PerturbedMap& f, const TorusPoint& x, bool unstable) {
    SplittingFrame at_x = splitting_at(f, x);
    SplittingFrame at_fx = splitting_at(f, f.eval(x));
    const Eigen::MatrixXd& bx = unstable ? at_x.unstable_basis : at_x.stable_basis;
    const Eigen::MatrixXd& bf = unstable ? at_fx.unstable_basis : at_fx.stable_basis;
    double det = (bf.transpose() * f.derivative(x) * bx).determinant();
    return std::log(std::abs(det));
}

} // namespace

Observable Observable::trig_poly(std::vector<TrigTerm> terms, int dim) {
    validate_terms(terms, dim);
    Observable o;
    o.variant_ = Variant::TrigPoly;
    o.dim_ = dim;
    o.terms_ = std::move(terms);
    return o;
}

Observable Observable::log_ju(PerturbedMap f) {
    Observable o;
    o.variant_ = Variant::LogJu;
    o.dim_ = f.d();
    o.map_.emplace(std::move(f));
    return o;
}

Observable Observable::log_js(PerturbedMap f) {
    Observable o;
    o.variant_ = Variant::LogJs;
    o.dim_ = f.d();
    o.map_.emplace(std::move(f));
    return o;
}

Observable Observable::log_jfull(PerturbedMap f) {
    Observable o;
    o.variant_ = Variant::LogJFull;
    o.dim_ = f.d();
    o.map_.emplace(std::move(f));
    return o;
}

Observable Observable::coboundary_of(std::vector<TrigTerm> u, double c,
                                     PerturbedMap f) {
    validate_terms(u, f.d());
    Observable o;
    o.variant_ = Variant::Coboundary;
    o.dim_ = f.d();
    o.terms_ = std::move(u);
    o.c_ = c;
    o.map_.emplace(std::move(f));
    return o;
}

const PerturbedMap& Observable::map() const {
    if (!map_) throw invalid_input("observable carries no map");
    return *map_;
}

double Observable::operator()(const TorusPoint& x) const {
    if (x.size() != dim_) throw invalid_input("observable dimension mismatch");
    switch (variant_) {
        case Variant::TrigPoly:
            return eval_terms(terms_, x);
        case Variant::Coboundary:
            return eval_terms(terms_, x) - eval_terms(terms_, map_->eval(wrap(x))) +
                   c_;
        case Variant::LogJu:
            return restricted_log_det(*map_, wrap(x), true);
        case Variant::LogJs:
            return restricted_log_det(*map_, wrap(x), false);
        case Variant::LogJFull:
            return std::log(std::abs(map_->derivative(wrap(x)).determinant()));
    }
    throw invalid_input("unknown observable variant");
}

Eigen::VectorXd Observable::gradient(const TorusPoint& x) const {
    if (x.size() != dim_) throw invalid_input("observable dimension mismatch");
    switch (variant_) {
        case Variant::TrigPoly:
            return grad_terms(terms_, dim_, x);
        case Variant::Coboundary: {
            TorusPoint fx = map_->eval(wrap(x));
            return grad_terms(terms_, dim_, x) -
                   map_->derivative(wrap(x)).transpose() *
                       grad_terms(terms_, dim_, fx);
        }
        default: {
            const double h = 1e-6;
            Eigen::VectorXd g(dim_);
            for (int i = 0; i < dim_; ++i) {
                TorusPoint xp = x, xm = x;
                xp[i] += h;
                xm[i] -= h;
                g[i] = ((*this)(xp) - (*this)(xm)) / (2 * h);
            }
            return g;
        }
    }
}

double Observable::lipschitz_bound() const {
    if (lip_cache_ >= 0) return lip_cache_;
    switch (variant_) {
        case Variant::TrigPoly:
            lip_cache_ = lip_terms(terms_);
            break;
        case Variant::Coboundary: {
            // |grad u(x) - Df(x)^T grad u(f x)| <= lip_u (1 + sup|Df|).
            double op = map_->linear_matrix().operatorNorm() +
                        map_->epsilon() * map_->dp_sup();
            lip_cache_ = lip_terms(terms_) * (1.0 + op);
            break;
        }
        default: {
            double m = 0;
            for (int i = 0; i < 160; ++i)
                m = std::max(m, gradient(sample_point(i, dim_)).norm());
            lip_cache_ = 1.5 * m; // sampled bound, inflated
            break;
        }
    }
    return lip_cache_;
}

} // namespace anosov
