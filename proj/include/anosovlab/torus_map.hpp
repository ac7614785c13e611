#pragma once

#include <vector>

#include "errors.hpp"
#include "spectral.hpp"
#include "types.hpp"

namespace anosov {

struct not_anosov_evidence : error {
    using error::error;
};

struct FourierMode {
    enum class Kind { Sin, Cos };
    IntVector frequency;          // k in Z^d; zero only for constant (Cos) modes
    Eigen::VectorXd coefficient;  // vector coefficient in R^d
    Kind kind = Kind::Sin;
};

// Real invariant splitting of the linear model, with spectral projections and
// (when the stable subspace is one-dimensional) the left stable functional.
struct LinearSplitting {
    Eigen::MatrixXd basis_s, basis_u;   // orthonormal columns
    Eigen::MatrixXd proj_s, proj_u;     // spectral projections (not orthogonal)
    int dim_s = 0, dim_u = 0;
    double kappa_s = std::numeric_limits<double>::quiet_NaN(); // signed stable eigenvalue, dim_s == 1
    Eigen::RowVectorXd left_s;          // l with l L = kappa_s l, normalized l * basis_s = 1
};

// f = L + eps * p with p a trigonometric polynomial vector field; the lift
// F(x) = Lx + eps*p(x) commutes with deck transformations exactly.
class PerturbedMap {
  public:
    PerturbedMap(IntegerAutomorphism linear, std::vector<FourierMode> modes,
                 double epsilon, bool volume_preserving_projection = false);

    int d() const { return linear_.dim(); }
    const IntegerAutomorphism& linear() const { return linear_; }
    const Eigen::MatrixXd& linear_matrix() const { return L_; }
    const Eigen::MatrixXd& linear_inverse_matrix() const { return Linv_; }
    const std::vector<FourierMode>& modes() const { return modes_; }
    double epsilon() const { return eps_; }
    bool volume_preserving() const { return vol_proj_; }
    bool is_linear() const { return eps_ == 0.0 || modes_.empty(); }

    const SpectralData& spectral() const { return spectral_; }
    const LinearSplitting& splitting() const { return split_; }

    // sup-norm bounds of the perturbation field and its derivative (exact for
    // trig polynomials), and the contraction budget for the inverse iteration.
    double p_sup() const { return p_sup_; }
    double dp_sup() const { return dp_sup_; }
    double epsilon_budget() const { return budget_; }
    double contraction_factor() const { return eps_ * dp_sup_ * linv_norm_; }

    TorusPoint eval(const TorusPoint& x) const;
    LiftPoint eval_lift(const LiftPoint& x) const;
    Eigen::MatrixXd derivative(const TorusPoint& x) const;
    TorusPoint inverse_eval(const TorusPoint& y, double tol = 1e-14) const;
    LiftPoint inverse_lift(const LiftPoint& y, double tol = 1e-14) const;

    Eigen::VectorXd perturbation(const TorusPoint& x) const;      // p(x)
    Eigen::MatrixXd perturbation_derivative(const TorusPoint& x) const; // Dp(x)

    // Linear-model rates deflated by the C^1 perturbation budget; used to size
    // series truncations. Empirical, not a proof of hyperbolicity.
    RateBounds nominal_rates() const;

    bool operator==(const PerturbedMap& o) const;

  private:
    IntegerAutomorphism linear_;
    std::vector<FourierMode> modes_;
    double eps_;
    bool vol_proj_;
    Eigen::MatrixXd L_, Linv_;
    double p_sup_ = 0, dp_sup_ = 0, linv_norm_ = 0, budget_ = 0;
    SpectralData spectral_;
    LinearSplitting split_;
};

struct SplittingFrame {
    TorusPoint point;
    Eigen::MatrixXd stable_basis;   // d x dim_s, orthonormal
    Eigen::MatrixXd unstable_basis; // d x dim_u, orthonormal
    double residual = 0;            // one-step Df-invariance defect
};

// Power-iteration splitting: unstable frame pushed forward from f^{-K}(x),
// stable frame pulled back from f^{K}(x); K grows until the residual target
// is met. K = 0 selects K adaptively.
SplittingFrame splitting_at(const PerturbedMap& f, const TorusPoint& x, int K = 0,
                            double target_residual = 1e-10);

// Window-extremized empirical rates: n-th roots of extreme singular values of
// the n-step derivative restricted to the computed splitting, over a
// deterministic sample; C is the observed transient constant (inflated 10%,
// not rigorous).
RateBounds estimate_rates(const PerturbedMap& f, int sample_size, int n_steps);

// Deterministic low-discrepancy sample point (Kronecker sequence).
TorusPoint sample_point(int index, int dim);

} // namespace anosov
