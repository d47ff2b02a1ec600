#pragma once

#include <Eigen/Dense>
#include <utility>

#include "pflqr/basis.hpp"

namespace pflqr {

// n curves observed on a common grid. Row i of values is curve i.
struct FunctionalSample {
  Eigen::VectorXd grid;
  Eigen::MatrixXd values;
  double domain_lo = 0.0;
  double domain_hi = 1.0;

  int num_curves() const { return static_cast<int>(values.rows()); }
  int num_points() const { return static_cast<int>(grid.size()); }

  // Throws when the grid is not strictly increasing, leaves the declared
  // domain, disagrees with the value matrix or values are not finite.
  void validate() const;
};

enum class QuadratureRule { LeftRectangle, Trapezoid };

// Scores theta_tilde(i, p) = sum_r w_r theta_p(s_r) X_i(s_r). The default
// left-rectangle weights are w_r = s_{r+1} - s_r for r < G and 0 for the last
// grid point.
Eigen::MatrixXd integrate_predictor(const FunctionalSample& x,
                                    const BSplineBasis& sbasis,
                                    QuadratureRule rule = QuadratureRule::LeftRectangle);

// Quadrature weights on a grid for the given rule.
Eigen::VectorXd quadrature_weights(const Eigen::VectorXd& grid, QuadratureRule rule);

struct BasisTriple {
  BSplineBasis alpha;  // phi, intercept in t
  BSplineBasis y;      // psi, surface in t
  BSplineBasis x;      // vartheta, surface in s
};

// Everything the objective needs that does not depend on the coefficients.
// The dense design matrix Pi is never stored; rows are generated on demand.
// Coefficient layout: theta = [a (K0), b (Ky*Kx)] with the y-basis index
// varying fastest inside b, i.e. b[p*Ky + l] multiplies psi_l(t) vartheta_p(s).
struct DesignPack {
  BasisTriple bases;
  Eigen::VectorXd t_grid;
  Eigen::MatrixXd phi_t;        // M x K0
  Eigen::MatrixXd psi_t;        // M x Ky
  Eigen::MatrixXd theta_tilde;  // n x Kx
  PenaltySet penalty;
  QuadratureRule rule = QuadratureRule::LeftRectangle;

  int num_curves() const { return static_cast<int>(theta_tilde.rows()); }
  int num_points() const { return static_cast<int>(t_grid.size()); }
  int k0() const { return bases.alpha.size(); }
  int ky() const { return bases.y.size(); }
  int kx() const { return bases.x.size(); }
  int num_coefficients() const { return k0() + ky() * kx(); }

  // n x M matrix of Pi * theta, computed through the Kronecker structure.
  Eigen::MatrixXd fitted(const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  // Dense (n*M) x v design matrix, rows grouped by curve with t fastest.
  Eigen::MatrixXd dense() const;

  // Pi^T Pi and Pi^T vec(Y) without forming Pi.
  Eigen::MatrixXd gram() const;
  Eigen::VectorXd cross(const Eigen::MatrixXd& y) const;
};

DesignPack make_design(const Eigen::VectorXd& y_grid, const FunctionalSample& x,
                       const BasisTriple& bases,
                       QuadratureRule rule = QuadratureRule::LeftRectangle);

// Block-diagonal diag(lambda1 P_alpha, lambda2 (G_theta (x) P_y + P_x (x) G_psi)).
Eigen::MatrixXd assemble_penalty(const PenaltySet& penalty, double lambda1,
                                 double lambda2);

// Design and assembled penalty in one call.
std::pair<DesignPack, Eigen::MatrixXd> build_design(
    const Eigen::VectorXd& y_grid, const FunctionalSample& x,
    const BasisTriple& bases, double lambda1, double lambda2,
    QuadratureRule rule = QuadratureRule::LeftRectangle);

// A (x) B with the usual block layout.
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct Surfaces {
  Eigen::VectorXd alpha;  // |t_grid|
  Eigen::MatrixXd beta;   // |t_grid| x |s_grid|
};

// alpha(t) = phi(t)^T a and beta(t, s) = (vartheta(s)^T (x) psi(t)^T) b.
Surfaces reconstruct_surfaces(const BasisTriple& bases,
                              const Eigen::Ref<const Eigen::VectorXd>& a,
                              const Eigen::Ref<const Eigen::VectorXd>& b,
                              const Eigen::VectorXd& t_grid,
                              const Eigen::VectorXd& s_grid);

}  // namespace pflqr
