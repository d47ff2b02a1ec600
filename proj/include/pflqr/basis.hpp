#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace pflqr {

// Clamped B-spline basis on a closed interval [lo, hi] with equally spaced
// interior knots. The first and last degree+1 knots coincide with the
// endpoints, so the basis forms a partition of unity on the whole interval
// and only the first (last) function is nonzero at lo (hi).
class BSplineBasis {
 public:
  BSplineBasis(double lo, double hi, int num_basis, int degree = 3);
  BSplineBasis() : BSplineBasis(0.0, 1.0, 4, 3) {}

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  int degree() const { return degree_; }
  int size() const { return num_basis_; }
  const Eigen::VectorXd& knots() const { return knots_; }

  bool contains(double t) const { return t >= lo_ && t <= hi_; }

  // Index of the knot span [knots[s], knots[s+1]) holding t. At t == hi the
  // last non-empty span is returned.
  int span(double t) const;

  // Values of the degree+1 functions that are nonzero on the span of t,
  // together with their first max_deriv derivatives. Row q holds the q-th
  // derivative; column c corresponds to basis function span - degree + c.
  Eigen::MatrixXd local_derivatives(double t, int max_deriv) const;

  // Distinct breakpoints lo = u_0 < u_1 < ... < u_S = hi.
  std::vector<double> breakpoints() const;

  bool operator==(const BSplineBasis& other) const;

 private:
  double lo_;
  double hi_;
  int num_basis_;
  int degree_;
  Eigen::VectorXd knots_;
};

BSplineBasis make_basis(double lo, double hi, int num_basis, int degree = 3);

// |points| x K matrix whose row j holds the deriv_order-th derivative of every
// basis function at points[j]. deriv_order must be 0, 1 or 2.
Eigen::MatrixXd eval_basis(const BSplineBasis& basis,
                           const Eigen::Ref<const Eigen::VectorXd>& points,
                           int deriv_order = 0);

// P_kk' = integral of phi_k'' phi_k'' over the domain.
Eigen::MatrixXd second_derivative_penalty(const BSplineBasis& basis);

// G_kk' = integral of phi_k phi_k' over the domain.
Eigen::MatrixXd gram_matrix(const BSplineBasis& basis);

// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int order);

// The five matrices the roughness penalties are assembled from.
struct PenaltySet {
  Eigen::MatrixXd P_alpha;     // K0 x K0, intercept roughness
  Eigen::MatrixXd P_y;         // Ky x Ky, t-direction roughness
  Eigen::MatrixXd P_x;         // Kx x Kx, s-direction roughness
  Eigen::MatrixXd gram_psi;    // Ky x Ky, integral psi psi^T
  Eigen::MatrixXd gram_theta;  // Kx x Kx, integral theta theta^T
};

PenaltySet make_penalty_set(const BSplineBasis& alpha_basis,
                            const BSplineBasis& y_basis,
                            const BSplineBasis& x_basis);

}  // namespace pflqr
