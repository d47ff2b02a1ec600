#include "pflqr/design.hpp"

#include <cmath>
#include <sstream>

#include "pflqr/errors.hpp"

namespace pflqr {

void FunctionalSample::validate() const {
  if (values.cols() != grid.size()) {
    std::ostringstream msg;
    msg << "sample has " << values.cols() << " columns but grid has "
        << grid.size() << " points";
    throw DimensionMismatch(msg.str());
  }
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    if (!std::isfinite(grid[j])) throw InvalidArgument("grid contains non-finite value");
    if (j > 0 && !(grid[j] > grid[j - 1])) {
      throw InvalidArgument("grid must be strictly increasing");
    }
    if (grid[j] < domain_lo || grid[j] > domain_hi) {
      std::ostringstream msg;
      msg << "grid point " << grid[j] << " outside domain [" << domain_lo << ", "
          << domain_hi << "]";
      throw PointOutOfDomain(msg.str());
    }
  }
  if (!values.allFinite()) throw InvalidArgument("sample values must be finite");
}

Eigen::VectorXd quadrature_weights(const Eigen::VectorXd& grid, QuadratureRule rule) {
  const Eigen::Index G = grid.size();
  if (G < 2) throw GridTooShort("quadrature needs at least two grid points");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(G);
  for (Eigen::Index r = 0; r + 1 < G; ++r) {
    const double delta = grid[r + 1] - grid[r];
    if (rule == QuadratureRule::LeftRectangle) {
      w[r] += delta;
    } else {
      w[r] += 0.5 * delta;
      w[r + 1] += 0.5 * delta;
    }
  }
  return w;
}

Eigen::MatrixXd integrate_predictor(const FunctionalSample& x,
                                    const BSplineBasis& sbasis,
                                    QuadratureRule rule) {
  if (x.grid.size() < 2) throw GridTooShort("predictor grid needs at least two points");
  if (x.values.cols() != x.grid.size()) {
    throw DimensionMismatch("predictor values do not match its grid");
  }
  const Eigen::VectorXd w = quadrature_weights(x.grid, rule);
  const Eigen::MatrixXd basis_at_s = eval_basis(sbasis, x.grid, 0);  // G x Kx
  return x.values * w.asDiagonal() * basis_at_s;
}

Eigen::MatrixXd DesignPack::fitted(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  const int K0 = k0(), Ky = ky(), Kx = kx();
  if (theta.size() != num_coefficients()) {
    throw DimensionMismatch("coefficient vector has wrong length");
  }
  const Eigen::VectorXd alpha = phi_t * theta.head(K0);  // M
  Eigen::Map<const Eigen::MatrixXd> B(theta.data() + K0, Ky, Kx);
  Eigen::MatrixXd out = (theta_tilde * B.transpose()) * psi_t.transpose();  // n x M
  out.rowwise() += alpha.transpose();
  return out;
}

Eigen::MatrixXd DesignPack::dense() const {
  const int n = num_curves(), M = num_points(), K0 = k0(), Ky = ky(), Kx = kx();
  Eigen::MatrixXd pi(static_cast<Eigen::Index>(n) * M, num_coefficients());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < M; ++j) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * M + j;
      pi.row(row).head(K0) = phi_t.row(j);
      for (int p = 0; p < Kx; ++p) {
        pi.row(row).segment(K0 + p * Ky, Ky) = theta_tilde(i, p) * psi_t.row(j);
      }
    }
  }
  return pi;
}

Eigen::MatrixXd DesignPack::gram() const {
  const int n = num_curves(), K0 = k0(), Ky = ky(), Kx = kx();
  const int v = num_coefficients();
  Eigen::MatrixXd g(v, v);
  const Eigen::MatrixXd phi_phi = phi_t.transpose() * phi_t;
  const Eigen::MatrixXd phi_psi = phi_t.transpose() * psi_t;
  const Eigen::MatrixXd psi_psi = psi_t.transpose() * psi_t;
  const Eigen::VectorXd score_sum = theta_tilde.colwise().sum().transpose();
  const Eigen::MatrixXd score_gram = theta_tilde.transpose() * theta_tilde;
  g.topLeftCorner(K0, K0) = n * phi_phi;
  for (int p = 0; p < Kx; ++p) {
    g.block(0, K0 + p * Ky, K0, Ky) = score_sum[p] * phi_psi;
  }
  g.bottomLeftCorner(Ky * Kx, K0) = g.topRightCorner(K0, Ky * Kx).transpose();
  g.bottomRightCorner(Ky * Kx, Ky * Kx) = kron(score_gram, psi_psi);
  return g;
}

Eigen::VectorXd DesignPack::cross(const Eigen::MatrixXd& y) const {
  const int K0 = k0(), Ky = ky(), Kx = kx();
  if (y.rows() != num_curves() || y.cols() != num_points()) {
    throw DimensionMismatch("response matrix does not match design");
  }
  Eigen::VectorXd out(num_coefficients());
  out.head(K0) = phi_t.transpose() * y.colwise().sum().transpose();
  const Eigen::MatrixXd c = psi_t.transpose() * y.transpose() * theta_tilde;  // Ky x Kx
  out.tail(Ky * Kx) = Eigen::Map<const Eigen::VectorXd>(c.data(), Ky * Kx);
  return out;
}

DesignPack make_design(const Eigen::VectorXd& y_grid, const FunctionalSample& x,
                       const BasisTriple& bases, QuadratureRule rule) {
  if (y_grid.size() < 1) throw DimensionMismatch("response grid is empty");
  DesignPack pack{bases, y_grid, {}, {}, {}, {}, rule};
  pack.phi_t = eval_basis(bases.alpha, y_grid, 0);
  pack.psi_t = eval_basis(bases.y, y_grid, 0);
  pack.theta_tilde = integrate_predictor(x, bases.x, rule);
  pack.penalty = make_penalty_set(bases.alpha, bases.y, bases.x);
  return pack;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Eigen::MatrixXd assemble_penalty(const PenaltySet& penalty, double lambda1,
                                 double lambda2) {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw InvalidArgument("smoothing parameters must be nonnegative");
  }
  const Eigen::Index K0 = penalty.P_alpha.rows();
  const Eigen::Index Kb = penalty.P_y.rows() * penalty.P_x.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(K0 + Kb, K0 + Kb);
  out.topLeftCorner(K0, K0) = lambda1 * penalty.P_alpha;
  out.bottomRightCorner(Kb, Kb) =
      lambda2 * (kron(penalty.gram_theta, penalty.P_y) + kron(penalty.P_x, penalty.gram_psi));
  return out;
}

std::pair<DesignPack, Eigen::MatrixXd> build_design(const Eigen::VectorXd& y_grid,
                                                    const FunctionalSample& x,
                                                    const BasisTriple& bases,
                                                    double lambda1, double lambda2,
                                                    QuadratureRule rule) {
  DesignPack pack = make_design(y_grid, x, bases, rule);
  Eigen::MatrixXd pen = assemble_penalty(pack.penalty, lambda1, lambda2);
  return {std::move(pack), std::move(pen)};
}

Surfaces reconstruct_surfaces(const BasisTriple& bases,
                              const Eigen::Ref<const Eigen::VectorXd>& a,
                              const Eigen::Ref<const Eigen::VectorXd>& b,
                              const Eigen::VectorXd& t_grid,
                              const Eigen::VectorXd& s_grid) {
  const int Ky = bases.y.size(), Kx = bases.x.size();
  if (a.size() != bases.alpha.size() || b.size() != Ky * Kx) {
    throw DimensionMismatch("coefficient lengths do not match the bases");
  }
  Surfaces out;
  out.alpha = eval_basis(bases.alpha, t_grid, 0) * a;
  Eigen::Map<const Eigen::MatrixXd> B(b.data(), Ky, Kx);
  out.beta = eval_basis(bases.y, t_grid, 0) * B * eval_basis(bases.x, s_grid, 0).transpose();
  return out;
}

}  // namespace pflqr
