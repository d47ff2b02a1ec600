#include "pflqr/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pflqr/errors.hpp"

namespace pflqr {

void LossConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be positive");
  if (!(trim_fraction > 0.0 && trim_fraction <= 1.0)) {
    throw InvalidArgument("trim_fraction must lie in (0, 1]");
  }
}

double check_loss(double u, double tau) { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

double smooth_check_loss(double u, double tau, double gamma) {
  // softplus(z) = max(z, 0) + log1p(exp(-|z|)) with z = -u / gamma
  const double z = -u / gamma;
  const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
  return tau * u + gamma * softplus;
}

double smooth_check_loss_derivative(double u, double tau, double gamma) {
  // d/du gamma*softplus(-u/gamma) = -sigmoid(-u/gamma)
  const double z = -u / gamma;
  const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return tau - sig;
}

int trimmed_count(int n, double trim_fraction) {
  const double k = std::nearbyint(trim_fraction * n);  // default mode rounds half to even
  return std::clamp(static_cast<int>(k), 1, std::max(n, 1));
}

namespace {

void check_dims(const Eigen::Ref<const Eigen::VectorXd>& theta, const DesignPack& design,
                const Eigen::MatrixXd& y) {
  if (theta.size() != design.num_coefficients()) {
    throw DimensionMismatch("coefficient vector length does not match the design");
  }
  if (y.rows() != design.num_curves() || y.cols() != design.num_points()) {
    std::ostringstream msg;
    msg << "response is " << y.rows() << "x" << y.cols() << " but design expects "
        << design.num_curves() << "x" << design.num_points();
    throw DimensionMismatch(msg.str());
  }
}

double penalty_term(const Eigen::Ref<const Eigen::VectorXd>& theta, const Eigen::MatrixXd& penalty) {
  if (penalty.size() == 0) return 0.0;
  if (penalty.rows() != theta.size() || penalty.cols() != theta.size()) {
    throw DimensionMismatch("penalty matrix does not match the coefficient vector");
  }
  return 0.5 * theta.dot(penalty * theta);
}

}  // namespace

Eigen::VectorXd per_curve_loss(const Eigen::Ref<const Eigen::VectorXd>& theta,
                               const DesignPack& design, const Eigen::MatrixXd& y,
                               const LossConfig& cfg) {
  check_dims(theta, design, y);
  const Eigen::MatrixXd resid = y - design.fitted(theta);
  Eigen::VectorXd out(resid.rows());
  for (Eigen::Index i = 0; i < resid.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < resid.cols(); ++j) {
      s += smooth_check_loss(resid(i, j), cfg.tau, cfg.gamma);
    }
    out[i] = s;
  }
  return out;
}

double smoothed_objective(const Eigen::Ref<const Eigen::VectorXd>& theta,
                          const DesignPack& design, const Eigen::MatrixXd& y,
                          const LossConfig& cfg, const Eigen::MatrixXd& penalty) {
  return per_curve_loss(theta, design, y, cfg).sum() + penalty_term(theta, penalty);
}

double trimmed_objective(const Eigen::Ref<const Eigen::VectorXd>& theta,
                         const DesignPack& design, const Eigen::MatrixXd& y,
                         const LossConfig& cfg, const Eigen::MatrixXd& penalty,
                         const std::vector<int>& trim_set) {
  const int n = design.num_curves();
  const int expected = trimmed_count(n, cfg.trim_fraction);
  if (static_cast<int>(trim_set.size()) != expected) {
    std::ostringstream msg;
    msg << "trim set has " << trim_set.size() << " curves, expected " << expected;
    throw BadTrimSet(msg.str());
  }
  std::vector<char> seen(n, 0);
  for (int i : trim_set) {
    if (i < 0 || i >= n || seen[i]) throw BadTrimSet("trim set has invalid or repeated index");
    seen[i] = 1;
  }
  const Eigen::VectorXd losses = per_curve_loss(theta, design, y, cfg);
  double s = 0.0;
  for (int i : trim_set) s += losses[i];
  return s + penalty_term(theta, penalty);
}

std::vector<int> smallest_indices(const Eigen::VectorXd& losses, int count) {
  std::vector<int> idx(losses.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return losses[a] < losses[b]; });
  idx.resize(std::min<std::size_t>(idx.size(), std::max(count, 0)));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<int> select_trim_set(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                 const DesignPack& design, const Eigen::MatrixXd& y,
                                 const LossConfig& cfg) {
  const Eigen::VectorXd losses = per_curve_loss(theta, design, y, cfg);
  return smallest_indices(losses, trimmed_count(design.num_curves(), cfg.trim_fraction));
}

}  // namespace pflqr
