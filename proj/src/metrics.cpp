#include "pflqr/metrics.hpp"

#include <cmath>

#include "pflqr/design.hpp"
#include "pflqr/errors.hpp"

namespace pflqr {

namespace {

void same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(what) + ": matrices differ in shape");
  }
}

}  // namespace

double trapezoid(const Eigen::VectorXd& grid, const Eigen::VectorXd& values) {
  if (grid.size() != values.size()) throw DimensionMismatch("grid and values differ in length");
  return quadrature_weights(grid, QuadratureRule::Trapezoid).dot(values);
}

double trapezoid_2d(const Eigen::VectorXd& t_grid, const Eigen::VectorXd& s_grid,
                    const Eigen::MatrixXd& surface) {
  if (surface.rows() != t_grid.size() || surface.cols() != s_grid.size()) {
    throw DimensionMismatch("surface does not match its grids");
  }
  const Eigen::VectorXd wt = quadrature_weights(t_grid, QuadratureRule::Trapezoid);
  const Eigen::VectorXd ws = quadrature_weights(s_grid, QuadratureRule::Trapezoid);
  return wt.dot(surface * ws);
}

double rrispee(const Eigen::VectorXd& truth, const Eigen::VectorXd& estimate,
               const Eigen::VectorXd& grid) {
  same_shape(truth, estimate, "rrispee");
  const double denom = trapezoid(grid, truth.array().square().matrix());
  if (!(denom > 0.0)) throw ZeroTrueNorm("true function has zero norm");
  const double num = trapezoid(grid, (truth - estimate).array().square().matrix());
  return 100.0 * std::sqrt(num / denom);
}

double rrispee(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate,
               const Eigen::VectorXd& t_grid, const Eigen::VectorXd& s_grid) {
  same_shape(truth, estimate, "rrispee");
  const double denom = trapezoid_2d(t_grid, s_grid, truth.array().square().matrix());
  if (!(denom > 0.0)) throw ZeroTrueNorm("true surface has zero norm");
  const double num = trapezoid_2d(t_grid, s_grid, (truth - estimate).array().square().matrix());
  return 100.0 * std::sqrt(num / denom);
}

double rmspe(const Eigen::MatrixXd& y_true, const Eigen::MatrixXd& y_pred) {
  same_shape(y_true, y_pred, "rmspe");
  const double denom = y_true.squaredNorm();
  if (!(denom > 0.0)) throw ZeroTrueNorm("observed curves have zero norm");
  return 100.0 * std::sqrt((y_true - y_pred).squaredNorm() / denom);
}

double empirical_coverage(const Eigen::MatrixXd& y, const Eigen::MatrixXd& lower,
                          const Eigen::MatrixXd& upper) {
  same_shape(y, lower, "coverage");
  same_shape(y, upper, "coverage");
  if (y.size() == 0) throw DimensionMismatch("coverage of an empty sample");
  const auto inside = (lower.array() <= y.array()) && (y.array() <= upper.array());
  return static_cast<double>(inside.count()) / static_cast<double>(y.size());
}

double coverage_deviance(const Eigen::MatrixXd& y, const Eigen::MatrixXd& lower,
                         const Eigen::MatrixXd& upper, double nominal) {
  return std::abs(nominal - empirical_coverage(y, lower, upper));
}

double interval_score(const Eigen::MatrixXd& y, const Eigen::MatrixXd& lower,
                      const Eigen::MatrixXd& upper, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  same_shape(y, lower, "interval_score");
  same_shape(y, upper, "interval_score");
  if (y.size() == 0) throw DimensionMismatch("interval score of an empty sample");
  const double k = 2.0 / alpha;
  const Eigen::ArrayXXd below = (lower.array() - y.array()).max(0.0);
  const Eigen::ArrayXXd above = (y.array() - upper.array()).max(0.0);
  const Eigen::ArrayXXd score = (upper - lower).array() + k * below + k * above;
  return score.mean();
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    sum += v;
    ++s.count;
  }
  if (s.count == 0) {
    s.mean = std::nan("");
    return s;
  }
  s.mean = sum / s.count;
  if (s.count >= 2) {
    double ss = 0.0;
    for (double v : values)
      if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (s.count - 1));
  }
  return s;
}

Summary EvalReport::column_summary(const std::vector<double>& column) { return summarize(column); }

}  // namespace pflqr
