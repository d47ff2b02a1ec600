#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace pflqr {

// Trapezoid integral of values over grid.
double trapezoid(const Eigen::VectorXd& grid, const Eigen::VectorXd& values);

// Tensor-product trapezoid integral of surface(j, r) over t_grid x s_grid.
double trapezoid_2d(const Eigen::VectorXd& t_grid, const Eigen::VectorXd& s_grid,
                    const Eigen::MatrixXd& surface);

// 100 * ||f - f_hat|| / ||f|| with L2 norms by trapezoid on the grid.
double rrispee(const Eigen::VectorXd& truth, const Eigen::VectorXd& estimate,
               const Eigen::VectorXd& grid);
double rrispee(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate,
               const Eigen::VectorXd& t_grid, const Eigen::VectorXd& s_grid);

// 100 * sqrt(sum ||Y_i - Y_hat_i||^2 / sum ||Y_i||^2) over the grid points.
double rmspe(const Eigen::MatrixXd& y_true, const Eigen::MatrixXd& y_pred);

// Share of (i, j) with lower <= y <= upper.
double empirical_coverage(const Eigen::MatrixXd& y, const Eigen::MatrixXd& lower,
                          const Eigen::MatrixXd& upper);

// |nominal - empirical coverage|.
double coverage_deviance(const Eigen::MatrixXd& y, const Eigen::MatrixXd& lower,
                         const Eigen::MatrixXd& upper, double nominal = 0.95);

// Mean over (i, j) of (u - l) + 2/alpha (l - y)_+ + 2/alpha (y - u)_+.
double interval_score(const Eigen::MatrixXd& y, const Eigen::MatrixXd& lower,
                      const Eigen::MatrixXd& upper, double alpha = 0.05);

struct Summary {
  double mean = 0.0;
  std::optional<double> sd;  // sample sd; empty with fewer than two values
  int count = 0;
};

Summary summarize(const std::vector<double>& values);

// Per-replicate metric columns; missing entries are NaN.
struct EvalReport {
  std::vector<double> rrispee_alpha;
  std::vector<double> rrispee_beta;
  std::vector<double> rmspe;
  std::vector<double> cpd;
  std::vector<double> interval_score;

  // Summary of one column over its finite entries.
  static Summary column_summary(const std::vector<double>& column);
};

}  // namespace pflqr
