#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "pflqr/design.hpp"
#include "pflqr/loss.hpp"
#include "pflqr/trust_region.hpp"

namespace pflqr {

struct BasisSpec {
  int k0 = 15;
  int ky = 15;
  int kx = 15;
  int degree = 3;

  void validate() const;
};

// Alpha and psi bases on the response domain, vartheta on the predictor domain.
BasisTriple make_bases(const BasisSpec& spec, const FunctionalSample& y,
                       const FunctionalSample& x);

struct FitOptions {
  BasisSpec basis;
  QuadratureRule rule = QuadratureRule::LeftRectangle;
  double trim_fraction = 1.0;
  TrustRegionOptions optimizer = default_fit_optimizer();

  static TrustRegionOptions default_fit_optimizer();
};

enum class FitMethod { Quantile, LeastSquares };

struct QuantileFit {
  FitMethod method = FitMethod::Quantile;
  BasisTriple bases;
  QuadratureRule rule = QuadratureRule::LeftRectangle;
  Eigen::VectorXd t_grid;  // response grid used for fitting
  Eigen::VectorXd s_grid;  // predictor grid used for fitting
  Eigen::VectorXd a;
  Eigen::VectorXd b;  // y-basis index fastest
  double tau = 0.5;
  double gamma = 0.005;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double trim_fraction = 1.0;
  double objective_value = 0.0;
  double initial_objective = 0.0;
  std::vector<int> trim_set;  // curves counted in the objective at the solution
  TrustRegionDiagnostics diagnostics;
  bool converged = true;

  Eigen::VectorXd theta() const;
  LossConfig loss_config() const { return {tau, gamma, trim_fraction}; }
};

// Solves (Pi^T Pi + P) theta = Pi^T vec(Y). Adds 1e-10 * trace to the
// diagonal when the system is not positive definite.
Eigen::VectorXd init_penalized_ls(const DesignPack& design, const Eigen::MatrixXd& y,
                                  double lambda1, double lambda2);

// Objective minimised by fit(): smoothed loss plus half the penalty. With
// trimming the data term sums the trimmed_count smallest curve losses, so the
// retained set is re-chosen at every evaluation.
double fit_objective(const Eigen::Ref<const Eigen::VectorXd>& theta, const DesignPack& design,
                     const Eigen::MatrixXd& y, const LossConfig& cfg,
                     const Eigen::MatrixXd& penalty);

QuantileFit fit(const FunctionalSample& y, const FunctionalSample& x, double tau, double gamma,
                double lambda1, double lambda2, const FitOptions& opts = {});

// The penalized least-squares estimate wrapped as a fit (no optimizer run).
QuantileFit fit_least_squares(const FunctionalSample& y, const FunctionalSample& x,
                              double lambda1, double lambda2, const FitOptions& opts = {});

// Objective of fit at its own coefficients, recomputed from the data.
double recompute_objective(const QuantileFit& fit, const FunctionalSample& y,
                           const FunctionalSample& x);

// n_new x |t_grid| predicted curves alpha(t) + integral X(s) beta(t, s) ds.
Eigen::MatrixXd predict(const QuantileFit& fit, const FunctionalSample& x_new,
                        const Eigen::VectorXd& t_grid);
Eigen::MatrixXd predict(const QuantileFit& fit, const FunctionalSample& x_new);

Surfaces reconstruct_surfaces(const QuantileFit& fit, const Eigen::VectorXd& t_grid,
                              const Eigen::VectorXd& s_grid);

struct IntervalPrediction {
  double tau_lo = 0.0;
  double tau_hi = 0.0;
  Eigen::MatrixXd lower;
  Eigen::MatrixXd upper;
  double crossing_fraction = 0.0;  // share of points with lower > upper
  QuantileFit fit_lo;
  QuantileFit fit_hi;
};

std::pair<double, double> interval_levels(double level);

IntervalPrediction prediction_interval(const FunctionalSample& y, const FunctionalSample& x,
                                       const FunctionalSample& x_new, double gamma,
                                       std::pair<double, double> lambdas_lo,
                                       std::pair<double, double> lambdas_hi,
                                       double level = 0.95, const FitOptions& opts = {});

// Fraction of entries with lower > upper.
double crossing_fraction(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& upper);

}  // namespace pflqr
