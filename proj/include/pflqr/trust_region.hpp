#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace pflqr {

using Objective = std::function<double(const Eigen::VectorXd&)>;
using HessianProduct = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct TrustRegionOptions {
  double radius0 = 0.1;
  double radius_min = 0.0;  // <= 0 means 1e-7 * radius0
  double radius_max = 0.0;  // <= 0 means 1e4 * radius0
  int max_evals = 0;        // <= 0 means 500 * (v + 1)
  int num_points = 0;       // size of the interpolation set; 0 means 2v + 1
  double accept_ratio = 0.1;
  double expand_ratio = 0.7;
  double expand_factor = 2.0;
  double shrink_factor = 0.5;
  // Points farther than this multiple of the radius from the iterate are
  // replaced by a geometry step before the radius is allowed to shrink.
  double far_factor = 2.0;
  // The KKT system is refactorised whenever the tracked interpolation
  // residuals drift and in any case after this many point updates (0 means
  // 10 * num_points).
  int rebuild_interval = 0;
  // Recompute every interpolation residual after each update. O(m^2 v) per
  // iteration; meant for tests on small problems.
  bool verify_interpolation = false;
};

// Quadratic m(x) = c + g^T w + 1/2 w^T H w with w = x - base and
// H = explicit_hessian + sum_k weights[k] d_k d_k^T, where d_k are the
// columns of dirs (interpolation points relative to base). Keeping most of
// the curvature implicit makes a Frobenius-minimal update O(m) instead of
// O(m v^2).
struct QuadraticModel {
  Eigen::VectorXd base;
  double c = 0.0;
  Eigen::VectorXd g;
  Eigen::MatrixXd explicit_hessian;
  Eigen::VectorXd weights;
  Eigen::MatrixXd dirs;

  int dim() const { return static_cast<int>(base.size()); }

  // Value and gradient in terms of the displacement w = x - base.
  double value_rel(const Eigen::VectorXd& w) const;
  Eigen::VectorXd gradient_rel(const Eigen::VectorXd& w) const;

  double value(const Eigen::VectorXd& x) const { return value_rel(x - base); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return gradient_rel(x - base); }
  Eigen::VectorXd hess_vec(const Eigen::VectorXd& d) const;
  Eigen::MatrixXd hessian() const;
};

enum class StopReason { Running, RadiusBelowMinimum, MaxEvals };

std::string to_string(StopReason reason);

struct TrustRegionState {
  QuadraticModel model;   // owns the interpolation points (base + dirs)
  Eigen::VectorXd fvals;  // objective at each interpolation point
  Eigen::MatrixXd kkt_inverse;  // only the lower triangle is maintained
  int kopt = 0;           // index of the current iterate in the set
  double radius = 0.0;
  int evals = 0;
  int iteration = 0;
  int accepted = 0;
  int geometry_steps = 0;
  int rebuilds = 0;
  int updates_since_rebuild = 0;
  double max_interpolation_error = 0.0;
  Eigen::MatrixXd inner;        // dirs^T dirs
  Eigen::VectorXd residuals;    // f_k - m(y_k), tracked through updates
  std::vector<double> history;  // objective after every accepted step
  Eigen::VectorXd best_x;       // best point ever evaluated
  double best_f = 0.0;

  int dim() const { return model.dim(); }
  int num_points() const { return static_cast<int>(fvals.size()); }
  Eigen::VectorXd point(int k) const { return model.base + model.dirs.col(k); }
  Eigen::VectorXd theta() const { return point(kopt); }
  double value() const { return fvals[kopt]; }
};

// Interpolation set theta0, theta0 + r e_1, ..., theta0 + r e_v,
// theta0 - r e_1, ... truncated to num_points, and the Frobenius-minimal model
// through it starting from a zero Hessian.
TrustRegionState init_state(const Eigen::VectorXd& theta0, const Objective& f,
                            double radius0, int num_points);

// Frobenius-minimal quadratic through (base + dirs, fvals) relative to the
// Hessian of prev. Returns the model; when kkt_inverse is non-null it receives
// the inverse of the (m + v + 1) KKT matrix. Throws DegenerateGeometry when the
// system is singular.
QuadraticModel fit_min_frobenius(const Eigen::VectorXd& base, const Eigen::MatrixXd& dirs,
                                 const Eigen::VectorXd& fvals, const QuadraticModel* prev,
                                 Eigen::MatrixXd* kkt_inverse = nullptr);

// Re-solve the KKT system for the current set, using the state's model as the
// previous Hessian.
QuadraticModel update_model(const TrustRegionState& state);

// Approximate minimiser of g^T s + 1/2 s^T H s subject to |s| <= radius:
// truncated conjugate gradients followed by a rotation search on the sphere
// when the boundary is reached.
Eigen::VectorXd solve_trust_region(const Eigen::VectorXd& g, const HessianProduct& hv,
                                   double radius);

// Step from center under model within the given radius.
Eigen::VectorXd solve_subproblem(const QuadraticModel& model, const Eigen::VectorXd& center,
                                 double radius);

enum class StepKind { Accepted, Rejected, Geometry, Shrunk };

struct StepOutcome {
  StepKind kind = StepKind::Shrunk;
  double ratio = 0.0;
  double step_norm = 0.0;
};

// One iteration: subproblem, evaluation, ratio test, radius and set update.
StepOutcome step(TrustRegionState& state, const Objective& f,
                 const TrustRegionOptions& options);

// Largest |m(y_k) - f_k| / max(1, |f_k|) over the interpolation set.
double interpolation_error(const TrustRegionState& state);

struct TrustRegionDiagnostics {
  int evals = 0;
  int iterations = 0;
  int accepted_steps = 0;
  int geometry_steps = 0;
  int rebuilds = 0;
  double final_radius = 0.0;
  double max_interpolation_error = 0.0;
  StopReason stop_reason = StopReason::Running;
  std::vector<double> history;

  bool converged() const { return stop_reason == StopReason::RadiusBelowMinimum; }
};

struct MinimizeResult {
  Eigen::VectorXd theta;
  double value = 0.0;
  TrustRegionDiagnostics diagnostics;
};

// Runs step() until the radius falls below radius_min or the evaluation
// budget is spent. Running out of evaluations is reported in the diagnostics
// and the best point found is still returned.
MinimizeResult minimize(const Objective& f, const Eigen::VectorXd& theta0,
                        const TrustRegionOptions& options = {});

}  // namespace pflqr
