#include "pflqr/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pflqr/errors.hpp"

namespace pflqr {

void BasisSpec::validate() const {
  if (degree < 1) throw InvalidBasisSpec("basis degree must be at least 1");
  for (int k : {k0, ky, kx}) {
    if (k < degree + 1) {
      std::ostringstream msg;
      msg << "basis size " << k << " is below degree + 1 = " << degree + 1;
      throw InvalidBasisSpec(msg.str());
    }
  }
}

BasisTriple make_bases(const BasisSpec& spec, const FunctionalSample& y,
                       const FunctionalSample& x) {
  spec.validate();
  return {make_basis(y.domain_lo, y.domain_hi, spec.k0, spec.degree),
          make_basis(y.domain_lo, y.domain_hi, spec.ky, spec.degree),
          make_basis(x.domain_lo, x.domain_hi, spec.kx, spec.degree)};
}

TrustRegionOptions FitOptions::default_fit_optimizer() {
  TrustRegionOptions opt;
  opt.radius0 = 0.05;
  opt.radius_min = 1e-6;
  return opt;
}

Eigen::VectorXd QuantileFit::theta() const {
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

Eigen::VectorXd init_penalized_ls(const DesignPack& design, const Eigen::MatrixXd& y,
                                  double lambda1, double lambda2) {
  if (design.num_curves() == 0 || y.rows() == 0) {
    throw DimensionMismatch("penalized least squares needs at least one curve");
  }
  if (y.rows() != design.num_curves() || y.cols() != design.num_points()) {
    throw DimensionMismatch("response matrix does not match the design");
  }
  Eigen::MatrixXd lhs = design.gram() + assemble_penalty(design.penalty, lambda1, lambda2);
  const Eigen::VectorXd rhs = design.cross(y);
  Eigen::LLT<Eigen::MatrixXd> llt(lhs);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd theta = llt.solve(rhs);
    if (theta.allFinite()) return theta;
  }
  const double jitter = 1e-10 * std::max(lhs.trace(), 1.0);
  lhs.diagonal().array() += jitter;
  llt.compute(lhs);
  if (llt.info() != Eigen::Success) {
    throw SingularSystem("penalized least-squares system is singular even after jitter");
  }
  Eigen::VectorXd theta = llt.solve(rhs);
  if (!theta.allFinite()) throw SingularSystem("penalized least-squares solution is not finite");
  return theta;
}

double fit_objective(const Eigen::Ref<const Eigen::VectorXd>& theta, const DesignPack& design,
                     const Eigen::MatrixXd& y, const LossConfig& cfg,
                     const Eigen::MatrixXd& penalty) {
  const int n = design.num_curves();
  const int keep = trimmed_count(n, cfg.trim_fraction);
  if (keep >= n) return smoothed_objective(theta, design, y, cfg, penalty);
  Eigen::VectorXd losses = per_curve_loss(theta, design, y, cfg);
  std::vector<double> sorted(losses.data(), losses.data() + n);
  std::sort(sorted.begin(), sorted.end());
  double s = 0.0;
  for (int i = 0; i < keep; ++i) s += sorted[i];
  return s + 0.5 * theta.dot(penalty * theta);
}

namespace {

void check_pair(const FunctionalSample& y, const FunctionalSample& x) {
  y.validate();
  x.validate();
  if (y.num_curves() != x.num_curves()) {
    std::ostringstream msg;
    msg << "response has " << y.num_curves() << " curves but predictor has "
        << x.num_curves();
    throw DimensionMismatch(msg.str());
  }
  if (y.num_curves() == 0) throw DimensionMismatch("no curves to fit");
}

QuantileFit skeleton(const FunctionalSample& y, const FunctionalSample& x,
                     const DesignPack& design, const FitOptions& opts, double lambda1,
                     double lambda2) {
  QuantileFit out;
  out.bases = design.bases;
  out.rule = opts.rule;
  out.t_grid = y.grid;
  out.s_grid = x.grid;
  out.lambda1 = lambda1;
  out.lambda2 = lambda2;
  return out;
}

void store_theta(QuantileFit& fit, const Eigen::VectorXd& theta, int k0) {
  fit.a = theta.head(k0);
  fit.b = theta.tail(theta.size() - k0);
}

}  // namespace

QuantileFit fit(const FunctionalSample& y, const FunctionalSample& x, double tau, double gamma,
                double lambda1, double lambda2, const FitOptions& opts) {
  check_pair(y, x);
  const LossConfig cfg{tau, gamma, opts.trim_fraction};
  cfg.validate();
  const BasisTriple bases = make_bases(opts.basis, y, x);
  auto [design, penalty] = build_design(y.grid, x, bases, lambda1, lambda2, opts.rule);
  const Eigen::VectorXd theta0 = init_penalized_ls(design, y.values, lambda1, lambda2);

  const Objective objective = [&](const Eigen::VectorXd& theta) {
    return fit_objective(theta, design, y.values, cfg, penalty);
  };
  const MinimizeResult res = minimize(objective, theta0, opts.optimizer);

  QuantileFit out = skeleton(y, x, design, opts, lambda1, lambda2);
  out.method = FitMethod::Quantile;
  out.tau = tau;
  out.gamma = gamma;
  out.trim_fraction = opts.trim_fraction;
  store_theta(out, res.theta, design.k0());
  out.objective_value = res.value;
  out.initial_objective = objective(theta0);
  out.trim_set = select_trim_set(res.theta, design, y.values, cfg);
  out.diagnostics = res.diagnostics;
  out.converged = res.diagnostics.converged();
  if (!out.a.allFinite() || !out.b.allFinite()) {
    throw NonFiniteObjective("fitted coefficients are not finite");
  }
  return out;
}

QuantileFit fit_least_squares(const FunctionalSample& y, const FunctionalSample& x,
                              double lambda1, double lambda2, const FitOptions& opts) {
  check_pair(y, x);
  const BasisTriple bases = make_bases(opts.basis, y, x);
  auto [design, penalty] = build_design(y.grid, x, bases, lambda1, lambda2, opts.rule);
  const Eigen::VectorXd theta = init_penalized_ls(design, y.values, lambda1, lambda2);
  QuantileFit out = skeleton(y, x, design, opts, lambda1, lambda2);
  out.method = FitMethod::LeastSquares;
  out.gamma = 0.0;
  store_theta(out, theta, design.k0());
  const Eigen::MatrixXd resid = y.values - design.fitted(theta);
  out.objective_value = 0.5 * resid.squaredNorm() + 0.5 * theta.dot(penalty * theta);
  out.initial_objective = out.objective_value;
  out.trim_set.resize(y.num_curves());
  for (int i = 0; i < y.num_curves(); ++i) out.trim_set[i] = i;
  return out;
}

double recompute_objective(const QuantileFit& fit, const FunctionalSample& y,
                           const FunctionalSample& x) {
  check_pair(y, x);
  auto [design, penalty] = build_design(y.grid, x, fit.bases, fit.lambda1, fit.lambda2, fit.rule);
  const Eigen::VectorXd theta = fit.theta();
  if (fit.method == FitMethod::LeastSquares) {
    const Eigen::MatrixXd resid = y.values - design.fitted(theta);
    return 0.5 * resid.squaredNorm() + 0.5 * theta.dot(penalty * theta);
  }
  return fit_objective(theta, design, y.values, fit.loss_config(), penalty);
}

Eigen::MatrixXd predict(const QuantileFit& fit, const FunctionalSample& x_new,
                        const Eigen::VectorXd& t_grid) {
  x_new.validate();
  const auto& xb = fit.bases.x;
  if (x_new.grid.size() > 0 &&
      (x_new.grid[0] < xb.lo() || x_new.grid[x_new.grid.size() - 1] > xb.hi())) {
    throw PointOutOfDomain("predictor grid leaves the fitted s-domain");
  }
  const int ky = fit.bases.y.size(), kx = fit.bases.x.size();
  if (fit.a.size() != fit.bases.alpha.size() || fit.b.size() != ky * kx) {
    throw DimensionMismatch("fit coefficients do not match its bases");
  }
  const Eigen::MatrixXd scores = integrate_predictor(x_new, xb, fit.rule);
  const Eigen::MatrixXd phi = eval_basis(fit.bases.alpha, t_grid, 0);
  const Eigen::MatrixXd psi = eval_basis(fit.bases.y, t_grid, 0);
  Eigen::Map<const Eigen::MatrixXd> B(fit.b.data(), ky, kx);
  Eigen::MatrixXd out = (scores * B.transpose()) * psi.transpose();
  out.rowwise() += (phi * fit.a).transpose();
  return out;
}

Eigen::MatrixXd predict(const QuantileFit& fit, const FunctionalSample& x_new) {
  return predict(fit, x_new, fit.t_grid);
}

Surfaces reconstruct_surfaces(const QuantileFit& fit, const Eigen::VectorXd& t_grid,
                              const Eigen::VectorXd& s_grid) {
  return reconstruct_surfaces(fit.bases, fit.a, fit.b, t_grid, s_grid);
}

std::pair<double, double> interval_levels(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidLevel("interval level must lie in (0, 1)");
  const double half = 0.5 * (1.0 - level);
  return {half, 1.0 - half};
}

double crossing_fraction(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& upper) {
  if (lower.rows() != upper.rows() || lower.cols() != upper.cols()) {
    throw DimensionMismatch("interval bounds differ in shape");
  }
  if (lower.size() == 0) return 0.0;
  return static_cast<double>((lower.array() > upper.array()).count()) /
         static_cast<double>(lower.size());
}

IntervalPrediction prediction_interval(const FunctionalSample& y, const FunctionalSample& x,
                                       const FunctionalSample& x_new, double gamma,
                                       std::pair<double, double> lambdas_lo,
                                       std::pair<double, double> lambdas_hi, double level,
                                       const FitOptions& opts) {
  const auto [tau_lo, tau_hi] = interval_levels(level);
  IntervalPrediction out;
  out.tau_lo = tau_lo;
  out.tau_hi = tau_hi;
  out.fit_lo = fit(y, x, tau_lo, gamma, lambdas_lo.first, lambdas_lo.second, opts);
  out.fit_hi = fit(y, x, tau_hi, gamma, lambdas_hi.first, lambdas_hi.second, opts);
  out.lower = predict(out.fit_lo, x_new, y.grid);
  out.upper = predict(out.fit_hi, x_new, y.grid);
  out.crossing_fraction = crossing_fraction(out.lower, out.upper);
  return out;
}

}  // namespace pflqr
