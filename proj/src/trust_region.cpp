#include "pflqr/trust_region.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "pflqr/errors.hpp"

namespace pflqr {

double QuadraticModel::value_rel(const Eigen::VectorXd& w) const {
  const Eigen::VectorXd proj = dirs.transpose() * w;
  return c + g.dot(w) + 0.5 * w.dot(explicit_hessian * w) +
         0.5 * (weights.array() * proj.array().square()).sum();
}

Eigen::VectorXd QuadraticModel::gradient_rel(const Eigen::VectorXd& w) const {
  return g + hess_vec(w);
}

Eigen::VectorXd QuadraticModel::hess_vec(const Eigen::VectorXd& d) const {
  const Eigen::VectorXd proj = weights.cwiseProduct(dirs.transpose() * d);
  Eigen::VectorXd out = explicit_hessian * d;
  out.noalias() += dirs * proj;
  return out;
}

Eigen::MatrixXd QuadraticModel::hessian() const {
  Eigen::MatrixXd h = explicit_hessian;
  h.noalias() += dirs * weights.asDiagonal() * dirs.transpose();
  return 0.5 * (h + h.transpose());
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Running: return "running";
    case StopReason::RadiusBelowMinimum: return "radius_below_minimum";
    case StopReason::MaxEvals: return "max_evals";
  }
  return "unknown";
}

namespace {

struct Settings {
  double radius_min;
  double radius_max;
  int max_evals;
  int num_points;
  int rebuild_interval;
};

Settings resolve(const TrustRegionOptions& o, int v) {
  Settings s;
  s.radius_min = o.radius_min > 0.0 ? o.radius_min : 1e-7 * o.radius0;
  s.radius_max = o.radius_max > 0.0 ? o.radius_max : 1e4 * o.radius0;
  s.max_evals = o.max_evals > 0 ? o.max_evals : 500 * (v + 1);
  s.num_points = o.num_points > 0 ? o.num_points : 2 * v + 1;
  s.rebuild_interval = o.rebuild_interval > 0 ? o.rebuild_interval : 10 * s.num_points;
  return s;
}

void check_num_points(int v, int m) {
  const long long full = static_cast<long long>(v + 1) * (v + 2) / 2;
  if (m < v + 2 || m > full) {
    std::ostringstream msg;
    msg << "interpolation set size " << m << " outside [" << v + 2 << ", " << full
        << "] for " << v << " variables";
    throw BadKappa(msg.str());
  }
}

double evaluate(const Objective& f, const Eigen::VectorXd& x) {
  const double value = f(x);
  if (!std::isfinite(value)) throw NonFiniteObjective("objective returned a non-finite value");
  return value;
}

Eigen::MatrixXd kkt_matrix(const Eigen::MatrixXd& dirs) {
  const Eigen::Index v = dirs.rows(), m = dirs.cols(), n = m + v + 1;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd inner = dirs.transpose() * dirs;
  w.topLeftCorner(m, m) = 0.5 * inner.array().square().matrix();
  w.block(m, 0, 1, m).setOnes();
  w.block(0, m, m, 1).setOnes();
  w.block(m + 1, 0, v, m) = dirs;
  w.block(0, m + 1, m, v) = dirs.transpose();
  return w;
}

// Inverse of the KKT matrix, computed on rescaled displacements so that the
// factorisation sees O(1) entries regardless of the trust radius.
Eigen::MatrixXd kkt_inverse(const Eigen::MatrixXd& dirs) {
  const Eigen::Index v = dirs.rows(), m = dirs.cols();
  double scale = dirs.colwise().norm().maxCoeff();
  if (!(scale > 0.0)) scale = 1.0;
  const Eigen::MatrixXd scaled = kkt_matrix(dirs / scale);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(scaled);
  if (!(lu.rcond() > 1e-14)) {
    throw DegenerateGeometry("interpolation set is not poised (singular KKT system)");
  }
  Eigen::MatrixXd inv = lu.inverse();
  if (!inv.allFinite()) throw DegenerateGeometry("KKT inverse is not finite");
  // W = D What D with D = diag(s^2 I_m, s^-2, s^-1 I_v), so W^-1 = D^-1 What^-1 D^-1.
  Eigen::VectorXd dinv(m + v + 1);
  dinv.head(m).setConstant(1.0 / (scale * scale));
  dinv[m] = scale * scale;
  dinv.tail(v).setConstant(scale);
  inv = dinv.asDiagonal() * inv * dinv.asDiagonal();
  return 0.5 * (inv + inv.transpose());
}

// Column t of a symmetric matrix of which only the lower triangle is kept.
Eigen::VectorXd symmetric_column(const Eigen::MatrixXd& h, Eigen::Index t) {
  Eigen::VectorXd col(h.rows());
  col.head(t) = h.row(t).head(t).transpose();
  col.tail(h.rows() - t) = h.col(t).tail(h.rows() - t);
  return col;
}

constexpr double kDriftTolerance = 5e-9;

// Gram matrix of the displacements and exact interpolation residuals; both
// are then maintained incrementally by replace_point.
void refresh_tracking(TrustRegionState& state) {
  const auto& model = state.model;
  state.inner = model.dirs.transpose() * model.dirs;
  const Eigen::MatrixXd hd = model.explicit_hessian * model.dirs;
  const Eigen::VectorXd implicit = state.inner.array().square().matrix() * model.weights;
  state.residuals.resize(state.num_points());
  for (int k = 0; k < state.num_points(); ++k) {
    const auto d = model.dirs.col(k);
    state.residuals[k] =
        state.fvals[k] - (model.c + model.g.dot(d) + 0.5 * d.dot(hd.col(k)) + 0.5 * implicit[k]);
  }
}

// Quantities of the rank-two inverse update for inserting w_new.
struct Insertion {
  Eigen::VectorXd hw;     // W^-1 w
  Eigen::VectorXd sigma;  // denominator for every candidate index
  double beta = 0.0;
};

Insertion prepare_insertion(const TrustRegionState& state, const Eigen::VectorXd& w_new) {
  const auto& dirs = state.model.dirs;
  const Eigen::Index m = dirs.cols(), v = dirs.rows();
  Eigen::VectorXd wvec(m + v + 1);
  wvec.head(m) = 0.5 * (dirs.transpose() * w_new).array().square().matrix();
  wvec[m] = 1.0;
  wvec.tail(v) = w_new;
  Insertion ins;
  ins.hw = state.kkt_inverse.selfadjointView<Eigen::Lower>() * wvec;
  const double wn2 = w_new.squaredNorm();
  ins.beta = 0.5 * wn2 * wn2 - wvec.dot(ins.hw);
  ins.sigma = state.kkt_inverse.diagonal().head(m).array() * ins.beta +
              ins.hw.head(m).array().square();
  return ins;
}

// Replace interpolation point t by w_new (value f_new) and update the model so
// that it again interpolates the whole set with least change in Hessian.
void replace_point(TrustRegionState& state, int t, const Eigen::VectorXd& w_new, double f_new,
                   const Insertion& ins) {
  auto& model = state.model;
  const Eigen::Index m = model.dirs.cols(), v = model.dirs.rows();
  const double residual = f_new - model.value_rel(w_new);

  // The outgoing direction leaves the implicit sum; keep its curvature.
  if (model.weights[t] != 0.0) {
    model.explicit_hessian.noalias() +=
        model.weights[t] * model.dirs.col(t) * model.dirs.col(t).transpose();
    model.weights[t] = 0.0;
  }

  auto& h = state.kkt_inverse;
  const double alpha = h(t, t);
  const double tau = ins.hw[t];
  const double sigma = ins.sigma[t];
  Eigen::VectorXd u = -ins.hw;
  u[t] += 1.0;
  const Eigen::VectorXd ht = symmetric_column(h, t);
  // H += [u ht] C [u ht]^T with C = [alpha tau; tau -beta] / sigma. C is
  // indefinite, so the update is x y^T + y x^T for x, y in span{u, ht}, which
  // touches only the stored lower triangle once.
  Eigen::Matrix2d c;
  c << alpha, tau, tau, -ins.beta;
  c /= sigma;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(c);
  const Eigen::Vector2d lam = eig.eigenvalues();
  const Eigen::Matrix2d& e = eig.eigenvectors();
  const Eigen::VectorXd p0 = std::sqrt(std::abs(lam[0])) * (e(0, 0) * u + e(1, 0) * ht);
  const Eigen::VectorXd p1 = std::sqrt(std::abs(lam[1])) * (e(0, 1) * u + e(1, 1) * ht);
  if (lam[0] < 0.0 && lam[1] > 0.0) {
    // p1 p1^T - p0 p0^T = ((p1 + p0)(p1 - p0)^T + (p1 - p0)(p1 + p0)^T) / 2
    h.selfadjointView<Eigen::Lower>().rankUpdate(p1 + p0, p1 - p0, 0.5);
  } else {
    h.selfadjointView<Eigen::Lower>().rankUpdate(p0, lam[0] < 0.0 ? -1.0 : 1.0);
    h.selfadjointView<Eigen::Lower>().rankUpdate(p1, lam[1] < 0.0 ? -1.0 : 1.0);
  }

  model.dirs.col(t) = w_new;
  state.fvals[t] = f_new;
  const Eigen::VectorXd products = model.dirs.transpose() * w_new;
  state.inner.col(t) = products;
  state.inner.row(t) = products.transpose();
  state.residuals[t] = residual;

  const Eigen::VectorXd correction = residual * symmetric_column(h, t);
  const Eigen::VectorXd dw = correction.head(m);
  model.weights += dw;
  model.c += correction[m];
  model.g += correction.tail(v);
  // Change of the model value at every interpolation point.
  const Eigen::VectorXd change =
      (correction[m] + (model.dirs.transpose() * correction.tail(v)).array()).matrix() +
      0.5 * (state.inner.array().square().matrix() * dw);
  state.residuals -= change;
  ++state.updates_since_rebuild;
}

double tracked_error(const TrustRegionState& state) {
  return (state.residuals.array().abs() / state.fvals.array().abs().max(1.0)).maxCoeff();
}

// Move the base point to the current iterate, re-expressing the model, and
// refactorise the KKT system. The refit also removes rounding drift in the
// interpolation conditions.
void rebuild(TrustRegionState& state, const Objective& f, double radius) {
  auto& model = state.model;
  const Eigen::VectorXd s = model.dirs.col(state.kopt);
  if (s.squaredNorm() > 0.0) {
    const double c_new = model.value_rel(s);
    const Eigen::VectorXd g_new = model.gradient_rel(s);
    model.dirs.colwise() -= s;
    const Eigen::VectorXd u = model.dirs * model.weights;
    model.explicit_hessian.noalias() += s * u.transpose() + u * s.transpose();
    model.explicit_hessian.noalias() += model.weights.sum() * s * s.transpose();
    model.base += s;
    model.c = c_new;
    model.g = g_new;
  }
  try {
    model = fit_min_frobenius(model.base, model.dirs, state.fvals, &model, &state.kkt_inverse);
  } catch (const DegenerateGeometry&) {
    // Start over with a coordinate stencil around the iterate, keeping the
    // curvature learned so far as the reference Hessian.
    const int v = state.dim(), m = state.num_points();
    const double f_opt = state.fvals[state.kopt];
    model.explicit_hessian = model.hessian();
    model.weights.setZero();
    model.c = f_opt;
    model.g = model.gradient_rel(Eigen::VectorXd::Zero(v));
    model.dirs.setZero();
    state.fvals.setConstant(f_opt);
    for (int k = 1; k < m; ++k) {
      const int axis = (k - 1) % v;
      const double sign = ((k - 1) / v) % 2 == 0 ? 1.0 : -1.0;
      model.dirs(axis, k) = sign * radius * (1 + (k - 1) / (2 * v));
      const Eigen::VectorXd x = model.base + model.dirs.col(k);
      const double fx = f(x);
      ++state.evals;
      state.fvals[k] = std::isfinite(fx) ? fx : f_opt + 1e10 * (1.0 + std::abs(f_opt));
      if (state.fvals[k] < state.best_f) {
        state.best_f = state.fvals[k];
        state.best_x = x;
      }
    }
    state.kopt = 0;
    model = fit_min_frobenius(model.base, model.dirs, state.fvals, &model, &state.kkt_inverse);
  }
  refresh_tracking(state);
  state.updates_since_rebuild = 0;
  ++state.rebuilds;
}

// After a set update: refactorise when the interpolation conditions have
// drifted or the update count calls for it.
void settle(TrustRegionState& state, const Objective& f, const Settings& cfg, bool verify) {
  if (tracked_error(state) > kDriftTolerance ||
      state.updates_since_rebuild >= cfg.rebuild_interval) {
    rebuild(state, f, state.radius);
  }
  if (verify) {
    state.max_interpolation_error =
        std::max(state.max_interpolation_error, interpolation_error(state));
  }
}

void note_best(TrustRegionState& state, const Eigen::VectorXd& x, double fx) {
  if (fx < state.best_f) {
    state.best_f = fx;
    state.best_x = x;
  }
}

// Point to give up for a new one: far from ref and with a healthy update
// denominator. Distance dominates through the weight (dist / radius)^4, so the
// farthest point is dropped unless that would make the update ill-conditioned.
int choose_ejection(const TrustRegionState& state, const Eigen::VectorXd& ref,
                    const Insertion& ins, int exclude) {
  const int m = state.num_points();
  const double r2 = state.radius * state.radius;
  int best = -1;
  double best_score = 0.0;
  for (int k = 0; k < m; ++k) {
    if (k == exclude) continue;
    const double dist2 = (state.model.dirs.col(k) - ref).squaredNorm();
    const double weight = std::max(1.0, dist2 * dist2 / (r2 * r2));
    const double score = std::abs(ins.sigma[k]) * weight;
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

bool geometry_is_poor(const TrustRegionState& state, double limit, int* far_index) {
  const Eigen::VectorXd w_opt = state.model.dirs.col(state.kopt);
  double worst = -1.0;
  int idx = -1;
  for (int k = 0; k < state.num_points(); ++k) {
    if (k == state.kopt) continue;
    const double d = (state.model.dirs.col(k) - w_opt).norm();
    if (d > worst) {
      worst = d;
      idx = k;
    }
  }
  if (far_index) *far_index = idx;
  return worst > limit;
}

// Replace the far point t by a point within the radius that makes its Lagrange
// function large, which restores poisedness around the iterate.
void geometry_step(TrustRegionState& state, const Objective& f, int t, const Settings& cfg,
                   bool verify) {
  const double radius = state.radius;
  const auto& model = state.model;
  const Eigen::Index m = model.dirs.cols(), v = model.dirs.rows();
  const Eigen::VectorXd w_opt = model.dirs.col(state.kopt);
  const Eigen::VectorXd col = symmetric_column(state.kkt_inverse, t);
  const Eigen::VectorXd lam = col.head(m);
  const double ct = col[m];
  const Eigen::VectorXd gt = col.tail(v);
  auto lagrange = [&](const Eigen::VectorXd& w) {
    const Eigen::VectorXd proj = model.dirs.transpose() * w;
    return ct + gt.dot(w) + 0.5 * (lam.array() * proj.array().square()).sum();
  };
  const Eigen::VectorXd grad =
      gt + model.dirs * lam.cwiseProduct(model.dirs.transpose() * w_opt);

  std::vector<Eigen::VectorXd> dirs_to_try;
  if (grad.norm() > 0.0) dirs_to_try.push_back(grad.normalized());
  const Eigen::VectorXd toward = model.dirs.col(t) - w_opt;
  if (toward.norm() > 0.0) dirs_to_try.push_back(toward.normalized());
  if (dirs_to_try.empty()) dirs_to_try.push_back(Eigen::VectorXd::Unit(v, t % v));

  Eigen::VectorXd best_w = w_opt + radius * dirs_to_try.front();
  double best_val = -1.0;
  for (const auto& u : dirs_to_try) {
    for (double sign : {1.0, -1.0}) {
      const Eigen::VectorXd w = w_opt + sign * radius * u;
      const double val = std::abs(lagrange(w));
      if (val > best_val) {
        best_val = val;
        best_w = w;
      }
    }
  }

  const Eigen::VectorXd x = model.base + best_w;
  const double fx = f(x);
  ++state.evals;
  ++state.geometry_steps;
  if (!std::isfinite(fx)) return;
  note_best(state, x, fx);
  const Insertion ins = prepare_insertion(state, best_w);
  if (!(std::abs(ins.sigma[t]) > 0.0)) return;
  const double f_opt = state.fvals[state.kopt];
  replace_point(state, t, best_w, fx, ins);
  if (fx < f_opt) {
    state.kopt = t;
    state.history.push_back(fx);
  }
  settle(state, f, cfg, verify);
}

}  // namespace

QuadraticModel fit_min_frobenius(const Eigen::VectorXd& base, const Eigen::MatrixXd& dirs,
                                 const Eigen::VectorXd& fvals, const QuadraticModel* prev,
                                 Eigen::MatrixXd* kkt_inverse_out) {
  const Eigen::Index v = dirs.rows(), m = dirs.cols();
  if (base.size() != v || fvals.size() != m) {
    throw DimensionMismatch("interpolation data sizes disagree");
  }
  if (m < v + 1) throw BadKappa("need at least v + 1 interpolation points");
  const Eigen::MatrixXd inv = kkt_inverse(dirs);

  QuadraticModel model;
  model.base = base;
  model.dirs = dirs;
  Eigen::VectorXd resid = fvals;
  if (prev) {
    for (Eigen::Index k = 0; k < m; ++k) resid[k] -= prev->value(base + dirs.col(k));
    const double shift_c = prev->value(base);
    const Eigen::VectorXd shift_g = prev->gradient(base);
    model.c = shift_c;
    model.g = shift_g;
    const bool same_dirs = prev->dirs.rows() == v && prev->dirs.cols() == m &&
                           prev->base == base && prev->dirs == dirs;
    if (same_dirs) {
      model.explicit_hessian = prev->explicit_hessian;
      model.weights = prev->weights;
    } else {
      model.explicit_hessian = prev->hessian();
      model.weights = Eigen::VectorXd::Zero(m);
    }
  } else {
    model.g = Eigen::VectorXd::Zero(v);
    model.explicit_hessian = Eigen::MatrixXd::Zero(v, v);
    model.weights = Eigen::VectorXd::Zero(m);
  }
  const Eigen::VectorXd sol = inv.leftCols(m) * resid;
  model.weights += sol.head(m);
  model.c += sol[m];
  model.g += sol.tail(v);
  if (kkt_inverse_out) *kkt_inverse_out = inv;
  return model;
}

QuadraticModel update_model(const TrustRegionState& state) {
  return fit_min_frobenius(state.model.base, state.model.dirs, state.fvals, &state.model);
}

double interpolation_error(const TrustRegionState& state) {
  const auto& model = state.model;
  const Eigen::MatrixXd inner = model.dirs.transpose() * model.dirs;
  const Eigen::MatrixXd hd = model.explicit_hessian * model.dirs;
  const Eigen::VectorXd implicit = inner.array().square().matrix() * model.weights;
  double worst = 0.0;
  for (int k = 0; k < state.num_points(); ++k) {
    const auto d = model.dirs.col(k);
    const double mk = model.c + model.g.dot(d) + 0.5 * d.dot(hd.col(k)) + 0.5 * implicit[k];
    const double fk = state.fvals[k];
    worst = std::max(worst, std::abs(mk - fk) / std::max(1.0, std::abs(fk)));
  }
  return worst;
}

TrustRegionState init_state(const Eigen::VectorXd& theta0, const Objective& f, double radius0,
                            int num_points) {
  const int v = static_cast<int>(theta0.size());
  if (v < 1) throw DimensionMismatch("need at least one variable");
  if (!(radius0 > 0.0)) throw InvalidArgument("initial radius must be positive");
  check_num_points(v, num_points);
  const int m = num_points;

  TrustRegionState state;
  Eigen::MatrixXd dirs = Eigen::MatrixXd::Zero(v, m);
  int k = 1;
  for (int i = 0; i < v && k < m; ++i, ++k) dirs(i, k) = radius0;
  for (int i = 0; i < v && k < m; ++i, ++k) dirs(i, k) = -radius0;
  for (int i = 0; i < v && k < m; ++i) {
    for (int j = i + 1; j < v && k < m; ++j, ++k) {
      dirs(i, k) = radius0;
      dirs(j, k) = radius0;
    }
  }

  Eigen::VectorXd fvals(m);
  fvals[0] = evaluate(f, theta0);
  state.best_x = theta0;
  state.best_f = fvals[0];
  for (int p = 1; p < m; ++p) {
    const Eigen::VectorXd x = theta0 + dirs.col(p);
    fvals[p] = evaluate(f, x);
    note_best(state, x, fvals[p]);
  }
  state.evals = m;
  state.fvals = fvals;
  state.model = fit_min_frobenius(theta0, dirs, fvals, nullptr, &state.kkt_inverse);
  refresh_tracking(state);
  state.kopt = 0;
  state.radius = radius0;
  state.history.push_back(fvals[0]);
  return state;
}

Eigen::VectorXd solve_trust_region(const Eigen::VectorXd& g, const HessianProduct& hv,
                                   double radius) {
  const Eigen::Index v = g.size();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(v);
  const double gnorm = g.norm();
  if (!(gnorm > 0.0) || !(radius > 0.0)) return s;

  Eigen::VectorXd hs = Eigen::VectorXd::Zero(v);
  Eigen::VectorXd r = g;
  Eigen::VectorXd p = -g;
  double rr = r.squaredNorm();
  const double tol = 1e-10 * gnorm;
  bool on_boundary = false;

  auto to_boundary = [&](const Eigen::VectorXd& dir) {
    // Positive root of |s + a dir| = radius.
    const double dd = dir.squaredNorm(), sd = s.dot(dir), ss = s.squaredNorm();
    const double disc = std::max(0.0, sd * sd + dd * (radius * radius - ss));
    return (-sd + std::sqrt(disc)) / dd;
  };

  for (Eigen::Index iter = 0; iter < 2 * v + 10; ++iter) {
    const Eigen::VectorXd hp = hv(p);
    const double php = p.dot(hp);
    if (php <= 0.0) {
      const double a = to_boundary(p);
      s += a * p;
      hs += a * hp;
      on_boundary = true;
      break;
    }
    const double alpha = rr / php;
    if ((s + alpha * p).norm() >= radius) {
      const double a = to_boundary(p);
      s += a * p;
      hs += a * hp;
      on_boundary = true;
      break;
    }
    s += alpha * p;
    hs += alpha * hp;
    r += alpha * hp;
    const double rr_new = r.squaredNorm();
    if (std::sqrt(rr_new) <= tol) break;
    p = -r + (rr_new / rr) * p;
    rr = rr_new;
  }
  if (!on_boundary) return s;

  // Rotate s on the sphere within span{s, tangent descent direction}.
  double q = g.dot(s) + 0.5 * s.dot(hs);
  for (int sweep = 0; sweep < 25; ++sweep) {
    const Eigen::VectorXd grad = g + hs;
    const double ss = s.squaredNorm();
    Eigen::VectorXd tangent = grad - (s.dot(grad) / ss) * s;
    const double tn = tangent.norm();
    if (!(tn > 1e-12 * grad.norm())) break;
    const Eigen::VectorXd d = -(std::sqrt(ss) / tn) * tangent;
    const Eigen::VectorXd hd = hv(d);
    const double gs = g.dot(s), gd = g.dot(d);
    const double shs = s.dot(hs), shd = s.dot(hd), dhd = d.dot(hd);
    auto model_at = [&](double th) {
      const double c = std::cos(th), sn = std::sin(th);
      return c * gs + sn * gd + 0.5 * (c * c * shs + 2.0 * sn * c * shd + sn * sn * dhd);
    };
    constexpr int kGrid = 72;
    const double h = 2.0 * std::numbers::pi / kGrid;
    int ibest = 0;
    double qbest = model_at(0.0);
    std::array<double, kGrid> vals{};
    for (int i = 0; i < kGrid; ++i) {
      vals[i] = model_at(i * h);
      if (vals[i] < qbest) {
        qbest = vals[i];
        ibest = i;
      }
    }
    double theta = ibest * h;
    {
      const double qm = vals[(ibest + kGrid - 1) % kGrid];
      const double qp = vals[(ibest + 1) % kGrid];
      const double denom = qm - 2.0 * vals[ibest] + qp;
      if (denom > 0.0) {
        const double shift = 0.5 * (qm - qp) / denom;
        const double cand = theta + shift * h;
        if (model_at(cand) < qbest) {
          theta = cand;
          qbest = model_at(cand);
        }
      }
    }
    if (!(qbest < q - 1e-12 * std::abs(q))) break;
    const double c = std::cos(theta), sn = std::sin(theta);
    s = c * s + sn * d;
    hs = c * hs + sn * hd;
    const double improvement = q - qbest;
    q = qbest;
    if (improvement <= 1e-4 * std::abs(q)) break;
  }
  return s;
}

Eigen::VectorXd solve_subproblem(const QuadraticModel& model, const Eigen::VectorXd& center,
                                 double radius) {
  const Eigen::VectorXd g = model.gradient(center);
  return solve_trust_region(
      g, [&](const Eigen::VectorXd& d) { return model.hess_vec(d); }, radius);
}

StepOutcome step(TrustRegionState& state, const Objective& f, const TrustRegionOptions& options) {
  const int v = state.dim();
  const Settings cfg = resolve(options, v);
  ++state.iteration;
  StepOutcome out;

  Eigen::VectorXd w_opt = state.model.dirs.col(state.kopt);
  const double f_opt = state.fvals[state.kopt];
  const Eigen::VectorXd g_opt = state.model.gradient_rel(w_opt);
  const auto hv = [&](const Eigen::VectorXd& d) { return state.model.hess_vec(d); };
  const Eigen::VectorXd d = solve_trust_region(g_opt, hv, state.radius);
  const double dnorm = d.norm();
  out.step_norm = dnorm;
  const double predicted = -(g_opt.dot(d) + 0.5 * d.dot(hv(d)));

  const double far_limit = options.far_factor * state.radius;
  int far_index = -1;
  if (!(predicted > 1e-15 * std::max(1.0, std::abs(f_opt))) || !(dnorm > 0.0)) {
    // The model predicts no decrease: fix the model first if it is built on
    // distant points, otherwise refine the radius.
    if (geometry_is_poor(state, far_limit, &far_index)) {
      geometry_step(state, f, far_index, cfg, options.verify_interpolation);
      out.kind = StepKind::Geometry;
    } else {
      state.radius *= options.shrink_factor;
      out.kind = StepKind::Shrunk;
    }
    return out;
  }

  if (dnorm * dnorm <= 1e-3 * w_opt.squaredNorm()) {
    rebuild(state, f, state.radius);
    w_opt = state.model.dirs.col(state.kopt);
  }

  const Eigen::VectorXd w_new = w_opt + d;
  const Eigen::VectorXd x_new = state.model.base + w_new;
  const double f_new = f(x_new);
  ++state.evals;
  if (!std::isfinite(f_new)) {
    state.radius *= options.shrink_factor;
    out.kind = StepKind::Rejected;
    return out;
  }
  note_best(state, x_new, f_new);

  out.ratio = (f_opt - f_new) / predicted;
  const Insertion ins = prepare_insertion(state, w_new);

  if (out.ratio >= options.accept_ratio) {
    const int t = choose_ejection(state, w_new, ins, -1);
    if (t >= 0) {
      replace_point(state, t, w_new, f_new, ins);
      state.kopt = t;
      settle(state, f, cfg, options.verify_interpolation);
    }
    if (out.ratio >= options.expand_ratio && dnorm >= 0.99 * state.radius) {
      state.radius = std::min(options.expand_factor * state.radius, cfg.radius_max);
    }
    ++state.accepted;
    state.history.push_back(f_new);
    out.kind = StepKind::Accepted;
    return out;
  }

  // Rejected: keep the iterate but let the trial point displace a farther one.
  const int t = choose_ejection(state, w_opt, ins, state.kopt);
  if (t >= 0 && (state.model.dirs.col(t) - w_opt).norm() > dnorm) {
    replace_point(state, t, w_new, f_new, ins);
    settle(state, f, cfg, options.verify_interpolation);
  }
  // A repair costs an evaluation, so it is skipped once the budget is spent.
  if (state.evals < cfg.max_evals && geometry_is_poor(state, far_limit, &far_index)) {
    geometry_step(state, f, far_index, cfg, options.verify_interpolation);
  } else {
    state.radius *= options.shrink_factor;
  }
  out.kind = StepKind::Rejected;
  return out;
}

MinimizeResult minimize(const Objective& f, const Eigen::VectorXd& theta0,
                        const TrustRegionOptions& options) {
  const int v = static_cast<int>(theta0.size());
  const Settings cfg = resolve(options, v);
  TrustRegionState state = init_state(theta0, f, options.radius0, cfg.num_points);
  if (options.verify_interpolation) state.max_interpolation_error = interpolation_error(state);

  StopReason reason = StopReason::Running;
  while (reason == StopReason::Running) {
    if (state.radius < cfg.radius_min) {
      reason = StopReason::RadiusBelowMinimum;
    } else if (state.evals >= cfg.max_evals) {
      reason = StopReason::MaxEvals;
    } else {
      step(state, f, options);
    }
  }

  MinimizeResult result;
  result.theta = state.best_x;
  result.value = state.best_f;
  auto& diag = result.diagnostics;
  diag.evals = state.evals;
  diag.iterations = state.iteration;
  diag.accepted_steps = state.accepted;
  diag.geometry_steps = state.geometry_steps;
  diag.rebuilds = state.rebuilds;
  diag.final_radius = state.radius;
  diag.max_interpolation_error = state.max_interpolation_error;
  diag.stop_reason = reason;
  diag.history = std::move(state.history);
  return result;
}

}  // namespace pflqr
