// Acceptance checks. Usage: acceptance <criterion 1-10> [path to pflqr CLI]
// Prints one line per criterion and exits 0 on PASS, 1 on FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pflqr/basis.hpp"
#include "pflqr/benchmark.hpp"
#include "pflqr/design.hpp"
#include "pflqr/io.hpp"
#include "pflqr/loss.hpp"
#include "pflqr/metrics.hpp"
#include "pflqr/model.hpp"
#include "pflqr/simulate.hpp"
#include "pflqr/trust_region.hpp"

using namespace pflqr;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool nonincreasing(const std::vector<double>& h) {
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h[i] > h[i - 1]) return false;
  return true;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / v.size();
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Metric column for one method; failed rows are left out and counted.
std::vector<double> column(const BenchmarkResult& res, const std::string& method,
                           double MethodRow::*field, int* failed = nullptr) {
  std::vector<double> out;
  for (const auto& rep : res.replicates)
    for (const auto& row : rep.rows) {
      if (row.method != method) continue;
      if (row.status == "ok" && std::isfinite(row.*field))
        out.push_back(row.*field);
      else if (failed)
        ++*failed;
    }
  return out;
}

BenchmarkConfig table_config(Dgp dgp, int reps, int max_evals) {
  BenchmarkConfig cfg;
  cfg.data = DgpSpec{};
  cfg.data.dgp = dgp;
  cfg.data.n_train = 100;
  cfg.data.n_test = 100;
  cfg.reps = reps;
  cfg.fit.basis = {15, 15, 15, 3};
  cfg.fit.optimizer.max_evals = max_evals;
  return cfg;
}

// ---------------------------------------------------------------------------

Verdict smoothed_loss_bound() {
  bool ok = true;
  std::string detail;
  for (double gamma : {0.5, 0.05, 0.005}) {
    double worst_hi = -1.0, worst_lo = 1e300;
    for (double tau : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      double gap = -1e300;
      for (int k = 0; k <= 2000; ++k) {
        const double u = -10.0 + 0.01 * k;
        gap = std::max(gap, smooth_check_loss(u, tau, gamma) - check_loss(u, tau));
      }
      worst_hi = std::max(worst_hi, gap);
      worst_lo = std::min(worst_lo, gap);
      ok = ok && gap > 0.0 && gap <= gamma * std::log(2.0) + 1e-12;
    }
    if (!detail.empty()) detail += "; ";
    detail += fmt("gamma=%g: max gap in [%.6g, ", gamma, worst_lo) +
              fmt("%.6g] vs bound %.6g", worst_hi, gamma * std::log(2.0));
  }
  return {ok, detail};
}

Verdict quantile_recovery() {
  const int n = 500;
  std::mt19937 rng(2024);
  std::normal_distribution<double> z;
  std::vector<double> levels(n);
  for (auto& v : levels) v = z(rng);

  FunctionalSample y, x;
  y.grid = response_grid();
  y.values.resize(n, y.grid.size());
  for (int i = 0; i < n; ++i) y.values.row(i).setConstant(levels[i]);
  x.grid = predictor_grid();
  x.values = MatrixXd::Zero(n, x.grid.size());

  std::vector<double> sorted = levels;
  std::sort(sorted.begin(), sorted.end());
  const double gamma = 0.005;
  const double tol = std::max(3 * gamma, 0.02);
  FitOptions opts;
  opts.basis = {15, 4, 4, 3};
  opts.optimizer.max_evals = 6000;

  bool ok = true;
  std::string detail;
  for (double tau : {0.1, 0.5, 0.9}) {
    const QuantileFit f = fit(y, x, tau, gamma, 1e-4, 1e-4, opts);
    const VectorXd alpha = eval_basis(f.bases.alpha, y.grid, 0) * f.a;
    // Every point between these order statistics minimises the check loss.
    const double lo = sorted[static_cast<int>(std::ceil(n * tau)) - 1];
    const double hi = sorted[static_cast<int>(std::floor(n * tau))];
    double err = 0.0;
    for (Eigen::Index j = 0; j < alpha.size(); ++j)
      err = std::max(err, std::max(lo - alpha[j], alpha[j] - hi));
    err = std::max(err, 0.0);
    ok = ok && err <= tol && nonincreasing(f.diagnostics.history);
    detail += fmt("tau=%.1f: quantile in [%.4f, %.4f], ", tau, lo, hi) +
              fmt("fit in [%.4f, %.4f], ", alpha.minCoeff(), alpha.maxCoeff()) +
              fmt("max deviation %.2e; ", err);
  }
  detail += fmt("tolerance %.3f", tol);
  return {ok, detail};
}

Verdict gamma_direction() {
  constexpr double reference_ratio = 7.645 / 5.053;
  auto run = [](double gamma) {
    BenchmarkConfig cfg = table_config(Dgp::I, 20, 12000);
    cfg.gamma = gamma;
    cfg.baseline = false;
    int failed = 0;
    const auto r = column(run_benchmark(cfg), "pflqr", &MethodRow::rmspe, &failed);
    return std::pair{mean_of(r), failed};
  };
  const auto [sharp, f1] = run(0.005);
  const auto [soft, f2] = run(0.25);
  const double ratio = soft / sharp;
  const bool ok = f1 == 0 && f2 == 0 && sharp < soft && ratio >= reference_ratio / 3.0 &&
                  ratio <= reference_ratio * 3.0;
  return {ok, fmt("mean RMSPE gamma=0.005: %.4f, gamma=0.25: %.4f, ratio %.3f", sharp, soft, ratio) +
                  fmt(" (reference %.3f, allowed [%.3f, ", reference_ratio, reference_ratio / 3.0) +
                  fmt("%.3f]); failed fits %g", reference_ratio * 3.0, double(f1 + f2))};
}

Verdict clean_scale() {
  const BenchmarkConfig cfg = table_config(Dgp::I, 20, 30000);
  const BenchmarkResult res = run_benchmark(cfg);
  int failed = 0;
  const double a = mean_of(column(res, "pflqr", &MethodRow::rrispee_alpha, &failed));
  const double b = mean_of(column(res, "pflqr", &MethodRow::rrispee_beta, &failed));
  const double p = mean_of(column(res, "pflqr", &MethodRow::rmspe, &failed));
  const bool ok = failed == 0 && a < 1.0 && b < 5.0 && p < 2.0;
  return {ok, fmt("mean RRISPEE(alpha) %.4f (< 1), RRISPEE(beta) %.4f (< 5), ", a, b) +
                  fmt("RMSPE %.4f (< 2); failed fits %g", p, double(failed))};
}

Verdict robustness_ordering() {
  BenchmarkConfig cfg = table_config(Dgp::I, 20, 10000);
  cfg.data.contamination = 0.10;
  const BenchmarkResult res = run_benchmark(cfg);
  int failed = 0;
  const double q = median_of(column(res, "pflqr", &MethodRow::rmspe, &failed));
  const double ls = median_of(column(res, "pls", &MethodRow::rmspe, &failed));
  const double ratio = q / ls;
  const bool ok = failed == 0 && q < ls && ratio <= 0.75;
  return {ok, fmt("median RMSPE quantile %.4f, least squares %.4f, ratio %.3f (<= 0.75)", q, ls,
                  ratio) +
                  fmt("; failed fits %g", double(failed))};
}

Verdict wavy_ordering() {
  const BenchmarkConfig cfg = table_config(Dgp::II, 10, 60000);
  const BenchmarkResult res = run_benchmark(cfg);
  int failed = 0;
  const double q = mean_of(column(res, "pflqr", &MethodRow::rrispee_beta, &failed));
  const double ls = mean_of(column(res, "pls", &MethodRow::rrispee_beta, &failed));
  const double factor = ls / q;
  const bool ok = failed == 0 && factor >= 1.5;
  return {ok, fmt("mean RRISPEE(beta) quantile %.3f, least squares %.3f, factor %.3f (>= 1.5)", q,
                  ls, factor) +
                  fmt("; failed fits %g", double(failed))};
}

Verdict optimizer_suite() {
  bool ok = true;
  std::string detail;
  bool descent = true;

  // Rosenbrock against a long gradient-descent reference.
  VectorXd ref = (VectorXd(2) << -1.2, 1.0).finished();
  for (int it = 0; it < 2000000; ++it) {
    const double x = ref[0], y = ref[1];
    VectorXd grad(2);
    grad << -400.0 * x * (y - x * x) - 2.0 * (1.0 - x), 200.0 * (y - x * x);
    ref -= 1e-3 * grad;
  }
  auto rosen = [](const VectorXd& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  TrustRegionOptions ro;
  ro.radius0 = 0.5;
  ro.max_evals = 500;
  const auto r = minimize(rosen, (VectorXd(2) << -1.2, 1.0).finished(), ro);
  const double rosen_err = (r.theta - ref).norm();
  const bool rosen_ok = rosen_err < 1e-4 && r.diagnostics.evals <= 500;
  descent = descent && nonincreasing(r.diagnostics.history);
  detail += fmt("Rosenbrock error %.2e in %g evals; ", rosen_err, r.diagnostics.evals);

  // Exact quadratic: minimiser and Hessian.
  const VectorXd c = (VectorXd(5) << 1.0, -2.0, 0.5, 3.0, -0.25).finished();
  auto sq = [&](const VectorXd& x) { return (x - c).squaredNorm(); };
  TrustRegionOptions qo;
  qo.radius0 = 0.5;
  const auto q = minimize(sq, VectorXd::Zero(5), qo);
  const double q_err = (q.theta - c).norm();
  descent = descent && nonincreasing(q.diagnostics.history);

  std::mt19937 rng(5);
  std::normal_distribution<double> z;
  const int v = 4, m = (v + 1) * (v + 2) / 2;
  MatrixXd a(v, v);
  for (int i = 0; i < v; ++i)
    for (int j = 0; j < v; ++j) a(i, j) = z(rng);
  const MatrixXd h = a * a.transpose() - MatrixXd::Identity(v, v);
  const VectorXd g = VectorXd::NullaryExpr(v, [&]() { return z(rng); });
  auto quad = [&](const VectorXd& x) { return 0.3 + g.dot(x) + 0.5 * x.dot(h * x); };
  const auto st = init_state(VectorXd::NullaryExpr(v, [&]() { return z(rng); }), quad, 0.3, m);
  const double h_err = (st.model.hessian() - h).cwiseAbs().maxCoeff();
  detail += fmt("quadratic minimiser error %.2e, Hessian error %.2e; ", q_err, h_err);

  // Frobenius-minimal update at v = 2 against a dense KKT solve.
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double frob_err = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int pts = 5;
    MatrixXd dirs(2, pts);
    dirs.col(0).setZero();
    for (int k = 1; k < pts; ++k) dirs.col(k) << u(rng), u(rng);
    const VectorXd fv = VectorXd::NullaryExpr(pts, [&]() { return u(rng); });
    QuadraticModel prev;
    prev.base = VectorXd::Zero(2);
    prev.g = VectorXd::Zero(2);
    prev.explicit_hessian = MatrixXd(2, 2);
    const double off = u(rng);
    prev.explicit_hessian << u(rng), off, off, u(rng);
    prev.weights = VectorXd::Zero(1);
    prev.dirs = MatrixXd::Zero(2, 1);
    const auto model = fit_min_frobenius(prev.base, dirs, fv, &prev);

    // Unknowns (H11, H12, H22, c, g1, g2); weighted Frobenius distance to prev.
    const MatrixXd& p = prev.explicit_hessian;
    MatrixXd rows(pts, 6);
    for (int k = 0; k < pts; ++k) {
      const double w1 = dirs(0, k), w2 = dirs(1, k);
      rows.row(k) << 0.5 * w1 * w1, w1 * w2, 0.5 * w2 * w2, 1.0, w1, w2;
    }
    VectorXd wd(6), target(6);
    wd << 1.0, 2.0, 1.0, 0.0, 0.0, 0.0;
    target << p(0, 0), p(0, 1), p(1, 1), 0.0, 0.0, 0.0;
    MatrixXd kkt = MatrixXd::Zero(6 + pts, 6 + pts);
    kkt.topLeftCorner(6, 6) = 2.0 * wd.asDiagonal();
    kkt.topRightCorner(6, pts) = rows.transpose();
    kkt.bottomLeftCorner(pts, 6) = rows;
    VectorXd rhs(6 + pts);
    rhs.head(6) = 2.0 * wd.cwiseProduct(target);
    rhs.tail(pts) = fv;
    const VectorXd sol = kkt.fullPivHouseholderQr().solve(rhs);
    MatrixXd oracle(2, 2);
    oracle << sol[0], sol[1], sol[1], sol[2];
    frob_err = std::max(frob_err, (model.hessian() - oracle).cwiseAbs().maxCoeff());
  }
  detail += fmt("Frobenius oracle error %.2e; ", frob_err);

  // Descent on a nonconvex problem of several sizes.
  for (int dim : {3, 8, 15}) {
    MatrixXd b(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) b(i, j) = z(rng);
    const MatrixXd spd = b * b.transpose() + MatrixXd::Identity(dim, dim);
    auto f = [&](const VectorXd& x) {
      double s = 0.5 * x.dot(spd * x);
      for (int i = 0; i < dim; ++i) s += std::cos(3.0 * x[i]) + 0.1 * std::pow(x[i], 4);
      return s;
    };
    TrustRegionOptions o;
    o.radius0 = 0.3;
    o.max_evals = 150 * (dim + 1);
    const VectorXd x0 = VectorXd::NullaryExpr(dim, [&]() { return z(rng); });
    const auto res = minimize(f, x0, o);
    descent = descent && nonincreasing(res.diagnostics.history) && res.value <= f(x0);
  }
  detail += descent ? "descent held on every run" : "descent violated";

  ok = rosen_ok && q_err < 1e-6 && h_err < 1e-8 && frob_err < 1e-6 && descent;
  return {ok, detail};
}

// Composite trapezoid of products of basis derivatives, panel by panel, with
// one Richardson step.
MatrixXd trapezoid_product(const BSplineBasis& b, int deriv, int points) {
  auto pass = [&](int pts) {
    const std::vector<double> br = b.breakpoints();
    MatrixXd out = MatrixXd::Zero(b.size(), b.size());
    for (std::size_t s = 0; s + 1 < br.size(); ++s) {
      const double eps = 1e-12 * (br[s + 1] - br[s]);
      const VectorXd t = VectorXd::LinSpaced(pts, br[s] + eps, br[s + 1] - eps);
      const MatrixXd vals = eval_basis(b, t, deriv);
      VectorXd w = VectorXd::Constant(pts, (br[s + 1] - br[s]) / (pts - 1));
      w[0] *= 0.5;
      w[pts - 1] *= 0.5;
      out += vals.transpose() * w.asDiagonal() * vals;
    }
    return out;
  };
  return (4.0 * pass(2 * points - 1) - pass(points)) / 3.0;
}

double max_rel_error(const MatrixXd& got, const MatrixXd& want) {
  const double floor = 1e-12 * want.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < want.rows(); ++i)
    for (Eigen::Index j = 0; j < want.cols(); ++j) {
      const double d = std::abs(got(i, j) - want(i, j));
      if (d > floor) worst = std::max(worst, d / std::abs(want(i, j)));
    }
  return worst;
}

int numeric_rank(const MatrixXd& m) {
  const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(m).eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  int r = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) r += std::abs(ev[i]) > 1e-9 * top;
  return r;
}

double min_eigen_ratio(const MatrixXd& m) {
  const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(m).eigenvalues();
  return ev.minCoeff() / ev.cwiseAbs().maxCoeff();
}

Verdict penalty_algebra() {
  bool ok = true;
  std::string detail;
  const BSplineBasis t_basis = make_basis(1.0 / 60, 1.0, 15);
  const BSplineBasis s_basis = make_basis(0.02, 1.0, 12);
  const PenaltySet ps = make_penalty_set(t_basis, t_basis, s_basis);

  const int r_alpha = numeric_rank(ps.P_alpha), r_x = numeric_rank(ps.P_x);
  ok = ok && r_alpha == 13 && r_x == 10;
  detail += fmt("rank P(t) %g of 15, P(s) %g of 12; ", r_alpha, r_x);

  const MatrixXd full = assemble_penalty(ps, 0.7, 3.0);
  const int nullity = static_cast<int>(full.rows()) - numeric_rank(full);
  ok = ok && nullity == 2 + 4;
  detail += fmt("assembled penalty nullity %g (want 6); ", nullity);

  double worst_psd = 0.0;
  for (const MatrixXd* m : {&ps.P_alpha, &ps.P_x, &ps.gram_psi, &ps.gram_theta, &full})
    worst_psd = std::min(worst_psd, min_eigen_ratio(*m));
  ok = ok && worst_psd > -1e-10;
  detail += fmt("smallest relative eigenvalue %.2e; ", worst_psd);

  double worst = 0.0;
  for (const BSplineBasis* b : {&t_basis, &s_basis}) {
    worst = std::max(worst, max_rel_error(second_derivative_penalty(*b), trapezoid_product(*b, 2, 1000)));
    worst = std::max(worst, max_rel_error(gram_matrix(*b), trapezoid_product(*b, 0, 1000)));
  }
  ok = ok && worst <= 1e-6;
  detail += fmt("quadrature vs trapezoid max rel error %.2e (<= 1e-6)", worst);
  return {ok, detail};
}

Verdict metric_closed_forms() {
  const VectorXd t = response_grid();
  const VectorXd f = (2.0 * t.array()).sin() + 1.5;
  const double r = rrispee(f, 1.1 * f, t);
  // Estimate 1.1 f against truth f.
  const bool r_ok = std::abs(r - 10.0) <= 1e-12;

  const MatrixXd y = MatrixXd::Constant(7, 60, 0.25);
  const MatrixXd lo = MatrixXd::Constant(7, 60, -0.5), hi = MatrixXd::Constant(7, 60, 0.9);
  const double width = 1.4;
  const double score = interval_score(y, lo, hi);
  const double cpd = coverage_deviance(y, lo, hi);
  const bool s_ok = std::abs(score - width) <= 1e-12;
  const bool c_ok = std::abs(cpd - 0.05) <= 1e-12;
  return {r_ok && s_ok && c_ok,
          fmt("rrispee %.15g (10), interval score %.15g (width 1.4), ", r, score) +
              fmt("CPD %.15g (0.05)", cpd)};
}

Verdict thread_determinism(const std::string& cli) {
  if (cli.empty()) return {false, "path to the pflqr executable not given"};
  const fs::path root = fs::temp_directory_path() / "pflqr_acceptance_determinism";
  fs::remove_all(root);
  auto run = [&](int threads) {
    const fs::path dir = root / ("threads" + std::to_string(threads));
    const std::string cmd = "\"" + cli + "\" benchmark --dgp I --n 100 --reps 5 --seed 11 --k 15" +
                            " --max-evals 2000 --no-resume --threads " + std::to_string(threads) +
                            " --out-dir \"" + dir.string() + "\" > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return std::pair{status, dir / "report.csv"};
  };
  const auto [s1, p1] = run(1);
  const auto [s3, p3] = run(3);
  if (s1 != 0 || s3 != 0) return {false, "benchmark command failed"};
  const std::string a = read_text(p1.string()), b = read_text(p3.string());
  const long lines = std::count(a.begin(), a.end(), '\n');
  return {a == b && lines == 1 + 2 * 5,
          std::string(a == b ? "report.csv identical" : "report.csv differs") +
              fmt(" at 1 and 3 threads (%g bytes, %g lines)", double(a.size()), double(lines))};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <criterion 1-10> [pflqr executable]\n");
    return 2;
  }
  const int which = std::atoi(argv[1]);
  const std::string cli = argc > 2 ? argv[2] : "";
  // Runtime limit in seconds for each criterion.
  const double limits[] = {1, 30, 1800, 2700, 2700, 2700, 60, 10, 1, 300};
  const std::function<Verdict()> checks[] = {
      smoothed_loss_bound, quantile_recovery,  gamma_direction, clean_scale,
      robustness_ordering, wavy_ordering,      optimizer_suite, penalty_algebra,
      metric_closed_forms, [&] { return thread_determinism(cli); }};
  if (which < 1 || which > 10) {
    std::fprintf(stderr, "criterion must be between 1 and 10\n");
    return 2;
  }

  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = checks[which - 1]();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double limit = limits[which - 1];
  const bool in_time = secs < limit;
  const bool pass = v.pass && in_time;
  std::printf("criterion %d: %s  %s; runtime %.2f s (limit %g s)%s\n", which, pass ? "PASS" : "FAIL",
              v.detail.c_str(), secs, limit, in_time ? "" : " exceeded");
  return pass ? 0 : 1;
}
