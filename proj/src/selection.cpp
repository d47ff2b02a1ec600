#include "pflqr/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pflqr/errors.hpp"
#include "pflqr/metrics.hpp"
#include "pflqr/parallel.hpp"

namespace pflqr {

std::string to_string(BicVariant variant) {
  return variant == BicVariant::Standard ? "standard" : "df";
}

BicVariant parse_bic_variant(const std::string& name) {
  if (name == "standard") return BicVariant::Standard;
  if (name == "df") return BicVariant::EffectiveDf;
  throw InvalidArgument("unknown BIC variant '" + name + "' (expected standard or df)");
}

Eigen::VectorXd loss_curve(const QuantileFit& fit, const FunctionalSample& y,
                           const FunctionalSample& x, const std::vector<int>& curves) {
  if (y.num_curves() != x.num_curves()) {
    throw DimensionMismatch("response and predictor curve counts differ");
  }
  const Eigen::MatrixXd q = predict(fit, x, y.grid);
  const int m = y.num_points();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
  auto add = [&](int i) {
    for (int j = 0; j < m; ++j)
      out[j] += smooth_check_loss(y.values(i, j) - q(i, j), fit.tau, fit.gamma);
  };
  if (curves.empty()) {
    for (int i = 0; i < y.num_curves(); ++i) add(i);
  } else {
    for (int i : curves) {
      if (i < 0 || i >= y.num_curves()) throw BadTrimSet("curve index out of range");
      add(i);
    }
  }
  return out;
}

double effective_df(const QuantileFit& fit, const FunctionalSample& x) {
  const DesignPack design = make_design(fit.t_grid, x, fit.bases, fit.rule);
  const Eigen::MatrixXd gram = design.gram();
  const Eigen::MatrixXd lhs = gram + assemble_penalty(design.penalty, fit.lambda1, fit.lambda2);
  return lhs.ldlt().solve(gram).trace();
}

namespace {

double criterion(const QuantileFit& fit, const FunctionalSample& y, const FunctionalSample& x,
                 const std::vector<int>& curves, int kept, BicVariant variant) {
  const Eigen::VectorXd l = loss_curve(fit, y, x, curves);
  const double norm = std::sqrt(trapezoid(y.grid, l.array().square().matrix()));
  if (variant == BicVariant::Standard) return std::log(norm) + std::log(kept);
  const double obs = static_cast<double>(kept) * y.num_points();
  return std::log(norm) + effective_df(fit, x) * std::log(obs) / (2.0 * obs);
}

}  // namespace

double bic(const QuantileFit& fit, const FunctionalSample& y, const FunctionalSample& x,
           BicVariant variant) {
  return criterion(fit, y, x, {}, y.num_curves(), variant);
}

double bic_trimmed(const QuantileFit& fit, const FunctionalSample& y, const FunctionalSample& x,
                   double iota, BicVariant variant) {
  if (!(iota > 0.0 && iota <= 1.0)) throw InvalidArgument("iota must lie in (0, 1]");
  const int n = y.num_curves();
  const int kept = trimmed_count(n, iota);
  if (kept >= n) return bic(fit, y, x, variant);
  // Curves are ranked by their own loss at the fitted coefficients.
  const Eigen::MatrixXd q = predict(fit, x, y.grid);
  Eigen::VectorXd losses = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < y.num_points(); ++j)
      losses[i] += smooth_check_loss(y.values(i, j) - q(i, j), fit.tau, fit.gamma);
  return criterion(fit, y, x, smallest_indices(losses, kept), kept, variant);
}

std::vector<double> GridSpec::log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi >= lo) || count < 1) {
    throw InvalidArgument("log grid needs 0 < lo <= hi and a positive count");
  }
  std::vector<double> out(count);
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < count; ++i) {
    out[i] = count == 1 ? lo : std::pow(10.0, a + (b - a) * i / (count - 1));
  }
  return out;
}

void GridSpec::validate() const {
  auto check = [](const std::vector<double>& g, const char* name) {
    if (g.empty()) throw InvalidArgument(std::string(name) + " is empty");
    for (double v : g) {
      if (!(std::isfinite(v) && v > 0.0)) {
        throw InvalidArgument(std::string(name) + " must hold finite positive values");
      }
    }
    std::vector<double> s = g;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
      throw InvalidArgument(std::string(name) + " has repeated values");
    }
  };
  check(lambda1_grid, "lambda1_grid");
  check(lambda2_grid, "lambda2_grid");
}

int select_cell(const std::vector<BicCell>& cells) {
  int best = -1;
  for (int k = 0; k < static_cast<int>(cells.size()); ++k) {
    const auto& c = cells[k];
    if (!std::isfinite(c.bic)) continue;
    if (best < 0) {
      best = k;
      continue;
    }
    const auto& b = cells[best];
    if (c.bic < b.bic ||
        (c.bic == b.bic && (c.lambda1 > b.lambda1 ||
                            (c.lambda1 == b.lambda1 && c.lambda2 > b.lambda2)))) {
      best = k;
    }
  }
  return best;
}

GridSearchResult grid_search(const FunctionalSample& y, const FunctionalSample& x, double tau,
                             double gamma, const GridSpec& grid, const GridSearchOptions& search,
                             const FitOptions& opts) {
  grid.validate();
  if (!(search.iota > 0.0 && search.iota <= 1.0)) {
    throw InvalidArgument("iota must lie in (0, 1]");
  }
  std::vector<double> g1 = grid.lambda1_grid, g2 = grid.lambda2_grid;
  std::sort(g1.begin(), g1.end());
  std::sort(g2.begin(), g2.end());

  const int n1 = static_cast<int>(g1.size()), n2 = static_cast<int>(g2.size());
  std::vector<BicCell> cells(n1 * n2);
  std::vector<QuantileFit> fits(cells.size());
  parallel_for(static_cast<int>(cells.size()), search.threads, [&](int k) {
    BicCell& cell = cells[k];
    cell.lambda1 = g1[k / n2];
    cell.lambda2 = g2[k % n2];
    try {
      fits[k] = fit(y, x, tau, gamma, cell.lambda1, cell.lambda2, opts);
      cell.converged = fits[k].converged;
      cell.bic = bic_trimmed(fits[k], y, x, search.iota, search.variant);
      if (!std::isfinite(cell.bic)) cell.error = "non-finite criterion";
    } catch (const std::exception& e) {
      cell.bic = std::numeric_limits<double>::quiet_NaN();
      cell.error = e.what();
    }
  });

  const int best = select_cell(cells);
  if (best < 0) {
    std::ostringstream msg;
    msg << "every grid cell failed; first error: " << cells.front().error;
    throw Error(msg.str());
  }
  GridSearchResult out;
  out.lambda1 = cells[best].lambda1;
  out.lambda2 = cells[best].lambda2;
  out.fit = std::move(fits[best]);
  out.cells = std::move(cells);
  return out;
}

}  // namespace pflqr
