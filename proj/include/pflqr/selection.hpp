#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pflqr/model.hpp"

namespace pflqr {

enum class BicVariant {
  Standard,  // ln ||L|| + ln(n)
  // ln ||L|| + df ln(N) / (2N) with df the trace of the penalized
  // least-squares smoother and N the number of retained observations.
  EffectiveDf,
};

std::string to_string(BicVariant variant);
BicVariant parse_bic_variant(const std::string& name);  // "standard" or "df"

// Pointwise loss curve L(t_j) = sum over the given curves of
// rho_tilde(Y_ij - q_hat_ij). Empty `curves` means all of them.
Eigen::VectorXd loss_curve(const QuantileFit& fit, const FunctionalSample& y,
                           const FunctionalSample& x, const std::vector<int>& curves = {});

// ln of the trapezoid L2 norm of loss_curve over the t-grid, plus ln(n).
double bic(const QuantileFit& fit, const FunctionalSample& y, const FunctionalSample& x,
           BicVariant variant = BicVariant::Standard);

// As bic, restricted to the trimmed_count(n, iota) best-fitting curves and
// with ln(trimmed_count) in place of ln(n). iota = 1 gives bic().
double bic_trimmed(const QuantileFit& fit, const FunctionalSample& y, const FunctionalSample& x,
                   double iota, BicVariant variant = BicVariant::Standard);

// Trace of (Pi^T Pi + P)^{-1} Pi^T Pi at the fit's penalties.
double effective_df(const QuantileFit& fit, const FunctionalSample& x);

struct GridSpec {
  std::vector<double> lambda1_grid = log_grid(1e-4, 1e4, 9);
  std::vector<double> lambda2_grid = log_grid(1e-4, 1e4, 9);

  // Nonempty, finite, strictly positive and without repeated values.
  void validate() const;

  // count points equally spaced in log10 between lo and hi.
  static std::vector<double> log_grid(double lo, double hi, int count);
};

struct BicCell {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double bic = 0.0;  // NaN when the fit failed
  bool converged = false;
  std::string error;  // empty on success
};

struct GridSearchResult {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<BicCell> cells;  // lambda1 ascending, then lambda2 ascending
  QuantileFit fit;             // fit at the selected pair
};

struct GridSearchOptions {
  // Retained fraction for the criterion. The cell fits themselves use
  // FitOptions::trim_fraction.
  double iota = 0.8;
  BicVariant variant = BicVariant::Standard;
  int threads = 1;
};

// Fits every (lambda1, lambda2) pair, each cell started from its own
// penalized least-squares solution, and returns the pair with the smallest
// (trimmed) BIC. Ties go to the larger lambda1, then the larger lambda2.
// Throws only when every cell fails.
GridSearchResult grid_search(const FunctionalSample& y, const FunctionalSample& x, double tau,
                             double gamma, const GridSpec& grid,
                             const GridSearchOptions& search = {}, const FitOptions& opts = {});

// Index of the winning cell under the tie-break rule; -1 if none is finite.
int select_cell(const std::vector<BicCell>& cells);

}  // namespace pflqr
