#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "pflqr/design.hpp"

namespace pflqr {

enum class Dgp { I, II, III };

std::string to_string(Dgp dgp);
Dgp parse_dgp(const std::string& name);  // "I", "II", "III" (also 1, 2, 3)

struct DgpSpec {
  Dgp dgp = Dgp::I;
  int n_train = 100;
  int n_test = 100;
  double contamination = 0.0;  // fraction of training curves replaced by outliers
  double noise_sd = 0.01;      // DGP-I and DGP-II
  double rho = 0.8;            // DGP-III equicorrelation
  double dgp3_sd = 1.0;        // DGP-III marginal error sd
  std::uint64_t seed = 1;
  bool high_resolution = false;  // integrate on a 2000-point s-grid

  void validate() const;
};

// s_r = r / 50, r = 1..50 and t_j = j / 60, j = 1..60.
Eigen::VectorXd predictor_grid();
Eigen::VectorXd response_grid();
Eigen::VectorXd high_resolution_grid();  // r / 2000, r = 1..2000

// Independent random streams for (seed, replicate, purpose).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream);

// X_i(s) = sum_{r=1}^{10} r^-2 (xi_{i1r} sqrt2 sin(r pi s) + xi_{i2r} sqrt2 cos(r pi s)).
// zero_coefficients forces every xi to 0.
FunctionalSample gen_predictors(int n, std::uint64_t seed, bool zero_coefficients = false);
FunctionalSample gen_predictors(int n, std::uint64_t seed, const Eigen::VectorXd& grid,
                                bool zero_coefficients = false);

// Intercept and coefficient surface of each design (outlier versions when
// outlier is true; DGP-III shares DGP-II's functions).
double true_alpha(Dgp dgp, double t, bool outlier = false);
double true_beta(Dgp dgp, double t, double s, bool outlier = false);
Eigen::VectorXd true_alpha(Dgp dgp, const Eigen::VectorXd& t_grid, bool outlier = false);
Eigen::MatrixXd true_beta(Dgp dgp, const Eigen::VectorXd& t_grid, const Eigen::VectorXd& s_grid,
                          bool outlier = false);

// Noise-free alpha(t_j) + left-rectangle integral of X_i(s) beta(t_j, s).
Eigen::MatrixXd signal(const FunctionalSample& x, Dgp dgp, const Eigen::VectorXd& t_grid,
                       bool outlier = false);

struct NoiseSpec {
  bool enabled = true;
  double sd = 0.01;
  double rho = 0.8;
  double dgp3_sd = 1.0;
};

NoiseSpec noise_of(const DgpSpec& spec);

// Errors for n curves at M points. DGP-III draws, independently for each t_j,
// a vector over curves with equicorrelation rho and marginal sd dgp3_sd.
Eigen::MatrixXd gen_noise(int n, int m, Dgp dgp, const NoiseSpec& noise, std::uint64_t seed);

FunctionalSample gen_response(const FunctionalSample& x, Dgp dgp, const NoiseSpec& noise,
                              std::uint64_t seed);

struct Contaminated {
  FunctionalSample y;
  std::vector<int> outliers;  // ascending
};

// Replaces round(fraction * n) randomly chosen curves with responses generated
// from the outlier functions (same predictors, fresh noise).
Contaminated contaminate(const FunctionalSample& y, const FunctionalSample& x, Dgp dgp,
                         double fraction, const NoiseSpec& noise, std::uint64_t seed);

struct SimulatedData {
  FunctionalSample x_train;
  FunctionalSample y_train;
  FunctionalSample x_test;
  FunctionalSample y_test;  // clean
  std::vector<int> outliers;
};

// Training and test sets for one replicate. The test set is never contaminated.
SimulatedData simulate(const DgpSpec& spec, std::uint64_t replicate = 0);

}  // namespace pflqr
