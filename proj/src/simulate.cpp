#include "pflqr/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "pflqr/errors.hpp"

namespace pflqr {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kTerms = 10;

enum Stream : std::uint64_t {
  kPredictorTrain = 1,
  kNoiseTrain = 2,
  kContamination = 3,
  kPredictorTest = 4,
  kNoiseTest = 5,
};

Eigen::VectorXd uniform_grid(int count) {
  Eigen::VectorXd g(count);
  for (int r = 0; r < count; ++r) g[r] = static_cast<double>(r + 1) / count;
  return g;
}

}  // namespace

std::string to_string(Dgp dgp) {
  switch (dgp) {
    case Dgp::I: return "I";
    case Dgp::II: return "II";
    case Dgp::III: return "III";
  }
  return "?";
}

Dgp parse_dgp(const std::string& name) {
  if (name == "I" || name == "1") return Dgp::I;
  if (name == "II" || name == "2") return Dgp::II;
  if (name == "III" || name == "3") return Dgp::III;
  throw InvalidArgument("unknown data generating process '" + name + "' (expected I, II or III)");
}

void DgpSpec::validate() const {
  if (n_train < 1) throw InvalidArgument("n_train must be positive");
  if (n_test < 0) throw InvalidArgument("n_test must be nonnegative");
  if (!(contamination >= 0.0 && contamination < 1.0)) {
    throw InvalidArgument("contamination must lie in [0, 1)");
  }
  if (!(noise_sd >= 0.0)) throw InvalidArgument("noise_sd must be nonnegative");
  if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidArgument("rho must lie in [0, 1]");
  if (!(dgp3_sd >= 0.0)) throw InvalidArgument("dgp3_sd must be nonnegative");
}

Eigen::VectorXd predictor_grid() { return uniform_grid(50); }
Eigen::VectorXd response_grid() { return uniform_grid(60); }
Eigen::VectorXd high_resolution_grid() { return uniform_grid(2000); }

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

FunctionalSample gen_predictors(int n, std::uint64_t seed, const Eigen::VectorXd& grid,
                                bool zero_coefficients) {
  if (n < 1) throw InvalidArgument("number of curves must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  // xi(i, r) for the sine terms and xi(i, kTerms + r) for the cosine terms.
  Eigen::MatrixXd xi(n, 2 * kTerms);
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < 2 * kTerms; ++r) xi(i, r) = zero_coefficients ? 0.0 : z(rng);

  Eigen::MatrixXd basis(2 * kTerms, grid.size());
  for (int r = 1; r <= kTerms; ++r) {
    const double scale = std::sqrt(2.0) / (r * r);
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      basis(r - 1, j) = scale * std::sin(r * kPi * grid[j]);
      basis(kTerms + r - 1, j) = scale * std::cos(r * kPi * grid[j]);
    }
  }
  FunctionalSample x;
  x.grid = grid;
  x.values = xi * basis;
  x.domain_lo = 0.0;
  x.domain_hi = 1.0;
  return x;
}

FunctionalSample gen_predictors(int n, std::uint64_t seed, bool zero_coefficients) {
  return gen_predictors(n, seed, predictor_grid(), zero_coefficients);
}

double true_alpha(Dgp dgp, double t, bool outlier) {
  if (dgp == Dgp::I) {
    return outlier ? 4.0 * std::exp(-t * t) : 2.0 * std::exp(-(t - 1.0) * (t - 1.0));
  }
  return outlier ? 4.0 * std::cos(8.0 * kPi * t) : 2.0 * std::sin(4.0 * kPi * t);
}

double true_beta(Dgp dgp, double t, double s, bool outlier) {
  if (dgp == Dgp::I) {
    return outlier ? 6.0 * std::sin(4.0 * kPi * t) * std::sin(2.0 * kPi * s)
                   : 4.0 * std::cos(2.0 * kPi * t) * std::sin(kPi * s);
  }
  return outlier ? 6.0 * std::cos(8.0 * kPi * t) * std::sin(6.0 * kPi * s)
                 : 4.0 * std::cos(4.0 * kPi * t) * std::sin(4.0 * kPi * s);
}

Eigen::VectorXd true_alpha(Dgp dgp, const Eigen::VectorXd& t_grid, bool outlier) {
  Eigen::VectorXd out(t_grid.size());
  for (Eigen::Index j = 0; j < t_grid.size(); ++j) out[j] = true_alpha(dgp, t_grid[j], outlier);
  return out;
}

Eigen::MatrixXd true_beta(Dgp dgp, const Eigen::VectorXd& t_grid, const Eigen::VectorXd& s_grid,
                          bool outlier) {
  Eigen::MatrixXd out(t_grid.size(), s_grid.size());
  for (Eigen::Index j = 0; j < t_grid.size(); ++j)
    for (Eigen::Index r = 0; r < s_grid.size(); ++r)
      out(j, r) = true_beta(dgp, t_grid[j], s_grid[r], outlier);
  return out;
}

Eigen::MatrixXd signal(const FunctionalSample& x, Dgp dgp, const Eigen::VectorXd& t_grid,
                       bool outlier) {
  const Eigen::VectorXd w = quadrature_weights(x.grid, QuadratureRule::LeftRectangle);
  const Eigen::MatrixXd beta = true_beta(dgp, t_grid, x.grid, outlier);  // M x G
  Eigen::MatrixXd out = x.values * w.asDiagonal() * beta.transpose();   // n x M
  out.rowwise() += true_alpha(dgp, t_grid, outlier).transpose();
  return out;
}

NoiseSpec noise_of(const DgpSpec& spec) {
  return {true, spec.noise_sd, spec.rho, spec.dgp3_sd};
}

Eigen::MatrixXd gen_noise(int n, int m, Dgp dgp, const NoiseSpec& noise, std::uint64_t seed) {
  Eigen::MatrixXd eps = Eigen::MatrixXd::Zero(n, m);
  if (!noise.enabled) return eps;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  if (dgp != Dgp::III) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) eps(i, j) = noise.sd * z(rng);
    return eps;
  }
  const double shared = std::sqrt(noise.rho), own = std::sqrt(1.0 - noise.rho);
  for (int j = 0; j < m; ++j) {
    const double z0 = z(rng);
    for (int i = 0; i < n; ++i) eps(i, j) = noise.dgp3_sd * (shared * z0 + own * z(rng));
  }
  return eps;
}

namespace {

// Response on the standard t-grid. When x_fine is given the integral is taken
// on that finer grid instead of x's own grid.
FunctionalSample response_from(const FunctionalSample& x, const FunctionalSample* x_fine,
                               Dgp dgp, const NoiseSpec& noise, std::uint64_t seed,
                               bool outlier = false) {
  const Eigen::VectorXd t = response_grid();
  FunctionalSample y;
  y.grid = t;
  y.domain_lo = 0.0;
  y.domain_hi = 1.0;
  y.values = signal(x_fine ? *x_fine : x, dgp, t, outlier) +
             gen_noise(x.num_curves(), static_cast<int>(t.size()), dgp, noise, seed);
  return y;
}

}  // namespace

FunctionalSample gen_response(const FunctionalSample& x, Dgp dgp, const NoiseSpec& noise,
                              std::uint64_t seed) {
  return response_from(x, nullptr, dgp, noise, seed);
}

Contaminated contaminate(const FunctionalSample& y, const FunctionalSample& x, Dgp dgp,
                         double fraction, const NoiseSpec& noise, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw InvalidArgument("contamination fraction must lie in [0, 1)");
  }
  if (y.num_curves() != x.num_curves()) {
    throw DimensionMismatch("response and predictor curve counts differ");
  }
  const int n = y.num_curves();
  const int count = static_cast<int>(std::lround(fraction * n));
  Contaminated out{y, {}};
  if (count == 0) return out;

  std::mt19937_64 rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  out.outliers.assign(order.begin(), order.begin() + count);
  std::sort(out.outliers.begin(), out.outliers.end());

  FunctionalSample xs;
  xs.grid = x.grid;
  xs.domain_lo = x.domain_lo;
  xs.domain_hi = x.domain_hi;
  xs.values.resize(count, x.values.cols());
  for (int k = 0; k < count; ++k) xs.values.row(k) = x.values.row(out.outliers[k]);
  const Eigen::MatrixXd fresh =
      signal(xs, dgp, y.grid, true) +
      gen_noise(count, y.num_points(), dgp, noise, rng());
  for (int k = 0; k < count; ++k) out.y.values.row(out.outliers[k]) = fresh.row(k);
  return out;
}

SimulatedData simulate(const DgpSpec& spec, std::uint64_t replicate) {
  spec.validate();
  const NoiseSpec noise = noise_of(spec);
  SimulatedData out;
  auto make = [&](int n, std::uint64_t px, std::uint64_t pn, FunctionalSample& x,
                  FunctionalSample& y) {
    const std::uint64_t xseed = derive_seed(spec.seed, replicate, px);
    const std::uint64_t nseed = derive_seed(spec.seed, replicate, pn);
    x = gen_predictors(n, xseed);
    if (spec.high_resolution) {
      const FunctionalSample fine = gen_predictors(n, xseed, high_resolution_grid());
      y = response_from(x, &fine, spec.dgp, noise, nseed);
    } else {
      y = response_from(x, nullptr, spec.dgp, noise, nseed);
    }
  };
  make(spec.n_train, kPredictorTrain, kNoiseTrain, out.x_train, out.y_train);
  if (spec.n_test > 0) make(spec.n_test, kPredictorTest, kNoiseTest, out.x_test, out.y_test);
  if (spec.contamination > 0.0) {
    auto c = contaminate(out.y_train, out.x_train, spec.dgp, spec.contamination, noise,
                         derive_seed(spec.seed, replicate, kContamination));
    out.y_train = std::move(c.y);
    out.outliers = std::move(c.outliers);
  }
  return out;
}

}  // namespace pflqr
