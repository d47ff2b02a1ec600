// Command-line front end: simulate, fit, predict and benchmark.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pflqr/benchmark.hpp"
#include "pflqr/errors.hpp"
#include "pflqr/io.hpp"
#include "pflqr/model.hpp"
#include "pflqr/parallel.hpp"
#include "pflqr/selection.hpp"
#include "pflqr/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pflqr;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsage = 2;

// Raised for invalid flag values; the message names the flag.
struct UsageError : InvalidArgument {
  UsageError(const std::string& field, const std::string& what)
      : InvalidArgument("--" + field + ": " + what) {}
};

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw UsageError(field, what);
}

// A lambda flag holds a positive number or "auto".
struct LambdaArg {
  bool automatic = false;
  double value = 0.0;
};

LambdaArg parse_lambda(const std::string& text, const std::string& field) {
  if (text == "auto") return {true, 0.0};
  double v = 0.0;
  try {
    v = parse_double(text, field);
  } catch (const InvalidArgument&) {
    throw UsageError(field, "expected a positive number or 'auto', got '" + text + "'");
  }
  require(std::isfinite(v) && v > 0.0, field, "must be positive");
  return {false, v};
}

// Flags shared by fit and benchmark.
struct ModelFlags {
  double tau = 0.5;
  double gamma = 0.005;
  std::string lambda1 = "1e-4";
  std::string lambda2 = "1e-4";
  int k = 15;
  std::optional<int> k0, ky, kx;
  int degree = 3;
  std::string rule = "left_rectangle";
  double trim = 1.0;
  double iota = 0.8;
  std::string bic = "standard";
  double grid_lo = 1e-4;
  double grid_hi = 1e4;
  int grid_size = 9;
  int max_evals = 0;
  double radius0 = 0.05;
  double radius_min = 1e-6;

  void add(CLI::App* app) {
    app->add_option("--tau", tau, "Quantile level")->capture_default_str();
    app->add_option("--gamma", gamma, "Smoothing parameter of the check loss")
        ->capture_default_str();
    app->add_option("--lambda1", lambda1, "Intercept penalty, or 'auto' for BIC grid search")
        ->capture_default_str();
    app->add_option("--lambda2", lambda2, "Surface penalty, or 'auto' for BIC grid search")
        ->capture_default_str();
    app->add_option("--k", k, "Basis size for all three bases")->capture_default_str();
    app->add_option("--k0", k0, "Basis size for the intercept (overrides --k)");
    app->add_option("--ky", ky, "Basis size of the surface in t (overrides --k)");
    app->add_option("--kx", kx, "Basis size of the surface in s (overrides --k)");
    app->add_option("--degree", degree, "Spline degree")->capture_default_str();
    app->add_option("--rule", rule, "Predictor quadrature: left_rectangle or trapezoid")
        ->capture_default_str();
    app->add_option("--trim", trim, "Fraction of curves kept in the fit objective")
        ->capture_default_str();
    app->add_option("--iota", iota, "Fraction of curves kept in the BIC")->capture_default_str();
    app->add_option("--bic", bic, "BIC variant: standard or df")->capture_default_str();
    app->add_option("--grid-lo", grid_lo, "Smallest lambda in the search grid")
        ->capture_default_str();
    app->add_option("--grid-hi", grid_hi, "Largest lambda in the search grid")
        ->capture_default_str();
    app->add_option("--grid-size", grid_size, "Log-spaced lambda values per axis")
        ->capture_default_str();
    app->add_option("--max-evals", max_evals,
                    "Objective evaluations per fit (0: 500 per coefficient)")
        ->capture_default_str();
    app->add_option("--radius0", radius0, "Initial trust-region radius")->capture_default_str();
    app->add_option("--radius-min", radius_min, "Final trust-region radius")
        ->capture_default_str();
  }

  FitOptions fit_options() const {
    require(k >= degree + 1, "k", "must be at least degree + 1");
    require(degree >= 1, "degree", "must be at least 1");
    const std::pair<std::optional<int>, const char*> sizes[] = {{k0, "k0"}, {ky, "ky"}, {kx, "kx"}};
    for (const auto& [v, name] : sizes)
      require(!v || *v >= degree + 1, name, "must be at least degree + 1");
    require(rule == "left_rectangle" || rule == "trapezoid", "rule",
            "expected left_rectangle or trapezoid");
    require(trim > 0.0 && trim <= 1.0, "trim", "must lie in (0, 1]");
    require(max_evals >= 0, "max-evals", "must be nonnegative");
    require(std::isfinite(radius0) && radius0 > 0.0, "radius0", "must be positive");
    require(radius_min > 0.0 && radius_min < radius0, "radius-min",
            "must be positive and below --radius0");
    FitOptions o;
    o.basis = {k0.value_or(k), ky.value_or(k), kx.value_or(k), degree};
    o.rule = rule == "trapezoid" ? QuadratureRule::Trapezoid : QuadratureRule::LeftRectangle;
    o.trim_fraction = trim;
    o.optimizer.radius0 = radius0;
    o.optimizer.radius_min = radius_min;
    o.optimizer.max_evals = max_evals;
    return o;
  }

  void check_loss() const {
    require(tau > 0.0 && tau < 1.0, "tau", "must lie in (0, 1)");
    require(std::isfinite(gamma) && gamma > 0.0, "gamma", "must be positive");
  }

  GridSearchOptions search_options() const {
    require(iota > 0.0 && iota <= 1.0, "iota", "must lie in (0, 1]");
    require(bic == "standard" || bic == "df", "bic", "expected standard or df");
    GridSearchOptions s;
    s.iota = iota;
    s.variant = parse_bic_variant(bic);
    return s;
  }

  // Grid for each lambda: the search grid when automatic, else the single value.
  GridSpec grid(const LambdaArg& l1, const LambdaArg& l2) const {
    require(grid_lo > 0.0 && grid_hi >= grid_lo, "grid-lo", "need 0 < grid-lo <= grid-hi");
    require(grid_size >= 1, "grid-size", "must be at least 1");
    GridSpec g;
    const auto full = GridSpec::log_grid(grid_lo, grid_hi, grid_size);
    g.lambda1_grid = l1.automatic ? full : std::vector<double>{l1.value};
    g.lambda2_grid = l2.automatic ? full : std::vector<double>{l2.value};
    return g;
  }
};

// --- config file -----------------------------------------------------------

std::vector<std::string> config_args(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw UsageError("config", path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config", path + ": top level must be an object");
  std::vector<std::string> out;
  auto scalar = [&](const std::string& key, const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return format_double(v.get<double>());
    throw UsageError(key, "config value must be a string or a number");
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "config") throw UsageError("config", "config files cannot nest");
    if (value.is_boolean()) {
      if (value.get<bool>()) out.push_back("--" + key);
    } else if (value.is_array()) {
      for (const auto& v : value) {
        out.push_back("--" + key);
        out.push_back(scalar(key, v));
      }
    } else {
      out.push_back("--" + key);
      out.push_back(scalar(key, value));
    }
  }
  return out;
}

// Places the options from a --config file right after the subcommand, so
// anything given on the command line (parsed later, last value wins) overrides.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path || args.empty()) return args;
  const auto extra = config_args(*path);
  args.insert(args.begin() + 1, extra.begin(), extra.end());
  return args;
}

// --- commands ----------------------------------------------------------------

struct SimulateCmd {
  std::string dgp = "I";
  int n = 100;
  int n_test = 0;
  double contamination = 0.0;
  std::uint64_t seed = 1;
  std::uint64_t rep = 0;
  double noise_sd = 0.01;
  double rho = 0.8;
  double dgp3_sd = 1.0;
  bool high_resolution = false;
  std::string out_dir = ".";

  void add(CLI::App* app) {
    app->add_option("--dgp", dgp, "Data generating process: I, II or III")->capture_default_str();
    app->add_option("--n", n, "Training curves")->capture_default_str();
    app->add_option("--n-test", n_test, "Test curves (written when positive)")
        ->capture_default_str();
    app->add_option("--contamination", contamination, "Fraction of outlying training curves")
        ->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_option("--rep", rep, "Replicate index")->capture_default_str();
    app->add_option("--noise-sd", noise_sd, "Error sd for DGP I and II")->capture_default_str();
    app->add_option("--rho", rho, "Error correlation for DGP III")->capture_default_str();
    app->add_option("--dgp3-sd", dgp3_sd, "Error sd for DGP III")->capture_default_str();
    app->add_flag("--high-resolution", high_resolution,
                  "Integrate the responses on a 2000-point predictor grid");
    app->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  }

  DgpSpec spec() const {
    DgpSpec s;
    try {
      s.dgp = parse_dgp(dgp);
    } catch (const InvalidArgument& e) {
      throw UsageError("dgp", e.what());
    }
    require(n >= 1, "n", "must be at least 1");
    require(n_test >= 0, "n-test", "must be nonnegative");
    require(contamination >= 0.0 && contamination < 1.0, "contamination", "must lie in [0, 1)");
    require(noise_sd >= 0.0, "noise-sd", "must be nonnegative");
    require(rho >= 0.0 && rho <= 1.0, "rho", "must lie in [0, 1]");
    require(dgp3_sd >= 0.0, "dgp3-sd", "must be nonnegative");
    s.n_train = n;
    s.n_test = n_test;
    s.contamination = contamination;
    s.seed = seed;
    s.noise_sd = noise_sd;
    s.rho = rho;
    s.dgp3_sd = dgp3_sd;
    s.high_resolution = high_resolution;
    return s;
  }

  int run() const {
    const DgpSpec s = spec();
    const SimulatedData data = simulate(s, rep);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create '" + out_dir + "': " + ec.message());
    const fs::path dir(out_dir);
    write_sample((dir / "y.csv").string(), data.y_train);
    write_sample((dir / "x.csv").string(), data.x_train);
    if (s.n_test > 0) {
      write_sample((dir / "y_test.csv").string(), data.y_test);
      write_sample((dir / "x_test.csv").string(), data.x_test);
    }
    write_text((dir / "truth.json").string(), truth_to_json(s, rep, data).dump(2) + "\n");
    std::cout << "wrote " << data.y_train.num_curves() << " curves to " << out_dir << "\n";
    return 0;
  }
};

FunctionalSample read_input(const std::string& path, const std::string& field) {
  require(!path.empty(), field, "is required");
  try {
    return read_sample(path);
  } catch (const IoError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw UsageError(field, e.what());
  }
}

struct FitCmd {
  ModelFlags model;
  std::string y_path, x_path;
  std::string out = "fit.json";
  std::string method = "quantile";
  std::string bic_out;
  int threads = default_threads();

  void add(CLI::App* app) {
    app->add_option("--y", y_path, "Response CSV");
    app->add_option("--x", x_path, "Predictor CSV");
    app->add_option("--out", out, "Fit JSON to write")->capture_default_str();
    app->add_option("--method", method, "quantile or ls (penalized least squares)")
        ->capture_default_str();
    app->add_option("--bic-out", bic_out, "BIC table CSV (with lambda search)");
    app->add_option("--threads", threads, "Workers for the lambda search")
        ->capture_default_str();
    model.add(app);
  }

  int run() const {
    model.check_loss();
    const FitOptions opts = model.fit_options();
    const LambdaArg l1 = parse_lambda(model.lambda1, "lambda1");
    const LambdaArg l2 = parse_lambda(model.lambda2, "lambda2");
    require(method == "quantile" || method == "ls", "method", "expected quantile or ls");
    require(threads >= 1, "threads", "must be at least 1");
    const GridSearchOptions search_base = model.search_options();
    const GridSpec grid = model.grid(l1, l2);
    const FunctionalSample y = read_input(y_path, "y");
    const FunctionalSample x = read_input(x_path, "x");
    if (y.num_curves() != x.num_curves()) {
      throw UsageError("x", "has " + std::to_string(x.num_curves()) + " curves but --y has " +
                                std::to_string(y.num_curves()));
    }

    QuantileFit result;
    if (method == "ls") {
      require(!l1.automatic && !l2.automatic, "method", "ls needs fixed lambdas");
      result = fit_least_squares(y, x, l1.value, l2.value, opts);
    } else if (l1.automatic || l2.automatic) {
      GridSearchOptions search = search_base;
      search.threads = threads;
      GridSearchResult gs = grid_search(y, x, model.tau, model.gamma, grid, search, opts);
      if (!bic_out.empty()) write_text(bic_out, bic_table_csv(gs.cells));
      std::cout << "selected lambda1=" << format_double(gs.lambda1)
                << " lambda2=" << format_double(gs.lambda2) << "\n";
      result = std::move(gs.fit);
    } else {
      result = fit(y, x, model.tau, model.gamma, l1.value, l2.value, opts);
    }
    save_fit(out, result);
    std::cout << "objective " << format_double(result.objective_value) << " after "
              << result.diagnostics.evals << " evaluations ("
              << to_string(result.diagnostics.stop_reason) << ")\n";
    return 0;
  }
};

struct PredictCmd {
  std::string fit_path, x_path;
  std::string out = "pred.csv";
  double interval = 0.0;
  std::string fit_lo, fit_hi;
  std::string train_y, train_x;

  void add(CLI::App* app) {
    app->add_option("--fit", fit_path, "Fit JSON");
    app->add_option("--x", x_path, "Predictor CSV for the new curves");
    app->add_option("--out", out, "Prediction CSV to write")->capture_default_str();
    app->add_option("--interval", interval, "Prediction interval level, e.g. 0.95");
    app->add_option("--fit-lo", fit_lo, "Fit at the lower quantile level");
    app->add_option("--fit-hi", fit_hi, "Fit at the upper quantile level");
    app->add_option("--train-y", train_y, "Training responses to fit the interval ends");
    app->add_option("--train-x", train_x, "Training predictors to fit the interval ends");
  }

  int run() const {
    require(!fit_path.empty(), "fit", "is required");
    const bool want_interval = interval != 0.0;
    if (want_interval) {
      require(interval > 0.0 && interval < 1.0, "interval", "must lie in (0, 1)");
      const bool files = !fit_lo.empty() && !fit_hi.empty();
      const bool refit = !train_y.empty() && !train_x.empty();
      require(files || refit, "interval", "needs --fit-lo and --fit-hi or --train-y and --train-x");
    }
    QuantileFit main_fit;
    try {
      main_fit = load_fit(fit_path);
    } catch (const InvalidArgument& e) {
      throw UsageError("fit", e.what());
    }
    const FunctionalSample x_new = read_input(x_path, "x");
    require(x_new.num_curves() > 0, "x", "holds no curves");

    std::vector<PredictionBlock> blocks;
    const Eigen::MatrixXd point = predict(main_fit, x_new);
    if (!want_interval) {
      blocks.push_back({"point", point});
    } else {
      QuantileFit lo, hi;
      if (!fit_lo.empty() && !fit_hi.empty()) {
        lo = load_fit(fit_lo);
        hi = load_fit(fit_hi);
      } else {
        const FunctionalSample y = read_input(train_y, "train-y");
        const FunctionalSample x = read_input(train_x, "train-x");
        const auto [tlo, thi] = interval_levels(interval);
        FitOptions opts;
        opts.basis = {main_fit.bases.alpha.size(), main_fit.bases.y.size(),
                      main_fit.bases.x.size(), main_fit.bases.y.degree()};
        opts.rule = main_fit.rule;
        opts.trim_fraction = main_fit.trim_fraction;
        lo = fit(y, x, tlo, main_fit.gamma, main_fit.lambda1, main_fit.lambda2, opts);
        hi = fit(y, x, thi, main_fit.gamma, main_fit.lambda1, main_fit.lambda2, opts);
      }
      const Eigen::MatrixXd lower = predict(lo, x_new, main_fit.t_grid);
      const Eigen::MatrixXd upper = predict(hi, x_new, main_fit.t_grid);
      const double crossing = crossing_fraction(lower, upper);
      if (crossing > 0.0) {
        std::cerr << "warning: lower bound above upper bound at " << crossing * 100.0
                  << "% of the points\n";
      }
      blocks = {{"lo", lower}, {"point", point}, {"hi", upper}};
    }
    write_text(out, prediction_to_csv(blocks));
    FunctionalSample grid_holder;
    grid_holder.grid = main_fit.t_grid;
    grid_holder.values = point;
    grid_holder.domain_lo = main_fit.bases.y.lo();
    grid_holder.domain_hi = main_fit.bases.y.hi();
    write_text(meta_path(out), grid_meta(grid_holder).dump(2) + "\n");
    std::cout << "wrote " << point.rows() << " predicted curves to " << out << "\n";
    return 0;
  }
};

struct BenchmarkCmd {
  SimulateCmd data;
  ModelFlags model;
  int reps = 20;
  int threads = default_threads();
  bool intervals = false;
  double level = 0.95;
  bool no_baseline = false;
  bool no_resume = false;
  std::string out_dir = "benchmark";

  void add(CLI::App* app) {
    data.n_test = 100;
    app->add_option("--dgp", data.dgp, "Data generating process: I, II or III")
        ->capture_default_str();
    app->add_option("--n", data.n, "Training curves")->capture_default_str();
    app->add_option("--n-test", data.n_test, "Test curves")->capture_default_str();
    app->add_option("--contamination", data.contamination, "Fraction of outlying training curves")
        ->capture_default_str();
    app->add_option("--seed", data.seed, "Random seed")->capture_default_str();
    app->add_option("--noise-sd", data.noise_sd, "Error sd for DGP I and II")
        ->capture_default_str();
    app->add_option("--rho", data.rho, "Error correlation for DGP III")->capture_default_str();
    app->add_option("--dgp3-sd", data.dgp3_sd, "Error sd for DGP III")->capture_default_str();
    app->add_flag("--high-resolution", data.high_resolution,
                  "Integrate the responses on a 2000-point predictor grid");
    app->add_option("--reps", reps, "Replicates")->capture_default_str();
    app->add_option("--threads", threads, "Replicates run in parallel")->capture_default_str();
    app->add_flag("--intervals", intervals, "Also score prediction intervals");
    app->add_option("--level", level, "Prediction interval level")->capture_default_str();
    app->add_flag("--no-baseline", no_baseline, "Skip the penalized least-squares baseline");
    app->add_flag("--no-resume", no_resume, "Ignore existing checkpoints");
    app->add_option("--out-dir", out_dir, "Directory for report.csv, summary.json, checkpoints")
        ->capture_default_str();
    model.add(app);
  }

  int run() const {
    BenchmarkConfig cfg;
    cfg.data = data.spec();
    require(reps >= 1, "reps", "must be at least 1");
    require(threads >= 1, "threads", "must be at least 1");
    model.check_loss();
    cfg.reps = reps;
    cfg.tau = model.tau;
    cfg.gamma = model.gamma;
    const LambdaArg l1 = parse_lambda(model.lambda1, "lambda1");
    const LambdaArg l2 = parse_lambda(model.lambda2, "lambda2");
    cfg.select_lambdas = l1.automatic || l2.automatic;
    cfg.lambda1 = l1.automatic ? 0.0 : l1.value;
    cfg.lambda2 = l2.automatic ? 0.0 : l2.value;
    if (cfg.select_lambdas) {
      cfg.grid = model.grid(l1, l2);
      cfg.search = model.search_options();
    }
    cfg.fit = model.fit_options();
    if (intervals) require(level > 0.0 && level < 1.0, "level", "must lie in (0, 1)");
    cfg.intervals = intervals;
    cfg.level = level;
    cfg.baseline = !no_baseline;
    cfg.threads = threads;
    require(!out_dir.empty(), "out-dir", "must not be empty");
    cfg.out_dir = out_dir;
    cfg.resume = !no_resume;

    const BenchmarkResult result = run_benchmark(cfg, &std::cerr);
    std::cout << summary_json(result).at("methods").dump(2) << "\n";
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized function-on-function linear quantile regression"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config;

  SimulateCmd simulate_cmd;
  FitCmd fit_cmd;
  PredictCmd predict_cmd;
  BenchmarkCmd bench_cmd;
  auto* sim = app.add_subcommand("simulate", "Generate training data from a simulation design");
  auto* fit_app = app.add_subcommand("fit", "Fit a quantile regression model");
  auto* pred = app.add_subcommand("predict", "Predict curves from a fitted model");
  auto* bench = app.add_subcommand("benchmark", "Run a Monte Carlo benchmark");
  for (auto* sub : {sim, fit_app, pred, bench})
    sub->add_option("--config", config, "JSON file with option values (flags override)");
  simulate_cmd.add(sim);
  fit_cmd.add(fit_app);
  predict_cmd.add(pred);
  bench_cmd.add(bench);

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }

  try {
    if (*sim) return simulate_cmd.run();
    if (*fit_app) return fit_cmd.run();
    if (*pred) return predict_cmd.run();
    if (*bench) return bench_cmd.run();
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kUsage;
}
