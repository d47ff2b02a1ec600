#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "pflqr/model.hpp"
#include "pflqr/selection.hpp"
#include "pflqr/simulate.hpp"

namespace pflqr {

struct BenchmarkConfig {
  DgpSpec data;
  int reps = 20;
  double tau = 0.5;
  double gamma = 0.005;
  double lambda1 = 1e-4;
  double lambda2 = 1e-4;
  bool select_lambdas = false;  // grid search per replicate instead of fixed lambdas
  GridSpec grid;
  GridSearchOptions search;
  FitOptions fit;
  bool intervals = false;  // also fit the outer quantiles for CPD and score
  double level = 0.95;
  bool baseline = true;  // penalized least squares at the same lambdas
  int threads = 1;
  std::string out_dir;  // empty: no files, no checkpoints
  bool resume = true;

  void validate() const;
  // Everything that affects the numbers; checkpoints must match it.
  nlohmann::json to_json() const;
};

struct MethodRow {
  std::string method;  // "pflqr" or "pls"
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double rrispee_alpha = 0.0;
  double rrispee_beta = 0.0;
  double rmspe = 0.0;
  double cpd = 0.0;  // NaN without intervals
  double interval_score = 0.0;
  double objective = 0.0;
  int evals = 0;
  bool converged = false;
  std::string status = "ok";  // otherwise the failure message
};

struct ReplicateResult {
  int rep = 0;
  std::vector<MethodRow> rows;
};

struct BenchmarkResult {
  BenchmarkConfig config;
  std::vector<ReplicateResult> replicates;  // by replicate index
};

// Simulate, fit and score one replicate. Failures are recorded in the rows.
ReplicateResult run_replicate(const BenchmarkConfig& config, int rep);

// All replicates over config.threads workers. With an output directory, each
// finished replicate is checkpointed and, when resuming, a matching checkpoint
// is loaded instead of recomputed; report.csv and summary.json are written at
// the end. Progress goes to log when given.
BenchmarkResult run_benchmark(const BenchmarkConfig& config, std::ostream* log = nullptr);

// One row per (replicate, method).
std::string report_csv(const BenchmarkResult& result);

// Mean and sd of every metric per method; sd is null with fewer than two
// finite values and a cell is marked incomplete when some replicate is missing.
nlohmann::json summary_json(const BenchmarkResult& result);

nlohmann::json replicate_to_json(const ReplicateResult& r);
ReplicateResult replicate_from_json(const nlohmann::json& j);

}  // namespace pflqr
