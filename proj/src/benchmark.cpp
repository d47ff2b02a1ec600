#include "pflqr/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <mutex>
#include <ostream>

#include "pflqr/errors.hpp"
#include "pflqr/io.hpp"
#include "pflqr/metrics.hpp"
#include "pflqr/parallel.hpp"

namespace pflqr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double num_of(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

const char* const kMetrics[] = {"rrispee_alpha", "rrispee_beta", "rmspe", "cpd",
                                "interval_score"};

double metric(const MethodRow& r, int k) {
  switch (k) {
    case 0: return r.rrispee_alpha;
    case 1: return r.rrispee_beta;
    case 2: return r.rmspe;
    case 3: return r.cpd;
    default: return r.interval_score;
  }
}

MethodRow failed_row(const std::string& method, const std::string& what) {
  MethodRow row;
  row.method = method;
  row.rrispee_alpha = row.rrispee_beta = row.rmspe = kNaN;
  row.cpd = row.interval_score = row.objective = kNaN;
  row.lambda1 = row.lambda2 = kNaN;
  row.status = what.empty() ? "failed" : what;
  return row;
}

void score_fit(MethodRow& row, const QuantileFit& fit, const BenchmarkConfig& cfg,
               const SimulatedData& data) {
  const Eigen::VectorXd t = response_grid(), s = predictor_grid();
  const Surfaces est = reconstruct_surfaces(fit, t, s);
  row.lambda1 = fit.lambda1;
  row.lambda2 = fit.lambda2;
  row.rrispee_alpha = rrispee(true_alpha(cfg.data.dgp, t), est.alpha, t);
  row.rrispee_beta = rrispee(true_beta(cfg.data.dgp, t, s), est.beta, t, s);
  row.rmspe = data.x_test.num_curves() > 0
                  ? rmspe(data.y_test.values, predict(fit, data.x_test, data.y_test.grid))
                  : kNaN;
  row.cpd = row.interval_score = kNaN;
  row.objective = fit.objective_value;
  row.evals = fit.diagnostics.evals;
  row.converged = fit.converged;
}

std::string checkpoint_path(const BenchmarkConfig& cfg, int rep) {
  char name[32];
  std::snprintf(name, sizeof name, "rep_%05d.json", rep);
  return (fs::path(cfg.out_dir) / "checkpoints" / name).string();
}

bool load_checkpoint(const BenchmarkConfig& cfg, int rep, const json& identity,
                     ReplicateResult& out) {
  const std::string path = checkpoint_path(cfg, rep);
  if (!fs::exists(path)) return false;
  try {
    const json j = json::parse(read_text(path));
    if (j.at("config") != identity) return false;
    out = replicate_from_json(j.at("result"));
    return out.rep == rep;
  } catch (const std::exception&) {
    return false;  // unreadable checkpoints are recomputed
  }
}

void save_checkpoint(const BenchmarkConfig& cfg, const ReplicateResult& r, const json& identity) {
  const std::string path = checkpoint_path(cfg, r.rep);
  const std::string tmp = path + ".tmp";
  write_text(tmp, json{{"config", identity}, {"result", replicate_to_json(r)}}.dump(1) + "\n");
  fs::rename(tmp, path);
}

}  // namespace

void BenchmarkConfig::validate() const {
  data.validate();
  if (reps < 1) throw InvalidArgument("reps must be at least 1");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  if (!select_lambdas && !(lambda1 > 0.0 && lambda2 > 0.0)) {
    throw InvalidArgument("lambda1 and lambda2 must be positive");
  }
  if (select_lambdas) grid.validate();
  if (!(search.iota > 0.0 && search.iota <= 1.0)) throw InvalidArgument("iota must lie in (0, 1]");
  if (!(fit.trim_fraction > 0.0 && fit.trim_fraction <= 1.0)) {
    throw InvalidArgument("trim must lie in (0, 1]");
  }
  fit.basis.validate();
  interval_levels(level);
  if (threads < 1) throw InvalidArgument("threads must be at least 1");
}

json BenchmarkConfig::to_json() const {
  const auto& o = fit.optimizer;
  json j = {
      {"dgp", to_string(data.dgp)},
      {"n", data.n_train},
      {"n_test", data.n_test},
      {"contamination", data.contamination},
      {"noise_sd", data.noise_sd},
      {"rho", data.rho},
      {"dgp3_sd", data.dgp3_sd},
      {"seed", data.seed},
      {"high_resolution", data.high_resolution},
      {"tau", tau},
      {"gamma", gamma},
      {"select_lambdas", select_lambdas},
      {"trim", fit.trim_fraction},
      {"basis", {fit.basis.k0, fit.basis.ky, fit.basis.kx, fit.basis.degree}},
      {"rule", fit.rule == QuadratureRule::LeftRectangle ? "left_rectangle" : "trapezoid"},
      {"optimizer",
       {{"radius0", o.radius0},
        {"radius_min", o.radius_min},
        {"max_evals", o.max_evals},
        {"num_points", o.num_points}}},
      {"intervals", intervals},
      {"baseline", baseline},
  };
  if (select_lambdas) {
    j["lambda1_grid"] = grid.lambda1_grid;
    j["lambda2_grid"] = grid.lambda2_grid;
    j["iota"] = search.iota;
    j["bic"] = to_string(search.variant);
  } else {
    j["lambda1"] = lambda1;
    j["lambda2"] = lambda2;
  }
  if (intervals) j["level"] = level;
  return j;
}

ReplicateResult run_replicate(const BenchmarkConfig& cfg, int rep) {
  ReplicateResult out;
  out.rep = rep;
  SimulatedData data;
  try {
    data = simulate(cfg.data, static_cast<std::uint64_t>(rep));
  } catch (const std::exception& e) {
    out.rows.push_back(failed_row("pflqr", e.what()));
    if (cfg.baseline) out.rows.push_back(failed_row("pls", e.what()));
    return out;
  }

  double l1 = cfg.lambda1, l2 = cfg.lambda2;
  MethodRow q;
  q.method = "pflqr";
  try {
    QuantileFit qfit;
    if (cfg.select_lambdas) {
      GridSearchOptions search = cfg.search;
      search.threads = 1;
      GridSearchResult gs =
          grid_search(data.y_train, data.x_train, cfg.tau, cfg.gamma, cfg.grid, search, cfg.fit);
      l1 = gs.lambda1;
      l2 = gs.lambda2;
      qfit = std::move(gs.fit);
    } else {
      qfit = fit(data.y_train, data.x_train, cfg.tau, cfg.gamma, l1, l2, cfg.fit);
    }
    score_fit(q, qfit, cfg, data);
    if (cfg.intervals && data.x_test.num_curves() > 0) {
      const auto [lo, hi] = interval_levels(cfg.level);
      const QuantileFit flo = fit(data.y_train, data.x_train, lo, cfg.gamma, l1, l2, cfg.fit);
      const QuantileFit fhi = fit(data.y_train, data.x_train, hi, cfg.gamma, l1, l2, cfg.fit);
      const Eigen::MatrixXd lower = predict(flo, data.x_test, data.y_test.grid);
      const Eigen::MatrixXd upper = predict(fhi, data.x_test, data.y_test.grid);
      q.cpd = coverage_deviance(data.y_test.values, lower, upper, cfg.level);
      q.interval_score = interval_score(data.y_test.values, lower, upper, 1.0 - cfg.level);
    }
  } catch (const std::exception& e) {
    q = failed_row("pflqr", e.what());
  }
  out.rows.push_back(q);

  if (cfg.baseline) {
    MethodRow b;
    b.method = "pls";
    try {
      // With selection failed there is no lambda pair to share; fall back to
      // the configured one.
      if (!std::isfinite(l1) || !std::isfinite(l2)) {
        l1 = cfg.lambda1;
        l2 = cfg.lambda2;
      }
      const QuantileFit ls = fit_least_squares(data.y_train, data.x_train, l1, l2, cfg.fit);
      score_fit(b, ls, cfg, data);
    } catch (const std::exception& e) {
      b = failed_row("pls", e.what());
    }
    out.rows.push_back(b);
  }
  return out;
}

json replicate_to_json(const ReplicateResult& r) {
  json rows = json::array();
  for (const auto& m : r.rows) {
    rows.push_back({{"method", m.method},
                    {"lambda1", num(m.lambda1)},
                    {"lambda2", num(m.lambda2)},
                    {"rrispee_alpha", num(m.rrispee_alpha)},
                    {"rrispee_beta", num(m.rrispee_beta)},
                    {"rmspe", num(m.rmspe)},
                    {"cpd", num(m.cpd)},
                    {"interval_score", num(m.interval_score)},
                    {"objective", num(m.objective)},
                    {"evals", m.evals},
                    {"converged", m.converged},
                    {"status", m.status}});
  }
  return {{"rep", r.rep}, {"rows", rows}};
}

ReplicateResult replicate_from_json(const json& j) {
  ReplicateResult r;
  r.rep = j.at("rep").get<int>();
  for (const auto& m : j.at("rows")) {
    MethodRow row;
    row.method = m.at("method").get<std::string>();
    row.lambda1 = num_of(m.at("lambda1"));
    row.lambda2 = num_of(m.at("lambda2"));
    row.rrispee_alpha = num_of(m.at("rrispee_alpha"));
    row.rrispee_beta = num_of(m.at("rrispee_beta"));
    row.rmspe = num_of(m.at("rmspe"));
    row.cpd = num_of(m.at("cpd"));
    row.interval_score = num_of(m.at("interval_score"));
    row.objective = num_of(m.at("objective"));
    row.evals = m.at("evals").get<int>();
    row.converged = m.at("converged").get<bool>();
    row.status = m.at("status").get<std::string>();
    r.rows.push_back(std::move(row));
  }
  return r;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, std::ostream* log) {
  cfg.validate();
  BenchmarkResult result;
  result.config = cfg;
  result.replicates.resize(cfg.reps);
  const json identity = cfg.to_json();
  const bool files = !cfg.out_dir.empty();
  if (files) {
    std::error_code ec;
    fs::create_directories(fs::path(cfg.out_dir) / "checkpoints", ec);
    if (ec) throw IoError("cannot create '" + cfg.out_dir + "': " + ec.message());
  }

  std::mutex log_mutex;
  parallel_for(cfg.reps, cfg.threads, [&](int rep) {
    ReplicateResult& slot = result.replicates[rep];
    if (files && cfg.resume && load_checkpoint(cfg, rep, identity, slot)) {
      if (log) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *log << "rep " << rep << ": loaded from checkpoint\n";
      }
      return;
    }
    const auto start = std::chrono::steady_clock::now();
    slot = run_replicate(cfg, rep);
    if (files) save_checkpoint(cfg, slot, identity);
    if (log) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::lock_guard<std::mutex> lock(log_mutex);
      *log << "rep " << rep << ":";
      for (const auto& row : slot.rows) {
        *log << ' ' << row.method << " rmspe=" << format_double(row.rmspe)
             << (row.status == "ok" ? "" : " (" + row.status + ")");
      }
      *log << " [" << secs << " s]\n";
    }
  });

  if (files) {
    write_text((fs::path(cfg.out_dir) / "report.csv").string(), report_csv(result));
    write_text((fs::path(cfg.out_dir) / "summary.json").string(),
               summary_json(result).dump(2) + "\n");
  }
  return result;
}

std::string report_csv(const BenchmarkResult& result) {
  std::string out =
      "rep,method,lambda1,lambda2,rrispee_alpha,rrispee_beta,rmspe,cpd,interval_score,"
      "objective,evals,converged,status\n";
  for (const auto& r : result.replicates) {
    for (const auto& m : r.rows) {
      std::string status = m.status;
      for (char& ch : status)
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ' ';
      out += std::to_string(r.rep) + ',' + m.method + ',' + format_double(m.lambda1) + ',' +
             format_double(m.lambda2) + ',' + format_double(m.rrispee_alpha) + ',' +
             format_double(m.rrispee_beta) + ',' + format_double(m.rmspe) + ',' +
             format_double(m.cpd) + ',' + format_double(m.interval_score) + ',' +
             format_double(m.objective) + ',' + std::to_string(m.evals) + ',' +
             (m.converged ? "1" : "0") + ',' + status + '\n';
    }
  }
  return out;
}

json summary_json(const BenchmarkResult& result) {
  std::vector<std::string> methods;
  for (const auto& r : result.replicates)
    for (const auto& m : r.rows)
      if (std::find(methods.begin(), methods.end(), m.method) == methods.end())
        methods.push_back(m.method);

  json table = json::object();
  for (const auto& name : methods) {
    json entry = json::object();
    std::vector<int> failed;
    for (int k = 0; k < 5; ++k) {
      std::vector<double> col;
      for (const auto& r : result.replicates) {
        for (const auto& m : r.rows) {
          if (m.method != name) continue;
          col.push_back(metric(m, k));
          if (k == 0 && m.status != "ok") failed.push_back(r.rep);
        }
      }
      const Summary s = summarize(col);
      entry[kMetrics[k]] = {{"mean", num(s.mean)},
                            {"sd", s.sd ? num(*s.sd) : json(nullptr)},
                            {"count", s.count},
                            {"complete", s.count == result.config.reps}};
    }
    entry["failed_reps"] = failed;
    table[name] = entry;
  }
  return {{"config", result.config.to_json()},
          {"reps", result.config.reps},
          {"methods", table}};
}

}  // namespace pflqr
