#include "pflqr/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pflqr/errors.hpp"

namespace pflqr {

using nlohmann::json;

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::string_view what) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last || text.empty()) {
    throw InvalidArgument(std::string(what) + ": cannot parse '" + std::string(text) +
                          "' as a number");
  }
  return value;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("error while writing '" + path + "'");
}

std::string meta_path(const std::string& csv_path) {
  const std::string ext = ".csv";
  if (csv_path.size() > ext.size() &&
      csv_path.compare(csv_path.size() - ext.size(), ext.size(), ext) == 0) {
    return csv_path.substr(0, csv_path.size() - ext.size()) + ".meta.json";
  }
  return csv_path + ".meta.json";
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> lines_of(const std::string& text) {
  std::vector<std::string_view> out;
  std::string_view rest(text);
  while (!rest.empty()) {
    const std::size_t pos = rest.find('\n');
    std::string_view line = rest.substr(0, pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

void append_row(std::string& out, const Eigen::MatrixXd& values, Eigen::Index i) {
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    out += ',';
    out += format_double(values(i, j));
  }
  out += '\n';
}

std::string header(Eigen::Index cols, bool with_block) {
  std::string out = with_block ? "block,id" : "id";
  for (Eigen::Index j = 1; j <= cols; ++j) out += ",g" + std::to_string(j);
  out += '\n';
  return out;
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j, const char* what) {
  if (!j.is_array()) throw InvalidArgument(std::string(what) + " must be an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidArgument(std::string(what) + " must hold numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json basis_json(const BSplineBasis& b) {
  return {{"lo", b.lo()}, {"hi", b.hi()}, {"num_basis", b.size()}, {"degree", b.degree()}};
}

BSplineBasis json_basis(const json& j) {
  return make_basis(j.at("lo").get<double>(), j.at("hi").get<double>(),
                    j.at("num_basis").get<int>(), j.at("degree").get<int>());
}

std::string rule_name(QuadratureRule rule) {
  return rule == QuadratureRule::LeftRectangle ? "left_rectangle" : "trapezoid";
}

QuadratureRule parse_rule(const std::string& name) {
  if (name == "left_rectangle") return QuadratureRule::LeftRectangle;
  if (name == "trapezoid") return QuadratureRule::Trapezoid;
  throw InvalidArgument("unknown quadrature rule '" + name + "'");
}

StopReason parse_stop(const std::string& name) {
  for (auto r : {StopReason::Running, StopReason::RadiusBelowMinimum, StopReason::MaxEvals})
    if (to_string(r) == name) return r;
  throw InvalidArgument("unknown stop reason '" + name + "'");
}

}  // namespace

Eigen::MatrixXd parse_sample_csv(const std::string& text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw InvalidArgument(source + ": empty CSV");
  const auto head = split(lines[0], ',');
  if (head.empty() || head[0] != "id") {
    throw InvalidArgument(source + ": header must start with 'id'");
  }
  const Eigen::Index cols = static_cast<Eigen::Index>(head.size()) - 1;
  for (Eigen::Index j = 1; j <= cols; ++j) {
    if (head[j] != "g" + std::to_string(j)) {
      throw InvalidArgument(source + ": header column " + std::to_string(j + 1) +
                            " must be 'g" + std::to_string(j) + "'");
    }
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(lines.size()) - 1;
  Eigen::MatrixXd values(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto fields = split(lines[i + 1], ',');
    const std::string where = source + " line " + std::to_string(i + 2);
    if (static_cast<Eigen::Index>(fields.size()) != cols + 1) {
      throw InvalidArgument(where + ": expected " + std::to_string(cols + 1) + " fields");
    }
    for (Eigen::Index j = 0; j < cols; ++j) values(i, j) = parse_double(fields[j + 1], where);
  }
  return values;
}

json grid_meta(const FunctionalSample& sample) {
  return {{"grid", vec_json(sample.grid)},
          {"domain", {sample.domain_lo, sample.domain_hi}},
          {"curves", sample.num_curves()},
          {"points", sample.num_points()}};
}

std::string sample_to_csv(const FunctionalSample& sample) {
  std::string out = header(sample.values.cols(), false);
  for (Eigen::Index i = 0; i < sample.values.rows(); ++i) {
    out += std::to_string(i + 1);
    append_row(out, sample.values, i);
  }
  return out;
}

void write_sample(const std::string& csv_path, const FunctionalSample& sample) {
  write_text(csv_path, sample_to_csv(sample));
  write_text(meta_path(csv_path), grid_meta(sample).dump(2) + "\n");
}

FunctionalSample read_sample(const std::string& csv_path) {
  FunctionalSample s;
  s.values = parse_sample_csv(read_text(csv_path), csv_path);
  const std::string mpath = meta_path(csv_path);
  json meta;
  try {
    meta = json::parse(read_text(mpath));
    s.grid = json_vec(meta.at("grid"), "grid");
    const auto& dom = meta.at("domain");
    s.domain_lo = dom.at(0).get<double>();
    s.domain_hi = dom.at(1).get<double>();
  } catch (const json::exception& e) {
    throw InvalidArgument(mpath + ": " + e.what());
  }
  if (s.grid.size() != s.values.cols()) {
    throw DimensionMismatch(csv_path + ": " + std::to_string(s.values.cols()) +
                            " columns but the grid has " + std::to_string(s.grid.size()) +
                            " points");
  }
  s.validate();
  return s;
}

std::string prediction_to_csv(const std::vector<PredictionBlock>& blocks) {
  if (blocks.empty()) return header(0, false);
  if (blocks.size() == 1) {
    FunctionalSample tmp;
    tmp.values = blocks.front().values;
    return sample_to_csv(tmp);
  }
  std::string out = header(blocks.front().values.cols(), true);
  for (const auto& b : blocks) {
    for (Eigen::Index i = 0; i < b.values.rows(); ++i) {
      out += b.name + ',' + std::to_string(i + 1);
      append_row(out, b.values, i);
    }
  }
  return out;
}

json fit_to_json(const QuantileFit& fit) {
  const auto& d = fit.diagnostics;
  return {
      {"format", "pflqr-fit"},
      {"version", 1},
      {"method", fit.method == FitMethod::Quantile ? "quantile" : "least_squares"},
      {"tau", fit.tau},
      {"gamma", fit.gamma},
      {"lambda1", fit.lambda1},
      {"lambda2", fit.lambda2},
      {"trim_fraction", fit.trim_fraction},
      {"rule", rule_name(fit.rule)},
      {"bases",
       {{"alpha", basis_json(fit.bases.alpha)},
        {"y", basis_json(fit.bases.y)},
        {"x", basis_json(fit.bases.x)}}},
      {"t_grid", vec_json(fit.t_grid)},
      {"s_grid", vec_json(fit.s_grid)},
      {"a", vec_json(fit.a)},
      {"b", vec_json(fit.b)},
      {"objective", fit.objective_value},
      {"initial_objective", fit.initial_objective},
      {"converged", fit.converged},
      {"trim_set", fit.trim_set},
      {"diagnostics",
       {{"evals", d.evals},
        {"iterations", d.iterations},
        {"accepted_steps", d.accepted_steps},
        {"geometry_steps", d.geometry_steps},
        {"rebuilds", d.rebuilds},
        {"final_radius", d.final_radius},
        {"max_interpolation_error", d.max_interpolation_error},
        {"stop_reason", to_string(d.stop_reason)}}},
  };
}

QuantileFit fit_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "pflqr-fit") {
      throw InvalidArgument("not a fit file");
    }
    QuantileFit fit;
    const std::string method = j.at("method").get<std::string>();
    if (method == "quantile") {
      fit.method = FitMethod::Quantile;
    } else if (method == "least_squares") {
      fit.method = FitMethod::LeastSquares;
    } else {
      throw InvalidArgument("unknown fit method '" + method + "'");
    }
    fit.tau = j.at("tau").get<double>();
    fit.gamma = j.at("gamma").get<double>();
    fit.lambda1 = j.at("lambda1").get<double>();
    fit.lambda2 = j.at("lambda2").get<double>();
    fit.trim_fraction = j.at("trim_fraction").get<double>();
    fit.rule = parse_rule(j.at("rule").get<std::string>());
    const auto& bases = j.at("bases");
    fit.bases = {json_basis(bases.at("alpha")), json_basis(bases.at("y")),
                 json_basis(bases.at("x"))};
    fit.t_grid = json_vec(j.at("t_grid"), "t_grid");
    fit.s_grid = json_vec(j.at("s_grid"), "s_grid");
    fit.a = json_vec(j.at("a"), "a");
    fit.b = json_vec(j.at("b"), "b");
    fit.objective_value = j.at("objective").get<double>();
    fit.initial_objective = j.at("initial_objective").get<double>();
    fit.converged = j.at("converged").get<bool>();
    fit.trim_set = j.at("trim_set").get<std::vector<int>>();
    const auto& d = j.at("diagnostics");
    auto& diag = fit.diagnostics;
    diag.evals = d.at("evals").get<int>();
    diag.iterations = d.at("iterations").get<int>();
    diag.accepted_steps = d.at("accepted_steps").get<int>();
    diag.geometry_steps = d.at("geometry_steps").get<int>();
    diag.rebuilds = d.at("rebuilds").get<int>();
    diag.final_radius = d.at("final_radius").get<double>();
    diag.max_interpolation_error = d.at("max_interpolation_error").get<double>();
    diag.stop_reason = parse_stop(d.at("stop_reason").get<std::string>());
    if (fit.a.size() != fit.bases.alpha.size() ||
        fit.b.size() != fit.bases.y.size() * fit.bases.x.size()) {
      throw DimensionMismatch("fit coefficients do not match the stored bases");
    }
    return fit;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed fit: ") + e.what());
  }
}

void save_fit(const std::string& path, const QuantileFit& fit) {
  write_text(path, fit_to_json(fit).dump(2) + "\n");
}

QuantileFit load_fit(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
  return fit_from_json(j);
}

json truth_to_json(const DgpSpec& spec, std::uint64_t replicate, const SimulatedData& data) {
  const Eigen::VectorXd t = data.y_train.grid;
  const Eigen::VectorXd s = data.x_train.grid;
  const Eigen::MatrixXd beta = true_beta(spec.dgp, t, s);
  json rows = json::array();
  for (Eigen::Index j = 0; j < beta.rows(); ++j) rows.push_back(vec_json(beta.row(j).transpose()));
  return {{"dgp", to_string(spec.dgp)},
          {"seed", spec.seed},
          {"replicate", replicate},
          {"n", spec.n_train},
          {"contamination", spec.contamination},
          {"t_grid", vec_json(t)},
          {"s_grid", vec_json(s)},
          {"alpha", vec_json(true_alpha(spec.dgp, t))},
          {"beta", rows},
          {"outliers", data.outliers}};
}

std::string bic_table_csv(const std::vector<BicCell>& cells) {
  std::string out = "lambda1,lambda2,bic,converged,error\n";
  for (const auto& c : cells) {
    std::string err = c.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n' || ch == '\r') ch = ' ';
    out += format_double(c.lambda1) + ',' + format_double(c.lambda2) + ',' +
           format_double(c.bic) + ',' + (c.converged ? "1" : "0") + ',' + err + '\n';
  }
  return out;
}

}  // namespace pflqr
