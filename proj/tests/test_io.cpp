#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>

#include "pflqr/errors.hpp"
#include "pflqr/io.hpp"

using namespace pflqr;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pflqr_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

FunctionalSample random_sample(int n, int m, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> z;
  FunctionalSample s;
  s.grid = VectorXd::LinSpaced(m, 1.0 / m, 1.0);
  s.values = MatrixXd::NullaryExpr(n, m, [&]() { return z(rng) * 1e3 + 1e-7 * z(rng); });
  return s;
}

}  // namespace

TEST_CASE("double formatting round-trips") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(i % 40) - 20);
    CHECK(parse_double(format_double(v), "v") == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-4) == "1e-04");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(std::isnan(parse_double("nan", "v")));
  CHECK(parse_double("-inf", "v") == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(parse_double("1.5x", "v"), InvalidArgument);
  CHECK_THROWS_AS(parse_double("", "v"), InvalidArgument);
}

TEST_CASE("sample CSV round-trips byte for byte") {
  const fs::path dir = scratch("roundtrip");
  const FunctionalSample s = random_sample(7, 13, 1);
  const std::string a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
  write_sample(a, s);
  const FunctionalSample back = read_sample(a);
  CHECK(back.values == s.values);
  CHECK(back.grid == s.grid);
  write_sample(b, back);
  CHECK(read_text(a) == read_text(b));
  CHECK(read_text(meta_path(a)) == read_text(meta_path(b)));
  CHECK(meta_path("dir/y.csv") == "dir/y.meta.json");

  const std::string text = sample_to_csv(s);
  CHECK(text.rfind("id,g1,g2,", 0) == 0);
  CHECK(text.find("\n1,") != std::string::npos);
}

TEST_CASE("malformed sample input") {
  const fs::path dir = scratch("malformed");
  CHECK_THROWS_AS(parse_sample_csv("id,g1,g2\n1,0.5\n", "x"), InvalidArgument);
  CHECK_THROWS_AS(parse_sample_csv("id,g1,g3\n1,0.5,0.2\n", "x"), InvalidArgument);
  CHECK_THROWS_AS(parse_sample_csv("id,g1\n1,abc\n", "x"), InvalidArgument);
  CHECK(parse_sample_csv("id,g1,g2\n1,0.5,0.25\n2,1,2\n", "x").rows() == 2);

  // Missing sidecar.
  write_text((dir / "lonely.csv").string(), "id,g1\n1,0.5\n");
  CHECK_THROWS_AS(read_sample((dir / "lonely.csv").string()), Error);
  CHECK_THROWS_AS(read_sample((dir / "absent.csv").string()), IoError);

  // Sidecar grid length disagrees with the columns.
  const FunctionalSample s = random_sample(2, 4, 3);
  const std::string p = (dir / "s.csv").string();
  write_sample(p, s);
  write_text(p, "id,g1,g2\n1,0,0\n2,0,0\n");
  CHECK_THROWS_AS(read_sample(p), InvalidArgument);
}

TEST_CASE("prediction CSV layout") {
  MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const std::string single = prediction_to_csv({{"fit", m}});
  CHECK(single == "id,g1,g2,g3\n1,1,2,3\n2,4,5,6\n");
  const std::string multi = prediction_to_csv({{"lower", m}, {"upper", 2 * m}});
  CHECK(multi.rfind("block,id,g1,g2,g3\nlower,1,1,2,3\n", 0) == 0);
  CHECK(multi.find("upper,2,8,10,12\n") != std::string::npos);
}

TEST_CASE("fit JSON round-trip") {
  const SimulatedData data = simulate(DgpSpec{Dgp::I, 20, 0, 0.0, 0.01, 0.8, 1.0, 3, false});
  FitOptions opts;
  opts.basis = {5, 5, 5, 3};
  opts.optimizer.max_evals = 200;
  opts.trim_fraction = 0.9;
  const QuantileFit f = fit(data.y_train, data.x_train, 0.3, 0.01, 1e-3, 2e-2, opts);
  const fs::path dir = scratch("fit");
  const std::string path = (dir / "fit.json").string();
  save_fit(path, f);
  const QuantileFit g = load_fit(path);
  CHECK(g.a == f.a);
  CHECK(g.b == f.b);
  CHECK(g.tau == f.tau);
  CHECK(g.gamma == f.gamma);
  CHECK(g.lambda1 == f.lambda1);
  CHECK(g.lambda2 == f.lambda2);
  CHECK(g.trim_fraction == f.trim_fraction);
  CHECK(g.trim_set == f.trim_set);
  CHECK(g.t_grid == f.t_grid);
  CHECK(g.objective_value == f.objective_value);
  CHECK(g.bases.alpha.size() == 5);
  CHECK(predict(g, data.x_train) == predict(f, data.x_train));
  save_fit((dir / "again.json").string(), g);
  CHECK(read_text(path) == read_text((dir / "again.json").string()));

  nlohmann::json j = fit_to_json(f);
  j["format"] = "other";
  CHECK_THROWS_AS(fit_from_json(j), InvalidArgument);
  j = fit_to_json(f);
  j.erase("a");
  CHECK_THROWS_AS(fit_from_json(j), InvalidArgument);
  j = fit_to_json(f);
  j["b"] = nlohmann::json::array({1.0, 2.0});
  CHECK_THROWS_AS(fit_from_json(j), InvalidArgument);
  write_text((dir / "broken.json").string(), "{ not json");
  CHECK_THROWS_AS(load_fit((dir / "broken.json").string()), InvalidArgument);
}

TEST_CASE("criterion table") {
  const std::vector<BicCell> cells = {{1e-4, 0.01, 2.5, true, ""},
                                      {1e-4, 1.0, std::numeric_limits<double>::quiet_NaN(), false, "bad, \"thing\""}};
  const std::string csv = bic_table_csv(cells);
  CHECK(csv.rfind("lambda1,lambda2,bic,converged,error\n", 0) == 0);
  CHECK(csv.find("\n1e-04,0.01,2.5,1,\n") != std::string::npos);
  // Separators inside messages are blanked rather than quoted.
  CHECK(csv.find("\n1e-04,1,nan,0,bad  \"thing\"\n") != std::string::npos);
}

TEST_CASE("truth description") {
  const DgpSpec spec{Dgp::II, 10, 0, 0.1, 0.01, 0.8, 1.0, 3, false};
  const SimulatedData data = simulate(spec, 1);
  const nlohmann::json j = truth_to_json(spec, 1, data);
  CHECK(j.at("alpha").size() == 60);
  CHECK(j.at("beta").size() == 60);
  CHECK(j.at("beta").at(0).size() == 50);
  CHECK(j.at("outliers").size() == 1);
}
