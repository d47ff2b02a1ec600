#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "pflqr/basis.hpp"
#include "pflqr/errors.hpp"

using namespace pflqr;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Textbook Cox-de Boor recursion with the usual derivative recurrence, kept
// deliberately naive. At the right endpoint the last span is closed.
double cox_de_boor(const VectorXd& u, int i, int p, double t, int deriv) {
  if (deriv > 0) {
    if (p == 0) return 0.0;
    double out = 0.0;
    const double d1 = u[i + p] - u[i];
    const double d2 = u[i + p + 1] - u[i + 1];
    if (d1 > 0) out += p / d1 * cox_de_boor(u, i, p - 1, t, deriv - 1);
    if (d2 > 0) out -= p / d2 * cox_de_boor(u, i + 1, p - 1, t, deriv - 1);
    return out;
  }
  if (p == 0) {
    const double hi = u[u.size() - 1];
    if (t == hi) return (u[i] < t && u[i + 1] == hi) ? 1.0 : 0.0;
    return (u[i] <= t && t < u[i + 1]) ? 1.0 : 0.0;
  }
  double out = 0.0;
  const double d1 = u[i + p] - u[i];
  const double d2 = u[i + p + 1] - u[i + 1];
  if (d1 > 0) out += (t - u[i]) / d1 * cox_de_boor(u, i, p - 1, t, 0);
  if (d2 > 0) out += (u[i + p + 1] - t) / d2 * cox_de_boor(u, i + 1, p - 1, t, 0);
  return out;
}

MatrixXd oracle_eval(const BSplineBasis& b, const VectorXd& pts, int deriv) {
  MatrixXd out(pts.size(), b.size());
  for (Eigen::Index j = 0; j < pts.size(); ++j)
    for (int k = 0; k < b.size(); ++k)
      out(j, k) = cox_de_boor(b.knots(), k, b.degree(), pts[j], deriv);
  return out;
}

// Composite trapezoid of phi_k^(d) phi_k'^(d) with `points` equally spaced
// nodes on every knot span, so the integrand is a polynomial on each panel.
MatrixXd trapezoid_oracle(const BSplineBasis& b, int deriv, int points) {
  const VectorXd& u = b.knots();
  MatrixXd out = MatrixXd::Zero(b.size(), b.size());
  for (Eigen::Index s = 0; s + 1 < u.size(); ++s) {
    if (!(u[s + 1] > u[s])) continue;
    // Nudge the panel ends inward so each node lies in the span's own piece.
    const double eps = 1e-12 * (u[s + 1] - u[s]);
    const VectorXd t = VectorXd::LinSpaced(points, u[s] + eps, u[s + 1] - eps);
    const MatrixXd v = oracle_eval(b, t, deriv);
    VectorXd w = VectorXd::Constant(points, (u[s + 1] - u[s]) / (points - 1));
    w[0] *= 0.5;
    w[points - 1] *= 0.5;
    out += v.transpose() * w.asDiagonal() * v;
  }
  return out;
}

// One Richardson step on the panel trapezoid (halving h) to remove the h^2
// term; otherwise small entries cannot be resolved to a relative 1e-6.
MatrixXd refined_trapezoid_oracle(const BSplineBasis& b, int deriv, int points) {
  return (4.0 * trapezoid_oracle(b, deriv, 2 * points - 1) - trapezoid_oracle(b, deriv, points)) /
         3.0;
}

// Coefficients reproducing f(t) = t (Greville abscissae).
VectorXd greville(const BSplineBasis& b) {
  VectorXd c(b.size());
  for (int k = 0; k < b.size(); ++k) {
    double s = 0.0;
    for (int q = 1; q <= b.degree(); ++q) s += b.knots()[k + q];
    c[k] = s / b.degree();
  }
  return c;
}

}  // namespace

TEST_CASE("knot vector layout") {
  const BSplineBasis b = make_basis(0.0, 2.0, 15, 3);
  REQUIRE(b.knots().size() == 15 + 3 + 1);
  for (int q = 0; q <= 3; ++q) {
    CHECK(b.knots()[q] == 0.0);
    CHECK(b.knots()[b.knots().size() - 1 - q] == 2.0);
  }
  for (Eigen::Index q = 1; q < b.knots().size(); ++q) CHECK(b.knots()[q] >= b.knots()[q - 1]);
  // Interior knots equally spaced.
  const double h = b.knots()[5] - b.knots()[4];
  for (int q = 4; q < 15; ++q) CHECK(b.knots()[q + 1] - b.knots()[q] == doctest::Approx(h));
}

TEST_CASE("invalid basis requests") {
  CHECK_THROWS_AS(make_basis(0.0, 1.0, 3, 3), InvalidBasisSpec);
  CHECK_THROWS_AS(make_basis(1.0, 1.0, 5, 3), InvalidBasisSpec);
  CHECK_THROWS_AS(make_basis(0.0, 1.0, 5, 0), InvalidBasisSpec);
  CHECK_NOTHROW(make_basis(0.0, 1.0, 4, 3));
}

TEST_CASE("partition of unity and nonnegativity") {
  for (int k : {4, 7, 15}) {
    const BSplineBasis b = make_basis(-1.0, 3.0, k, 3);
    const VectorXd t = VectorXd::LinSpaced(1000, -1.0, 3.0);
    const MatrixXd v = eval_basis(b, t, 0);
    CHECK((v.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(v.minCoeff() >= 0.0);
  }
  const BSplineBasis single = make_basis(0.0, 1.0, 4, 3);
  VectorXd p(1);
  p << 0.37;
  CHECK(eval_basis(single, p, 0).sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("evaluation agrees with the Cox-de Boor recursion") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int degree : {2, 3}) {
    const BSplineBasis b = make_basis(0.0, 1.0, 15, degree);
    VectorXd pts(20);
    for (auto& x : pts) x = unif(rng);
    for (int d = 0; d <= 2; ++d) {
      const MatrixXd got = eval_basis(b, pts, d);
      const MatrixXd want = oracle_eval(b, pts, d);
      CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, want.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("endpoint values") {
  const BSplineBasis b = make_basis(0.0, 1.0, 15, 3);
  VectorXd ends(2);
  ends << 0.0, 1.0;
  const MatrixXd v = eval_basis(b, ends, 0);
  CHECK(v(0, 0) == doctest::Approx(1.0));
  CHECK(v.row(0).tail(14).cwiseAbs().maxCoeff() == 0.0);
  CHECK(v(1, 14) == doctest::Approx(1.0));
  CHECK(v.row(1).head(14).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("evaluation errors") {
  const BSplineBasis b = make_basis(0.0, 1.0, 8, 3);
  VectorXd out(1);
  out << 1.5;
  CHECK_THROWS_AS(eval_basis(b, out, 0), PointOutOfDomain);
  VectorXd in(1);
  in << 0.5;
  CHECK_THROWS_AS(eval_basis(b, in, 3), InvalidArgument);
}

TEST_CASE("second derivative of constants and lines vanishes") {
  const BSplineBasis b = make_basis(0.0, 1.0, 15, 3);
  const VectorXd t = VectorXd::LinSpaced(101, 0.0, 1.0);
  const MatrixXd d2 = eval_basis(b, t, 2);
  CHECK((d2 * VectorXd::Ones(15)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((d2 * greville(b)).cwiseAbs().maxCoeff() < 1e-9);
  // Greville coefficients really reproduce t.
  CHECK((eval_basis(b, t, 0) * greville(b) - t).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("roughness penalty structure") {
  for (int k : {6, 15}) {
    const BSplineBasis b = make_basis(0.0, 1.0, k, 3);
    const MatrixXd p = second_derivative_penalty(b);
    CHECK((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((p * VectorXd::Ones(k)).cwiseAbs().maxCoeff() < 1e-9 * p.cwiseAbs().maxCoeff());
    CHECK((p * greville(b)).cwiseAbs().maxCoeff() < 1e-9 * p.cwiseAbs().maxCoeff());
    Eigen::JacobiSVD<MatrixXd> svd(p);
    const VectorXd s = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) rank += s[i] > 1e-9 * s[0];
    CHECK(rank == k - 2);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(p);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-9 * eig.eigenvalues().maxCoeff());
  }
  CHECK_THROWS_AS(second_derivative_penalty(make_basis(0.0, 1.0, 5, 1)), DegreeTooLow);
}

TEST_CASE("penalty and Gram matrices match a trapezoid oracle") {
  const BSplineBasis b = make_basis(0.0, 1.0, 15, 3);
  const MatrixXd p = second_derivative_penalty(b);
  const MatrixXd p_ref = refined_trapezoid_oracle(b, 2, 1000);
  const MatrixXd g = gram_matrix(b);
  const MatrixXd g_ref = refined_trapezoid_oracle(b, 0, 1000);
  // Structural zeros only match to rounding, hence the scale-relative floor.
  const double p_floor = 1e-12 * p_ref.cwiseAbs().maxCoeff();
  const double g_floor = 1e-12 * g_ref.cwiseAbs().maxCoeff();
  for (int i = 0; i < 15; ++i) {
    for (int j = 0; j < 15; ++j) {
      CHECK(std::abs(p(i, j) - p_ref(i, j)) <= 1e-6 * std::abs(p_ref(i, j)) + p_floor);
      CHECK(std::abs(g(i, j) - g_ref(i, j)) <= 1e-6 * std::abs(g_ref(i, j)) + g_floor);
    }
  }
}

TEST_CASE("Gram matrix identities") {
  const BSplineBasis b = make_basis(0.5, 3.0, 12, 3);
  const MatrixXd g = gram_matrix(b);
  CHECK((g - g.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g.sum() == doctest::Approx(2.5).epsilon(1e-12));
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(g);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  // Row sums are the integrals of the basis functions; for a clamped uniform
  // basis these are (t_{k+p+1} - t_k) / (p + 1).
  for (int k = 0; k < 12; ++k) {
    const double want = (b.knots()[k + 4] - b.knots()[k]) / 4.0;
    CHECK(g.row(k).sum() == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("Gauss-Legendre exactness") {
  for (int order : {1, 2, 4, 7}) {
    const auto [x, w] = gauss_legendre(order);
    for (int deg = 0; deg <= 2 * order - 1; ++deg) {
      const double got = (w.array() * x.array().pow(deg)).sum();
      const double want = deg % 2 == 1 ? 0.0 : 2.0 / (deg + 1);
      CHECK(got == doctest::Approx(want).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(gauss_legendre(0), InvalidArgument);
}
