#include "pflqr/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pflqr/errors.hpp"

namespace pflqr {

BSplineBasis::BSplineBasis(double lo, double hi, int num_basis, int degree)
    : lo_(lo), hi_(hi), num_basis_(num_basis), degree_(degree) {
  if (!(std::isfinite(lo) && std::isfinite(hi) && hi > lo)) {
    std::ostringstream msg;
    msg << "basis domain must satisfy lo < hi, got [" << lo << ", " << hi << "]";
    throw InvalidBasisSpec(msg.str());
  }
  if (degree < 1) {
    throw InvalidBasisSpec("basis degree must be at least 1");
  }
  if (num_basis < degree + 1) {
    std::ostringstream msg;
    msg << "num_basis (" << num_basis << ") must be at least degree + 1 ("
        << degree + 1 << ")";
    throw InvalidBasisSpec(msg.str());
  }
  const int num_knots = num_basis + degree + 1;
  const int num_spans = num_basis - degree;
  knots_.resize(num_knots);
  for (int i = 0; i <= degree; ++i) {
    knots_[i] = lo;
    knots_[num_knots - 1 - i] = hi;
  }
  const double h = (hi - lo) / num_spans;
  for (int i = 1; i < num_spans; ++i) {
    knots_[degree + i] = lo + h * i;
  }
}

int BSplineBasis::span(double t) const {
  if (t >= hi_) return num_basis_ - 1;
  if (t <= lo_) return degree_;
  // Last index s in [degree, num_basis - 1] with knots[s] <= t.
  const double* first = knots_.data() + degree_;
  const double* last = knots_.data() + num_basis_;
  const double* it = std::upper_bound(first, last, t);
  return static_cast<int>(it - knots_.data()) - 1;
}

Eigen::MatrixXd BSplineBasis::local_derivatives(double t, int max_deriv) const {
  const int p = degree_;
  const int s = span(t);
  const auto& U = knots_;
  const int n = std::min(max_deriv, p);

  // Triangular table of basis values (lower part) and knot differences
  // (upper part), as in the standard derivative recurrence.
  Eigen::MatrixXd ndu(p + 1, p + 1);
  Eigen::VectorXd left(p + 1), right(p + 1);
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - U[s + 1 - j];
    right[j] = U[s + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right[r + 1] + left[j - r];
      const double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu(j, j) = saved;
  }

  Eigen::MatrixXd ders = Eigen::MatrixXd::Zero(max_deriv + 1, p + 1);
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);

  Eigen::MatrixXd a(2, p + 1);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= n; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      const int j1 = (rk >= -1) ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk) {
        a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
        d += a(s2, k) * ndu(r, pk);
      }
      ders(k, r) = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= n; ++k) {
    ders.row(k) *= factor;
    factor *= (p - k);
  }
  return ders;
}

std::vector<double> BSplineBasis::breakpoints() const {
  std::vector<double> out;
  for (int i = degree_; i <= num_basis_; ++i) out.push_back(knots_[i]);
  return out;
}

bool BSplineBasis::operator==(const BSplineBasis& other) const {
  return lo_ == other.lo_ && hi_ == other.hi_ &&
         num_basis_ == other.num_basis_ && degree_ == other.degree_;
}

BSplineBasis make_basis(double lo, double hi, int num_basis, int degree) {
  return BSplineBasis(lo, hi, num_basis, degree);
}

Eigen::MatrixXd eval_basis(const BSplineBasis& basis,
                           const Eigen::Ref<const Eigen::VectorXd>& points,
                           int deriv_order) {
  if (deriv_order < 0 || deriv_order > 2) {
    throw InvalidArgument("deriv_order must be 0, 1 or 2");
  }
  const int p = basis.degree();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(points.size(), basis.size());
  for (Eigen::Index j = 0; j < points.size(); ++j) {
    const double t = points[j];
    if (!basis.contains(t)) {
      std::ostringstream msg;
      msg << "point " << t << " outside basis domain [" << basis.lo() << ", "
          << basis.hi() << "]";
      throw PointOutOfDomain(msg.str());
    }
    const int s = basis.span(t);
    const Eigen::MatrixXd local = basis.local_derivatives(t, deriv_order);
    for (int c = 0; c <= p; ++c) out(j, s - p + c) = local(deriv_order, c);
  }
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int order) {
  if (order < 1) throw InvalidArgument("Gauss-Legendre order must be >= 1");
  Eigen::VectorXd nodes(order), weights(order);
  for (int i = 0; i < order; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence for P_order(x) and its derivative.
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = order == 1 ? x : p1;
      const double pm = order == 1 ? 1.0 : p0;
      dp = order * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return {nodes, weights};
}

namespace {

// Integral over the domain of (d^q phi_k)(d^q phi_k') by per-span
// Gauss-Legendre with the given order.
Eigen::MatrixXd integrate_products(const BSplineBasis& basis, int deriv,
                                   int order) {
  const int K = basis.size();
  const int p = basis.degree();
  const auto [nodes, weights] = gauss_legendre(order);
  const auto bp = basis.breakpoints();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t e = 0; e + 1 < bp.size(); ++e) {
    const double a = bp[e], b = bp[e + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int q = 0; q < order; ++q) {
      const double t = mid + half * nodes[q];
      const double w = half * weights[q];
      const int s = basis.span(t);
      const Eigen::VectorXd v = basis.local_derivatives(t, deriv).row(deriv).transpose();
      out.block(s - p, s - p, p + 1, p + 1).noalias() += w * v * v.transpose();
    }
  }
  // Exact symmetry; the accumulation above is symmetric up to rounding only.
  return 0.5 * (out + out.transpose());
}

}  // namespace

Eigen::MatrixXd second_derivative_penalty(const BSplineBasis& basis) {
  if (basis.degree() < 2) {
    throw DegreeTooLow("second-derivative penalty needs degree >= 2");
  }
  const int order = std::max(1, basis.degree() - 1);
  return integrate_products(basis, 2, order);
}

Eigen::MatrixXd gram_matrix(const BSplineBasis& basis) {
  return integrate_products(basis, 0, basis.degree() + 1);
}

PenaltySet make_penalty_set(const BSplineBasis& alpha_basis,
                            const BSplineBasis& y_basis,
                            const BSplineBasis& x_basis) {
  PenaltySet set;
  set.P_alpha = second_derivative_penalty(alpha_basis);
  set.P_y = second_derivative_penalty(y_basis);
  set.P_x = second_derivative_penalty(x_basis);
  set.gram_psi = gram_matrix(y_basis);
  set.gram_theta = gram_matrix(x_basis);
  return set;
}

}  // namespace pflqr
