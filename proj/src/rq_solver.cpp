#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include "qarspec/error.hpp"
#include "qarspec/qar.hpp"

namespace qarspec {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kStepDamping = 0.99995;

double max_step(const VectorXd& v, const VectorXd& dv) {
  double step = 1e20;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) step = std::min(step, -v(i) / dv(i));
  }
  return step;
}

struct InteriorPointResult {
  VectorXd theta;
  int iterations = 0;
  double gap = 0.0;
};

// Frisch-Newton (Mehrotra predictor-corrector) on
//   min c'a  s.t.  X'a = (1 - tau) X'1,  0 <= a <= 1,   c = -y,
// whose dual variable is -theta.
InteriorPointResult interior_point(const RowMatrix& x_mat, std::span<const double> y_span,
                                   double tau, const SolverOptions& opt) {
  const Index n = x_mat.rows();
  const Index d = x_mat.cols();
  const Eigen::Map<const VectorXd> y(y_span.data(), n);

  const VectorXd c = -y;
  const VectorXd b = (1.0 - tau) * x_mat.transpose() * VectorXd::Ones(n);

  VectorXd a = VectorXd::Constant(n, 1.0 - tau);
  VectorXd s = VectorXd::Constant(n, tau);

  const MatrixXd xtx = x_mat.transpose() * x_mat;
  Eigen::LDLT<MatrixXd> ldlt(xtx);
  VectorXd dual = ldlt.solve(x_mat.transpose() * c);

  VectorXd r = c - x_mat * dual;
  VectorXd z = r.cwiseMax(0.0);
  VectorXd w = (-r).cwiseMax(0.0);
  const double floor = 1e-10 * (1.0 + r.cwiseAbs().maxCoeff());
  for (Index i = 0; i < n; ++i) {
    if (z(i) < floor && w(i) < floor) {
      z(i) += floor;
      w(i) += floor;
    }
  }

  auto duality_gap = [&] { return c.dot(a) - dual.dot(b) + w.sum(); };
  double gap = duality_gap();
  const double scale = 1.0 + y.cwiseAbs().sum();

  VectorXd q(n), da(n), ds(n), dz(n), dw(n), rhs_vec(n);
  int it = 0;
  while (gap > opt.gap_tolerance * scale && it < opt.max_ip_iterations) {
    ++it;
    q = (z.cwiseQuotient(a) + w.cwiseQuotient(s)).cwiseInverse();
    r = z - w;

    MatrixXd m = MatrixXd::Zero(d, d);
    VectorXd rhs = VectorXd::Zero(d);
    for (Index i = 0; i < n; ++i) {
      const auto row = x_mat.row(i);
      m.noalias() += q(i) * row.transpose() * row;
      rhs.noalias() += (q(i) * r(i)) * row.transpose();
    }
    Eigen::LDLT<MatrixXd> normal(m);
    VectorXd dy = normal.solve(rhs);

    da = q.cwiseProduct(x_mat * dy - r);
    ds = -da;
    dz = -z.cwiseProduct(da.cwiseQuotient(a) + VectorXd::Ones(n));
    dw = -w.cwiseProduct(ds.cwiseQuotient(s) + VectorXd::Ones(n));

    double fp = std::min(kStepDamping * std::min(max_step(a, da), max_step(s, ds)), 1.0);
    double fd = std::min(kStepDamping * std::min(max_step(w, dw), max_step(z, dz)), 1.0);

    if (std::min(fp, fd) < 1.0) {
      double mu = z.dot(a) + w.dot(s);
      const double g = (z + fd * dz).dot(a + fp * da) + (w + fd * dw).dot(s + fp * ds);
      mu = mu * std::pow(g / mu, 3) / (2.0 * static_cast<double>(n));

      const VectorXd dadz = da.cwiseProduct(dz);
      const VectorXd dsdw = ds.cwiseProduct(dw);
      const VectorXd ainv = a.cwiseInverse();
      const VectorXd sinv = s.cwiseInverse();
      const VectorXd xi = mu * (ainv - sinv);

      rhs_vec = q.cwiseProduct(r + dadz - dsdw - xi);
      dy = normal.solve(x_mat.transpose() * rhs_vec);
      da = q.cwiseProduct(x_mat * dy + xi - r - dadz + dsdw);
      ds = -da;
      dz = mu * ainv - z - ainv.cwiseProduct(z).cwiseProduct(da) - dadz;
      dw = mu * sinv - w - sinv.cwiseProduct(w).cwiseProduct(ds) - dsdw;

      fp = std::min(kStepDamping * std::min(max_step(a, da), max_step(s, ds)), 1.0);
      fd = std::min(kStepDamping * std::min(max_step(w, dw), max_step(z, dz)), 1.0);
    }

    a += fp * da;
    s += fp * ds;
    dual += fd * dy;
    w += fd * dw;
    z += fd * dz;
    gap = duality_gap();
    if (!std::isfinite(gap)) break;
  }

  InteriorPointResult out;
  out.theta = -dual;
  out.iterations = it;
  out.gap = gap / scale;
  return out;
}

// Chooses d linearly independent rows, smallest |residual| first.
std::vector<Index> initial_basis(const RowMatrix& x_mat, const VectorXd& resid) {
  const Index n = x_mat.rows();
  const Index d = x_mat.cols();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  auto by_abs = [&](Index i, Index j) {
    const double ai = std::abs(resid(i));
    const double aj = std::abs(resid(j));
    return ai < aj || (ai == aj && i < j);
  };
  const auto head = std::min<std::size_t>(order.size(), static_cast<std::size_t>(8 * d));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(head), order.end(),
                    by_abs);

  std::vector<Index> basis;
  MatrixXd ortho(d, d);
  auto try_add = [&](Index i) {
    VectorXd v = x_mat.row(i).transpose();
    const double norm0 = v.norm();
    for (std::size_t j = 0; j < basis.size(); ++j) {
      const auto col = static_cast<Index>(j);
      v -= ortho.col(col).dot(v) * ortho.col(col);
    }
    const double norm = v.norm();
    if (norm > 1e-8 * std::max(norm0, 1e-300)) {
      ortho.col(static_cast<Index>(basis.size())) = v / norm;
      basis.push_back(i);
    }
  };
  for (std::size_t idx = 0; idx < head && static_cast<Index>(basis.size()) < d; ++idx) {
    try_add(order[idx]);
  }
  if (static_cast<Index>(basis.size()) < d) {
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(head), order.end(), by_abs);
    for (std::size_t idx = head; idx < order.size() && static_cast<Index>(basis.size()) < d;
         ++idx) {
      try_add(order[idx]);
    }
  }
  if (static_cast<Index>(basis.size()) < d) {
    throw SingularityError("design matrix is rank deficient (no basis of " + std::to_string(d) +
                           " independent rows)");
  }
  return basis;
}

struct Breakpoint {
  double step;
  double weight;
  Index row;
  bool operator>(const Breakpoint& other) const {
    return step > other.step || (step == other.step && row > other.row);
  }
};

}  // namespace

void require_full_rank(const RowMatrix& design) {
  if (design.rows() < design.cols()) {
    throw SingularityError("design has fewer rows (" + std::to_string(design.rows()) +
                           ") than columns (" + std::to_string(design.cols()) + ")");
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) {
    throw SingularityError("design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                           " < " + std::to_string(design.cols()) + " columns)");
  }
}

QuantileFit solve_quantile_regression(const RowMatrix& x_mat, std::span<const double> y_span,
                                      double tau, const SolverOptions& opt) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ParameterError("quantile level tau=" + std::to_string(tau) + " outside (0,1)");
  }
  const Index n = x_mat.rows();
  const Index d = x_mat.cols();
  if (static_cast<Index>(y_span.size()) != n) {
    throw ParameterError("response length does not match design rows");
  }
  if (n < d) {
    throw ParameterError("need at least d=" + std::to_string(d) + " observations, have " +
                         std::to_string(n));
  }
  const Eigen::Map<const VectorXd> y(y_span.data(), n);

  const InteriorPointResult ip = interior_point(x_mat, y_span, tau, opt);

  QuantileFit fit;
  fit.status.ip_iterations = ip.iterations;
  fit.status.ip_gap = ip.gap;

  VectorXd theta = ip.theta;
  if (!theta.allFinite()) {
    // Interior point broke down; the polish can still start from least squares.
    Eigen::ColPivHouseholderQR<MatrixXd> qr(x_mat);
    theta = qr.solve(y);
  }
  VectorXd resid = y - x_mat * theta;
  std::vector<Index> basis = initial_basis(x_mat, resid);

  MatrixXd xh(d, d);
  VectorXd yh(d);
  auto load_basis = [&] {
    for (Index j = 0; j < d; ++j) {
      xh.row(j) = x_mat.row(basis[static_cast<std::size_t>(j)]);
      yh(j) = y(basis[static_cast<std::size_t>(j)]);
    }
  };
  load_basis();
  Eigen::PartialPivLU<MatrixXd> lu(xh);
  theta = lu.solve(yh);

  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  for (Index i : basis) in_basis[static_cast<std::size_t>(i)] = 1;

  VectorXd zero_tol(n);
  for (Index i = 0; i < n; ++i) zero_tol(i) = 1e-10 * (1.0 + std::abs(y(i)));

  const int max_pivots = opt.max_pivots > 0 ? opt.max_pivots : 50 + 10 * static_cast<int>(n);
  MatrixXd bmat(n, d);
  std::ostringstream trace;
  for (;;) {
    resid.noalias() = y - x_mat * theta;
    const MatrixXd xh_inv = lu.inverse();
    bmat.noalias() = x_mat * xh_inv;

    // Directional derivatives along the 2d edges leaving the vertex. Edge
    // (j, +1) makes basic residual j negative, (j, -1) makes it positive.
    // `eps` is the derivative of the slope with respect to tau.
    int best_j = -1;
    double best_sigma = 0.0;
    double best_slope = 0.0;
    double best_eps = 0.0;
    bool best_first_order = false;
    for (Index j = 0; j < d; ++j) {
      double plus = 1.0 - tau;
      double minus = tau;
      double sum_c = 0.0;
      double abs_c = 0.0;
      for (Index i = 0; i < n; ++i) {
        if (in_basis[static_cast<std::size_t>(i)]) continue;
        const double cij = bmat(i, j);
        sum_c += cij;
        abs_c += std::abs(cij);
        const double ri = resid(i);
        if (ri > zero_tol(i)) {
          plus -= tau * cij;
          minus += tau * cij;
        } else if (ri < -zero_tol(i)) {
          plus += (1.0 - tau) * cij;
          minus -= (1.0 - tau) * cij;
        } else {
          // Zero residual: it leaves zero on whichever side the edge pushes it.
          plus += cij > 0.0 ? (1.0 - tau) * cij : -tau * cij;
          minus += cij < 0.0 ? -(1.0 - tau) * cij : tau * cij;
        }
      }
      const double tol = 1e-11 * (1.0 + abs_c);
      const double eps_plus = -1.0 - sum_c;
      const double eps_minus = 1.0 + sum_c;
      auto consider = [&](double slope, double eps, double sigma) {
        const bool first = slope < -tol;
        const bool second = !first && slope <= tol && eps < -tol;
        if (!first && !second) return;
        const bool better = best_j < 0 || (first && !best_first_order) ||
                            (first == best_first_order &&
                             (first ? slope < best_slope : eps < best_eps));
        if (better) {
          best_j = static_cast<int>(j);
          best_sigma = sigma;
          best_slope = slope;
          best_eps = eps;
          best_first_order = first;
        }
      };
      consider(plus, eps_plus, 1.0);
      consider(minus, eps_minus, -1.0);
    }
    if (best_j < 0) break;  // optimal vertex

    if (fit.status.pivots >= max_pivots) {
      trace << "pivot limit " << max_pivots << " reached; last slope " << best_slope
            << ", ip iterations " << ip.iterations << ", ip gap " << ip.gap;
      throw NumericError("quantile regression polish did not terminate at tau=" +
                         std::to_string(tau) + ": " + trace.str());
    }

    const Index j = best_j;
    std::vector<Breakpoint> heap;
    double abs_c = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)]) continue;
      const double ci = best_sigma * bmat(i, j);
      abs_c += std::abs(ci);
      if (std::abs(resid(i)) <= zero_tol(i) || ci == 0.0) continue;
      const double step = resid(i) / ci;
      if (step > 0.0) heap.push_back({step, std::abs(ci), i});
    }
    const double tol = 1e-11 * (1.0 + abs_c);
    std::priority_queue<Breakpoint, std::vector<Breakpoint>, std::greater<>> pq(
        std::greater<>{}, std::move(heap));
    double slope = best_slope;
    Index entering = -1;
    while (!pq.empty()) {
      const Breakpoint bp = pq.top();
      pq.pop();
      slope += bp.weight;
      if (slope > tol || (slope >= -tol && best_eps >= -tol)) {
        entering = bp.row;
        break;
      }
    }
    if (entering < 0) {
      throw NumericError("quantile regression objective unbounded along an edge at tau=" +
                         std::to_string(tau));
    }

    in_basis[static_cast<std::size_t>(basis[static_cast<std::size_t>(j)])] = 0;
    basis[static_cast<std::size_t>(j)] = entering;
    in_basis[static_cast<std::size_t>(entering)] = 1;
    load_basis();
    lu.compute(xh);
    theta = lu.solve(yh);
    ++fit.status.pivots;
  }

  fit.coefficients = theta;
  double objective = 0.0;
  for (Index i = 0; i < n; ++i) objective += tick_loss(resid(i), tau);
  fit.objective = objective;
  fit.status.converged = true;
  return fit;
}

}  // namespace qarspec
