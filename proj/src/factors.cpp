#include "qarspec/factors.hpp"

#include <cmath>
#include <limits>

#include <lapacke.h>

#include "qarspec/error.hpp"

namespace qarspec {

namespace {

struct EigenPairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns match values
};

// Largest k eigenpairs of a symmetric matrix (LAPACK dsyevr, index range).
EigenPairs top_eigenpairs(const Eigen::MatrixXd& gram, int k) {
  const auto n = static_cast<lapack_int>(gram.rows());
  Eigen::MatrixXd a = gram;
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, k);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(k));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'U', n, a.data(), n, 0.0,
                                         0.0, n - k + 1, n, 0.0, &found, w.data(), z.data(), n,
                                         support.data());
  if (info != 0 || found != k) {
    throw NumericError("symmetric eigensolver failed (dsyevr info=" + std::to_string(info) +
                       ", eigenpairs found=" + std::to_string(found) + " of " +
                       std::to_string(k) + ", order=" + std::to_string(n) + ")");
  }
  EigenPairs out;
  out.values.resize(k);
  out.vectors.resize(n, k);
  for (int j = 0; j < k; ++j) {
    out.values(j) = w(k - 1 - j);
    out.vectors.col(j) = z.col(k - 1 - j);
  }
  return out;
}

GramSide resolve(GramSide side, Eigen::Index n, Eigen::Index t) {
  if (side != GramSide::Auto) return side;
  return t <= n ? GramSide::Periods : GramSide::Series;
}

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& x, GramSide side) {
  if (side == GramSide::Periods) {
    Eigen::MatrixXd g(x.cols(), x.cols());
    g.setZero();
    g.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    return g.selfadjointView<Eigen::Lower>();
  }
  Eigen::MatrixXd g(x.rows(), x.rows());
  g.setZero();
  g.selfadjointView<Eigen::Lower>().rankUpdate(x);
  return g.selfadjointView<Eigen::Lower>();
}

}  // namespace

FactorModel extract_factors(const Panel& panel, int k, GramSide side) {
  const Eigen::Index n = panel.num_series();
  const Eigen::Index t = panel.num_periods();
  if (k < 1 || k > std::min(n, t)) {
    throw ParameterError("factor count k=" + std::to_string(k) + " outside [1, min(N,T)=" +
                         std::to_string(std::min(n, t)) + "]");
  }
  const Eigen::MatrixXd& x = panel.values;
  side = resolve(side, n, t);
  const EigenPairs eig = top_eigenpairs(gram_matrix(x, side), k);
  const double sqrt_t = std::sqrt(static_cast<double>(t));

  FactorModel model;
  model.k = k;
  model.eigenvalues = eig.values.cwiseMax(0.0);
  model.period_index = panel.period_index;
  if (side == GramSide::Periods) {
    model.factors = sqrt_t * eig.vectors;
  } else {
    // X'u_j has norm sqrt(w_j); rescale to F'F/T = I.
    model.factors = x.transpose() * eig.vectors;
    const double floor = 1e-12 * std::max(1.0, eig.values(0));
    for (int j = 0; j < k; ++j) {
      if (!(eig.values(j) > floor)) {
        throw SingularityError("panel rank is below k=" + std::to_string(k) +
                               " (eigenvalue " + std::to_string(j + 1) + " is " +
                               std::to_string(eig.values(j)) + ")");
      }
      model.factors.col(j) *= sqrt_t / std::sqrt(eig.values(j));
    }
  }
  model.loadings = x * model.factors / static_cast<double>(t);

  for (int j = 0; j < k; ++j) {
    if (model.loadings.col(j).sum() < 0.0) {
      model.loadings.col(j) = -model.loadings.col(j);
      model.factors.col(j) = -model.factors.col(j);
    }
  }
  return model;
}

double ic_penalty(IcPenalty penalty, Eigen::Index n, Eigen::Index t) {
  const auto nd = static_cast<double>(n);
  const auto td = static_cast<double>(t);
  const double ratio = (nd + td) / (nd * td);
  const double c2 = std::min(nd, td);
  switch (penalty) {
    case IcPenalty::P1:
      return ratio * std::log(nd * td / (nd + td));
    case IcPenalty::P2:
      return ratio * std::log(c2);
    case IcPenalty::P3:
      return std::log(c2) / c2;
  }
  return ratio * std::log(c2);
}

FactorSelection factor_selection_profile(const Panel& panel, int k_max, IcPenalty penalty) {
  const Eigen::Index n = panel.num_series();
  const Eigen::Index t = panel.num_periods();
  if (k_max < 1 || k_max > std::min(n, t)) {
    throw ParameterError("k_max=" + std::to_string(k_max) + " outside [1, min(N,T)=" +
                         std::to_string(std::min(n, t)) + "]");
  }
  const GramSide side = resolve(GramSide::Auto, n, t);
  const Eigen::MatrixXd gram = gram_matrix(panel.values, side);
  const double total = gram.trace();
  const EigenPairs eig = top_eigenpairs(gram, k_max);
  const double nt = static_cast<double>(n) * static_cast<double>(t);
  const double g = ic_penalty(penalty, n, t);

  FactorSelection sel;
  sel.penalty = penalty;
  double explained = 0.0;
  double best = std::numeric_limits<double>::infinity();
  const double floor = 1e-12 * std::max(1.0, eig.values(0));
  for (int k = 1; k <= k_max; ++k) {
    // Beyond the numerical rank the k-th factor is undefined.
    if (!(eig.values(k - 1) > floor)) break;
    explained += eig.values(k - 1);
    const double v = std::max(0.0, total - explained) / nt;
    sel.mean_squared_residual.push_back(v);
    const bool exact = v <= 1e-13 * total / nt;
    const double ic = exact ? -std::numeric_limits<double>::infinity()
                            : std::log(v) + static_cast<double>(k) * g;
    sel.criterion.push_back(ic);
    if (ic < best) {
      best = ic;
      sel.k = k;
    }
    if (exact) break;
  }
  return sel;
}

int select_num_factors(const Panel& panel, int k_max, IcPenalty penalty) {
  return factor_selection_profile(panel, k_max, penalty).k;
}

}  // namespace qarspec
