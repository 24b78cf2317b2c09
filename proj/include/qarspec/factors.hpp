#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "qarspec/panel.hpp"

namespace qarspec {

/// Which Gram matrix the eigenproblem is solved on.
enum class GramSide {
  Auto,     ///< the smaller of the two
  Periods,  ///< X'X, T x T
  Series,   ///< XX', N x N
};

/**
 * Principal-components estimate of an approximate factor model.
 *
 * Identification: F'F/T = I_k, loadings = X F / T, and each factor column is
 * signed so that its loading vector has a nonnegative sum. Eigenvalues are
 * those of X'X for the standardized panel X (N x T), largest first.
 */
struct FactorModel {
  Eigen::MatrixXd factors;      ///< T x k
  Eigen::MatrixXd loadings;     ///< N x k
  Eigen::VectorXd eigenvalues;  ///< k, nonincreasing
  int k = 0;
  std::vector<std::string> period_index;
  std::string normalization = "F'F/T=I; loadings=XF/T; sign: sum(loadings)>=0";

  /// Common component Lambda F' (N x T).
  [[nodiscard]] Eigen::MatrixXd common_component() const {
    return loadings * factors.transpose();
  }
};

FactorModel extract_factors(const Panel& panel, int k, GramSide side = GramSide::Auto);

/// Bai-Ng penalty families; IC_p2 is the default.
enum class IcPenalty { P1, P2, P3 };

struct FactorSelection {
  int k = 0;
  std::vector<double> mean_squared_residual;  ///< V(1..k_max)
  std::vector<double> criterion;              ///< IC(1..k_max)
  IcPenalty penalty = IcPenalty::P2;
};

/**
 * IC(k) = ln V(k) + k * g(N, T) over k = 1..k_max, where V(k) is the mean
 * squared idiosyncratic residual at rank k. k = 0 is never considered. A
 * rank whose residual is numerically zero scores -inf, so the first exact
 * fit wins.
 */
FactorSelection factor_selection_profile(const Panel& panel, int k_max,
                                         IcPenalty penalty = IcPenalty::P2);

int select_num_factors(const Panel& panel, int k_max, IcPenalty penalty = IcPenalty::P2);

double ic_penalty(IcPenalty penalty, Eigen::Index n, Eigen::Index t);

}  // namespace qarspec
