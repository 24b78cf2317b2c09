#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qarspec/bootstrap.hpp"
#include "qarspec/rng.hpp"
#include "qarspec/spec_test.hpp"

namespace qarspec {

enum class DgpCase { Case1, Case2 };

/**
 * y_t = 10 + Phi^{-1}(u_t) + rho1 y_{t-1} [+ beta1 F_{t-1}], u_t iid U(0,1).
 * The companion panel is X_it = lambda_i F_t + sd e_it with F_t, e_it iid
 * N(0,1) and lambda_i iid N(1,1).
 */
struct DgpSpec {
  DgpCase dgp_case = DgpCase::Case1;
  std::size_t T = 300;
  double rho1 = 0.5;
  double beta1 = 0.8;
  std::size_t panel_N = 0;  ///< 0: N = T
  std::size_t burn_in = 200;
  double idiosyncratic_sd = 1.0;

  void validate() const;
  [[nodiscard]] std::size_t cross_section() const { return panel_N == 0 ? T : panel_N; }
};

struct SimulatedData {
  std::vector<double> y;  ///< T
  Eigen::MatrixXd factors;  ///< T x 1, true F_t aligned with y_t
  Eigen::MatrixXd panel;    ///< N x T
};

/**
 * The shocks and factor draws come from key.child("y"), the loadings and
 * idiosyncratic noise from key.child("panel"). Case 2 with beta1 = 0 therefore
 * reproduces Case 1 exactly.
 */
SimulatedData simulate_dgp(const DgpSpec& spec, const StreamKey& key);

struct ExperimentConfig {
  std::vector<DgpSpec> specs;
  int mc_reps = 200;
  int boot_reps = 99;
  double alpha = 0.05;
  std::uint64_t seed = 20240101;
  int threads = 1;
  bool test_h02 = false;
  int p = 1;
  int k = 1;
  std::size_t m = 17;
  WeightConfig weights;
  FunctionalForm form = FunctionalForm::Squared;

  void validate() const;
};

struct RejectionRow {
  DgpCase dgp_case = DgpCase::Case1;
  std::size_t T = 0;
  std::string functional;  ///< "KS" or "CvM"
  NullHypothesis which_null = NullHypothesis::H01;
  std::size_t rejections = 0;
  double rejection_frequency = 0.0;
};

struct RejectionTable {
  std::vector<RejectionRow> rows;
  int mc_reps = 0;
  int boot_reps = 0;
  double nominal_alpha = 0.05;
  std::size_t failures = 0;  ///< replications redrawn after a numeric failure
  std::size_t bootstrap_redraws = 0;

  [[nodiscard]] const RejectionRow* find(DgpCase c, std::size_t T, const std::string& functional,
                                         NullHypothesis which) const;
};

RejectionTable run_experiment(const ExperimentConfig& cfg);

void write_rejection_csv(std::ostream& out, const RejectionTable& table);
/// Plain-text layout: one line per T, KS and CvM columns per case.
void write_rejection_text(std::ostream& out, const RejectionTable& table);

struct Lemma1Row {
  std::size_t N = 0;
  std::size_t T = 0;
  std::vector<double> gaps;  ///< |CvM(estimated) - CvM(true)| per replication
  double median_gap = 0.0;
};

/**
 * For each (N, T) simulate `replications` samples and compare the H01 CvM
 * statistic computed with estimated factors against the one computed with
 * the true factors mapped into the estimated factors' rotation (fitted values
 * of an OLS regression of F-hat on a constant and F). `extract_k` may exceed
 * the true factor count.
 */
std::vector<Lemma1Row> lemma1_convergence_check(
    const DgpSpec& spec, const std::vector<std::pair<std::size_t, std::size_t>>& sizes,
    int replications, const StreamKey& key, int extract_k = 1, std::size_t m = 17,
    const WeightConfig& weights = {}, int threads = 1);

std::string to_string(DgpCase c);
DgpCase parse_dgp_case(const std::string& text);

}  // namespace qarspec
