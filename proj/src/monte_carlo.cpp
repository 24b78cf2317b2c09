#include "qarspec/monte_carlo.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <Eigen/QR>

#include "qarspec/csv.hpp"
#include "qarspec/error.hpp"
#include "qarspec/factors.hpp"
#include "qarspec/normal.hpp"
#include "qarspec/panel.hpp"
#include "qarspec/parallel.hpp"

namespace qarspec {

namespace {

constexpr int kMaxAttempts = 10;

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

FactorSeries estimated_factors(const Eigen::MatrixXd& raw_panel, int k) {
  const Panel panel = make_panel(raw_panel);
  FactorSeries fs;
  fs.values = extract_factors(panel, k).factors;
  return fs;
}

struct ReplicationOutcome {
  bool h01_cvm = false;
  bool h01_ks = false;
  bool h02_cvm = false;
  bool h02_ks = false;
  std::size_t failures = 0;
  std::size_t redraws = 0;
};

ReplicationOutcome run_replication(const ExperimentConfig& cfg, const DgpSpec& spec,
                                   const StreamKey& key, const std::vector<double>& tau_grid) {
  ReplicationOutcome out;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const StreamKey akey = key.child("attempt", static_cast<std::uint64_t>(attempt));
    try {
      const SimulatedData data = simulate_dgp(spec, akey.child("data"));
      const FactorSeries fs = estimated_factors(data.panel, cfg.k);
      TimeSeries y{data.y, {}};

      BootstrapConfig boot;
      boot.replications = cfg.boot_reps;
      boot.alpha = cfg.alpha;
      boot.threads = 1;

      boot.seed = akey.child("bootstrap", 1).value();
      const RegressionFrame qar = build_frame(y, cfg.p, nullptr);
      const TestRun h01 = run_test(qar, &fs, cfg.weights, tau_grid, boot, NullHypothesis::H01,
                                   cfg.form);
      out.h01_cvm = h01.result.reject_cvm;
      out.h01_ks = h01.result.reject_ks;
      out.redraws += h01.result.redraws;

      if (cfg.test_h02) {
        boot.seed = akey.child("bootstrap", 2).value();
        const RegressionFrame faqar = build_frame(y, cfg.p, &fs);
        const TestRun h02 = run_test(faqar, &fs, cfg.weights, tau_grid, boot,
                                     NullHypothesis::H02, cfg.form);
        out.h02_cvm = h02.result.reject_cvm;
        out.h02_ks = h02.result.reject_ks;
        out.redraws += h02.result.redraws;
      }
      return out;
    } catch (const NumericError&) {
      ++out.failures;
    }
  }
  throw NumericError("Monte Carlo replication failed " + std::to_string(kMaxAttempts) +
                     " times in a row");
}

}  // namespace

void DgpSpec::validate() const {
  if (!(std::abs(rho1) < 1.0)) throw ParameterError("|rho1| must be < 1");
  if (burn_in < 100) throw ParameterError("burn_in must be >= 100");
  if (T < 10) throw ParameterError("T must be >= 10");
  if (!(idiosyncratic_sd >= 0.0)) throw ParameterError("idiosyncratic sd must be >= 0");
  if (!std::isfinite(beta1)) throw ParameterError("beta1 must be finite");
}

SimulatedData simulate_dgp(const DgpSpec& spec, const StreamKey& key) {
  spec.validate();
  const std::size_t total = spec.burn_in + spec.T;
  const double beta = spec.dgp_case == DgpCase::Case2 ? spec.beta1 : 0.0;

  Rng yrng = key.child("y").rng();
  std::vector<double> y(total);
  std::vector<double> f(total);
  double y_prev = 10.0 / (1.0 - spec.rho1);
  double f_prev = yrng.normal();
  for (std::size_t t = 0; t < total; ++t) {
    const double u = yrng.uniform_open();
    f[t] = yrng.normal();
    y[t] = 10.0 + normal_quantile(u) + spec.rho1 * y_prev + beta * f_prev;
    y_prev = y[t];
    f_prev = f[t];
  }

  SimulatedData data;
  data.y.assign(y.begin() + static_cast<std::ptrdiff_t>(spec.burn_in), y.end());
  const auto t_len = static_cast<Eigen::Index>(spec.T);
  data.factors.resize(t_len, 1);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    data.factors(t, 0) = f[spec.burn_in + static_cast<std::size_t>(t)];
  }

  Rng prng = key.child("panel").rng();
  const auto n = static_cast<Eigen::Index>(spec.cross_section());
  data.panel.resize(n, t_len);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lambda = 1.0 + prng.normal();
    for (Eigen::Index t = 0; t < t_len; ++t) {
      data.panel(i, t) = lambda * data.factors(t, 0) + spec.idiosyncratic_sd * prng.normal();
    }
  }
  return data;
}

void ExperimentConfig::validate() const {
  if (specs.empty()) throw ParameterError("no DGP specifications given");
  for (const auto& s : specs) s.validate();
  if (mc_reps < 1) throw ParameterError("mc_reps must be >= 1");
  if (boot_reps < 1) throw ParameterError("boot_reps must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
  if (p < 1) throw ParameterError("p must be >= 1");
  if (k < 1) throw ParameterError("k must be >= 1");
  if (m < 1) throw ParameterError("m must be >= 1");
  weights.validate();
}

const RejectionRow* RejectionTable::find(DgpCase c, std::size_t T, const std::string& functional,
                                         NullHypothesis which) const {
  for (const auto& row : rows) {
    if (row.dgp_case == c && row.T == T && row.functional == functional &&
        row.which_null == which) {
      return &row;
    }
  }
  return nullptr;
}

RejectionTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<double> tau_grid = equidistributed_grid(cfg.m);
  RejectionTable table;
  table.mc_reps = cfg.mc_reps;
  table.boot_reps = cfg.boot_reps;
  table.nominal_alpha = cfg.alpha;

  const StreamKey root(cfg.seed);
  const auto reps = static_cast<std::size_t>(cfg.mc_reps);
  for (const DgpSpec& spec : cfg.specs) {
    const StreamKey cell = root.child("mc/" + to_string(spec.dgp_case) + "/T" +
                                      std::to_string(spec.T));
    std::vector<ReplicationOutcome> outcomes(reps);
    parallel_for(reps, cfg.threads, [&](std::size_t r) {
      outcomes[r] = run_replication(cfg, spec, cell.child("rep", r), tau_grid);
    });

    std::size_t counts[4] = {0, 0, 0, 0};
    for (const auto& o : outcomes) {
      counts[0] += o.h01_ks ? 1 : 0;
      counts[1] += o.h01_cvm ? 1 : 0;
      counts[2] += o.h02_ks ? 1 : 0;
      counts[3] += o.h02_cvm ? 1 : 0;
      table.failures += o.failures;
      table.bootstrap_redraws += o.redraws;
    }
    const int nulls = cfg.test_h02 ? 2 : 1;
    for (int h = 0; h < nulls; ++h) {
      for (int f = 0; f < 2; ++f) {
        RejectionRow row;
        row.dgp_case = spec.dgp_case;
        row.T = spec.T;
        row.functional = f == 0 ? "KS" : "CvM";
        row.which_null = h == 0 ? NullHypothesis::H01 : NullHypothesis::H02;
        row.rejections = counts[2 * h + f];
        row.rejection_frequency = static_cast<double>(row.rejections) / static_cast<double>(reps);
        table.rows.push_back(row);
      }
    }
  }
  return table;
}

void write_rejection_csv(std::ostream& out, const RejectionTable& table) {
  out << "case,T,functional,null,rejections,rejection_frequency,mc_reps,boot_reps,alpha\n";
  for (const auto& row : table.rows) {
    out << to_string(row.dgp_case) << ',' << row.T << ',' << row.functional << ','
        << to_string(row.which_null) << ',' << row.rejections << ','
        << format_real(row.rejection_frequency) << ',' << table.mc_reps << ','
        << table.boot_reps << ',' << format_real(table.nominal_alpha) << '\n';
  }
}

void write_rejection_text(std::ostream& out, const RejectionTable& table) {
  for (NullHypothesis which : {NullHypothesis::H01, NullHypothesis::H02}) {
    std::map<std::size_t, bool> sizes;
    for (const auto& row : table.rows) {
      if (row.which_null == which) sizes[row.T] = true;
    }
    if (sizes.empty()) continue;
    out << "Rejection frequencies, null " << to_string(which) << " (alpha = "
        << format_real(table.nominal_alpha) << ", " << table.mc_reps << " MC x "
        << table.boot_reps << " bootstrap)\n";
    out << std::setw(6) << "T" << "  " << std::setw(8) << "case1 KS" << ' ' << std::setw(9)
        << "case1 CvM" << "  " << std::setw(8) << "case2 KS" << ' ' << std::setw(9)
        << "case2 CvM" << '\n';
    auto cell = [&](DgpCase c, std::size_t t, const char* f, int width) {
      std::ostringstream s;
      const RejectionRow* row = table.find(c, t, f, which);
      if (row == nullptr) {
        s << "-";
      } else {
        s << std::fixed << std::setprecision(3) << row->rejection_frequency;
      }
      out << std::setw(width) << s.str();
    };
    for (const auto& [t, unused] : sizes) {
      (void)unused;
      out << std::setw(6) << t << "  ";
      cell(DgpCase::Case1, t, "KS", 8);
      out << ' ';
      cell(DgpCase::Case1, t, "CvM", 9);
      out << "  ";
      cell(DgpCase::Case2, t, "KS", 8);
      out << ' ';
      cell(DgpCase::Case2, t, "CvM", 9);
      out << '\n';
    }
  }
}

std::vector<Lemma1Row> lemma1_convergence_check(
    const DgpSpec& spec, const std::vector<std::pair<std::size_t, std::size_t>>& sizes,
    int replications, const StreamKey& key, int extract_k, std::size_t m,
    const WeightConfig& weights, int threads) {
  if (replications < 1) throw ParameterError("replications must be >= 1");
  const std::vector<double> tau_grid = equidistributed_grid(m);
  std::vector<Lemma1Row> rows;
  for (const auto& [n, t] : sizes) {
    if (n < t) throw ParameterError("the factor error check needs N >= T");
    DgpSpec s = spec;
    s.T = t;
    s.panel_N = n;
    Lemma1Row row;
    row.N = n;
    row.T = t;
    row.gaps.assign(static_cast<std::size_t>(replications), 0.0);
    const StreamKey cell = key.child("lemma1/N" + std::to_string(n) + "/T" + std::to_string(t));
    parallel_for(row.gaps.size(), threads, [&](std::size_t r) {
      const SimulatedData data = simulate_dgp(s, cell.child("rep", r));
      const FactorSeries estimated = estimated_factors(data.panel, extract_k);

      // Express the true factors in the estimated rotation.
      const auto tl = static_cast<Eigen::Index>(t);
      Eigen::MatrixXd z(tl, 1 + data.factors.cols());
      z.col(0).setOnes();
      z.rightCols(data.factors.cols()) = data.factors;
      const Eigen::MatrixXd coef = z.colPivHouseholderQr().solve(estimated.values);
      FactorSeries rotated;
      rotated.values = z * coef;

      const RegressionFrame frame = build_frame(TimeSeries{data.y, {}}, 1, nullptr);
      const QuantileFitPath path = fit_path(frame, tau_grid);
      const TestSurface with_est =
          empirical_process(frame, path, &estimated, weights, NullHypothesis::H01);
      const TestSurface with_true =
          empirical_process(frame, path, &rotated, weights, NullHypothesis::H01);
      row.gaps[r] = std::abs(with_est.functional_cvm - with_true.functional_cvm);
    });
    row.median_gap = median(row.gaps);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_string(DgpCase c) { return c == DgpCase::Case1 ? "case1" : "case2"; }

DgpCase parse_dgp_case(const std::string& text) {
  if (text == "case1" || text == "1") return DgpCase::Case1;
  if (text == "case2" || text == "2") return DgpCase::Case2;
  throw ParameterError("unknown DGP case '" + text + "' (expected case1 or case2)");
}

}  // namespace qarspec
