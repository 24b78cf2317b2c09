#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "config.hpp"
#include "qarspec/bootstrap.hpp"
#include "qarspec/csv.hpp"
#include "qarspec/error.hpp"
#include "qarspec/factors.hpp"
#include "qarspec/monte_carlo.hpp"
#include "qarspec/panel.hpp"
#include "qarspec/parallel.hpp"
#include "qarspec/qar.hpp"
#include "qarspec/skewt.hpp"
#include "qarspec/spec_test.hpp"

namespace qarspec::cli {

namespace {

struct Context {
  RunConfig cfg;
  std::string command;
  std::ostream& out;
  std::ostream& err;
};

using Handler = std::function<void(Context&)>;

struct Command {
  std::string name;
  std::string description;
  std::vector<OptionSpec> options;
  std::vector<std::string> flags;  ///< keys given as bare switches
  Handler run;
};

// ---------------------------------------------------------------- helpers

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

int threads_of(const RunConfig& cfg) {
  const long t = cfg.integer("threads");
  if (t < 1) throw ParameterError("threads must be >= 1");
  return static_cast<int>(t);
}

std::filesystem::path output_path(const RunConfig& cfg, const std::string& name) {
  const std::filesystem::path dir(cfg.text("out"));
  std::filesystem::create_directories(dir);
  return dir / name;
}

/// Writes a file whose first lines are the embedded config.
void write_output(Context& ctx, const std::string& name,
                  const std::function<void(std::ostream&)>& body) {
  const auto path = output_path(ctx.cfg, name);
  std::ofstream file(path, std::ios::binary);
  if (!file) throw LoadError("cannot write output file: " + path.string());
  ctx.cfg.write_embedded(file, ctx.command);
  body(file);
  if (!file) throw LoadError("failed writing output file: " + path.string());
  ctx.out << "wrote " << path.string() << '\n';
}

std::string require_input(const RunConfig& cfg, const std::string& key) {
  const std::string& path = cfg.text(key);
  if (path.empty()) throw ParameterError("--" + dashed(key) + " is required");
  return path;
}

TimeSeries load_series(const RunConfig& cfg) {
  const CsvTable table = read_csv(require_input(cfg, "input"));
  if (table.header.size() < 2) {
    throw LoadError("series file needs a period column and a value column");
  }
  std::size_t col = 1;
  const std::string& name = cfg.text("column");
  if (!name.empty()) {
    const auto found = table.column(name);
    if (!found) throw ParameterError("series file has no column '" + name + "'");
    col = *found;
  }
  TimeSeries y;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto v = col < row.size() ? parse_real(row[col]) : std::nullopt;
    if (!v) {
      throw LoadError("missing or non-numeric value in column '" + table.header[col] +
                      "' at period '" + (row.empty() ? std::to_string(r + 1) : row[0]) + "'");
    }
    y.values.push_back(*v);
    y.periods.push_back(row[0]);
  }
  return y;
}

FactorSeries load_factor_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header.size() < 2) throw LoadError("factor file needs a period column and factors");
  FactorSeries fs;
  fs.values.resize(static_cast<Eigen::Index>(table.rows.size()),
                   static_cast<Eigen::Index>(table.header.size() - 1));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    fs.periods.push_back(row.empty() ? std::string() : row[0]);
    for (std::size_t c = 1; c < table.header.size(); ++c) {
      const auto v = c < row.size() ? parse_real(row[c]) : std::nullopt;
      if (!v) {
        throw LoadError("missing factor value '" + table.header[c] + "' at period '" +
                        fs.periods.back() + "'");
      }
      fs.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) = *v;
    }
  }
  return fs;
}

IcPenalty parse_penalty(const std::string& s) {
  if (s == "p1") return IcPenalty::P1;
  if (s == "p2") return IcPenalty::P2;
  if (s == "p3") return IcPenalty::P3;
  throw ParameterError("unknown penalty '" + s + "' (expected p1, p2 or p3)");
}

GramSide parse_gram(const std::string& s) {
  if (s == "auto") return GramSide::Auto;
  if (s == "periods") return GramSide::Periods;
  if (s == "series") return GramSide::Series;
  throw ParameterError("unknown gram side '" + s + "' (expected auto, periods or series)");
}

/// Explicit k, or "auto" for the information-criterion choice up to kmax.
int resolve_k(const RunConfig& cfg, const Panel& panel, FactorSelection* selection) {
  if (cfg.text("k") == "auto") {
    *selection = factor_selection_profile(panel, static_cast<int>(cfg.integer("kmax")),
                                          parse_penalty(cfg.text("penalty")));
    return selection->k;
  }
  return static_cast<int>(cfg.integer("k"));
}

std::vector<double> tau_grid_of(const RunConfig& cfg, std::size_t m) {
  return equidistributed_grid(m, cfg.real("tau_lo"), cfg.real("tau_hi"));
}

WeightConfig weight_config_of(const RunConfig& cfg) {
  WeightConfig w;
  const std::string& phi = cfg.text("phi");
  if (phi == "arctan") {
    w.phi = BoundedMap::Arctan;
  } else if (phi == "tanh") {
    w.phi = BoundedMap::Tanh;
  } else {
    throw ParameterError("unknown phi '" + phi + "' (expected arctan or tanh)");
  }
  w.kappa = cfg.real("kappa");
  w.gamma_max = cfg.real("gamma_max");
  w.gamma_points = static_cast<int>(cfg.integer("gamma_points"));
  w.max_lag = static_cast<int>(cfg.integer("max_lag"));
  const std::string& structure = cfg.text("structure");
  if (structure == "tied") {
    w.structure = GammaStructure::Tied;
  } else if (structure == "per-block") {
    w.structure = GammaStructure::PerBlock;
  } else {
    throw ParameterError("unknown structure '" + structure + "' (expected tied or per-block)");
  }
  w.validate();
  return w;
}

FunctionalForm form_of(const RunConfig& cfg) {
  const std::string& f = cfg.text("form");
  if (f == "squared") return FunctionalForm::Squared;
  if (f == "literal") return FunctionalForm::Literal;
  throw ParameterError("unknown form '" + f + "' (expected squared or literal)");
}

void write_real_row(std::ostream& os, const std::string& label, const double* v, Eigen::Index n) {
  os << label;
  for (Eigen::Index j = 0; j < n; ++j) os << ',' << format_real(v[j]);
  os << '\n';
}

std::vector<std::string> coefficient_names(int p, int k) {
  std::vector<std::string> names{"intercept"};
  for (int l = 1; l <= p; ++l) names.push_back("y_lag" + std::to_string(l));
  for (int j = 1; j <= k; ++j) names.push_back("F" + std::to_string(j) + "_lag1");
  return names;
}

// ---------------------------------------------------------------- factors

void cmd_factors(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  PanelLayout layout{cfg.text("period_column")};
  const Panel panel = load_panel(read_csv(require_input(cfg, "input")), layout);
  FactorSelection selection;
  const int k = resolve_k(cfg, panel, &selection);
  const FactorModel model = extract_factors(panel, k, parse_gram(cfg.text("gram")));

  write_output(ctx, "factors.csv", [&](std::ostream& os) {
    os << "period";
    for (int j = 1; j <= k; ++j) os << ",F" << j;
    os << '\n';
    for (Eigen::Index t = 0; t < model.factors.rows(); ++t) {
      const Eigen::RowVectorXd row = model.factors.row(t);
      write_real_row(os, model.period_index[static_cast<std::size_t>(t)], row.data(), k);
    }
  });
  write_output(ctx, "loadings.csv", [&](std::ostream& os) {
    os << "series";
    for (int j = 1; j <= k; ++j) os << ",L" << j;
    os << '\n';
    for (Eigen::Index i = 0; i < model.loadings.rows(); ++i) {
      const Eigen::RowVectorXd row = model.loadings.row(i);
      write_real_row(os, panel.series_ids[static_cast<std::size_t>(i)], row.data(), k);
    }
  });
  write_output(ctx, "factors_report.txt", [&](std::ostream& os) {
    os << "n_series = " << panel.num_series() << '\n';
    os << "n_periods = " << panel.num_periods() << '\n';
    os << "k = " << k << '\n';
    os << "k_source = " << (cfg.text("k") == "auto" ? "information criterion" : "fixed") << '\n';
    os << "normalization = " << model.normalization << '\n';
    for (int j = 0; j < k; ++j) {
      os << "eigenvalue." << (j + 1) << " = " << format_real(model.eigenvalues(j)) << '\n';
    }
    for (std::size_t j = 0; j < selection.criterion.size(); ++j) {
      os << "ic." << (j + 1) << " = " << format_real(selection.criterion[j]) << '\n';
      os << "v." << (j + 1) << " = " << format_real(selection.mean_squared_residual[j]) << '\n';
    }
  });
  ctx.out << "k = " << k << '\n';
}

// ---------------------------------------------------------------- fit

void cmd_fit(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const int threads = threads_of(cfg);
  const TimeSeries y = load_series(cfg);
  const int p = static_cast<int>(cfg.integer("p"));
  std::unique_ptr<FactorSeries> factors;
  if (!cfg.text("factors").empty()) {
    factors = std::make_unique<FactorSeries>(load_factor_csv(cfg.text("factors")));
  }
  const RegressionFrame frame = build_frame(y, p, factors.get());
  const auto names = coefficient_names(p, frame.k);

  std::vector<double> grid = cfg.real_list("taus");
  if (grid.empty()) grid = tau_grid_of(cfg, static_cast<std::size_t>(cfg.integer("m")));
  const QuantileFitPath path = fit_path(frame, grid, threads);

  write_output(ctx, "path.csv", [&](std::ostream& os) {
    os << "tau";
    for (const auto& n : names) os << ',' << n;
    os << ",objective,ip_iterations,pivots,crossings_to_next\n";
    for (std::size_t q = 0; q < grid.size(); ++q) {
      const Eigen::RowVectorXd row = path.coefficients.row(static_cast<Eigen::Index>(q));
      os << format_real(grid[q]);
      for (Eigen::Index j = 0; j < row.size(); ++j) os << ',' << format_real(row(j));
      os << ',' << format_real(path.objective[q]) << ',' << path.diagnostics[q].ip_iterations
         << ',' << path.diagnostics[q].pivots << ','
         << (q < path.crossings.size() ? std::to_string(path.crossings[q]) : std::string()) << '\n';
    }
  });

  const std::vector<double> predict = cfg.real_list("predict_taus");
  if (!predict.empty()) {
    const QuantileFitPath pp = fit_path(frame, predict, threads);
    const Eigen::MatrixXd fitted = frame.design * pp.coefficients.transpose();
    write_output(ctx, "quantiles.csv", [&](std::ostream& os) {
      os << "period";
      for (double t : predict) os << ",q" << format_real(t);
      os << '\n';
      for (Eigen::Index r = 0; r < fitted.rows(); ++r) {
        const Eigen::RowVectorXd row = fitted.row(r);
        write_real_row(os, frame.period_index[static_cast<std::size_t>(r)], row.data(), row.size());
      }
    });
  }

  const long bands = cfg.integer("bands");
  if (bands > 0) {
    BootstrapConfig bc;
    bc.replications = static_cast<int>(bands);
    bc.seed = StreamKey(cfg.unsigned_integer("seed")).child("fit/bands").value();
    bc.threads = threads;
    const PathBands pb = bootstrap_path_bands(frame, grid, bc, cfg.real("band_level"));
    write_output(ctx, "bands.csv", [&](std::ostream& os) {
      os << "tau";
      for (const auto& n : names) os << ',' << n << "_lower," << n << "_upper";
      os << '\n';
      for (std::size_t q = 0; q < grid.size(); ++q) {
        os << format_real(grid[q]);
        for (Eigen::Index j = 0; j < pb.lower.cols(); ++j) {
          const auto qi = static_cast<Eigen::Index>(q);
          os << ',' << format_real(pb.lower(qi, j)) << ',' << format_real(pb.upper(qi, j));
        }
        os << '\n';
      }
    });
  }
}

// ---------------------------------------------------------------- test

struct NullOutcome {
  bool ran = false;
  std::string note;
  BootstrapResult result;
  TestSurface surface;
};

void cmd_test(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const int threads = threads_of(cfg);
  const TimeSeries y = load_series(cfg);
  const int p = static_cast<int>(cfg.integer("p"));
  const WeightConfig weights = weight_config_of(cfg);
  const FunctionalForm form = form_of(cfg);
  const double alpha = cfg.real("alpha");

  std::unique_ptr<FactorSeries> factors;
  std::string factor_source = "none";
  if (!cfg.text("factors").empty() && !cfg.text("panel").empty()) {
    throw ParameterError("give either --factors or --panel, not both");
  }
  if (!cfg.text("factors").empty()) {
    factors = std::make_unique<FactorSeries>(load_factor_csv(cfg.text("factors")));
    factor_source = "file";
  } else if (!cfg.text("panel").empty()) {
    const Panel panel = load_panel(read_csv(cfg.text("panel")));
    FactorSelection selection;
    const int k = resolve_k(cfg, panel, &selection);
    const FactorModel model = extract_factors(panel, k);
    factors = std::make_unique<FactorSeries>(FactorSeries{model.factors, model.period_index});
    factor_source = "panel, k=" + std::to_string(k);
  }

  const RegressionFrame qar = build_frame(y, p, nullptr);
  std::unique_ptr<RegressionFrame> faqar;
  if (factors) {
    // Validates the factor alignment up front.
    faqar = std::make_unique<RegressionFrame>(build_frame(y, p, factors.get()));
  }

  const std::vector<long> m_list = cfg.integer_list("m_list");
  if (m_list.empty()) throw ParameterError("m_list is empty");
  const StreamKey root(cfg.unsigned_integer("seed"));
  std::vector<std::pair<NullOutcome, NullOutcome>> outcomes;
  for (long m : m_list) {
    if (m < 1) throw ParameterError("m values must be positive");
    const std::vector<double> grid = tau_grid_of(cfg, static_cast<std::size_t>(m));
    BootstrapConfig bc;
    bc.replications = static_cast<int>(cfg.integer("boot_reps"));
    bc.alpha = alpha;
    bc.threads = threads;

    NullOutcome h01;
    bc.seed = root.child("test/H01", static_cast<std::uint64_t>(m)).value();
    TestRun run1 = run_test(qar, factors.get(), weights, grid, bc, NullHypothesis::H01, form);
    h01.ran = true;
    h01.result = std::move(run1.result);
    h01.surface = std::move(run1.prepared.surface);

    NullOutcome h02;
    if (!h01.result.reject_cvm) {
      h02.note = "H01 not rejected at alpha; QAR adequate, FA-QAR test skipped";
    } else if (!factors) {
      h02.note = "H01 rejected but no factors supplied; FA-QAR test skipped";
    } else {
      bc.seed = root.child("test/H02", static_cast<std::uint64_t>(m)).value();
      TestRun run2 = run_test(*faqar, factors.get(), weights, grid, bc, NullHypothesis::H02, form);
      h02.ran = true;
      h02.result = std::move(run2.result);
      h02.surface = std::move(run2.prepared.surface);
    }
    outcomes.emplace_back(std::move(h01), std::move(h02));
  }

  for (std::size_t i = 0; i < m_list.size(); ++i) {
    const std::string m = std::to_string(m_list[i]);
    write_output(ctx, "surface_h01_m" + m + ".csv",
                 [&](std::ostream& os) { write_surface_csv(os, outcomes[i].first.surface); });
    if (outcomes[i].second.ran) {
      write_output(ctx, "surface_h02_m" + m + ".csv",
                   [&](std::ostream& os) { write_surface_csv(os, outcomes[i].second.surface); });
    }
  }

  write_output(ctx, "table.csv", [&](std::ostream& os) {
    os << "m,qar_p_cvm,faqar_p_cvm\n";
    for (std::size_t i = 0; i < m_list.size(); ++i) {
      os << m_list[i] << ',' << format_real(outcomes[i].first.result.p_cvm) << ','
         << (outcomes[i].second.ran ? format_real(outcomes[i].second.result.p_cvm) : "") << '\n';
    }
  });

  std::ostringstream report;
  report << "n_periods = " << y.values.size() << '\n';
  report << "effective_rows = " << qar.rows() << '\n';
  report << "factors = " << factor_source << '\n';
  report << "gamma_cells = " << outcomes.front().first.surface.gamma_cells.rows() << '\n';
  auto emit = [&](const std::string& prefix, const NullOutcome& o) {
    if (!o.ran) {
      report << prefix << ".status = skipped\n";
      report << prefix << ".note = " << o.note << '\n';
      return;
    }
    const BootstrapResult& r = o.result;
    report << prefix << ".status = run\n";
    report << prefix << ".cvm = " << format_real(r.original_cvm) << '\n';
    report << prefix << ".p_cvm = " << format_real(r.p_cvm) << '\n';
    report << prefix << ".critical_cvm = " << format_real(r.critical_cvm) << '\n';
    report << prefix << ".reject_cvm = " << (r.reject_cvm ? "true" : "false") << '\n';
    report << prefix << ".ks = " << format_real(r.original_ks) << '\n';
    report << prefix << ".p_ks = " << format_real(r.p_ks) << '\n';
    report << prefix << ".critical_ks = " << format_real(r.critical_ks) << '\n';
    report << prefix << ".reject_ks = " << (r.reject_ks ? "true" : "false") << '\n';
    report << prefix << ".redraws = " << r.redraws << '\n';
  };
  for (std::size_t i = 0; i < m_list.size(); ++i) {
    const std::string prefix = "m" + std::to_string(m_list[i]);
    emit(prefix + ".h01", outcomes[i].first);
    emit(prefix + ".h02", outcomes[i].second);
    std::string decision;
    if (!outcomes[i].first.result.reject_cvm) {
      decision = "QAR correctly specified (H01 not rejected)";
    } else if (!outcomes[i].second.ran) {
      decision = "QAR misspecified (H01 rejected); FA-QAR not tested";
    } else if (outcomes[i].second.result.reject_cvm) {
      decision = "QAR and FA-QAR both rejected; linear specification in doubt";
    } else {
      decision = "QAR misspecified, FA-QAR adequate: factors were omitted variables";
    }
    report << prefix << ".decision = " << decision << '\n';
  }
  report << "# CvM bootstrap p-values\n";
  report << "#" << std::setw(6) << "m" << std::setw(10) << "QAR" << std::setw(10) << "FA-QAR" << '\n';
  for (std::size_t i = 0; i < m_list.size(); ++i) {
    std::ostringstream a;
    std::ostringstream b;
    a << std::fixed << std::setprecision(3) << outcomes[i].first.result.p_cvm;
    if (outcomes[i].second.ran) {
      b << std::fixed << std::setprecision(3) << outcomes[i].second.result.p_cvm;
    } else {
      b << "-";
    }
    report << "#" << std::setw(6) << m_list[i] << std::setw(10) << a.str() << std::setw(10)
           << b.str() << '\n';
  }
  write_output(ctx, "test_report.txt", [&](std::ostream& os) { os << report.str(); });
  ctx.out << report.str();
}

// ---------------------------------------------------------------- montecarlo

void cmd_montecarlo(Context& ctx) {
  RunConfig& cfg = ctx.cfg;
  if (cfg.flag("full_scale")) {
    ctx.err << "warning: full-scale Monte Carlo (1000 replications x 300 bootstrap draws per "
               "cell) can take many hours\n";
    ctx.err.flush();
    cfg.set("mc_reps", "1000");
    cfg.set("boot_reps", "300");
  }
  ExperimentConfig ec;
  ec.mc_reps = static_cast<int>(cfg.integer("mc_reps"));
  ec.boot_reps = static_cast<int>(cfg.integer("boot_reps"));
  ec.alpha = cfg.real("alpha");
  ec.seed = cfg.unsigned_integer("seed");
  ec.threads = threads_of(cfg);
  ec.test_h02 = cfg.flag("h02");
  ec.p = 1;
  ec.k = static_cast<int>(cfg.integer("k"));
  ec.m = static_cast<std::size_t>(cfg.integer("m"));
  ec.weights = weight_config_of(cfg);
  ec.form = form_of(cfg);
  for (const auto& c : cfg.text_list("cases")) {
    for (long t : cfg.integer_list("sizes")) {
      if (t < 10) throw ParameterError("sample sizes must be >= 10");
      DgpSpec s;
      s.dgp_case = parse_dgp_case(c);
      s.T = static_cast<std::size_t>(t);
      s.rho1 = cfg.real("rho1");
      s.beta1 = cfg.real("beta1");
      s.panel_N = static_cast<std::size_t>(cfg.integer("panel_n"));
      s.burn_in = static_cast<std::size_t>(cfg.integer("burn_in"));
      ec.specs.push_back(s);
    }
  }
  ec.validate();
  const RejectionTable table = run_experiment(ec);
  write_output(ctx, "rejection.csv", [&](std::ostream& os) { write_rejection_csv(os, table); });
  write_output(ctx, "rejection.txt", [&](std::ostream& os) {
    write_rejection_text(os, table);
    os << "failures = " << table.failures << '\n';
  });
  write_rejection_text(ctx.out, table);
}

// ---------------------------------------------------------------- smooth

struct PeriodFit {
  std::string period;
  SkewTFit fit;
  std::string status = "ok";
  bool ok = false;
};

void cmd_smooth(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  const int threads = threads_of(cfg);
  const CsvTable table = read_csv(require_input(cfg, "input"));
  std::size_t period_col = 0;
  if (!cfg.text("period_column").empty()) {
    const auto c = table.column(cfg.text("period_column"));
    if (!c) throw ParameterError("no column '" + cfg.text("period_column") + "'");
    period_col = *c;
  }
  std::vector<std::size_t> cols;
  std::vector<double> probs;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == period_col) continue;
    std::string h = table.header[c];
    if (!h.empty() && (h[0] == 'q' || h[0] == 'Q')) h = h.substr(1);
    const auto v = parse_real(h);
    if (!v) throw LoadError("quantile column '" + table.header[c] + "' is not a probability");
    cols.push_back(c);
    probs.push_back(*v);
  }
  const long grid = cfg.integer("grid");
  if (grid < 0) throw ParameterError("grid must be >= 0");

  std::vector<PeriodFit> fits(table.rows.size());
  parallel_for(fits.size(), threads, [&](std::size_t r) {
    const auto& row = table.rows[r];
    PeriodFit& pf = fits[r];
    pf.period = period_col < row.size() ? row[period_col] : std::string();
    QuantileTargets targets;
    targets.probs = probs;
    for (std::size_t c : cols) {
      const auto v = c < row.size() ? parse_real(row[c]) : std::nullopt;
      targets.values.push_back(v ? *v : std::nan(""));
    }
    try {
      pf.fit = fit_skewt(targets);
      pf.ok = true;
      if (!pf.fit.converged) pf.status = "not converged";
    } catch (const Error& e) {
      pf.status = e.what();
    }
  });

  std::size_t flagged = 0;
  write_output(ctx, "skewt_params.csv", [&](std::ostream& os) {
    os << "period,mu,sigma,alpha,nu,objective,iterations,converged,status\n";
    for (const auto& pf : fits) {
      os << pf.period << ',';
      if (pf.ok) {
        const SkewTParams& q = pf.fit.params;
        os << format_real(q.mu) << ',' << format_real(q.sigma) << ',' << format_real(q.alpha)
           << ',' << format_real(q.nu) << ',' << format_real(pf.fit.objective) << ','
           << pf.fit.iterations << ',' << (pf.fit.converged ? "true" : "false");
      } else {
        ++flagged;
        os << "nan,nan,nan,nan,nan,0,false";
      }
      std::string status = pf.status;
      std::replace(status.begin(), status.end(), ',', ';');
      os << ',' << status << '\n';
    }
  });

  if (grid > 0) {
    const bool fixed = !cfg.text("grid_lo").empty() || !cfg.text("grid_hi").empty();
    if (fixed && (cfg.text("grid_lo").empty() || cfg.text("grid_hi").empty())) {
      throw ParameterError("give both grid_lo and grid_hi, or neither");
    }
    std::vector<std::string> blocks(fits.size());
    parallel_for(fits.size(), threads, [&](std::size_t r) {
      const PeriodFit& pf = fits[r];
      if (!pf.ok) return;
      double lo = 0.0;
      double hi = 0.0;
      if (fixed) {
        lo = cfg.real("grid_lo");
        hi = cfg.real("grid_hi");
      } else {
        lo = skewt_quantile(0.005, pf.fit.params);
        hi = skewt_quantile(0.995, pf.fit.params);
      }
      std::ostringstream os;
      for (long i = 0; i < grid; ++i) {
        const double x = grid == 1 ? 0.5 * (lo + hi)
                                   : lo + (hi - lo) * static_cast<double>(i) /
                                              static_cast<double>(grid - 1);
        os << pf.period << ',' << format_real(x) << ','
           << format_real(skewt_pdf(x, pf.fit.params)) << '\n';
      }
      blocks[r] = os.str();
    });
    write_output(ctx, "density.csv", [&](std::ostream& os) {
      os << "period,y,density\n";
      for (const auto& b : blocks) os << b;
    });
  }
  ctx.out << "periods = " << fits.size() << ", flagged = " << flagged << '\n';
}

// ---------------------------------------------------------------- simulate

void cmd_simulate(Context& ctx) {
  const RunConfig& cfg = ctx.cfg;
  DgpSpec s;
  s.dgp_case = parse_dgp_case(cfg.text("case"));
  const long t = cfg.integer("T");
  if (t < 10) throw ParameterError("T must be >= 10");
  s.T = static_cast<std::size_t>(t);
  s.panel_N = static_cast<std::size_t>(cfg.integer("panel_n"));
  s.rho1 = cfg.real("rho1");
  s.beta1 = cfg.real("beta1");
  s.burn_in = static_cast<std::size_t>(cfg.integer("burn_in"));
  s.idiosyncratic_sd = cfg.real("idiosyncratic_sd");
  const SimulatedData data =
      simulate_dgp(s, StreamKey(cfg.unsigned_integer("seed")).child("simulate"));

  write_output(ctx, "series.csv", [&](std::ostream& os) {
    os << "period,y\n";
    for (std::size_t i = 0; i < data.y.size(); ++i) {
      os << (i + 1) << ',' << format_real(data.y[i]) << '\n';
    }
  });
  write_output(ctx, "true_factors.csv", [&](std::ostream& os) {
    os << "period,F1\n";
    for (Eigen::Index i = 0; i < data.factors.rows(); ++i) {
      os << (i + 1) << ',' << format_real(data.factors(i, 0)) << '\n';
    }
  });
  write_output(ctx, "panel.csv", [&](std::ostream& os) {
    os << "period";
    for (Eigen::Index i = 0; i < data.panel.rows(); ++i) os << ",x" << (i + 1);
    os << '\n';
    for (Eigen::Index c = 0; c < data.panel.cols(); ++c) {
      const Eigen::VectorXd col = data.panel.col(c);
      write_real_row(os, std::to_string(c + 1), col.data(), col.size());
    }
  });
}

// ---------------------------------------------------------------- registry

std::vector<OptionSpec> with_common(std::vector<OptionSpec> specific) {
  specific.push_back({"seed", "20240101", "root seed for every random stream"});
  specific.push_back({"threads", "1", "worker threads (results do not depend on it)"});
  specific.push_back({"out", "qarspec_out", "output directory"});
  return specific;
}

std::vector<OptionSpec> weight_options(const std::string& structure) {
  return {
      {"gamma_max", "3", "upper end of the Gamma grid"},
      {"gamma_points", "30", "Gamma grid points per dimension"},
      {"kappa", "2", "lag decay exponent (>= 2)"},
      {"max_lag", "4", "history truncation c"},
      {"structure", structure, "Gamma structure: tied or per-block"},
      {"phi", "arctan", "bounded map: arctan or tanh"},
      {"form", "squared", "functional aggregation: squared or literal"},
  };
}

std::vector<OptionSpec> concat(std::vector<OptionSpec> a, const std::vector<OptionSpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<Command> commands() {
  std::vector<Command> cmds;
  cmds.push_back({"factors",
                  "extract principal-component factors from a panel CSV",
                  with_common({
                      {"input", "", "panel CSV (period column + one column per series)"},
                      {"period_column", "", "name of the period column (default: first)"},
                      {"k", "auto", "number of factors, or auto"},
                      {"kmax", "8", "largest k considered when k = auto"},
                      {"penalty", "p2", "information criterion penalty: p1, p2, p3"},
                      {"gram", "auto", "eigenproblem side: auto, periods, series"},
                  }),
                  {},
                  cmd_factors});
  cmds.push_back({"fit",
                  "estimate a QAR / FA-QAR coefficient path",
                  with_common({
                      {"input", "", "series CSV (period, value...)"},
                      {"column", "", "value column (default: second column)"},
                      {"p", "1", "lag order"},
                      {"factors", "", "optional factor CSV (period, F1, ...)"},
                      {"m", "17", "number of equidistributed tau points"},
                      {"tau_lo", "0.1", "smallest tau"},
                      {"tau_hi", "0.9", "largest tau"},
                      {"taus", "", "explicit comma-separated tau grid (overrides m)"},
                      {"predict_taus", "0.05,0.25,0.75,0.95",
                       "levels for the per-period fitted quantile file (empty: none)"},
                      {"bands", "0", "bootstrap replications for percentile bands (0: none)"},
                      {"band_level", "0.9", "coverage of the percentile bands"},
                  }),
                  {},
                  cmd_fit});
  cmds.push_back({"test",
                  "bootstrap specification test of QAR (H01) and FA-QAR (H02)",
                  with_common(concat(
                      {
                          {"input", "", "series CSV (period, value...)"},
                          {"column", "", "value column (default: second column)"},
                          {"p", "1", "lag order"},
                          {"factors", "", "factor CSV (period, F1, ...)"},
                          {"panel", "", "panel CSV to extract factors from"},
                          {"k", "1", "factors to extract from the panel, or auto"},
                          {"kmax", "8", "largest k considered when k = auto"},
                          {"penalty", "p2", "information criterion penalty"},
                          {"m_list", "5,9,17", "comma-separated tau grid sizes"},
                          {"tau_lo", "0.1", "smallest tau"},
                          {"tau_hi", "0.9", "largest tau"},
                          {"boot_reps", "500", "bootstrap replications"},
                          {"alpha", "0.05", "significance level"},
                      },
                      weight_options("per-block"))),
                  {},
                  cmd_test});
  cmds.push_back({"montecarlo",
                  "size/power simulation on the two benchmark designs",
                  with_common(concat(
                      {
                          {"cases", "case1,case2", "designs to simulate"},
                          {"sizes", "100,300,500,1000", "sample sizes T"},
                          {"mc_reps", "200", "Monte Carlo replications per cell"},
                          {"boot_reps", "99", "bootstrap replications per test"},
                          {"alpha", "0.05", "nominal level"},
                          {"full_scale", "false", "1000 x 300 replications (slow)"},
                          {"h02", "false", "also test the factor-augmented null"},
                          {"m", "17", "tau grid size"},
                          {"k", "1", "factors extracted from the simulated panel"},
                          {"rho1", "0.5", "autoregressive slope"},
                          {"beta1", "0.8", "factor slope in case 2"},
                          {"panel_n", "0", "panel cross-section (0: N = T)"},
                          {"burn_in", "200", "discarded initial periods"},
                      },
                      weight_options("tied"))),
                  {"full_scale", "h02"},
                  cmd_montecarlo});
  cmds.push_back({"smooth",
                  "fit a skewed t distribution to per-period quantiles",
                  with_common({
                      {"input", "", "CSV: period, then columns named by probability (q0.05...)"},
                      {"period_column", "", "name of the period column (default: first)"},
                      {"grid", "0", "density points per period (0: no density file)"},
                      {"grid_lo", "", "fixed lower end of the density grid"},
                      {"grid_hi", "", "fixed upper end of the density grid"},
                  }),
                  {},
                  cmd_smooth});
  cmds.push_back({"simulate",
                  "write a synthetic series, panel and true factors",
                  with_common({
                      {"case", "case2", "case1 or case2"},
                      {"T", "200", "sample size"},
                      {"panel_n", "0", "panel cross-section (0: N = T)"},
                      {"rho1", "0.5", "autoregressive slope"},
                      {"beta1", "0.8", "factor slope in case 2"},
                      {"burn_in", "200", "discarded initial periods"},
                      {"idiosyncratic_sd", "1", "panel noise standard deviation"},
                  }),
                  {},
                  cmd_simulate});
  return cmds;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Specification tests for quantile autoregressions with latent factors", "qarspec"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  std::vector<Command> cmds = commands();
  std::map<std::string, std::map<std::string, std::string>> given;
  std::map<std::string, std::string> config_path;
  std::vector<CLI::App*> subs;
  for (auto& cmd : cmds) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.description);
    subs.push_back(sub);
    auto& store = given[cmd.name];
    sub->add_option("--config", config_path[cmd.name], "flat key = value config file");
    for (const auto& opt : cmd.options) {
      const bool is_flag =
          std::find(cmd.flags.begin(), cmd.flags.end(), opt.key) != cmd.flags.end();
      const std::string name = "--" + dashed(opt.key);
      const std::string help = opt.help + " [" + opt.default_value + "]";
      if (is_flag) {
        sub->add_flag_callback(name, [&store, key = opt.key] { store[key] = "true"; }, help);
      } else {
        sub->add_option_function<std::string>(
            name, [&store, key = opt.key](const std::string& v) { store[key] = v; }, help);
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help("", CLI::AppFormatMode::All);
      return kSuccess;
    }
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  for (std::size_t i = 0; i < cmds.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    const Command& cmd = cmds[i];
    try {
      std::map<std::string, std::string> values;
      for (const auto& opt : cmd.options) values[opt.key] = opt.default_value;
      if (!config_path[cmd.name].empty()) {
        for (const auto& [key, value] : read_config_file(config_path[cmd.name])) {
          if (key == "command") {
            if (value != cmd.name) {
              throw ParameterError("config was written by '" + value + "', not '" + cmd.name + "'");
            }
            continue;
          }
          if (values.count(key) == 0) {
            throw ParameterError("unknown config key '" + key + "' for " + cmd.name);
          }
          values[key] = value;
        }
      }
      for (const auto& [key, value] : given[cmd.name]) values[key] = value;
      Context ctx{RunConfig(values), cmd.name, out, err};
      cmd.run(ctx);
      return kSuccess;
    } catch (const ParameterError& e) {
      err << "error: " << e.what() << '\n';
      return kUsageError;
    } catch (const LoadError& e) {
      err << "error: " << e.what() << '\n';
      return kUsageError;
    } catch (const NumericError& e) {
      err << "numeric failure: " << e.what() << '\n';
      return kNumericError;
    } catch (const std::filesystem::filesystem_error& e) {
      err << "error: " << e.what() << '\n';
      return kUsageError;
    } catch (const std::exception& e) {
      err << "internal error: " << e.what() << '\n';
      return kInternalError;
    }
  }
  return kUsageError;
}

}  // namespace qarspec::cli
