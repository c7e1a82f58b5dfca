// Command-line front end: calibrate | path | benchmark | sobol.
#include <exception>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pocal/benchmark.hpp"
#include "pocal/fsio.hpp"
#include "pocal/pipeline.hpp"
#include "pocal/qmc.hpp"

namespace {

std::string fmt_vec(const Eigen::VectorXd& v) {
  std::ostringstream s;
  s << std::setprecision(6) << "(";
  for (int i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
  s << ")";
  return s.str();
}

std::vector<double> parse_grid_flag(const std::string& text) {
  if (text.empty() || text == "default") return {};
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      size_t used = 0;
      const double v = std::stod(cell, &used);
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
        ++used;
      if (used != cell.size()) throw std::invalid_argument(cell);
      grid.push_back(v);
    } catch (const std::exception&) {
      throw pocal::config_error("--lambda-grid: bad number '" + cell + "'");
    }
  }
  return grid;
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string surrogate;
  std::string lambda_grid;
  long long seed = -1;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("-c,--config", flags->config_path, "run configuration file")
      ->required();
  cmd->add_option("-o,--out", flags->out_dir, "output directory override");
  cmd->add_option("--surrogate", flags->surrogate, "surrogate family: ls or gp");
  cmd->add_option("--lambda-grid", flags->lambda_grid,
                  "comma-separated lambda grid, or 'default'");
  cmd->add_option("--seed", flags->seed, "seed override");
  cmd->add_option("--threads", flags->threads, "worker thread count override");
}

pocal::RunConfig load_config(const CommonFlags& flags) {
  pocal::RunConfig cfg = pocal::parse_config(flags.config_path);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (!flags.surrogate.empty()) cfg.surrogate = flags.surrogate;
  if (!flags.lambda_grid.empty()) cfg.lambda_grid = parse_grid_flag(flags.lambda_grid);
  if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.threads >= 0) cfg.threads = flags.threads;
  cfg.validate();
  return cfg;
}

void run_calibrate_cmd(const CommonFlags& flags, bool path_only) {
  const pocal::RunConfig cfg = load_config(flags);
  const pocal::RunSummary summary = pocal::run_calibration(cfg, path_only);
  std::cout << "theta_hat       " << fmt_vec(summary.theta_hat) << "\n"
            << "lambda_selected " << std::setprecision(6) << summary.lambda_selected
            << "\n"
            << "bic_selected    " << summary.bic_selected << "\n"
            << "adjusted        {";
  for (size_t k = 0; k < summary.support.size(); ++k)
    std::cout << (k ? ", " : "") << "theta_" << (summary.support[k] + 1);
  std::cout << "}\n"
            << "loss(theta0)    " << summary.loss_at_theta0 << "\n"
            << "loss(theta_hat) " << summary.loss_at_theta_hat << "\n";
  if (!path_only) {
    std::cout << "classification  ";
    for (size_t i = 0; i < summary.classification.labels.size(); ++i)
      std::cout << (i ? ", " : "") << "theta_" << (i + 1) << "="
                << pocal::to_string(summary.classification.labels[i]);
    std::cout << "\n";
  }
  for (const std::string& w : summary.warnings)
    std::cout << "warning: " << w << "\n";
  std::cout << "wrote " << cfg.out_dir << "/result.json, " << cfg.out_dir
            << "/path.csv";
  if (!path_only) std::cout << ", " << cfg.out_dir << "/classification.csv";
  std::cout << "\n";
}

void run_sobol_cmd(const CommonFlags& flags, int samples) {
  pocal::RunConfig cfg = load_config(flags);
  if (samples > 0) cfg.sobol_samples = samples;
  auto [pdata, cdata] = pocal::ingest(cfg);
  const int d = pdata.d(), q = pdata.q();
  const int m = static_cast<int>(cfg.theta0.size());

  Eigen::VectorXd weights;
  if (cfg.output_weights.size() > 0) {
    if (cfg.output_weights.size() != q)
      throw pocal::config_error("sobol: output_weights length must equal q");
    weights = cfg.output_weights;
  } else if (!std::isnan(cfg.output_weight_decay)) {
    weights = pocal::output_weight_formula(q, cfg.output_weight_decay);
  } else {
    weights = Eigen::VectorXd::Ones(q);
  }

  std::vector<pocal::LinearSurrogate> surrogates;
  surrogates.reserve(q);
  for (int j = 0; j < q; ++j) {
    if (cfg.surrogate == "gp")
      surrogates.push_back(
          pocal::fit_gp(cdata, pocal::estimate_gp_hyperparams(cdata, j), j));
    else
      surrogates.push_back(d == 1 ? pocal::fit_slope(cdata, j)
                                  : pocal::fit_parametric(cdata, 2, 1, j));
  }

  pocal::DomainBounds joint;
  joint.lower.resize(d + m);
  joint.upper.resize(d + m);
  joint.lower.head(d) = pdata.bounds.lower;
  joint.upper.head(d) = pdata.bounds.upper;
  joint.lower.tail(m) = cfg.theta_lower;
  joint.upper.tail(m) = cfg.theta_upper;
  pocal::ModelFn fn = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& theta) {
    double v = 0;
    for (int j = 0; j < q; ++j) v += weights[j] * surrogates[j].evaluate(x, theta);
    return v;
  };
  pocal::SobolDiagnostics diag;
  const Eigen::VectorXd total = pocal::sobol_total_indices(
      fn, d, m, joint, cfg.sobol_samples, pocal::mix_seed(cfg.seed, 0x50B), &diag);

  std::ostringstream csv;
  csv << "variable,total_index,standard_error\n" << std::setprecision(17);
  for (int i = 0; i < m; ++i)
    csv << "theta_" << (i + 1) << "," << total[i] << ","
        << diag.standard_error[i] << "\n";
  pocal::write_text_atomic(cfg.out_dir + "/sobol.csv", csv.str());

  std::cout << std::setprecision(6);
  for (int i = 0; i < m; ++i)
    std::cout << "theta_" << (i + 1) << "  total=" << total[i]
              << "  se=" << diag.standard_error[i] << "\n";
  std::cout << "output variance " << diag.output_variance << "\n"
            << "wrote " << cfg.out_dir << "/sobol.csv\n";
}

void run_benchmark_cmd(const pocal::BenchmarkConfig& cfg, const std::string& out) {
  const pocal::BenchmarkReport report = pocal::run_study(cfg);
  pocal::write_report(report, out);
  std::cout << std::setprecision(6) << "replicates      " << cfg.replicates
            << " (" << report.failed_replicates << " failed)\n"
            << "IE(theta0)      " << report.ie_theta0 << "\n";
  if (report.theta_star.allFinite())
    std::cout << "IE(theta*)      " << report.ie_theta_star << "\n";
  std::cout << "mean IE, OLS    " << report.mean_ie_ols << "\n"
            << "mean IE, PK     " << report.mean_ie_pk << "\n"
            << "mean IE, PO     " << report.mean_ie_po << "\n"
            << "selection freq  " << fmt_vec(report.selection_frequency) << "\n"
            << "wrote " << out << "/report.txt, " << out << "/estimates.csv, "
            << out << "/delta_curve.csv\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projected-kernel calibration with sparse parameter adjustment"};
  app.require_subcommand(1);

  CommonFlags cal_flags, path_flags, sobol_flags;
  int sobol_samples = 0;

  CLI::App* calibrate = app.add_subcommand(
      "calibrate", "full run: lambda path, BIC selection, Sobol classification");
  add_common(calibrate, &cal_flags);

  CLI::App* path_cmd =
      app.add_subcommand("path", "lambda path and BIC selection only");
  add_common(path_cmd, &path_flags);

  CLI::App* sobol_cmd = app.add_subcommand(
      "sobol", "total-effect Sobol indices of the fitted surrogates");
  add_common(sobol_cmd, &sobol_flags);
  sobol_cmd->add_option("--samples", sobol_samples, "Monte Carlo sample count");

  pocal::BenchmarkConfig bench;
  std::string bench_out = "bench_out";
  long long bench_seed = 1;
  CLI::App* bench_cmd = app.add_subcommand(
      "benchmark", "synthetic replication study of OLS / PK / PO estimators");
  bench_cmd->add_option("-o,--out", bench_out, "output directory");
  bench_cmd->add_option("--replicates", bench.replicates, "number of replicates");
  bench_cmd->add_option("--n", bench.n, "physical observations per replicate");
  bench_cmd->add_option("--noise-sd", bench.noise_sd, "observation noise sd");
  bench_cmd->add_option("--seed", bench_seed, "master seed");
  bench_cmd->add_option("--threads", bench.threads, "worker threads (0 = auto)");
  bench_cmd->add_option("--ie-nodes", bench.ie_nodes,
                        "quasi Monte Carlo nodes for integrated error");
  bench_cmd->add_option("--design-runs", bench.design_runs,
                        "computer-experiment design size");
  bench_cmd->add_option("--mc-samples", bench.surrogate_mc,
                        "quadrature nodes for the projected kernel");
  bench_cmd->add_option("--surrogate", bench.surrogate,
                        "surrogate family: parametric or gp");
  std::string bench_grid;
  bench_cmd->add_option("--lambda-grid", bench_grid,
                        "comma-separated lambda grid, or 'default'");

  try {
    app.parse(argc, argv);
    if (calibrate->parsed()) run_calibrate_cmd(cal_flags, false);
    if (path_cmd->parsed()) run_calibrate_cmd(path_flags, true);
    if (sobol_cmd->parsed()) run_sobol_cmd(sobol_flags, sobol_samples);
    if (bench_cmd->parsed()) {
      if (bench_seed < 0) throw pocal::config_error("--seed must be nonnegative");
      bench.seed = static_cast<std::uint64_t>(bench_seed);
      bench.lambda_grid = parse_grid_flag(bench_grid);
      run_benchmark_cmd(bench, bench_out);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
