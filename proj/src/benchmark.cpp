#include "pocal/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "pocal/fsio.hpp"
#include "pocal/qmc.hpp"

namespace pocal {

namespace {

constexpr int kThetaDim = 10;
// Coordinates of theta that actually enter the model (0-based).
constexpr int kActive[] = {0, 1, 2, 3, 4, 5, 9};
constexpr int kActiveCount = 7;

void check_unit_point(const Eigen::VectorXd& x) {
  if (x.size() != 4)
    throw std::invalid_argument("benchmark model: x must have 4 coordinates");
  for (int k = 0; k < 4; ++k)
    if (!(x[k] >= -1e-12) || !(x[k] <= 1.0 + 1e-12))
      throw std::invalid_argument("benchmark model: x outside [0,1]^4");
}

// (x1/2) * (sqrt(1 + c/x1^2) - 1) rationalized to c / (2(sqrt(x1^2+c) + x1)),
// which is finite and continuous down to x1 = 0.
double radical_excess_half(double x1, double c) {
  const double denom = std::sqrt(x1 * x1 + c) + x1;
  return denom > 0 ? c / (2.0 * denom) : 0.0;
}

double shape_c(const Eigen::VectorXd& x) { return (x[1] + x[2] * x[2]) * x[3]; }

// Model value split as base(x) + sum_i theta_i * psi_i(x) over the active
// coordinates; used by the model itself, the oracle, and integrated_error.
double model_base(const Eigen::VectorXd& x) {
  const double c = shape_c(x);
  return 0.5 * std::sqrt(x[0] * x[0] + c) + x[0] * std::exp(std::sin(x[2]));
}

void model_psi(const Eigen::VectorXd& x, double* psi) {
  const double c = shape_c(x);
  const double es = std::exp(std::sin(x[2]));
  psi[0] = 0.5 * std::sin(x[0]) * std::sqrt(x[0] * x[0] + c);  // theta_1
  psi[1] = x[1] * x[1] * es;                                   // theta_2
  psi[2] = 3.0 * x[3] * es;                                    // theta_3
  psi[3] = x[0];                                               // theta_4
  psi[4] = x[1] * x[1];                                        // theta_5
  psi[5] = x[2] * x[2];                                        // theta_6
  psi[6] = 1.0;                                                // theta_10
}

}  // namespace

double true_process(const Eigen::VectorXd& x) {
  check_unit_point(x);
  const double c = shape_c(x);
  return radical_excess_half(x[0], c) +
         (x[0] + 3.0 * x[3]) * std::exp(1.0 + std::sin(x[2]));
}

double computer_model(const Eigen::VectorXd& x, const Eigen::VectorXd& theta) {
  check_unit_point(x);
  if (theta.size() != kThetaDim)
    throw std::invalid_argument("benchmark model: theta must have 10 coordinates");
  double psi[kActiveCount];
  model_psi(x, psi);
  double v = model_base(x);
  for (int a = 0; a < kActiveCount; ++a) v += theta[kActive[a]] * psi[a];
  return v;
}

Eigen::VectorXd benchmark_theta0() {
  Eigen::VectorXd t = Eigen::VectorXd::Zero(kThetaDim);
  t[2] = 1.0;
  t[3] = -0.5;
  t[9] = 7.0;
  return t;
}

Eigen::VectorXd benchmark_theta_lower() {
  Eigen::VectorXd t = Eigen::VectorXd::Constant(kThetaDim, -1.0);
  t[9] = 5.0;
  return t;
}

Eigen::VectorXd benchmark_theta_upper() {
  Eigen::VectorXd t = Eigen::VectorXd::Constant(kThetaDim, 1.0);
  t[9] = 9.0;
  return t;
}

double integrated_error(const Eigen::VectorXd& theta, int nodes,
                        std::uint64_t seed) {
  if (theta.size() != kThetaDim)
    throw std::invalid_argument("integrated_error: theta must have 10 coordinates");
  if (nodes < (1 << 14))
    throw std::invalid_argument("integrated_error: need at least 2^14 nodes");
  const Eigen::MatrixXd pts = halton_shifted(nodes, 4, seed);
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const Eigen::VectorXd x = pts.row(i).transpose();
    const double diff = true_process(x) - computer_model(x, theta);
    acc += diff * diff;
  }
  return acc / nodes;
}

namespace {

// Quadrature reduction of IE over the active coordinates t:
// IE(t) = q0 - 2 q.t + t'Qt.
struct IeQuadratic {
  Eigen::MatrixXd q_mat;
  Eigen::VectorXd q_vec;
  double q0 = 0.0;

  double value(const Eigen::VectorXd& t) const {
    return q0 - 2.0 * q_vec.dot(t) + t.dot(q_mat * t);
  }
  Eigen::VectorXd grad(const Eigen::VectorXd& t) const {
    return 2.0 * (q_mat * t - q_vec);
  }
};

IeQuadratic reduce_ie(int nodes, std::uint64_t seed) {
  const Eigen::MatrixXd pts = halton_shifted(nodes, 4, seed);
  IeQuadratic q;
  q.q_mat = Eigen::MatrixXd::Zero(kActiveCount, kActiveCount);
  q.q_vec = Eigen::VectorXd::Zero(kActiveCount);
  double psi[kActiveCount];
  for (int i = 0; i < nodes; ++i) {
    const Eigen::VectorXd x = pts.row(i).transpose();
    model_psi(x, psi);
    const double resid = true_process(x) - model_base(x);
    const Eigen::Map<const Eigen::VectorXd> p(psi, kActiveCount);
    q.q_mat.noalias() += p * p.transpose();
    q.q_vec.noalias() += resid * p;
    q.q0 += resid * resid;
  }
  q.q_mat /= nodes;
  q.q_vec /= nodes;
  q.q0 /= nodes;
  return q;
}

Eigen::VectorXd bfgs_minimize(const IeQuadratic& f, Eigen::VectorXd t) {
  const int dim = static_cast<int>(t.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd g = f.grad(t);
  double fv = f.value(t);
  for (int it = 0; it < 200; ++it) {
    if (g.cwiseAbs().maxCoeff() < 1e-12 * (1.0 + std::abs(fv))) break;
    Eigen::VectorXd p = -h * g;
    if (p.dot(g) >= 0) p = -g;
    double step = 1.0;
    double fnew = fv;
    Eigen::VectorXd tnew = t;
    const double slope = g.dot(p);
    for (int ls = 0; ls < 60; ++ls) {
      tnew = t + step * p;
      fnew = f.value(tnew);
      if (fnew <= fv + 1e-4 * step * slope) break;
      step *= 0.5;
    }
    const Eigen::VectorXd gnew = f.grad(tnew);
    const Eigen::VectorXd s = tnew - t;
    const Eigen::VectorXd y = gnew - g;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      const Eigen::MatrixXd left =
          Eigen::MatrixXd::Identity(dim, dim) - (s * y.transpose()) / sy;
      h = left * h * left.transpose() + (s * s.transpose()) / sy;
    }
    t = tnew;
    g = gnew;
    fv = fnew;
  }
  return t;
}

}  // namespace

OptimalTheta optimal_theta_oracle(int nodes, std::uint64_t seed) {
  const IeQuadratic f = reduce_ie(nodes, seed);
  const Eigen::VectorXd theta0 = benchmark_theta0();
  const Eigen::VectorXd lo = benchmark_theta_lower();
  const Eigen::VectorXd hi = benchmark_theta_upper();

  std::vector<Eigen::VectorXd> starts;
  Eigen::VectorXd t0(kActiveCount);
  for (int a = 0; a < kActiveCount; ++a) t0[a] = theta0[kActive[a]];
  starts.push_back(t0);
  std::mt19937_64 rng(mix_seed(seed, 0xB1F6));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int s = 0; s < 5; ++s) {
    Eigen::VectorXd t(kActiveCount);
    for (int a = 0; a < kActiveCount; ++a) {
      const int i = kActive[a];
      t[a] = lo[i] + (hi[i] - lo[i]) * unif(rng);
    }
    starts.push_back(t);
  }

  std::vector<Eigen::VectorXd> minima;
  std::vector<double> values;
  for (const auto& s : starts) {
    const Eigen::VectorXd t = bfgs_minimize(f, s);
    minima.push_back(t);
    values.push_back(f.value(t));
  }
  const int best =
      static_cast<int>(std::min_element(values.begin(), values.end()) -
                       values.begin());

  OptimalTheta out;
  out.theta = Eigen::VectorXd::Constant(kThetaDim,
                                        std::numeric_limits<double>::quiet_NaN());
  out.defined.assign(kThetaDim, false);
  for (int a = 0; a < kActiveCount; ++a) {
    out.theta[kActive[a]] = minima[best][a];
    out.defined[kActive[a]] = true;
  }
  out.ie = std::max(0.0, values[best]);

  const double spread =
      *std::max_element(values.begin(), values.end()) - values[best];
  if (spread > 1e-3) {
    std::ostringstream msg;
    msg << "optimal_theta_oracle: multistart minima disagree (possible "
           "non-convexity); IE values:";
    msg << std::setprecision(6);
    for (double v : values) msg << " " << v;
    out.warnings.push_back(msg.str());
  }
  return out;
}

void BenchmarkConfig::validate() const {
  if (n < 10) throw std::invalid_argument("BenchmarkConfig: need n >= 10");
  if (!(noise_sd > 0))
    throw std::invalid_argument("BenchmarkConfig: noise_sd must be positive");
  if (replicates < 1)
    throw std::invalid_argument("BenchmarkConfig: need replicates >= 1");
  if (theta0.size() != kThetaDim)
    throw std::invalid_argument("BenchmarkConfig: theta0 must have 10 coordinates");
  const Eigen::VectorXd lo = benchmark_theta_lower();
  const Eigen::VectorXd hi = benchmark_theta_upper();
  for (int i = 0; i < kThetaDim; ++i)
    if (theta0[i] < lo[i] || theta0[i] > hi[i])
      throw std::invalid_argument("BenchmarkConfig: theta0 outside the search box");
  if (ie_nodes < (1 << 14))
    throw std::invalid_argument("BenchmarkConfig: need ie_nodes >= 2^14");
  if (design_runs < 20)
    throw std::invalid_argument("BenchmarkConfig: need design_runs >= 20");
  if (surrogate_mc < kThetaDim)
    throw std::invalid_argument("BenchmarkConfig: surrogate_mc too small");
  if (surrogate != "parametric" && surrogate != "gp")
    throw std::invalid_argument(
        "BenchmarkConfig: surrogate must be 'parametric' or 'gp'");
  for (double l : lambda_grid)
    if (!(l >= 0) || !std::isfinite(l))
      throw std::invalid_argument("BenchmarkConfig: lambda grid entries must be >= 0");
}

std::vector<double> study_lambda_grid() {
  std::vector<double> grid{0.0};
  for (int k = 0; k <= 60; ++k)
    grid.push_back(std::pow(10.0, -3.0 + k / 15.0));
  return grid;
}

namespace {

Eigen::MatrixXd maximin_lhs(int n, int dim, std::mt19937_64& rng,
                            int candidates = 16) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd best;
  double best_dist = -1.0;
  std::vector<int> perm(n);
  for (int c = 0; c < candidates; ++c) {
    Eigen::MatrixXd pts(n, dim);
    for (int k = 0; k < dim; ++k) {
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (int i = 0; i < n; ++i) pts(i, k) = (perm[i] + unif(rng)) / n;
    }
    double mind = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n && mind > 0; ++i)
      for (int j = i + 1; j < n; ++j)
        mind = std::min(mind, (pts.row(i) - pts.row(j)).squaredNorm());
    if (mind > best_dist) {
      best_dist = mind;
      best = pts;
    }
  }
  return best;
}

struct StudyContext {
  const BenchmarkConfig* config;
  Eigen::VectorXd lo, hi;
  std::vector<double> grid;
};

ReplicateRecord run_replicate(const StudyContext& ctx, int r) {
  const BenchmarkConfig& cfg = *ctx.config;
  ReplicateRecord rec;
  try {
    const DomainBounds unit = DomainBounds::unit(4);
    std::mt19937_64 data_rng(mix_seed(cfg.seed, 0x1000 + r));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Eigen::MatrixXd x(cfg.n, 4);
    for (int i = 0; i < cfg.n; ++i)
      for (int k = 0; k < 4; ++k) x(i, k) = unif(data_rng);
    Eigen::MatrixXd y(cfg.n, 1);
    for (int i = 0; i < cfg.n; ++i)
      y(i, 0) = true_process(x.row(i).transpose()) + cfg.noise_sd * gauss(data_rng);

    std::mt19937_64 design_rng(mix_seed(cfg.seed, 0x2000 + r));
    const Eigen::MatrixXd lhs = maximin_lhs(cfg.design_runs, 4 + kThetaDim, design_rng);
    const Eigen::MatrixXd design_x = lhs.leftCols(4);
    Eigen::MatrixXd design_theta = lhs.rightCols(kThetaDim);
    for (int i = 0; i < kThetaDim; ++i)
      design_theta.col(i) =
          (ctx.lo[i] + (ctx.hi[i] - ctx.lo[i]) * design_theta.col(i).array()).matrix();
    Eigen::MatrixXd ys(cfg.design_runs, 1);
    for (int i = 0; i < cfg.design_runs; ++i)
      ys(i, 0) = computer_model(design_x.row(i).transpose(),
                                design_theta.row(i).transpose());

    ComputerDataset cdata{design_x, design_theta, ys, unit, ctx.lo, ctx.hi};
    LinearSurrogate surrogate =
        cfg.surrogate == "gp"
            ? fit_gp(cdata, estimate_gp_hyperparams(cdata))
            : fit_parametric(cdata);

    PhysicalDataset pdata{x, y, unit, std::nullopt};
    const HyperEstimate hyper = estimate_hyperparams(pdata);
    KernelConfig kc;
    kc.phi = hyper.phi;
    kc.eta2 = hyper.eta2;
    kc.mc_samples = cfg.surrogate_mc;
    kc.seed = mix_seed(cfg.seed, 0x3000 + r);
    // Low-degree parametric gradients span only a few functions of x, so the
    // projection is built from an independent subset of components.
    SpanProjection proj =
        project_kernel_span(surrogate.gradient(), kThetaDim, x, unit, kc);

    CalibrationProblem problem(pdata, {surrogate}, {std::move(proj.kernel)},
                               cfg.theta0, ctx.lo, ctx.hi);
    const CalibrationResult ols = solve_ols(problem);
    const CalibrationResult pkres = solve_pk(problem);
    const CalibrationProblem penalized = problem.with_penalty_weights(
        compute_adaptive_weights(problem), "adaptive");
    const LambdaPath path = compute_path(penalized, ctx.grid);
    const PathPoint& sel = path.selected();

    rec.theta_ols = ols.theta_hat;
    rec.theta_pk = pkres.theta_hat;
    rec.theta_po = sel.theta_hat;
    rec.ie_ols = integrated_error(ols.theta_hat, cfg.ie_nodes);
    rec.ie_pk = integrated_error(pkres.theta_hat, cfg.ie_nodes);
    rec.ie_po = integrated_error(sel.theta_hat, cfg.ie_nodes);
    rec.lambda_selected = sel.lambda;
    rec.adjusted = sel.adjusted;
    rec.delta_curve.resize(static_cast<int>(path.entries.size()), kThetaDim);
    for (int k = 0; k < static_cast<int>(path.entries.size()); ++k)
      rec.delta_curve.row(k) = path.entries[k].delta.transpose();
    rec.loss_at_lambda0 = path.entries.front().empirical_loss;
    rec.loss_at_selected = sel.empirical_loss;
    rec.loss_at_theta0 = empirical_model_loss(penalized, cfg.theta0);
    rec.kkt_at_selected = kkt_violation(penalized, sel.lambda, sel.theta_hat);
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

}  // namespace

BenchmarkReport run_study(const BenchmarkConfig& config) {
  config.validate();
  StudyContext ctx;
  ctx.config = &config;
  ctx.lo = benchmark_theta_lower();
  ctx.hi = benchmark_theta_upper();
  ctx.grid = config.lambda_grid.empty() ? study_lambda_grid() : config.lambda_grid;
  // Normalize exactly as compute_path will, so the report's lambda axis lines
  // up with every replicate's path entries.
  std::sort(ctx.grid.begin(), ctx.grid.end());
  ctx.grid.erase(std::unique(ctx.grid.begin(), ctx.grid.end()), ctx.grid.end());
  if (ctx.grid.empty() || ctx.grid.front() != 0.0)
    ctx.grid.insert(ctx.grid.begin(), 0.0);

  BenchmarkReport report;
  report.config = config;
  report.theta_lower = ctx.lo;
  report.theta_upper = ctx.hi;
  report.lambda_grid = ctx.grid;

  const OptimalTheta star = optimal_theta_oracle(config.ie_nodes);
  report.theta_star = star.theta;
  report.ie_theta_star = star.ie;
  report.ie_theta0 = integrated_error(config.theta0, config.ie_nodes);

  report.replicates.resize(config.replicates);
  const unsigned hw = std::thread::hardware_concurrency();
  int threads = config.threads > 0 ? config.threads
                                   : static_cast<int>(hw > 0 ? hw : 4);
  threads = std::min(threads, config.replicates);
  std::atomic<int> next(0);
  auto worker = [&]() {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= config.replicates) return;
      report.replicates[r] = run_replicate(ctx, r);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<const ReplicateRecord*> ok;
  std::vector<std::string> failures;
  for (const auto& rec : report.replicates) {
    if (rec.ok)
      ok.push_back(&rec);
    else
      failures.push_back(rec.error);
  }
  report.failed_replicates = static_cast<int>(failures.size());
  if (report.failed_replicates > 0.05 * config.replicates) {
    std::ostringstream msg;
    msg << "run_study: " << report.failed_replicates << " of "
        << config.replicates << " replicates failed;";
    for (size_t i = 0; i < failures.size() && i < 3; ++i)
      msg << " [" << failures[i] << "]";
    throw study_error(msg.str());
  }
  if (ok.empty()) throw study_error("run_study: no successful replicates");

  const double cnt = static_cast<double>(ok.size());
  report.mean_ie_ols = report.mean_ie_pk = report.mean_ie_po = 0.0;
  report.selection_frequency = Eigen::VectorXd::Zero(kThetaDim);
  report.mean_delta_curve = Eigen::MatrixXd::Zero(
      static_cast<int>(report.lambda_grid.size()), kThetaDim);
  for (const auto* rec : ok) {
    report.mean_ie_ols += rec->ie_ols / cnt;
    report.mean_ie_pk += rec->ie_pk / cnt;
    report.mean_ie_po += rec->ie_po / cnt;
    for (int i = 0; i < kThetaDim; ++i)
      if (rec->adjusted[i]) report.selection_frequency[i] += 1.0 / cnt;
    report.mean_delta_curve += rec->delta_curve / cnt;
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  report.mean_re_ols = Eigen::VectorXd::Constant(kThetaDim, nan);
  report.mean_re_pk = Eigen::VectorXd::Constant(kThetaDim, nan);
  report.mean_re_po = Eigen::VectorXd::Constant(kThetaDim, nan);
  for (int i = 0; i < kThetaDim; ++i) {
    if (!star.defined[i] || std::abs(star.theta[i]) < 1e-6) continue;
    double ro = 0, rp = 0, rq = 0;
    for (const auto* rec : ok) {
      ro += std::abs(rec->theta_ols[i] - star.theta[i]) / std::abs(star.theta[i]);
      rp += std::abs(rec->theta_pk[i] - star.theta[i]) / std::abs(star.theta[i]);
      rq += std::abs(rec->theta_po[i] - star.theta[i]) / std::abs(star.theta[i]);
    }
    report.mean_re_ols[i] = ro / cnt;
    report.mean_re_pk[i] = rp / cnt;
    report.mean_re_po[i] = rq / cnt;
  }
  return report;
}

namespace {

std::string csv_num(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

void write_report(const BenchmarkReport& report, const std::string& directory) {
  std::ostringstream txt;
  txt << std::setprecision(6);
  txt << "Synthetic calibration study\n";
  txt << "===========================\n\n";
  txt << "Configuration\n";
  txt << "  physical sample size n : " << report.config.n << "\n";
  txt << "  noise sd               : " << report.config.noise_sd << "\n";
  txt << "  replicates             : " << report.config.replicates << "\n";
  txt << "  failed replicates      : " << report.failed_replicates << "\n";
  txt << "  surrogate              : " << report.config.surrogate << "\n";
  txt << "  computer design runs   : " << report.config.design_runs << "\n";
  txt << "  quadrature nodes (IE)  : " << report.config.ie_nodes << "\n";
  txt << "  master seed            : " << report.config.seed << "\n";
  txt << "  theta box              : [";
  for (int i = 0; i < report.theta_lower.size(); ++i)
    txt << (i ? ", " : "") << report.theta_lower[i];
  txt << "] .. [";
  for (int i = 0; i < report.theta_upper.size(); ++i)
    txt << (i ? ", " : "") << report.theta_upper[i];
  txt << "]\n\n";

  txt << "Integrated error (mean over successful replicates)\n";
  txt << "  theta0        : " << report.ie_theta0 << "\n";
  txt << "  OLS           : " << report.mean_ie_ols << "\n";
  txt << "  PK            : " << report.mean_ie_pk << "\n";
  txt << "  PO (BIC)      : " << report.mean_ie_po << "\n";
  txt << "  theta* oracle : " << report.ie_theta_star << "\n\n";

  txt << "L2-optimal theta* (NaN = coordinate absent from the model)\n  [";
  for (int i = 0; i < report.theta_star.size(); ++i)
    txt << (i ? ", " : "") << report.theta_star[i];
  txt << "]\n\n";

  txt << "Mean relative error |theta_hat_i - theta*_i| / |theta*_i|\n";
  txt << "  coord        OLS         PK         PO\n";
  for (int i = 0; i < report.theta_star.size(); ++i) {
    if (std::isnan(report.mean_re_po[i])) continue;
    txt << "  theta_" << std::left << std::setw(6) << (i + 1) << std::right
        << std::setw(9) << report.mean_re_ols[i] << "  " << std::setw(9)
        << report.mean_re_pk[i] << "  " << std::setw(9) << report.mean_re_po[i]
        << "\n";
  }
  txt << "\nSelection frequency at the BIC-selected lambda\n";
  for (int i = 0; i < report.selection_frequency.size(); ++i)
    txt << "  theta_" << (i + 1) << " : " << report.selection_frequency[i]
        << "\n";
  txt << "\nLambda grid: " << report.lambda_grid.size()
      << " points (see delta_curve.csv for the mean |theta_hat - theta0| "
         "curves)\n";
  write_text_atomic(directory + "/report.txt", txt.str());

  std::ostringstream est;
  est << "replicate,estimator,lambda,ie";
  for (int i = 0; i < kThetaDim; ++i) est << ",theta_" << (i + 1);
  est << "\n";
  for (size_t r = 0; r < report.replicates.size(); ++r) {
    const ReplicateRecord& rec = report.replicates[r];
    if (!rec.ok) continue;
    const struct {
      const char* name;
      const Eigen::VectorXd* theta;
      double ie;
      double lambda;
    } rows[] = {
        {"ols", &rec.theta_ols, rec.ie_ols, 0.0},
        {"pk", &rec.theta_pk, rec.ie_pk, 0.0},
        {"po", &rec.theta_po, rec.ie_po, rec.lambda_selected},
    };
    for (const auto& row : rows) {
      est << (r + 1) << "," << row.name << "," << csv_num(row.lambda) << ","
          << csv_num(row.ie);
      for (int i = 0; i < kThetaDim; ++i) est << "," << csv_num((*row.theta)[i]);
      est << "\n";
    }
  }
  write_text_atomic(directory + "/estimates.csv", est.str());

  std::ostringstream curve;
  curve << "lambda";
  for (int i = 0; i < kThetaDim; ++i) curve << ",mean_delta_theta_" << (i + 1);
  curve << "\n";
  for (size_t k = 0; k < report.lambda_grid.size(); ++k) {
    curve << csv_num(report.lambda_grid[k]);
    for (int i = 0; i < kThetaDim; ++i)
      curve << "," << csv_num(report.mean_delta_curve(static_cast<int>(k), i));
    curve << "\n";
  }
  write_text_atomic(directory + "/delta_curve.csv", curve.str());
}

}  // namespace pocal
