#include "pocal/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace pocal {

std::string to_string(VariableLabel label) {
  switch (label) {
    case VariableLabel::insensitive: return "insensitive";
    case VariableLabel::sensitive_insensible: return "sensitive-insensible";
    case VariableLabel::sensible: return "sensible";
  }
  return "unknown";
}

double bic_score(double empirical_loss, int n, int support_size) {
  if (n < 1) throw std::invalid_argument("bic_score: need n >= 1");
  if (!(empirical_loss > 0))
    throw std::invalid_argument("bic_score: loss must be positive");
  return std::log(empirical_loss / n) + support_size * std::log(double(n)) / n;
}

double lambda_max(const CalibrationProblem& problem) {
  if (!problem.has_penalty_weights())
    throw std::invalid_argument("lambda_max: penalty weights are not set");
  const Eigen::VectorXd& b = problem.quad_linear();
  const Eigen::VectorXd& w = problem.penalty_weights();
  double lmax = 0.0;
  for (int i = 0; i < problem.m(); ++i) {
    if (std::isinf(w[i])) continue;
    if (!(w[i] > 0))
      throw std::invalid_argument(
          "lambda_max: zero-weight coordinate is never pinned by any lambda");
    lmax = std::max(lmax, 2.0 * std::abs(b[i]) / w[i]);
  }
  return lmax;
}

std::vector<double> default_lambda_grid(const CalibrationProblem& problem) {
  std::vector<double> grid{0.0};
  const double lmax = lambda_max(problem);
  if (!(lmax > 0)) return grid;
  const double lmin = lmax * 1e-4;
  const int points = 60;
  for (int k = 0; k < points; ++k)
    grid.push_back(lmin * std::pow(lmax / lmin,
                                   static_cast<double>(k) / (points - 1)));
  return grid;
}

LambdaPath compute_path(const CalibrationProblem& problem,
                        std::vector<double> grid) {
  if (grid.empty()) grid = default_lambda_grid(problem);
  for (double l : grid)
    if (!(l >= 0) || !std::isfinite(l))
      throw std::invalid_argument("compute_path: lambda grid entries must be finite and >= 0");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() != 0.0) grid.insert(grid.begin(), 0.0);

  LambdaPath path;
  path.entries.reserve(grid.size());
  const int n = problem.n();
  // Losses below the evaluation noise floor of the quadratic reduction are
  // numerically zero; letting log(loss) near -inf into the argmin would make
  // float dust decide the selection.
  const double loss_floor = 1e-10 * std::max(problem.quad_constant(), 0.0);
  const Eigen::VectorXd* warm = nullptr;
  Eigen::VectorXd prev;
  for (double lambda : grid) {
    const CalibrationResult res = solve_po(problem, lambda, warm);
    PathPoint pt;
    pt.lambda = lambda;
    pt.theta_hat = res.theta_hat;
    pt.support_size = static_cast<int>(res.support.size());
    pt.empirical_loss = res.empirical_loss;
    pt.delta = (res.theta_hat - problem.theta0()).cwiseAbs();
    pt.adjusted.assign(problem.m(), false);
    for (int i : res.support) pt.adjusted[i] = true;
    if (res.empirical_loss > loss_floor) {
      pt.bic = bic_score(res.empirical_loss, n, pt.support_size);
      pt.bic_valid = true;
    } else {
      pt.bic = -std::numeric_limits<double>::infinity();
      pt.bic_valid = false;
      std::ostringstream msg;
      msg << "compute_path: empirical loss is numerically zero at lambda = "
          << lambda << "; BIC undefined, entry excluded from selection";
      path.warnings.push_back(msg.str());
    }
    prev = res.theta_hat;
    warm = &prev;
    path.entries.push_back(std::move(pt));
  }

  int best = -1;
  for (int k = 0; k < static_cast<int>(path.entries.size()); ++k) {
    if (!path.entries[k].bic_valid) continue;
    if (best < 0 || path.entries[k].bic <= path.entries[best].bic) best = k;
  }
  if (best < 0)
    throw degenerate_model_error(
        "compute_path: every grid entry has zero empirical loss; BIC selection "
        "is undefined");
  path.selected_index = best;
  return path;
}

Eigen::VectorXd sobol_total_indices(const ModelFn& model, int d, int m,
                                    const DomainBounds& joint_bounds,
                                    int samples, std::uint64_t seed,
                                    SobolDiagnostics* diag) {
  joint_bounds.validate();
  if (d < 0 || m < 1)
    throw std::invalid_argument("sobol_total_indices: need d >= 0 and m >= 1");
  if (joint_bounds.dim() != d + m)
    throw std::invalid_argument(
        "sobol_total_indices: joint bounds must have dimension d + m");
  if (samples < 1024)
    throw std::invalid_argument("sobol_total_indices: need at least 1024 samples");
  if (!model) throw std::invalid_argument("sobol_total_indices: empty model");

  const int dim = d + m;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd a(samples, dim), b(samples, dim);
  for (int i = 0; i < samples; ++i)
    for (int k = 0; k < dim; ++k) {
      a(i, k) = joint_bounds.lower[k] +
                (joint_bounds.upper[k] - joint_bounds.lower[k]) * unif(rng);
      b(i, k) = joint_bounds.lower[k] +
                (joint_bounds.upper[k] - joint_bounds.lower[k]) * unif(rng);
    }

  auto eval_row = [&](const Eigen::MatrixXd& mat, int i) {
    const Eigen::VectorXd row = mat.row(i).transpose();
    const double v = model(row.head(d), row.tail(m));
    if (!std::isfinite(v))
      throw degenerate_model_error(
          "sobol_total_indices: model returned a non-finite value");
    return v;
  };

  Eigen::VectorXd fa(samples), fb(samples);
  for (int i = 0; i < samples; ++i) {
    fa[i] = eval_row(a, i);
    fb[i] = eval_row(b, i);
  }
  Eigen::VectorXd all(2 * samples);
  all << fa, fb;
  const double mean = all.mean();
  const double var = (all.array() - mean).square().sum() / (all.size() - 1);
  if (!(var > 0))
    throw degenerate_model_error(
        "sobol_total_indices: model output variance is zero over the sample");

  Eigen::VectorXd total(m), se(m), clipped(m);
  Eigen::MatrixXd ab = a;
  for (int t = 0; t < m; ++t) {
    ab.col(d + t) = b.col(d + t);
    double acc = 0, acc2 = 0;
    for (int i = 0; i < samples; ++i) {
      const double s = 0.5 * (fa[i] - eval_row(ab, i)) * (fa[i] - eval_row(ab, i));
      acc += s;
      acc2 += s * s;
    }
    const double num = acc / samples;
    const double num_var =
        std::max(0.0, acc2 / samples - num * num) / std::max(1, samples - 1);
    const double raw = num / var;
    clipped[t] = raw < 0 ? -raw : 0.0;
    total[t] = std::max(0.0, raw);
    se[t] = std::sqrt(num_var) / var;
    ab.col(d + t) = a.col(d + t);
  }
  if (diag) {
    diag->standard_error = se;
    diag->clipped_magnitude = clipped;
    diag->output_variance = var;
  }
  return total;
}

Eigen::VectorXd sobol_total_indices(const LinearSurrogate& surrogate,
                                    const DomainBounds& joint_bounds,
                                    int samples, std::uint64_t seed,
                                    SobolDiagnostics* diag) {
  return sobol_total_indices(
      [&surrogate](const Eigen::VectorXd& x, const Eigen::VectorXd& theta) {
        return surrogate.evaluate(x, theta);
      },
      surrogate.input_dim(), surrogate.theta_dim(), joint_bounds, samples, seed,
      diag);
}

VariableClassification classify_variables(const LambdaPath& path,
                                          const Eigen::VectorXd& sobol,
                                          double sobol_floor) {
  if (path.entries.empty())
    throw std::invalid_argument("classify_variables: empty path");
  const PathPoint& sel = path.selected();
  const int m = static_cast<int>(sel.theta_hat.size());
  if (sobol.size() != m)
    throw std::invalid_argument("classify_variables: sobol vector length mismatch");
  if (!(sobol_floor >= 0))
    throw std::invalid_argument("classify_variables: floor must be >= 0");

  if (static_cast<int>(sel.adjusted.size()) != m)
    throw std::invalid_argument("classify_variables: path entry lacks adjusted flags");

  VariableClassification cls;
  cls.sobol_total = sobol;
  cls.labels.resize(m);
  cls.adjusted_at_selected_lambda.resize(m);
  for (int i = 0; i < m; ++i) {
    cls.adjusted_at_selected_lambda[i] = sel.adjusted[i];
    if (sobol[i] < sobol_floor)
      cls.labels[i] = VariableLabel::insensitive;
    else if (cls.adjusted_at_selected_lambda[i])
      cls.labels[i] = VariableLabel::sensible;
    else
      cls.labels[i] = VariableLabel::sensitive_insensible;
  }
  return cls;
}

}  // namespace pocal
