#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pocal/estimators.hpp"

namespace pocal {

struct PathPoint {
  double lambda = 0.0;
  Eigen::VectorXd theta_hat;
  int support_size = 0;
  double empirical_loss = 0.0;
  double bic = 0.0;
  bool bic_valid = true;  // false when empirical_loss == 0 makes BIC undefined
  Eigen::VectorXd delta;  // |theta_hat - theta0| per coordinate
  std::vector<bool> adjusted;  // delta above the support threshold
};

struct LambdaPath {
  std::vector<PathPoint> entries;  // ordered by increasing lambda, first is 0
  int selected_index = 0;
  std::vector<std::string> warnings;

  const PathPoint& selected() const { return entries.at(selected_index); }
};

enum class VariableLabel { insensitive, sensitive_insensible, sensible };
std::string to_string(VariableLabel label);

struct VariableClassification {
  std::vector<VariableLabel> labels;
  Eigen::VectorXd sobol_total;
  std::vector<bool> adjusted_at_selected_lambda;
};

// BIC-type criterion: log(loss / n) + support_size * log(n) / n.
double bic_score(double empirical_loss, int n, int support_size);

// Smallest lambda pinning every free coordinate (KKT threshold at u = 0),
// i.e. max_i 2|b_i| / w_i over finite-weight coordinates.
double lambda_max(const CalibrationProblem& problem);

// {0} followed by 60 log-spaced points in [lambda_max * 1e-4, lambda_max].
// Collapses to {0} when no finite-weight coordinate gives a positive
// threshold.
std::vector<double> default_lambda_grid(const CalibrationProblem& problem);

// Solves PO along the grid (sorted ascending, deduplicated, 0 prepended if
// absent) with warm starts, computes BIC per entry, and selects the
// BIC-minimizing entry (ties resolved toward larger lambda). Entries whose
// empirical loss is numerically zero (below 1e-10 of the loss at theta0, the
// noise floor of the quadratic reduction) are flagged invalid and excluded
// from selection with a warning. An empty grid means the default grid.
LambdaPath compute_path(const CalibrationProblem& problem,
                        std::vector<double> grid = {});

using ModelFn =
    std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& theta)>;

struct SobolDiagnostics {
  Eigen::VectorXd standard_error;    // of each total index estimate
  Eigen::VectorXd clipped_magnitude; // |negative raw estimate| clipped to 0
  double output_variance = 0.0;
};

// Total-effect Sobol indices of theta_1..theta_m for model(x, theta) with
// (x, theta) uniform over joint_bounds (dimension d + m, x first). Jansen's
// pick-and-freeze estimator on two independent uniform sample sets.
Eigen::VectorXd sobol_total_indices(const ModelFn& model, int d, int m,
                                    const DomainBounds& joint_bounds,
                                    int samples, std::uint64_t seed,
                                    SobolDiagnostics* diag = nullptr);
Eigen::VectorXd sobol_total_indices(const LinearSurrogate& surrogate,
                                    const DomainBounds& joint_bounds,
                                    int samples, std::uint64_t seed,
                                    SobolDiagnostics* diag = nullptr);

// Label each variable: total index below sobol_floor -> insensitive;
// otherwise sensible when adjusted at the selected lambda, else
// sensitive-insensible.
VariableClassification classify_variables(const LambdaPath& path,
                                          const Eigen::VectorXd& sobol,
                                          double sobol_floor = 0.01);

}  // namespace pocal
