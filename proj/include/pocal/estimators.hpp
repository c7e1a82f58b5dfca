#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pocal/errors.hpp"
#include "pocal/kernels.hpp"
#include "pocal/surrogate.hpp"

namespace pocal {

// Field observations of the physical system at design points x.
struct PhysicalDataset {
  Eigen::MatrixXd x;  // n x d
  Eigen::MatrixXd y;  // n x q (q = 1 for a single output)
  DomainBounds bounds;
  std::optional<double> noise_variance_hint;

  int n() const { return static_cast<int>(x.rows()); }
  int d() const { return static_cast<int>(x.cols()); }
  int q() const { return static_cast<int>(y.cols()); }
  void validate() const;
};

struct CalibrationResult {
  Eigen::VectorXd theta_hat;
  double empirical_loss = 0.0;       // weighted generalized-least-squares loss
  std::vector<int> support;          // indices with |theta_hat - theta0| > 1e-8 * range
  std::string estimator_kind;        // "OLS" | "PK" | "PO(lambda=...)"
  int solver_iterations = 0;
  bool converged = true;
  bool at_bounds = false;            // true if any coordinate was clipped to the box
  std::vector<std::string> warnings;
};

// Immutable bundle of everything a calibration solve needs: data, per-output
// surrogates and projected kernels, the engineering design values theta0, a
// box for theta, penalty weights, and output weights. The reduction of the
// weighted GLS loss to a quadratic in u = theta - theta0 is precomputed once
// so solves along a lambda path reuse the same factorizations.
class CalibrationProblem {
 public:
  CalibrationProblem(PhysicalDataset physical,
                     std::vector<LinearSurrogate> surrogates,
                     std::vector<ProjectedKernelMatrix> kernels,
                     Eigen::VectorXd theta0, Eigen::VectorXd theta_lower,
                     Eigen::VectorXd theta_upper,
                     Eigen::VectorXd output_weights = Eigen::VectorXd(),
                     Eigen::VectorXd penalty_weights = Eigen::VectorXd());

  // Single-output convenience.
  CalibrationProblem(PhysicalDataset physical, LinearSurrogate surrogate,
                     ProjectedKernelMatrix kernel, Eigen::VectorXd theta0,
                     Eigen::VectorXd theta_lower, Eigen::VectorXd theta_upper);

  int n() const { return physical_.n(); }
  int d() const { return physical_.d(); }
  int m() const { return static_cast<int>(theta0_.size()); }
  int q() const { return physical_.q(); }

  const PhysicalDataset& physical() const { return physical_; }
  const LinearSurrogate& surrogate(int j = 0) const { return surrogates_.at(j); }
  const ProjectedKernelMatrix& pk(int j = 0) const { return kernels_.at(j); }
  const Eigen::VectorXd& theta0() const { return theta0_; }
  const Eigen::VectorXd& theta_lower() const { return theta_lower_; }
  const Eigen::VectorXd& theta_upper() const { return theta_upper_; }
  const Eigen::VectorXd& theta_range() const { return range_; }
  const Eigen::VectorXd& output_weights() const { return output_weights_; }

  // Penalty weights (entries in (0, +inf]; +inf pins the coordinate to
  // theta0). Empty until set at construction or via with_penalty_weights.
  bool has_penalty_weights() const { return penalty_weights_.size() > 0; }
  const Eigen::VectorXd& penalty_weights() const { return penalty_weights_; }
  const std::string& weights_source() const { return weights_source_; }
  CalibrationProblem with_penalty_weights(const Eigen::VectorXd& w,
                                          std::string source = "user") const;

  // Reduced quadratic of the GLS loss: loss(theta0 + u) = c - 2 b.u + u'Au.
  const Eigen::MatrixXd& quad_matrix() const { return a_; }
  const Eigen::VectorXd& quad_linear() const { return b_; }
  double quad_constant() const { return c_; }
  // Same reduction with the identity in place of the projected kernel.
  const Eigen::MatrixXd& ols_matrix() const { return a_ols_; }
  const Eigen::VectorXd& ols_linear() const { return b_ols_; }
  double ols_constant() const { return c_ols_; }

  double gls_loss(const Eigen::VectorXd& u) const;
  double ols_loss(const Eigen::VectorXd& u) const;

 private:
  void reduce();

  PhysicalDataset physical_;
  std::vector<LinearSurrogate> surrogates_;
  std::vector<ProjectedKernelMatrix> kernels_;
  Eigen::VectorXd theta0_, theta_lower_, theta_upper_, range_;
  Eigen::VectorXd output_weights_;
  Eigen::VectorXd penalty_weights_;
  std::string weights_source_ = "none";
  std::vector<Eigen::VectorXd> f_vals_;   // per output: f_hat at physical x
  std::vector<Eigen::MatrixXd> g_mats_;   // per output: rows g_hat(x_i)'
  std::vector<Eigen::VectorXd> r0_;       // per output: y - f - G theta0
  Eigen::MatrixXd a_, a_ols_;
  Eigen::VectorXd b_, b_ols_;
  double c_ = 0.0, c_ols_ = 0.0;

  friend double empirical_model_loss(const CalibrationProblem&,
                                     const Eigen::VectorXd&);
};

// Ordinary least squares: minimizes the unweighted residual sum of squares.
// Rank deficiency falls back to the pseudo-inverse with a warning naming the
// non-identifiable directions; the result is clipped to the theta box.
CalibrationResult solve_ols(const CalibrationProblem& problem);

// Projected-kernel calibration: closed-form GLS solution under the projected
// kernel plus nugget, clipped to the theta box.
CalibrationResult solve_pk(const CalibrationProblem& problem);

// Reciprocal-distance weights from the unpenalized minimizer (solve_pk):
// w_i = 1 / |theta_pk_i - theta0_i|, +inf when the distance is below
// 1e-8 * range_i.
Eigen::VectorXd compute_adaptive_weights(const CalibrationProblem& problem);

// Penalized orthogonal calibration at a fixed lambda: GLS loss plus
// lambda * sum_i w_i |theta_i - theta0_i|, solved by cyclic coordinate
// descent with exact soft-threshold updates. Coordinates with w_i = +inf stay
// at theta0 bitwise. Throws convergence_error with a duality-gap report if
// 1e5 sweeps do not reach max coordinate change < 1e-10 * range. If
// objective_trace is given, the objective after each sweep is appended.
CalibrationResult solve_po(const CalibrationProblem& problem, double lambda,
                           const Eigen::VectorXd* warm_start = nullptr,
                           std::vector<double>* objective_trace = nullptr);

// Weighted empirical model loss at theta, evaluated directly from the
// per-output residuals and projected kernels (not the cached reduction).
double empirical_model_loss(const CalibrationProblem& problem,
                            const Eigen::VectorXd& theta);

// Maximum KKT violation of theta_hat for the PO objective at lambda;
// box-active coordinates are checked against the one-sided condition.
double kkt_violation(const CalibrationProblem& problem, double lambda,
                     const Eigen::VectorXd& theta_hat);

// Kernel scale and nugget by zero-mean GP marginal likelihood on one output
// column of the physical observations.
HyperEstimate estimate_hyperparams(const PhysicalDataset& physical,
                                   int output_index = 0);

}  // namespace pocal
