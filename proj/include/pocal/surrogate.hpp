#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>

#include "pocal/kernels.hpp"

namespace pocal {

// Computer-experiment data: joint design (x_i, theta_i) with simulator
// outputs, plus the boxes used for standardization.
struct ComputerDataset {
  Eigen::MatrixXd x;      // N x d
  Eigen::MatrixXd theta;  // N x m
  Eigen::MatrixXd y;      // N x q
  DomainBounds bounds;    // for x
  Eigen::VectorXd theta_lower, theta_upper;

  int n() const { return static_cast<int>(x.rows()); }
  int d() const { return static_cast<int>(x.cols()); }
  int m() const { return static_cast<int>(theta.cols()); }
  int q() const { return static_cast<int>(y.cols()); }
  void validate() const;
};

struct FitDiagnostics {
  double residual_rms = 0.0;
  double residual_max = 0.0;
  int n_train = 0;
};

// Linear-in-theta surrogate  y_hat(x, theta) = f_hat(x) + theta . g_hat(x).
class LinearSurrogate {
 public:
  LinearSurrogate() = default;
  LinearSurrogate(std::function<double(const Eigen::VectorXd&)> f_hat,
                  GradientFn g_hat, int input_dim, int theta_dim,
                  std::string kind, FitDiagnostics diagnostics);

  double f(const Eigen::VectorXd& x) const { return f_(x); }
  Eigen::VectorXd g(const Eigen::VectorXd& x) const { return g_(x); }
  double evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& theta) const;

  int input_dim() const { return d_; }
  int theta_dim() const { return m_; }
  const std::string& kind() const { return kind_; }
  const FitDiagnostics& diagnostics() const { return diag_; }
  const GradientFn& gradient() const { return g_; }

  // Three-point affinity identity on random points; throws fit_error if the
  // surrogate is not exactly affine in theta.
  void check_affinity(const DomainBounds& bounds,
                      const Eigen::VectorXd& theta_lower,
                      const Eigen::VectorXd& theta_upper,
                      std::uint64_t seed = 0) const;

 private:
  std::function<double(const Eigen::VectorXd&)> f_;
  GradientFn g_;
  int d_ = 0, m_ = 0;
  std::string kind_;
  FitDiagnostics diag_;
};

// Polynomial least-squares fit: f_hat a polynomial of total degree f_degree
// in standardized x, each g_hat component a polynomial of degree g_degree.
LinearSurrogate fit_parametric(const ComputerDataset& data, int f_degree = 2,
                               int g_degree = 1, int output_index = 0);

// Slope model through the origin (d = 1 only):
//   y_hat(x, theta) = b0 * x + sum_i b_i theta_i x.
LinearSurrogate fit_slope(const ComputerDataset& data, int output_index = 0);

struct GpHyperParams {
  double kappa2 = 1.0;        // prior variance of the mean process F
  Eigen::VectorXd kappa2_g;   // prior variances of G_1..G_m
  double tau2 = 1e-6;         // observation nugget
  double phi = 1.0;           // correlation scale of K
  Eigen::VectorXd phi_g;      // correlation scales of K_1..K_m
  void validate(int m) const;
};

// Gaussian-process conditional-mean surrogate: with
//   C = kappa2 K + sum_l (theta_l theta_l^T) o (kappa2_g[l] K_l)
// and alpha = (C + tau2 I)^{-1} y,
//   f_hat(x) = kappa2 sum_i K(x_i, x) alpha_i,
//   g_hat_l(x) = kappa2_g[l] sum_i theta_il K_l(x_i, x) alpha_i.
LinearSurrogate fit_gp(const ComputerDataset& data, const GpHyperParams& params,
                       int output_index = 0);

// Profile-ML estimate of GP hyperparameters with shared correlation scale.
GpHyperParams estimate_gp_hyperparams(const ComputerDataset& data,
                                      int output_index = 0);

struct HyperEstimate {
  double phi = 1.0;
  double eta2 = 1e-8;
  bool flat_likelihood = false;
};

// Zero-mean GP + nugget maximum likelihood on physical observations:
// returns the (phi, eta2) maximizing the profiled marginal likelihood over a
// log-spaced grid refined by golden-section search. eta2 is relative to the
// unit-diagonal kernel (the signal variance is profiled out, so the estimate
// is invariant to output scaling); floor 1e-8.
HyperEstimate estimate_hyperparams(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y,
                                   const DomainBounds& bounds);

}  // namespace pocal
