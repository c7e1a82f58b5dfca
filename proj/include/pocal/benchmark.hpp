#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pocal/selection.hpp"

namespace pocal {

// Closed-form synthetic study on [0,1]^4 with a 10-dimensional calibration
// vector; theta_7, theta_8, theta_9 do not enter the model.
double true_process(const Eigen::VectorXd& x);
double computer_model(const Eigen::VectorXd& x, const Eigen::VectorXd& theta);

// Engineering design values (0,0,1,-0.5,0,0,0,0,0,7) and the search box
// [-1,1]^9 x [5,9].
Eigen::VectorXd benchmark_theta0();
Eigen::VectorXd benchmark_theta_lower();
Eigen::VectorXd benchmark_theta_upper();

// Squared-L2 discrepancy between the true process and the computer model at
// theta, by low-discrepancy quadrature over [0,1]^4. Deterministic given the
// seed; requires at least 2^14 nodes.
double integrated_error(const Eigen::VectorXd& theta, int nodes = 1 << 14,
                        std::uint64_t seed = 97531);

struct OptimalTheta {
  Eigen::VectorXd theta;      // 10-vector; undefined coordinates are NaN
  std::vector<bool> defined;  // false for coordinates absent from the model
  double ie = 0.0;
  std::vector<std::string> warnings;
};

// L2-optimal calibration vector: minimizes integrated_error over the 7
// coordinates present in the model by BFGS from theta0 plus 5 random
// multistarts; theta_7..theta_9 are masked undefined. Multistart minima
// disagreeing by more than 1e-3 in IE produce a non-convexity warning.
OptimalTheta optimal_theta_oracle(int nodes = 1 << 14,
                                  std::uint64_t seed = 97531);

struct BenchmarkConfig {
  int n = 50;
  double noise_sd = 0.1;
  int replicates = 100;
  Eigen::VectorXd theta0 = benchmark_theta0();
  std::uint64_t seed = 1;
  int ie_nodes = 1 << 14;
  int design_runs = 80;     // computer-experiment design size
  int surrogate_mc = 4096;  // quadrature nodes for the projected kernel
  int threads = 0;          // 0 = hardware concurrency
  std::string surrogate = "parametric";   // or "gp"
  std::vector<double> lambda_grid;        // empty = fixed study grid

  void validate() const;
};

// The shared lambda axis of the study: {0} followed by 10^(-3 + k/15) for
// k = 0..60 (so 0.1 is on the grid exactly).
std::vector<double> study_lambda_grid();

struct ReplicateRecord {
  bool ok = false;
  std::string error;
  Eigen::VectorXd theta_ols, theta_pk, theta_po;
  double ie_ols = 0, ie_pk = 0, ie_po = 0;
  double lambda_selected = 0;
  std::vector<bool> adjusted;     // at the selected lambda
  Eigen::MatrixXd delta_curve;    // grid x m, |theta_hat - theta0|
  double loss_at_lambda0 = 0, loss_at_selected = 0, loss_at_theta0 = 0;
  double kkt_at_selected = 0;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  Eigen::VectorXd theta_star;  // oracle; NaN on undefined coordinates
  double ie_theta0 = 0, ie_theta_star = 0;
  std::vector<ReplicateRecord> replicates;  // one per attempted replicate
  int failed_replicates = 0;

  // Aggregates over successful replicates.
  double mean_ie_ols = 0, mean_ie_pk = 0, mean_ie_po = 0;
  Eigen::VectorXd mean_re_ols, mean_re_pk, mean_re_po;  // NaN when undefined
  Eigen::VectorXd selection_frequency;  // fraction adjusted at selected lambda
  std::vector<double> lambda_grid;
  Eigen::MatrixXd mean_delta_curve;  // grid x m
  Eigen::VectorXd theta_lower, theta_upper;  // search/design box, for the record
};

// Runs the full replicated study: per replicate draw the physical data, build
// a space-filling computer design, fit the surrogate, estimate (phi, eta2),
// build the projected kernel, and compute OLS / PK / BIC-selected PO.
// Replicates run on independent seed streams; failures are recorded and
// excluded, and more than 5% failures raises study_error.
BenchmarkReport run_study(const BenchmarkConfig& config);

// Emits report.txt, estimates.csv, and delta_curve.csv into directory.
void write_report(const BenchmarkReport& report, const std::string& directory);

}  // namespace pocal
