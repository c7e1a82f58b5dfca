#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pocal/selection.hpp"

namespace pocal {

// Strictly parsed numeric CSV: mandatory header, '.' decimal separator, no
// blank or non-numeric cells. Errors carry 1-based line numbers and column
// names.
struct CsvTable {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
};

CsvTable read_csv(const std::string& path);

// Serializes with enough digits that reading back reproduces every double
// bitwise.
void write_csv(const std::string& path, const CsvTable& table);

struct RunConfig {
  std::string physical_csv;
  std::string computer_csv;
  Eigen::VectorXd theta0;
  Eigen::VectorXd theta_lower, theta_upper;
  Eigen::VectorXd x_lower, x_upper;     // optional; inferred from data extent
  Eigen::VectorXd output_weights;       // optional explicit vector
  double output_weight_decay = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> lambda_grid;      // empty = default data-driven grid
  double phi_override = std::numeric_limits<double>::quiet_NaN();
  double eta2_override = std::numeric_limits<double>::quiet_NaN();
  std::string surrogate = "ls";         // "ls" | "gp"
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int mc_samples = 4096;
  int threads = 0;                      // 0 = hardware concurrency
  int sobol_samples = 4096;
  double sobol_floor = 0.01;

  void validate() const;
};

// UTF-8 key=value file; '#' starts a comment; vectors are comma-separated.
RunConfig parse_config(const std::string& path);

// w_j = exp(-a (q - j)^2) for j = 1..q.
Eigen::VectorXd output_weight_formula(int q, double a);

// Reads and validates both CSVs: physical columns x_1..x_d, y_1..y_q and
// computer columns x_1..x_d, theta_1..theta_m, y_1..y_q, with d, m, q
// inferred from the headers.
std::pair<PhysicalDataset, ComputerDataset> ingest(const RunConfig& config);

// Piecewise-linear interpolation at target abscissae; raw_x must be strictly
// increasing and targets must lie within [raw_x front, raw_x back].
Eigen::VectorXd interpolate_linear(const Eigen::VectorXd& raw_x,
                                   const Eigen::VectorXd& raw_y,
                                   const Eigen::VectorXd& targets);

// Column-wise version: one column of raw_y per force level.
Eigen::MatrixXd interpolate_observations(const Eigen::VectorXd& raw_x,
                                         const Eigen::MatrixXd& raw_y,
                                         const Eigen::VectorXd& targets);

struct RunSummary {
  Eigen::VectorXd theta_hat;
  double lambda_selected = 0.0;
  double bic_selected = 0.0;
  double loss_at_theta0 = 0.0;
  double loss_at_theta_hat = 0.0;
  std::vector<int> support;
  Eigen::VectorXd output_weights;
  LambdaPath path;
  VariableClassification classification;  // populated unless path_only
  Eigen::VectorXd sobol_total;            // populated unless path_only
  std::vector<std::string> warnings;
};

// Full multi-output workflow: per-output surrogates and projected kernels,
// weighted loss, adaptive weights, lambda path with BIC selection, Sobol
// screening and classification; writes result.json, path.csv, and
// classification.csv into config.out_dir (path.csv and result.json only when
// path_only). Module errors propagate with a [stage] prefix, preserving the
// validation/numerical category.
RunSummary run_calibration(const RunConfig& config, bool path_only = false);

}  // namespace pocal
