#include "pocal/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pocal/fsio.hpp"
#include "pocal/qmc.hpp"

namespace pocal {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

bool parse_double_strict(const std::string& raw, double* out) {
  const std::string s = trim(raw);
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, *out);
  return res.ec == std::errc() && res.ptr == end && std::isfinite(*out);
}

std::vector<std::string> file_lines(const std::string& path) {
  std::string text = read_text_file(path);
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB &&
      static_cast<unsigned char>(text[2]) == 0xBF)
    text.erase(0, 3);
  std::vector<std::string> lines = split(text, '\n');
  for (auto& line : lines)
    if (!line.empty() && line.back() == '\r') line.pop_back();
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::string csv_num(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::vector<std::string> lines;
  try {
    lines = file_lines(path);
  } catch (const std::runtime_error& e) {
    throw schema_error(std::string("read_csv: ") + e.what());
  }
  if (lines.empty())
    throw schema_error("read_csv: " + path + ": empty file (header row is mandatory)");

  CsvTable table;
  for (const std::string& raw : split(lines[0], ',')) {
    const std::string name = trim(raw);
    if (name.empty())
      throw schema_error("read_csv: " + path + ": line 1: empty column name");
    if (std::find(table.columns.begin(), table.columns.end(), name) !=
        table.columns.end())
      throw schema_error("read_csv: " + path + ": line 1: duplicate column '" +
                         name + "'");
    table.columns.push_back(name);
  }
  const int cols = static_cast<int>(table.columns.size());
  const int rows = static_cast<int>(lines.size()) - 1;
  if (rows < 1)
    throw schema_error("read_csv: " + path + ": no data rows");

  table.values.resize(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const int line_no = r + 2;
    const std::vector<std::string> cells = split(lines[r + 1], ',');
    if (static_cast<int>(cells.size()) != cols) {
      std::ostringstream msg;
      msg << "read_csv: " << path << ": line " << line_no << ": expected "
          << cols << " cells, got " << cells.size();
      throw schema_error(msg.str());
    }
    for (int c = 0; c < cols; ++c) {
      if (trim(cells[c]).empty()) {
        std::ostringstream msg;
        msg << "read_csv: " << path << ": line " << line_no << ", column "
            << table.columns[c] << ": empty cell";
        throw schema_error(msg.str());
      }
      double v;
      if (!parse_double_strict(cells[c], &v)) {
        std::ostringstream msg;
        msg << "read_csv: " << path << ": line " << line_no << ", column "
            << table.columns[c] << ": not a finite number: '" << trim(cells[c])
            << "'";
        throw schema_error(msg.str());
      }
      table.values(r, c) = v;
    }
  }
  return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
  if (table.columns.size() != static_cast<size_t>(table.values.cols()))
    throw std::invalid_argument("write_csv: column count mismatch");
  std::ostringstream out;
  for (size_t c = 0; c < table.columns.size(); ++c)
    out << (c ? "," : "") << table.columns[c];
  out << "\n";
  for (int r = 0; r < table.values.rows(); ++r) {
    for (int c = 0; c < table.values.cols(); ++c)
      out << (c ? "," : "") << csv_num(table.values(r, c));
    out << "\n";
  }
  write_text_atomic(path, out.str());
}

Eigen::VectorXd output_weight_formula(int q, double a) {
  if (q < 1) throw std::invalid_argument("output_weight_formula: need q >= 1");
  if (!(a >= 0))
    throw std::invalid_argument("output_weight_formula: decay must be >= 0");
  Eigen::VectorXd w(q);
  for (int j = 1; j <= q; ++j) w[j - 1] = std::exp(-a * (q - j) * (q - j));
  return w;
}

namespace {

Eigen::VectorXd parse_vector_value(const std::string& key,
                                   const std::string& value) {
  const std::vector<std::string> parts = split(value, ',');
  Eigen::VectorXd v(static_cast<int>(parts.size()));
  for (size_t i = 0; i < parts.size(); ++i) {
    double x;
    if (!parse_double_strict(parts[i], &x))
      throw config_error("config key '" + key + "': bad number '" +
                         trim(parts[i]) + "'");
    v[static_cast<int>(i)] = x;
  }
  return v;
}

double parse_scalar_value(const std::string& key, const std::string& value) {
  double x;
  if (!parse_double_strict(value, &x))
    throw config_error("config key '" + key + "': bad number '" + trim(value) + "'");
  return x;
}

long long parse_int_value(const std::string& key, const std::string& value) {
  const std::string s = trim(value);
  long long x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw config_error("config key '" + key + "': bad integer '" + s + "'");
  return x;
}

}  // namespace

RunConfig parse_config(const std::string& path) {
  std::vector<std::string> lines;
  try {
    lines = file_lines(path);
  } catch (const std::runtime_error& e) {
    throw config_error(std::string("parse_config: ") + e.what());
  }

  std::map<std::string, std::string> kv;
  for (size_t i = 0; i < lines.size(); ++i) {
    std::string line = lines[i];
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << "parse_config: line " << (i + 1) << ": expected key=value, got '"
          << line << "'";
      throw config_error(msg.str());
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      std::ostringstream msg;
      msg << "parse_config: line " << (i + 1) << ": empty key";
      throw config_error(msg.str());
    }
    if (kv.count(key)) throw config_error("parse_config: duplicate key '" + key + "'");
    kv[key] = value;
  }

  RunConfig cfg;
  for (const auto& [key, value] : kv) {
    if (key == "physical_csv") cfg.physical_csv = value;
    else if (key == "computer_csv") cfg.computer_csv = value;
    else if (key == "theta0") cfg.theta0 = parse_vector_value(key, value);
    else if (key == "theta_lower") cfg.theta_lower = parse_vector_value(key, value);
    else if (key == "theta_upper") cfg.theta_upper = parse_vector_value(key, value);
    else if (key == "x_lower") cfg.x_lower = parse_vector_value(key, value);
    else if (key == "x_upper") cfg.x_upper = parse_vector_value(key, value);
    else if (key == "output_weights") cfg.output_weights = parse_vector_value(key, value);
    else if (key == "output_weight_decay")
      cfg.output_weight_decay = parse_scalar_value(key, value);
    else if (key == "lambda_grid") {
      if (trim(value) != "default") {
        const Eigen::VectorXd g = parse_vector_value(key, value);
        cfg.lambda_grid.assign(g.data(), g.data() + g.size());
      }
    } else if (key == "phi") cfg.phi_override = parse_scalar_value(key, value);
    else if (key == "eta2") cfg.eta2_override = parse_scalar_value(key, value);
    else if (key == "surrogate") cfg.surrogate = trim(value);
    else if (key == "seed") {
      const long long s = parse_int_value(key, value);
      if (s < 0) throw config_error("config key 'seed': must be nonnegative");
      cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "mc_samples")
      cfg.mc_samples = static_cast<int>(parse_int_value(key, value));
    else if (key == "threads")
      cfg.threads = static_cast<int>(parse_int_value(key, value));
    else if (key == "sobol_samples")
      cfg.sobol_samples = static_cast<int>(parse_int_value(key, value));
    else if (key == "sobol_floor")
      cfg.sobol_floor = parse_scalar_value(key, value);
    else
      throw config_error("parse_config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  if (physical_csv.empty()) throw config_error("config: physical_csv is required");
  if (computer_csv.empty()) throw config_error("config: computer_csv is required");
  const int m = static_cast<int>(theta0.size());
  if (m < 1) throw config_error("config: theta0 is required");
  if (theta_lower.size() != m || theta_upper.size() != m)
    throw config_error("config: theta_lower/theta_upper must match theta0 in length");
  for (int i = 0; i < m; ++i) {
    if (!(theta_lower[i] < theta_upper[i]))
      throw config_error("config: theta bounds must satisfy lower < upper");
    if (theta0[i] < theta_lower[i] || theta0[i] > theta_upper[i])
      throw config_error("config: theta0 outside the theta bounds");
  }
  if ((x_lower.size() == 0) != (x_upper.size() == 0))
    throw config_error("config: provide both x_lower and x_upper or neither");
  if (x_lower.size() != x_upper.size())
    throw config_error("config: x_lower/x_upper length mismatch");
  for (int i = 0; i < x_lower.size(); ++i)
    if (!(x_lower[i] < x_upper[i]))
      throw config_error("config: x bounds must satisfy lower < upper");
  if (output_weights.size() > 0 && std::isfinite(output_weight_decay))
    throw config_error(
        "config: give output_weights or output_weight_decay, not both");
  for (int i = 0; i < output_weights.size(); ++i)
    if (!(output_weights[i] > 0))
      throw config_error("config: output weights must be positive");
  if (!std::isnan(output_weight_decay) && !(output_weight_decay >= 0))
    throw config_error("config: output_weight_decay must be >= 0");
  for (double l : lambda_grid)
    if (!(l >= 0) || !std::isfinite(l))
      throw config_error("config: lambda grid entries must be finite and >= 0");
  if (!std::isnan(phi_override) && !(phi_override > 0))
    throw config_error("config: phi must be positive");
  if (!std::isnan(eta2_override) && !(eta2_override >= 0))
    throw config_error("config: eta2 must be >= 0");
  if (surrogate != "ls" && surrogate != "gp")
    throw config_error("config: surrogate must be 'ls' or 'gp'");
  if (mc_samples < 1) throw config_error("config: mc_samples must be >= 1");
  if (threads < 0) throw config_error("config: threads must be >= 0");
  if (sobol_samples < 1024) throw config_error("config: sobol_samples must be >= 1024");
  if (!(sobol_floor >= 0)) throw config_error("config: sobol_floor must be >= 0");
}

namespace {

struct HeaderSplit {
  int d = 0, m = 0, q = 0;
};

// Expects columns x_1..x_d [theta_1..theta_m] y_1..y_q in that order.
HeaderSplit split_header(const std::vector<std::string>& cols,
                         bool expect_theta, const std::string& label) {
  HeaderSplit h;
  size_t pos = 0;
  auto take_block = [&](const std::string& prefix) {
    int count = 0;
    while (pos < cols.size()) {
      std::ostringstream want;
      want << prefix << "_" << (count + 1);
      if (cols[pos] != want.str()) break;
      ++pos;
      ++count;
    }
    return count;
  };
  h.d = take_block("x");
  if (h.d < 1)
    throw schema_error(label + ": header must start with x_1 (got '" +
                       (cols.empty() ? "" : cols[0]) + "')");
  if (expect_theta) {
    h.m = take_block("theta");
    if (h.m < 1)
      throw schema_error(label + ": expected theta_1 after x block, got '" +
                         (pos < cols.size() ? cols[pos] : "<end>") + "'");
  }
  h.q = take_block("y");
  if (h.q < 1)
    throw schema_error(label + ": expected y_1, got '" +
                       (pos < cols.size() ? cols[pos] : "<end>") + "'");
  if (pos != cols.size())
    throw schema_error(label + ": unexpected column '" + cols[pos] +
                       "' after the y block");
  return h;
}

void check_duplicate_rows(const Eigen::MatrixXd& values,
                          const std::string& label) {
  const int n = static_cast<int>(values.rows());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int c = 0; c < values.cols(); ++c) {
      if (values(a, c) < values(b, c)) return true;
      if (values(a, c) > values(b, c)) return false;
    }
    return a < b;
  });
  for (int k = 1; k < n; ++k) {
    const int a = order[k - 1], b = order[k];
    if ((values.row(a) - values.row(b)).cwiseAbs().maxCoeff() == 0.0) {
      std::ostringstream msg;
      msg << label << ": duplicate rows at lines " << (std::min(a, b) + 2)
          << " and " << (std::max(a, b) + 2);
      throw schema_error(msg.str());
    }
  }
}

}  // namespace

std::pair<PhysicalDataset, ComputerDataset> ingest(const RunConfig& config) {
  config.validate();
  const CsvTable phys = read_csv(config.physical_csv);
  const CsvTable comp = read_csv(config.computer_csv);
  const HeaderSplit hp = split_header(phys.columns, false, config.physical_csv);
  const HeaderSplit hc = split_header(comp.columns, true, config.computer_csv);
  if (hp.d != hc.d) {
    std::ostringstream msg;
    msg << "ingest: physical file has d=" << hp.d << " but computer file has d="
        << hc.d;
    throw schema_error(msg.str());
  }
  if (hp.q != hc.q) {
    std::ostringstream msg;
    msg << "ingest: inconsistent output count between files (physical q="
        << hp.q << ", computer q=" << hc.q << ")";
    throw schema_error(msg.str());
  }
  if (static_cast<int>(config.theta0.size()) != hc.m) {
    std::ostringstream msg;
    msg << "ingest: config theta0 has length " << config.theta0.size()
        << " but the computer file has m=" << hc.m << " theta columns";
    throw schema_error(msg.str());
  }
  if (config.x_lower.size() > 0 && config.x_lower.size() != hp.d)
    throw config_error("ingest: x bounds length does not match the x block");

  check_duplicate_rows(phys.values, config.physical_csv);
  check_duplicate_rows(comp.values, config.computer_csv);

  const int d = hp.d, m = hc.m, q = hp.q;
  DomainBounds bounds;
  if (config.x_lower.size() > 0) {
    bounds.lower = config.x_lower;
    bounds.upper = config.x_upper;
  } else {
    bounds.lower = comp.values.leftCols(d).colwise().minCoeff().transpose();
    bounds.upper = comp.values.leftCols(d).colwise().maxCoeff().transpose();
    for (int k = 0; k < d; ++k)
      if (!(bounds.lower[k] < bounds.upper[k])) {
        std::ostringstream msg;
        msg << "ingest: computer design column x_" << (k + 1)
            << " is constant; provide x_lower/x_upper explicitly";
        throw schema_error(msg.str());
      }
  }

  ComputerDataset cdata;
  cdata.x = comp.values.leftCols(d);
  cdata.theta = comp.values.middleCols(d, m);
  cdata.y = comp.values.rightCols(q);
  cdata.bounds = bounds;
  cdata.theta_lower = config.theta_lower;
  cdata.theta_upper = config.theta_upper;
  cdata.validate();
  for (int i = 0; i < cdata.x.rows(); ++i)
    for (int k = 0; k < d; ++k)
      if (cdata.x(i, k) < bounds.lower[k] - 1e-12 ||
          cdata.x(i, k) > bounds.upper[k] + 1e-12) {
        std::ostringstream msg;
        msg << "ingest: computer design row at line " << (i + 2)
            << " lies outside the given x bounds (column x_" << (k + 1) << ")";
        throw extrapolation_error(msg.str());
      }

  PhysicalDataset pdata;
  pdata.x = phys.values.leftCols(d);
  pdata.y = phys.values.rightCols(q);
  pdata.bounds = bounds;
  pdata.validate();
  return {std::move(pdata), std::move(cdata)};
}

Eigen::VectorXd interpolate_linear(const Eigen::VectorXd& raw_x,
                                   const Eigen::VectorXd& raw_y,
                                   const Eigen::VectorXd& targets) {
  if (raw_x.size() < 1 || raw_x.size() != raw_y.size())
    throw std::invalid_argument("interpolate_linear: need matching nonempty knots");
  for (int i = 1; i < raw_x.size(); ++i)
    if (!(raw_x[i] > raw_x[i - 1]))
      throw std::invalid_argument(
          "interpolate_linear: abscissae must be strictly increasing");
  Eigen::VectorXd out(targets.size());
  for (int t = 0; t < targets.size(); ++t) {
    const double x = targets[t];
    if (x < raw_x[0] || x > raw_x[raw_x.size() - 1]) {
      std::ostringstream msg;
      msg << "interpolate_linear: target " << x << " outside the data hull ["
          << raw_x[0] << ", " << raw_x[raw_x.size() - 1] << "]";
      throw extrapolation_error(msg.str());
    }
    // Binary search for the segment; exact knot hits return the raw value.
    int lo = 0, hi = static_cast<int>(raw_x.size()) - 1;
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      if (raw_x[mid] <= x) lo = mid;
      else hi = mid;
    }
    if (x == raw_x[lo]) out[t] = raw_y[lo];
    else if (x == raw_x[hi]) out[t] = raw_y[hi];
    else {
      const double w = (x - raw_x[lo]) / (raw_x[hi] - raw_x[lo]);
      out[t] = raw_y[lo] + w * (raw_y[hi] - raw_y[lo]);
    }
  }
  return out;
}

Eigen::MatrixXd interpolate_observations(const Eigen::VectorXd& raw_x,
                                         const Eigen::MatrixXd& raw_y,
                                         const Eigen::VectorXd& targets) {
  if (raw_y.rows() != raw_x.size())
    throw std::invalid_argument(
        "interpolate_observations: knot/value row mismatch");
  Eigen::MatrixXd out(targets.size(), raw_y.cols());
  for (int j = 0; j < raw_y.cols(); ++j)
    out.col(j) = interpolate_linear(raw_x, raw_y.col(j), targets);
  return out;
}

namespace {

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("[" + name + "] " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error("[" + name + "] " + e.what());
  }
}

nlohmann::ordered_json vector_json(const Eigen::VectorXd& v) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace

RunSummary run_calibration(const RunConfig& config, bool path_only) {
  config.validate();
  auto [pdata, cdata] = stage("ingest", [&] { return ingest(config); });
  const int d = pdata.d(), m = static_cast<int>(config.theta0.size()),
            q = pdata.q();

  Eigen::VectorXd weights;
  if (config.output_weights.size() > 0) {
    if (config.output_weights.size() != q)
      throw config_error("run_calibration: output_weights length must equal q");
    weights = config.output_weights;
  } else if (!std::isnan(config.output_weight_decay)) {
    weights = output_weight_formula(q, config.output_weight_decay);
  } else {
    weights = Eigen::VectorXd::Ones(q);
  }

  std::vector<LinearSurrogate> surrogates;
  std::vector<ProjectedKernelMatrix> kernels;
  std::vector<double> phis(q), eta2s(q);
  std::vector<std::string> kernel_notes;
  surrogates.reserve(q);
  for (int j = 0; j < q; ++j) {
    std::ostringstream label;
    label << "surrogate fit, output " << (j + 1);
    surrogates.push_back(stage(label.str(), [&] {
      if (config.surrogate == "gp")
        return fit_gp(cdata, estimate_gp_hyperparams(cdata, j), j);
      return d == 1 ? fit_slope(cdata, j) : fit_parametric(cdata, 2, 1, j);
    }));

    std::ostringstream hlabel;
    hlabel << "hyperparameters, output " << (j + 1);
    stage(hlabel.str(), [&] {
      if (!std::isnan(config.phi_override) && !std::isnan(config.eta2_override)) {
        phis[j] = config.phi_override;
        eta2s[j] = config.eta2_override;
        return 0;
      }
      const HyperEstimate est = estimate_hyperparams(pdata, j);
      phis[j] = std::isnan(config.phi_override) ? est.phi : config.phi_override;
      eta2s[j] =
          std::isnan(config.eta2_override) ? est.eta2 : config.eta2_override;
      return 0;
    });

    std::ostringstream klabel;
    klabel << "projected kernel, output " << (j + 1);
    kernels.push_back(stage(klabel.str(), [&] {
      KernelConfig kc;
      kc.phi = phis[j];
      kc.eta2 = eta2s[j];
      kc.mc_samples = config.mc_samples;
      kc.seed = mix_seed(config.seed, 0x4000 + j);
      SpanProjection proj =
          project_kernel_span(surrogates[j].gradient(), m, pdata.x,
                              pdata.bounds, kc,
                              config.threads > 0 ? config.threads : 1);
      if (static_cast<int>(proj.retained.size()) < m) {
        std::ostringstream note;
        note << "output " << (j + 1) << ": gradient components span only "
             << proj.retained.size() << " of " << m
             << " directions; the projection uses that subset";
        kernel_notes.push_back(note.str());
      }
      return std::move(proj.kernel);
    }));
  }

  const CalibrationProblem problem = stage("calibration problem", [&] {
    return CalibrationProblem(pdata, surrogates, std::move(kernels),
                              config.theta0, config.theta_lower,
                              config.theta_upper, weights);
  });
  const CalibrationProblem penalized = stage("adaptive weights", [&] {
    return problem.with_penalty_weights(compute_adaptive_weights(problem),
                                        "adaptive");
  });
  RunSummary summary;
  summary.path = stage("lambda path", [&] {
    return compute_path(penalized, config.lambda_grid);
  });
  const PathPoint& sel = summary.path.selected();
  summary.theta_hat = sel.theta_hat;
  summary.lambda_selected = sel.lambda;
  summary.bic_selected = sel.bic;
  summary.loss_at_theta_hat = sel.empirical_loss;
  summary.loss_at_theta0 =
      stage("loss at theta0",
            [&] { return empirical_model_loss(penalized, config.theta0); });
  summary.output_weights = weights;
  for (int i = 0; i < m; ++i)
    if (sel.adjusted[i]) summary.support.push_back(i);
  summary.warnings = kernel_notes;
  summary.warnings.insert(summary.warnings.end(), summary.path.warnings.begin(),
                          summary.path.warnings.end());

  if (!path_only) {
    summary.sobol_total = stage("sobol indices", [&] {
      DomainBounds joint;
      joint.lower.resize(d + m);
      joint.upper.resize(d + m);
      joint.lower.head(d) = pdata.bounds.lower;
      joint.upper.head(d) = pdata.bounds.upper;
      joint.lower.tail(m) = config.theta_lower;
      joint.upper.tail(m) = config.theta_upper;
      ModelFn fn = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& theta) {
        double v = 0;
        for (int j = 0; j < q; ++j)
          v += weights[j] * surrogates[j].evaluate(x, theta);
        return v;
      };
      return sobol_total_indices(fn, d, m, joint, config.sobol_samples,
                                 mix_seed(config.seed, 0x50B));
    });
    summary.classification = stage("classification", [&] {
      return classify_variables(summary.path, summary.sobol_total,
                                config.sobol_floor);
    });
  }

  stage("write outputs", [&] {
    std::ostringstream pathcsv;
    pathcsv << "lambda";
    for (int i = 0; i < m; ++i) pathcsv << ",delta_theta_" << (i + 1);
    pathcsv << ",loss,bic\n";
    for (const PathPoint& pt : summary.path.entries) {
      pathcsv << csv_num(pt.lambda);
      for (int i = 0; i < m; ++i) pathcsv << "," << csv_num(pt.delta[i]);
      pathcsv << "," << csv_num(pt.empirical_loss) << ","
              << (pt.bic_valid ? csv_num(pt.bic) : "nan") << "\n";
    }
    write_text_atomic(config.out_dir + "/path.csv", pathcsv.str());

    nlohmann::ordered_json j;
    j["theta0"] = vector_json(config.theta0);
    j["theta_hat"] = vector_json(summary.theta_hat);
    nlohmann::ordered_json support = nlohmann::ordered_json::array();
    for (int i : summary.support) support.push_back(i + 1);
    j["support"] = support;
    j["lambda_selected"] = summary.lambda_selected;
    j["bic_selected"] = summary.bic_selected;
    j["loss_at_theta0"] = summary.loss_at_theta0;
    j["loss_at_theta_hat"] = summary.loss_at_theta_hat;
    j["output_weights"] = vector_json(weights);
    j["penalty_weights_source"] = penalized.weights_source();
    nlohmann::ordered_json pinned = nlohmann::ordered_json::array();
    for (int i = 0; i < m; ++i)
      if (std::isinf(penalized.penalty_weights()[i])) pinned.push_back(i + 1);
    j["pinned"] = pinned;
    j["surrogate"] = config.surrogate;
    nlohmann::ordered_json hyper = nlohmann::ordered_json::array();
    for (int jj = 0; jj < q; ++jj)
      hyper.push_back({{"phi", phis[jj]}, {"eta2", eta2s[jj]}});
    j["kernel_hyperparameters"] = hyper;
    j["seed"] = config.seed;
    j["lambda_grid_size"] = summary.path.entries.size();
    if (!path_only) {
      nlohmann::ordered_json cls = nlohmann::ordered_json::array();
      for (int i = 0; i < m; ++i)
        cls.push_back(to_string(summary.classification.labels[i]));
      j["classification"] = cls;
    }
    j["warnings"] = summary.warnings;
    write_text_atomic(config.out_dir + "/result.json", j.dump(2) + "\n");

    if (!path_only) {
      std::ostringstream cls;
      cls << "variable,sobol_total,adjusted_at_selected_lambda,label\n";
      for (int i = 0; i < m; ++i)
        cls << "theta_" << (i + 1) << "," << csv_num(summary.sobol_total[i])
            << "," << (summary.classification.adjusted_at_selected_lambda[i] ? 1 : 0)
            << "," << to_string(summary.classification.labels[i]) << "\n";
      write_text_atomic(config.out_dir + "/classification.csv", cls.str());
    }
    return 0;
  });

  return summary;
}

}  // namespace pocal
