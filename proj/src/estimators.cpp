#include "pocal/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pocal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxSweeps = 100000;
constexpr double kSweepTol = 1e-10;
constexpr double kSupportTol = 1e-8;

std::string format_double(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string name_theta_components(const Eigen::VectorXd& v) {
  const double vmax = v.cwiseAbs().maxCoeff();
  std::ostringstream s;
  bool first = true;
  for (int k = 0; k < v.size(); ++k) {
    if (std::abs(v[k]) >= 0.5 * vmax && vmax > 0) {
      if (!first) s << "+";
      s << "theta" << (k + 1);
      first = false;
    }
  }
  return s.str();
}

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

void PhysicalDataset::validate() const {
  bounds.validate();
  if (x.rows() < 1) throw std::invalid_argument("PhysicalDataset: need n >= 1");
  if (x.cols() != bounds.dim())
    throw std::invalid_argument("PhysicalDataset: x/bounds dimension mismatch");
  if (y.rows() != x.rows())
    throw std::invalid_argument("PhysicalDataset: x/y row counts disagree");
  if (y.cols() < 1)
    throw std::invalid_argument("PhysicalDataset: need at least one output column");
  if (!x.allFinite() || !y.allFinite())
    throw std::invalid_argument("PhysicalDataset: non-finite entries");
  for (int i = 0; i < x.rows(); ++i)
    for (int k = 0; k < x.cols(); ++k) {
      const double slack = 1e-12 * (bounds.upper[k] - bounds.lower[k]);
      if (x(i, k) < bounds.lower[k] - slack || x(i, k) > bounds.upper[k] + slack) {
        std::ostringstream msg;
        msg << "PhysicalDataset: row " << (i + 1) << ", column " << (k + 1)
            << ": x = " << x(i, k) << " lies outside the design bounds ["
            << bounds.lower[k] << ", " << bounds.upper[k] << "]";
        throw extrapolation_error(msg.str());
      }
    }
  if (noise_variance_hint && !(*noise_variance_hint >= 0))
    throw std::invalid_argument("PhysicalDataset: noise variance hint must be >= 0");
}

CalibrationProblem::CalibrationProblem(PhysicalDataset physical,
                                       std::vector<LinearSurrogate> surrogates,
                                       std::vector<ProjectedKernelMatrix> kernels,
                                       Eigen::VectorXd theta0,
                                       Eigen::VectorXd theta_lower,
                                       Eigen::VectorXd theta_upper,
                                       Eigen::VectorXd output_weights,
                                       Eigen::VectorXd penalty_weights)
    : physical_(std::move(physical)),
      surrogates_(std::move(surrogates)),
      kernels_(std::move(kernels)),
      theta0_(std::move(theta0)),
      theta_lower_(std::move(theta_lower)),
      theta_upper_(std::move(theta_upper)),
      output_weights_(std::move(output_weights)),
      penalty_weights_(std::move(penalty_weights)) {
  physical_.validate();
  const int q = physical_.q();
  const int m = static_cast<int>(theta0_.size());
  if (m < 1) throw std::invalid_argument("CalibrationProblem: need m >= 1");
  if (static_cast<int>(surrogates_.size()) != q ||
      static_cast<int>(kernels_.size()) != q)
    throw std::invalid_argument(
        "CalibrationProblem: need one surrogate and one projected kernel per output");
  for (int j = 0; j < q; ++j) {
    if (surrogates_[j].input_dim() != physical_.d() ||
        surrogates_[j].theta_dim() != m)
      throw std::invalid_argument("CalibrationProblem: surrogate dimensions disagree");
    if (kernels_[j].n() != physical_.n())
      throw std::invalid_argument(
          "CalibrationProblem: projected kernel size does not match the data");
  }
  if (theta_lower_.size() != m || theta_upper_.size() != m)
    throw std::invalid_argument("CalibrationProblem: theta bounds length mismatch");
  range_ = theta_upper_ - theta_lower_;
  for (int i = 0; i < m; ++i) {
    if (!(range_[i] > 0))
      throw std::invalid_argument("CalibrationProblem: theta bounds must satisfy lower < upper");
    if (theta0_[i] < theta_lower_[i] || theta0_[i] > theta_upper_[i])
      throw std::invalid_argument("CalibrationProblem: theta0 outside the theta box");
  }
  if (output_weights_.size() == 0) output_weights_ = Eigen::VectorXd::Ones(q);
  if (output_weights_.size() != q)
    throw std::invalid_argument("CalibrationProblem: output weights length mismatch");
  for (int j = 0; j < q; ++j)
    if (!(output_weights_[j] > 0))
      throw std::invalid_argument("CalibrationProblem: output weights must be positive");
  if (penalty_weights_.size() > 0) {
    if (penalty_weights_.size() != m)
      throw std::invalid_argument("CalibrationProblem: penalty weights length mismatch");
    for (int i = 0; i < m; ++i)
      if (std::isnan(penalty_weights_[i]) || penalty_weights_[i] < 0)
        throw std::invalid_argument(
            "CalibrationProblem: penalty weights must be >= 0 (or +inf to pin)");
    weights_source_ = "user";
  }
  reduce();
}

CalibrationProblem::CalibrationProblem(PhysicalDataset physical,
                                       LinearSurrogate surrogate,
                                       ProjectedKernelMatrix kernel,
                                       Eigen::VectorXd theta0,
                                       Eigen::VectorXd theta_lower,
                                       Eigen::VectorXd theta_upper)
    : CalibrationProblem(std::move(physical), {std::move(surrogate)},
                         [&kernel]() {
                           std::vector<ProjectedKernelMatrix> v;
                           v.push_back(std::move(kernel));
                           return v;
                         }(),
                         std::move(theta0), std::move(theta_lower),
                         std::move(theta_upper)) {}

void CalibrationProblem::reduce() {
  const int n = physical_.n(), m = this->m(), q = physical_.q();
  f_vals_.resize(q);
  g_mats_.resize(q);
  r0_.resize(q);
  a_ = Eigen::MatrixXd::Zero(m, m);
  b_ = Eigen::VectorXd::Zero(m);
  c_ = 0.0;
  a_ols_ = Eigen::MatrixXd::Zero(m, m);
  b_ols_ = Eigen::VectorXd::Zero(m);
  c_ols_ = 0.0;
  for (int j = 0; j < q; ++j) {
    Eigen::VectorXd f(n);
    Eigen::MatrixXd g(n, m);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = physical_.x.row(i).transpose();
      f[i] = surrogates_[j].f(xi);
      g.row(i) = surrogates_[j].g(xi).transpose();
    }
    if (!f.allFinite() || !g.allFinite())
      throw degenerate_model_error(
          "CalibrationProblem: surrogate produced non-finite values at the physical design");
    const Eigen::VectorXd r0 = physical_.y.col(j) - f - g * theta0_;
    const Eigen::MatrixXd mg = kernels_[j].solve(g);
    const Eigen::VectorXd mr = kernels_[j].solve(r0);
    const double w = output_weights_[j];
    a_.noalias() += w * g.transpose() * mg;
    b_.noalias() += w * g.transpose() * mr;
    c_ += w * r0.dot(mr);
    a_ols_.noalias() += w * g.transpose() * g;
    b_ols_.noalias() += w * g.transpose() * r0;
    c_ols_ += w * r0.squaredNorm();
    f_vals_[j] = std::move(f);
    g_mats_[j] = std::move(g);
    r0_[j] = r0;
  }
  a_ = 0.5 * (a_ + a_.transpose());
  a_ols_ = 0.5 * (a_ols_ + a_ols_.transpose());
}

CalibrationProblem CalibrationProblem::with_penalty_weights(
    const Eigen::VectorXd& w, std::string source) const {
  if (w.size() != m())
    throw std::invalid_argument("with_penalty_weights: length mismatch");
  for (int i = 0; i < w.size(); ++i)
    if (std::isnan(w[i]) || w[i] < 0)
      throw std::invalid_argument(
          "with_penalty_weights: weights must be >= 0 (or +inf to pin)");
  CalibrationProblem copy(*this);
  copy.penalty_weights_ = w;
  copy.weights_source_ = std::move(source);
  return copy;
}

double CalibrationProblem::gls_loss(const Eigen::VectorXd& u) const {
  return std::max(0.0, c_ - 2.0 * b_.dot(u) + u.dot(a_ * u));
}

double CalibrationProblem::ols_loss(const Eigen::VectorXd& u) const {
  return std::max(0.0, c_ols_ - 2.0 * b_ols_.dot(u) + u.dot(a_ols_ * u));
}

namespace {

std::vector<int> support_of(const CalibrationProblem& p,
                            const Eigen::VectorXd& theta_hat) {
  std::vector<int> s;
  for (int i = 0; i < p.m(); ++i)
    if (std::abs(theta_hat[i] - p.theta0()[i]) > kSupportTol * p.theta_range()[i])
      s.push_back(i);
  return s;
}

// Shared closed-form path for OLS and PK: solve A u = b by eigendecomposition,
// falling back to the pseudo-inverse on rank deficiency, then clip to the box.
CalibrationResult solve_quadratic(const CalibrationProblem& p,
                                  const Eigen::MatrixXd& a,
                                  const Eigen::VectorXd& b,
                                  const std::string& kind) {
  CalibrationResult res;
  res.estimator_kind = kind;
  res.solver_iterations = 1;
  const int m = p.m();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success)
    throw numerical_error("solve_" + kind + ": eigendecomposition failed");
  const Eigen::VectorXd& evals = es.eigenvalues();
  const double emax = evals.maxCoeff();
  const double tol = std::max(emax, 0.0) * 1e-12;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(m);
  std::vector<int> null_cols;
  for (int k = 0; k < m; ++k) {
    if (evals[k] > tol && evals[k] > 0)
      inv[k] = 1.0 / evals[k];
    else
      null_cols.push_back(k);
  }
  if (!null_cols.empty()) {
    std::ostringstream msg;
    msg << "solve_" << kind
        << ": design is rank deficient; non-identifiable directions:";
    for (int k : null_cols) msg << " " << name_theta_components(es.eigenvectors().col(k));
    res.warnings.push_back(msg.str());
  }
  Eigen::VectorXd u = es.eigenvectors() *
                      (inv.array() * (es.eigenvectors().transpose() * b).array()).matrix();

  Eigen::VectorXd theta = p.theta0() + u;
  std::vector<int> clipped;
  for (int i = 0; i < m; ++i) {
    const double t = std::clamp(theta[i], p.theta_lower()[i], p.theta_upper()[i]);
    if (t != theta[i]) clipped.push_back(i);
    theta[i] = t;
  }
  if (!clipped.empty()) {
    res.at_bounds = true;
    std::ostringstream msg;
    msg << "solve_" << kind << ": clipped to the theta box:";
    for (int i : clipped) msg << " theta" << (i + 1);
    res.warnings.push_back(msg.str());
  }

  res.theta_hat = theta;
  res.empirical_loss = p.gls_loss(theta - p.theta0());
  res.support = support_of(p, theta);
  res.converged = true;
  return res;
}

}  // namespace

CalibrationResult solve_ols(const CalibrationProblem& problem) {
  return solve_quadratic(problem, problem.ols_matrix(), problem.ols_linear(),
                         "OLS");
}

CalibrationResult solve_pk(const CalibrationProblem& problem) {
  return solve_quadratic(problem, problem.quad_matrix(), problem.quad_linear(),
                         "PK");
}

Eigen::VectorXd compute_adaptive_weights(const CalibrationProblem& problem) {
  const CalibrationResult pk = solve_pk(problem);
  Eigen::VectorXd w(problem.m());
  for (int i = 0; i < problem.m(); ++i) {
    const double diff = std::abs(pk.theta_hat[i] - problem.theta0()[i]);
    w[i] = diff < kSupportTol * problem.theta_range()[i] ? kInf : 1.0 / diff;
  }
  return w;
}

namespace {

// Fenchel dual lower bound for the (boxless) weighted-lasso objective
// c - 2b.u + u'Au + lambda sum w|u| restricted to the free coordinates;
// used only in the non-convergence diagnostic.
double duality_gap(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double c,
                   double lambda, const Eigen::VectorXd& w,
                   const std::vector<int>& free, const Eigen::VectorXd& u_full) {
  const int mf = static_cast<int>(free.size());
  if (mf == 0) return 0.0;
  Eigen::MatrixXd af(mf, mf);
  Eigen::VectorXd bf(mf), uf(mf), wf(mf);
  for (int i = 0; i < mf; ++i) {
    bf[i] = b[free[i]];
    uf[i] = u_full[free[i]];
    wf[i] = w.size() ? w[free[i]] : 1.0;
    for (int j = 0; j < mf; ++j) af(i, j) = a(free[i], free[j]);
  }
  double primal = c - 2.0 * bf.dot(uf) + uf.dot(af * uf);
  for (int i = 0; i < mf; ++i) primal += lambda * wf[i] * std::abs(uf[i]);

  Eigen::VectorXd nu_hat = 2.0 * (bf - af * uf);
  double alpha = 1.0;
  for (int i = 0; i < mf; ++i) {
    const double cap = lambda * wf[i];
    if (std::abs(nu_hat[i]) > cap)
      alpha = std::min(alpha, std::isfinite(cap) ? cap / std::abs(nu_hat[i]) : 1.0);
  }
  const Eigen::VectorXd s = 2.0 * bf - alpha * nu_hat;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(af);
  const double emax = std::max(es.eigenvalues().maxCoeff(), 0.0);
  const Eigen::VectorXd proj = es.eigenvectors().transpose() * s;
  double quad = 0.0, out_of_range = 0.0;
  for (int k = 0; k < mf; ++k) {
    if (es.eigenvalues()[k] > emax * 1e-12 && es.eigenvalues()[k] > 0)
      quad += proj[k] * proj[k] / es.eigenvalues()[k];
    else
      out_of_range += std::abs(proj[k]);
  }
  if (out_of_range > 1e-10 * (1.0 + s.norm()))
    return std::numeric_limits<double>::infinity();
  const double dual = c - 0.25 * quad;
  return primal - dual;
}

}  // namespace

CalibrationResult solve_po(const CalibrationProblem& problem, double lambda,
                           const Eigen::VectorXd* warm_start,
                           std::vector<double>* objective_trace) {
  if (!(lambda >= 0))
    throw std::invalid_argument("solve_po: lambda must be nonnegative");
  if (!problem.has_penalty_weights())
    throw std::invalid_argument(
        "solve_po: penalty weights are not set; call with_penalty_weights first "
        "(adaptive weights come from compute_adaptive_weights)");

  const int m = problem.m();
  const Eigen::MatrixXd& a = problem.quad_matrix();
  const Eigen::VectorXd& b = problem.quad_linear();
  const Eigen::VectorXd& w = problem.penalty_weights();
  const Eigen::VectorXd lo = problem.theta_lower() - problem.theta0();
  const Eigen::VectorXd hi = problem.theta_upper() - problem.theta0();

  std::vector<int> free;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    if (std::isinf(w[i])) continue;
    free.push_back(i);
    if (warm_start)
      u[i] = std::clamp((*warm_start)[i] - problem.theta0()[i], lo[i], hi[i]);
  }

  auto objective = [&](const Eigen::VectorXd& v) {
    double obj = problem.gls_loss(v);
    for (int i : free) obj += lambda * w[i] * std::abs(v[i]);
    return obj;
  };

  int sweeps = 0;
  bool converged = false;
  while (sweeps < kMaxSweeps) {
    ++sweeps;
    double worst = 0.0;
    for (int i : free) {
      const double aii = a(i, i);
      double unew;
      if (aii <= 0) {
        unew = 0.0;
      } else {
        const double z = b[i] - (a.row(i).dot(u) - aii * u[i]);
        unew = lambda > 0 ? soft_threshold(z, 0.5 * lambda * w[i]) / aii : z / aii;
        unew = std::clamp(unew, lo[i], hi[i]);
      }
      worst = std::max(worst, std::abs(unew - u[i]) / problem.theta_range()[i]);
      u[i] = unew;
    }
    if (objective_trace) objective_trace->push_back(objective(u));
    if (worst < kSweepTol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    const double gap = duality_gap(a, b, problem.quad_constant(), lambda, w,
                                   free, u);
    std::ostringstream msg;
    msg << "solve_po: coordinate descent did not converge in " << kMaxSweeps
        << " sweeps at lambda = " << lambda << "; duality gap = " << gap
        << ", objective = " << objective(u);
    throw convergence_error(msg.str());
  }

  // On the face coordinate descent settled on (fixed zeros, fixed bound
  // coordinates, fixed signs) the objective is a smooth quadratic, so the
  // face minimizer solves a linear system. Solving it once removes the
  // O(sweep_tol * condition_number) error the sweep-change stopping rule
  // leaves behind. The refined point is kept only if it stays on the same
  // face and does not increase the objective.
  {
    std::vector<int> s;
    for (int i : free)
      if (u[i] != 0.0 && u[i] > lo[i] && u[i] < hi[i] && a(i, i) > 0)
        s.push_back(i);
    const int ms = static_cast<int>(s.size());
    if (ms > 0) {
      Eigen::MatrixXd as(ms, ms);
      Eigen::VectorXd rhs(ms);
      std::vector<char> in_s(m, 0);
      for (int i : s) in_s[i] = 1;
      for (int r = 0; r < ms; ++r) {
        const int i = s[r];
        double fixed = 0.0;
        for (int j = 0; j < m; ++j)
          if (!in_s[j]) fixed += a(i, j) * u[j];
        rhs[r] = b[i] - fixed -
                 (lambda > 0 ? 0.5 * lambda * w[i] * (u[i] > 0 ? 1.0 : -1.0)
                             : 0.0);
        for (int c = 0; c < ms; ++c) as(r, c) = a(i, s[c]);
      }
      const Eigen::VectorXd x = as.ldlt().solve(rhs);
      const double resid = (as * x - rhs).cwiseAbs().maxCoeff();
      const double scale =
          1.0 + rhs.cwiseAbs().maxCoeff() + as.cwiseAbs().maxCoeff();
      bool ok = resid <= 1e-9 * scale;
      for (int r = 0; ok && r < ms; ++r) {
        const int i = s[r];
        if (!(x[r] > lo[i] && x[r] < hi[i])) ok = false;
        if (lambda > 0 && !(x[r] * u[i] > 0)) ok = false;
      }
      if (ok) {
        Eigen::VectorXd cand = u;
        for (int r = 0; r < ms; ++r) cand[s[r]] = x[r];
        const double before = objective(u);
        if (objective(cand) <= before + 1e-12 * (1.0 + std::abs(before)))
          u = cand;
      }
    }
  }

  CalibrationResult res;
  res.theta_hat = problem.theta0() + u;
  for (int i = 0; i < m; ++i)
    if (std::isinf(w[i])) res.theta_hat[i] = problem.theta0()[i];
  for (int i : free)
    if (u[i] == lo[i] || u[i] == hi[i]) res.at_bounds = true;
  res.empirical_loss = problem.gls_loss(u);
  res.support = support_of(problem, res.theta_hat);
  res.estimator_kind = "PO(lambda=" + format_double(lambda) + ")";
  res.solver_iterations = sweeps;
  res.converged = true;
  return res;
}

double empirical_model_loss(const CalibrationProblem& problem,
                            const Eigen::VectorXd& theta) {
  if (theta.size() != problem.m())
    throw std::invalid_argument("empirical_model_loss: theta length mismatch");
  for (int i = 0; i < problem.m(); ++i) {
    const double slack = 1e-9 * problem.theta_range()[i];
    if (theta[i] < problem.theta_lower()[i] - slack ||
        theta[i] > problem.theta_upper()[i] + slack)
      throw std::invalid_argument(
          "empirical_model_loss: theta outside the theta box");
  }
  double total = 0.0;
  for (int j = 0; j < problem.q(); ++j) {
    const Eigen::VectorXd r =
        problem.physical_.y.col(j) - problem.f_vals_[j] - problem.g_mats_[j] * theta;
    total += problem.output_weights()[j] * quadratic_form(problem.kernels_[j], r);
  }
  return total;
}

HyperEstimate estimate_hyperparams(const PhysicalDataset& physical,
                                   int output_index) {
  physical.validate();
  if (output_index < 0 || output_index >= physical.q())
    throw std::invalid_argument("estimate_hyperparams: output index out of range");
  if (physical.n() < 3)
    throw insufficient_data_error("estimate_hyperparams: need at least 3 observations");
  return estimate_hyperparams(physical.x, physical.y.col(output_index),
                              physical.bounds);
}

double kkt_violation(const CalibrationProblem& problem, double lambda,
                     const Eigen::VectorXd& theta_hat) {
  if (!problem.has_penalty_weights())
    throw std::invalid_argument("kkt_violation: penalty weights are not set");
  const Eigen::VectorXd u = theta_hat - problem.theta0();
  const Eigen::VectorXd grad =
      2.0 * (problem.quad_matrix() * u - problem.quad_linear());
  const Eigen::VectorXd& w = problem.penalty_weights();
  double worst = 0.0;
  for (int i = 0; i < problem.m(); ++i) {
    if (std::isinf(w[i])) continue;
    const double cap = lambda * w[i];
    // One-sided directional derivatives of the objective along the feasible
    // directions must be >= 0 at an optimum.
    if (theta_hat[i] < problem.theta_upper()[i]) {
      const double deriv_up = grad[i] + cap * (u[i] >= 0 ? 1.0 : -1.0);
      worst = std::max(worst, -deriv_up);
    }
    if (theta_hat[i] > problem.theta_lower()[i]) {
      const double deriv_down = -grad[i] + cap * (u[i] > 0 ? -1.0 : 1.0);
      worst = std::max(worst, -deriv_down);
    }
  }
  return std::max(0.0, worst);
}

}  // namespace pocal
