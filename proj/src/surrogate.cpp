#include "pocal/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

namespace pocal {

void ComputerDataset::validate() const {
  bounds.validate();
  if (x.rows() < 1 || x.rows() != theta.rows() || x.rows() != y.rows())
    throw std::invalid_argument("ComputerDataset: row counts disagree");
  if (x.cols() != bounds.dim())
    throw std::invalid_argument("ComputerDataset: x/bounds dimension mismatch");
  if (theta.cols() < 1)
    throw std::invalid_argument("ComputerDataset: need at least one calibration input");
  if (y.cols() < 1)
    throw std::invalid_argument("ComputerDataset: need at least one output");
  if (theta_lower.size() != theta.cols() || theta_upper.size() != theta.cols())
    throw std::invalid_argument("ComputerDataset: theta bounds length mismatch");
  for (int i = 0; i < theta.cols(); ++i)
    if (!(theta_lower[i] < theta_upper[i]))
      throw std::invalid_argument("ComputerDataset: theta bounds must satisfy lower < upper");
  if (!x.allFinite() || !theta.allFinite() || !y.allFinite())
    throw std::invalid_argument("ComputerDataset: non-finite entries");
  if (n() < d() + m() + 1)
    throw insufficient_data_error(
        "ComputerDataset: need at least d + m + 1 runs for identifiability");
}

LinearSurrogate::LinearSurrogate(std::function<double(const Eigen::VectorXd&)> f_hat,
                                 GradientFn g_hat, int input_dim, int theta_dim,
                                 std::string kind, FitDiagnostics diagnostics)
    : f_(std::move(f_hat)),
      g_(std::move(g_hat)),
      d_(input_dim),
      m_(theta_dim),
      kind_(std::move(kind)),
      diag_(diagnostics) {}

double LinearSurrogate::evaluate(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& theta) const {
  if (theta.size() != m_)
    throw std::invalid_argument("LinearSurrogate::evaluate: theta length mismatch");
  return f_(x) + theta.dot(g_(x));
}

void LinearSurrogate::check_affinity(const DomainBounds& bounds,
                                     const Eigen::VectorXd& theta_lower,
                                     const Eigen::VectorXd& theta_upper,
                                     std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd x(d_), ta(m_), tb(m_);
    for (int k = 0; k < d_; ++k)
      x[k] = bounds.lower[k] + (bounds.upper[k] - bounds.lower[k]) * unif(rng);
    for (int i = 0; i < m_; ++i) {
      ta[i] = theta_lower[i] + (theta_upper[i] - theta_lower[i]) * unif(rng);
      tb[i] = theta_lower[i] + (theta_upper[i] - theta_lower[i]) * unif(rng);
    }
    const double lhs = evaluate(x, ta) + evaluate(x, tb) - evaluate(x, ta + tb);
    const double rhs = f_(x);
    const double scale = 1.0 + std::abs(lhs) + std::abs(rhs);
    if (std::abs(lhs - rhs) > 1e-9 * scale)
      throw fit_error("LinearSurrogate: affinity check failed");
  }
}

namespace {

// Exponent sets of all monomials in d variables with total degree <= deg,
// ordered by total degree starting from the constant.
std::vector<std::vector<int>> monomial_exponents(int d, int deg) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(d, 0);
  std::function<void(int, int)> rec = [&](int pos, int remaining) {
    if (pos == d) {
      out.push_back(cur);
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      cur[pos] = e;
      rec(pos + 1, remaining - e);
      cur[pos] = 0;
    }
  };
  rec(0, deg);
  std::stable_sort(out.begin(), out.end(),
                   [](const std::vector<int>& a, const std::vector<int>& b) {
                     return std::accumulate(a.begin(), a.end(), 0) <
                            std::accumulate(b.begin(), b.end(), 0);
                   });
  return out;
}

std::string monomial_name(const std::vector<int>& e) {
  std::ostringstream s;
  bool first = true;
  for (size_t k = 0; k < e.size(); ++k) {
    for (int rep = 0; rep < e[k]; ++rep) {
      if (!first) s << "*";
      s << "x" << (k + 1);
      first = false;
    }
  }
  return first ? "1" : s.str();
}

double eval_monomial(const std::vector<int>& e, const Eigen::VectorXd& u) {
  double v = 1.0;
  for (size_t k = 0; k < e.size(); ++k)
    for (int rep = 0; rep < e[k]; ++rep) v *= u[static_cast<int>(k)];
  return v;
}

Eigen::MatrixXd monomial_matrix(const std::vector<std::vector<int>>& exps,
                                const Eigen::MatrixXd& u) {
  Eigen::MatrixXd p(u.rows(), static_cast<int>(exps.size()));
  for (int i = 0; i < u.rows(); ++i) {
    const Eigen::VectorXd ui = u.row(i).transpose();
    for (size_t j = 0; j < exps.size(); ++j)
      p(i, static_cast<int>(j)) = eval_monomial(exps[j], ui);
  }
  return p;
}

FitDiagnostics residual_diagnostics(const Eigen::VectorXd& resid) {
  FitDiagnostics diag;
  diag.n_train = static_cast<int>(resid.size());
  diag.residual_rms = std::sqrt(resid.squaredNorm() / resid.size());
  diag.residual_max = resid.cwiseAbs().maxCoeff();
  return diag;
}

void check_output_index(const ComputerDataset& data, int output_index) {
  if (output_index < 0 || output_index >= data.q())
    throw std::invalid_argument("surrogate fit: output index out of range");
}

}  // namespace

LinearSurrogate fit_parametric(const ComputerDataset& data, int f_degree,
                               int g_degree, int output_index) {
  data.validate();
  check_output_index(data, output_index);
  if (f_degree < 0 || g_degree < 0)
    throw std::invalid_argument("fit_parametric: degrees must be nonnegative");
  const int n = data.n(), d = data.d(), m = data.m();

  const auto exps_f = monomial_exponents(d, f_degree);
  const auto exps_g = monomial_exponents(d, g_degree);
  const int pf = static_cast<int>(exps_f.size());
  const int pg = static_cast<int>(exps_g.size());
  const int cols = pf + m * pg;
  if (n < cols) {
    std::ostringstream msg;
    msg << "fit_parametric: " << cols << " coefficients need at least " << cols
        << " runs, got " << n;
    throw insufficient_data_error(msg.str());
  }

  // theta standardized to [-1,1] for conditioning; coefficients are mapped
  // back exactly below.
  const Eigen::VectorXd center = 0.5 * (data.theta_lower + data.theta_upper);
  const Eigen::VectorXd scale = 0.5 * (data.theta_upper - data.theta_lower);
  const Eigen::MatrixXd u = data.bounds.standardize_rows(data.x);
  const Eigen::MatrixXd p_f = monomial_matrix(exps_f, u);
  const Eigen::MatrixXd p_g = monomial_matrix(exps_g, u);

  Eigen::MatrixXd design(n, cols);
  design.leftCols(pf) = p_f;
  for (int i = 0; i < m; ++i) {
    const Eigen::ArrayXd ti =
        ((data.theta.col(i).array() - center[i]) / scale[i]);
    design.middleCols(pf + i * pg, pg) = p_g.array().colwise() * ti;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < cols) {
    std::ostringstream msg;
    msg << "fit_parametric: regression matrix is rank deficient; dependent columns:";
    const auto perm = qr.colsPermutation().indices();
    for (int k = qr.rank(); k < cols; ++k) {
      const int col = perm[k];
      msg << " ";
      if (col < pf)
        msg << "f:" << monomial_name(exps_f[col]);
      else
        msg << "g" << (col - pf) / pg + 1 << ":" << monomial_name(exps_g[(col - pf) % pg]);
    }
    throw fit_error(msg.str());
  }
  const Eigen::VectorXd beta = qr.solve(data.y.col(output_index));
  const Eigen::VectorXd resid = data.y.col(output_index) - design * beta;

  struct Coeffs {
    DomainBounds bounds;
    std::vector<std::vector<int>> exps_f, exps_g;
    Eigen::VectorXd beta_f;
    Eigen::MatrixXd beta_g;  // m x pg, original theta coordinates
    Eigen::VectorXd f_shift_g;  // combines the -center/scale carry-over
  };
  auto c = std::make_shared<Coeffs>();
  c->bounds = data.bounds;
  c->exps_f = exps_f;
  c->exps_g = exps_g;
  c->beta_f = beta.head(pf);
  c->beta_g.resize(m, pg);
  c->f_shift_g = Eigen::VectorXd::Zero(pg);
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd bi = beta.segment(pf + i * pg, pg);
    c->beta_g.row(i) = (bi / scale[i]).transpose();
    c->f_shift_g -= bi * (center[i] / scale[i]);
  }

  auto basis_f = [c](const Eigen::VectorXd& x) {
    const Eigen::VectorXd u = c->bounds.standardize(x);
    double v = 0;
    for (size_t j = 0; j < c->exps_f.size(); ++j)
      v += c->beta_f[static_cast<int>(j)] * eval_monomial(c->exps_f[j], u);
    for (size_t j = 0; j < c->exps_g.size(); ++j)
      v += c->f_shift_g[static_cast<int>(j)] * eval_monomial(c->exps_g[j], u);
    return v;
  };
  auto basis_g = [c](const Eigen::VectorXd& x) {
    const Eigen::VectorXd u = c->bounds.standardize(x);
    Eigen::VectorXd pg_vals(static_cast<int>(c->exps_g.size()));
    for (size_t j = 0; j < c->exps_g.size(); ++j)
      pg_vals[static_cast<int>(j)] = eval_monomial(c->exps_g[j], u);
    return Eigen::VectorXd(c->beta_g * pg_vals);
  };

  std::ostringstream kind;
  kind << "parametric(" << f_degree << "," << g_degree << ")";
  return LinearSurrogate(basis_f, basis_g, d, m, kind.str(),
                         residual_diagnostics(resid));
}

LinearSurrogate fit_slope(const ComputerDataset& data, int output_index) {
  data.validate();
  check_output_index(data, output_index);
  if (data.d() != 1)
    throw std::invalid_argument("fit_slope: the slope model requires d = 1");
  const int n = data.n(), m = data.m();
  const int cols = m + 1;
  if (n < cols)
    throw insufficient_data_error("fit_slope: need at least m + 1 runs");

  // Columns [x, theta_1 x, ..., theta_m x]; no intercept (forces y(0) = 0).
  Eigen::MatrixXd design(n, cols);
  design.col(0) = data.x.col(0);
  for (int i = 0; i < m; ++i)
    design.col(i + 1) = data.theta.col(i).array() * data.x.col(0).array();

  // Column scaling for conditioning; undone exactly on the coefficients.
  Eigen::VectorXd col_scale(cols);
  for (int jcol = 0; jcol < cols; ++jcol) {
    col_scale[jcol] = design.col(jcol).cwiseAbs().maxCoeff();
    if (col_scale[jcol] == 0) col_scale[jcol] = 1.0;
    design.col(jcol) /= col_scale[jcol];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < cols) {
    std::ostringstream msg;
    msg << "fit_slope: regression matrix is rank deficient; dependent columns:";
    const auto perm = qr.colsPermutation().indices();
    for (int k = qr.rank(); k < cols; ++k) {
      const int col = perm[k];
      if (col == 0)
        msg << " x";
      else
        msg << " theta" << col << "*x";
    }
    throw fit_error(msg.str());
  }
  Eigen::VectorXd beta = qr.solve(data.y.col(output_index));
  beta.array() /= col_scale.array();
  const Eigen::VectorXd resid =
      data.y.col(output_index) -
      (design * (beta.array() * col_scale.array()).matrix());

  const double b0 = beta[0];
  const Eigen::VectorXd bg = beta.tail(m);
  auto f_hat = [b0](const Eigen::VectorXd& x) { return b0 * x[0]; };
  auto g_hat = [bg](const Eigen::VectorXd& x) {
    return Eigen::VectorXd(bg * x[0]);
  };
  return LinearSurrogate(f_hat, g_hat, 1, m, "slope",
                         residual_diagnostics(resid));
}

void GpHyperParams::validate(int m) const {
  if (!(kappa2 > 0) || !(tau2 >= 0) || !(phi > 0))
    throw std::invalid_argument("GpHyperParams: kappa2, phi must be positive, tau2 nonnegative");
  if (kappa2_g.size() != m || phi_g.size() != m)
    throw std::invalid_argument("GpHyperParams: per-gradient parameter length mismatch");
  for (int i = 0; i < m; ++i)
    if (!(kappa2_g[i] > 0) || !(phi_g[i] > 0))
      throw std::invalid_argument("GpHyperParams: gradient variances/scales must be positive");
}

LinearSurrogate fit_gp(const ComputerDataset& data, const GpHyperParams& params,
                       int output_index) {
  data.validate();
  check_output_index(data, output_index);
  const int n = data.n(), m = data.m();
  params.validate(m);

  const Eigen::MatrixXd u = data.bounds.standardize_rows(data.x);
  Eigen::MatrixXd cov = params.kappa2 * gaussian_kernel_matrix(u, u, params.phi);
  for (int l = 0; l < m; ++l) {
    const Eigen::MatrixXd kl = gaussian_kernel_matrix(u, u, params.phi_g[l]);
    cov.noalias() += params.kappa2_g[l] *
                     (data.theta.col(l) * data.theta.col(l).transpose())
                         .cwiseProduct(kl);
  }
  cov.diagonal().array() += params.tau2;

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  double jitter = 1e-10 * cov.trace() / n;
  for (int attempt = 0; llt.info() != Eigen::Success && attempt < 3; ++attempt) {
    cov.diagonal().array() += jitter;
    jitter *= 100;
    llt.compute(cov);
  }
  if (llt.info() != Eigen::Success)
    throw regularization_error("fit_gp: covariance is ill-conditioned; increase tau2");
  const Eigen::VectorXd alpha = llt.solve(data.y.col(output_index));

  struct GpData {
    DomainBounds bounds;
    Eigen::MatrixXd u_train;
    Eigen::MatrixXd theta;
    Eigen::VectorXd alpha;
    GpHyperParams params;
  };
  auto gp = std::make_shared<GpData>(GpData{data.bounds, u, data.theta, alpha, params});

  auto f_hat = [gp](const Eigen::VectorXd& x) {
    const Eigen::VectorXd ux = gp->bounds.standardize(x);
    double v = 0;
    for (int i = 0; i < gp->u_train.rows(); ++i)
      v += gp->alpha[i] *
           std::exp(-gp->params.phi *
                    (gp->u_train.row(i).transpose() - ux).squaredNorm());
    return gp->params.kappa2 * v;
  };
  auto g_hat = [gp](const Eigen::VectorXd& x) {
    const Eigen::VectorXd ux = gp->bounds.standardize(x);
    const int m = static_cast<int>(gp->theta.cols());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    for (int l = 0; l < m; ++l) {
      double v = 0;
      for (int i = 0; i < gp->u_train.rows(); ++i)
        v += gp->theta(i, l) * gp->alpha[i] *
             std::exp(-gp->params.phi_g[l] *
                      (gp->u_train.row(i).transpose() - ux).squaredNorm());
      out[l] = gp->params.kappa2_g[l] * v;
    }
    return out;
  };

  LinearSurrogate out(f_hat, g_hat, data.d(), m, "gp", FitDiagnostics{});
  Eigen::VectorXd resid(n);
  for (int i = 0; i < n; ++i)
    resid[i] = data.y(i, output_index) -
               out.evaluate(data.x.row(i).transpose(), data.theta.row(i).transpose());
  return LinearSurrogate(f_hat, g_hat, data.d(), m, "gp",
                         residual_diagnostics(resid));
}

namespace {

struct ProfiledMl {
  double phi = 1.0;
  double rho = 1e-8;
  double sigma2 = 1.0;
  double nll = std::numeric_limits<double>::infinity();
};

// Negative profiled log-likelihood of y ~ N(0, sigma2 (S o K(phi) + rho I)),
// with sigma2 profiled out analytically. S = 1 (all-ones) gives the plain
// kernel-plus-nugget model.
double profiled_nll(const Eigen::MatrixXd& u, const Eigen::VectorXd& y,
                    const Eigen::MatrixXd* s_mask, double phi, double rho,
                    double* sigma2_out) {
  const int n = static_cast<int>(y.size());
  Eigen::MatrixXd c = gaussian_kernel_matrix(u, u, phi);
  if (s_mask) c = c.cwiseProduct(*s_mask);
  c.diagonal().array() += rho;
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success)
    return std::numeric_limits<double>::infinity();
  const double quad = y.dot(llt.solve(y));
  if (!(quad > 0)) return std::numeric_limits<double>::infinity();
  const double sigma2 = quad / n;
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  if (sigma2_out) *sigma2_out = sigma2;
  return n * std::log(sigma2) + logdet;
}

// Golden-section refinement of a 1-d map on a log-spaced bracket.
double golden_refine(const std::function<double(double)>& f, double lo,
                     double hi, int iters = 24) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = std::log(lo), b = std::log(hi);
  double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
  double f1 = f(std::exp(c1)), f2 = f(std::exp(c2));
  for (int it = 0; it < iters; ++it) {
    if (f1 <= f2) {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - gr * (b - a);
      f1 = f(std::exp(c1));
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + gr * (b - a);
      f2 = f(std::exp(c2));
    }
  }
  return std::exp(0.5 * (a + b));
}

ProfiledMl run_profile_ml(const Eigen::MatrixXd& u, const Eigen::VectorXd& y,
                          const Eigen::MatrixXd* s_mask) {
  const int n_phi = 25, n_rho = 19;
  const double phi_lo = 1e-2, phi_hi = 1e3, rho_lo = 1e-8, rho_hi = 10.0;
  ProfiledMl best;
  for (int a = 0; a < n_phi; ++a) {
    const double phi =
        phi_lo * std::pow(phi_hi / phi_lo, static_cast<double>(a) / (n_phi - 1));
    for (int b = 0; b < n_rho; ++b) {
      const double rho =
          rho_lo * std::pow(rho_hi / rho_lo, static_cast<double>(b) / (n_rho - 1));
      double s2 = 1.0;
      const double nll = profiled_nll(u, y, s_mask, phi, rho, &s2);
      if (nll < best.nll) best = ProfiledMl{phi, rho, s2, nll};
    }
  }
  if (!std::isfinite(best.nll))
    throw regularization_error("hyperparameter likelihood is degenerate");

  const double step_phi = std::pow(phi_hi / phi_lo, 1.0 / (n_phi - 1));
  best.phi = golden_refine(
      [&](double p) { return profiled_nll(u, y, s_mask, p, best.rho, nullptr); },
      std::max(phi_lo, best.phi / step_phi), std::min(phi_hi, best.phi * step_phi));
  const double step_rho = std::pow(rho_hi / rho_lo, 1.0 / (n_rho - 1));
  best.rho = golden_refine(
      [&](double r) { return profiled_nll(u, y, s_mask, best.phi, r, nullptr); },
      std::max(rho_lo, best.rho / step_rho), std::min(rho_hi, best.rho * step_rho));
  best.nll = profiled_nll(u, y, s_mask, best.phi, best.rho, &best.sigma2);
  return best;
}

}  // namespace

GpHyperParams estimate_gp_hyperparams(const ComputerDataset& data,
                                      int output_index) {
  data.validate();
  check_output_index(data, output_index);
  const int m = data.m();
  const Eigen::MatrixXd u = data.bounds.standardize_rows(data.x);
  Eigen::VectorXd y = data.y.col(output_index);

  const double sd = std::sqrt((y.array() - y.mean()).square().sum() /
                              std::max(1, data.n() - 1));
  const double y_scale = std::abs(y.mean()) + sd;
  GpHyperParams params;
  params.kappa2_g = Eigen::VectorXd::Ones(m);
  params.phi_g = Eigen::VectorXd::Ones(m);
  if (!(sd > 1e-12 * (1.0 + std::abs(y.mean())))) {
    // Degenerate constant output: any scale is flat; keep neutral defaults.
    params.kappa2 = std::max(1e-12, y_scale * y_scale);
    params.kappa2_g *= params.kappa2;
    params.tau2 = 1e-8 * params.kappa2;
    return params;
  }

  const double norm = sd;
  y /= norm;
  // S encodes the linear-in-theta covariance: S_ij = 1 + theta_i . theta_j.
  const Eigen::MatrixXd s_mask =
      Eigen::MatrixXd::Ones(data.n(), data.n()) + data.theta * data.theta.transpose();
  const ProfiledMl ml = run_profile_ml(u, y, &s_mask);

  params.phi = ml.phi;
  params.phi_g = Eigen::VectorXd::Constant(m, ml.phi);
  params.kappa2 = ml.sigma2 * norm * norm;
  params.kappa2_g = Eigen::VectorXd::Constant(m, params.kappa2);
  params.tau2 = std::max(ml.rho * ml.sigma2, 1e-8) * norm * norm;
  return params;
}

HyperEstimate estimate_hyperparams(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y,
                                   const DomainBounds& bounds) {
  bounds.validate();
  if (x.rows() != y.size())
    throw std::invalid_argument("estimate_hyperparams: x/y size mismatch");
  if (x.cols() != bounds.dim())
    throw std::invalid_argument("estimate_hyperparams: x/bounds dimension mismatch");
  if (y.size() < 3)
    throw insufficient_data_error("estimate_hyperparams: need at least 3 observations");

  HyperEstimate est;
  const double mean = y.mean();
  const double sd =
      std::sqrt((y.array() - mean).square().sum() / (y.size() - 1));
  if (!(sd > 1e-12 * (1.0 + std::abs(mean)))) {
    est.flat_likelihood = true;
    est.phi = 1.0;
    est.eta2 = 1e-8;
    return est;
  }

  // Zero-mean GP on the raw observations; normalizing by the RMS only
  // rescales the profiled variance, so the (phi, rho) argmax is unchanged.
  const double rms = std::sqrt(y.squaredNorm() / y.size());
  const Eigen::MatrixXd u = bounds.standardize_rows(x);
  const Eigen::VectorXd yc = y / (rms > 0 ? rms : 1.0);
  const ProfiledMl ml = run_profile_ml(u, yc, nullptr);
  est.phi = ml.phi;
  est.eta2 = std::max(ml.rho, 1e-8);
  est.flat_likelihood = false;
  return est;
}

}  // namespace pocal
