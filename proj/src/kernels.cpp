#include "pocal/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pocal/qmc.hpp"

namespace pocal {

void DomainBounds::validate() const {
  if (lower.size() != upper.size() || lower.size() < 1)
    throw std::invalid_argument("DomainBounds: lower/upper must share a positive length");
  for (int k = 0; k < lower.size(); ++k) {
    if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]) || !(lower[k] < upper[k])) {
      std::ostringstream msg;
      msg << "DomainBounds: need finite lower < upper in dimension " << (k + 1);
      throw std::invalid_argument(msg.str());
    }
  }
}

Eigen::VectorXd DomainBounds::standardize(const Eigen::VectorXd& x) const {
  return (x - lower).array() / (upper - lower).array();
}

Eigen::MatrixXd DomainBounds::standardize_rows(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd u = x;
  for (int j = 0; j < x.cols(); ++j)
    u.col(j) = (x.col(j).array() - lower[j]) / (upper[j] - lower[j]);
  return u;
}

DomainBounds DomainBounds::unit(int d) {
  return DomainBounds{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
}

double gaussian_kernel(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                       double phi) {
  if (xi.size() != xj.size())
    throw std::invalid_argument("gaussian_kernel: dimension mismatch");
  if (!(phi > 0) || !std::isfinite(phi))
    throw std::invalid_argument("gaussian_kernel: phi must be positive");
  return std::exp(-phi * (xi - xj).squaredNorm());
}

Eigen::MatrixXd gaussian_kernel_matrix(const Eigen::MatrixXd& a,
                                       const Eigen::MatrixXd& b, double phi) {
  if (a.cols() != b.cols())
    throw std::invalid_argument("gaussian_kernel_matrix: dimension mismatch");
  if (!(phi > 0) || !std::isfinite(phi))
    throw std::invalid_argument("gaussian_kernel_matrix: phi must be positive");
  const Eigen::VectorXd an = a.rowwise().squaredNorm();
  const Eigen::VectorXd bn = b.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * a * b.transpose();
  d2.colwise() += an;
  d2.rowwise() += bn.transpose();
  return (-phi * d2.cwiseMax(0.0)).array().exp();
}

ProjectedKernelMatrix::ProjectedKernelMatrix(Eigen::MatrixXd base, double eta2)
    : matrix_(std::move(base)), h_(matrix_.rows(), 0), H_(0, 0), eta2_(eta2) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 1)
    throw std::invalid_argument("ProjectedKernelMatrix: matrix must be square and nonempty");
  if (eta2_ < 0 || !std::isfinite(eta2_))
    throw std::invalid_argument("ProjectedKernelMatrix: eta2 must be nonnegative");
  matrix_.diagonal().array() += eta2_;
  factor();
}

void ProjectedKernelMatrix::factor() {
  llt_.compute(matrix_);
  if (llt_.info() == Eigen::Success) return;
  if (eta2_ == 0.0)
    throw regularization_error(
        "projected kernel is singular with eta2 = 0; supply a positive nugget");
  // Quadrature noise can leave the matrix marginally indefinite; one small
  // diagonal jitter is allowed before giving up.
  const double jitter = 1e-10 * matrix_.trace() / matrix_.rows();
  matrix_.diagonal().array() += jitter;
  llt_.compute(matrix_);
  if (llt_.info() != Eigen::Success)
    throw regularization_error(
        "projected kernel factorization failed; increase eta2");
}

Eigen::MatrixXd ProjectedKernelMatrix::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != matrix_.rows())
    throw std::invalid_argument("ProjectedKernelMatrix::solve: size mismatch");
  return llt_.solve(rhs);
}

double ProjectedKernelMatrix::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

namespace {

// Accumulates H = G^T K_zz G / mc^2 over row blocks of the node set without
// materializing the mc x mc kernel; per-block partials are summed in block
// order so the result is identical for any thread count.
Eigen::MatrixXd moment_matrix_blocked(const Eigen::MatrixXd& nodes_std,
                                      const Eigen::MatrixXd& g_nodes,
                                      double phi, int threads) {
  const int mc = static_cast<int>(nodes_std.rows());
  const int m = static_cast<int>(g_nodes.cols());
  const int block = 512;
  const int nblocks = (mc + block - 1) / block;
  std::vector<Eigen::MatrixXd> partial(nblocks);

  auto work = [&](int bi) {
    const int r0 = bi * block;
    const int rows = std::min(block, mc - r0);
    const Eigen::MatrixXd kb = gaussian_kernel_matrix(
        nodes_std.middleRows(r0, rows), nodes_std, phi);
    partial[bi] = g_nodes.middleRows(r0, rows).transpose() * (kb * g_nodes);
  };

  if (threads <= 1 || nblocks == 1) {
    for (int bi = 0; bi < nblocks; ++bi) work(bi);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    const int nt = std::min(threads, nblocks);
    for (int t = 0; t < nt; ++t)
      pool.emplace_back([&] {
        for (int bi = next.fetch_add(1); bi < nblocks; bi = next.fetch_add(1))
          work(bi);
      });
    for (auto& th : pool) th.join();
  }

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
  for (int bi = 0; bi < nblocks; ++bi) H += partial[bi];
  H /= static_cast<double>(mc) * static_cast<double>(mc);
  return 0.5 * (H + H.transpose());
}

Eigen::MatrixXd gradient_at_nodes(const GradientFn& gradient, int m,
                                  const Eigen::MatrixXd& nodes,
                                  const char* caller) {
  const int mc = static_cast<int>(nodes.rows());
  Eigen::MatrixXd g_nodes(mc, m);
  for (int k = 0; k < mc; ++k) {
    const Eigen::VectorXd gk = gradient(nodes.row(k).transpose());
    if (gk.size() != m) {
      std::ostringstream msg;
      msg << caller << ": gradient returned length " << gk.size()
          << ", expected " << m;
      throw std::invalid_argument(msg.str());
    }
    if (!gk.allFinite()) {
      std::ostringstream msg;
      msg << caller << ": gradient returned non-finite values";
      throw std::invalid_argument(msg.str());
    }
    g_nodes.row(k) = gk.transpose();
  }
  return g_nodes;
}

std::string name_components(const Eigen::VectorXd& v) {
  const double cutoff = 0.5 * v.cwiseAbs().maxCoeff();
  std::ostringstream names;
  bool first = true;
  for (int k = 0; k < v.size(); ++k) {
    if (std::abs(v[k]) >= cutoff) {
      if (!first) names << ", ";
      names << "g" << (k + 1);
      first = false;
    }
  }
  return names.str();
}

}  // namespace

ProjectedKernelMatrix project_kernel(const GradientFn& gradient, int m,
                                     const Eigen::MatrixXd& design,
                                     const DomainBounds& bounds,
                                     const KernelConfig& config, int threads) {
  bounds.validate();
  const int n = static_cast<int>(design.rows());
  const int d = bounds.dim();
  if (n < 1) throw std::invalid_argument("project_kernel: empty design");
  if (design.cols() != d)
    throw std::invalid_argument("project_kernel: design/bounds dimension mismatch");
  if (!(config.phi > 0) || !std::isfinite(config.phi))
    throw std::invalid_argument("project_kernel: phi must be positive");
  if (config.eta2 < 0 || !std::isfinite(config.eta2))
    throw std::invalid_argument("project_kernel: eta2 must be nonnegative");
  if (config.mc_samples < 1)
    throw std::invalid_argument("project_kernel: mc_samples must be positive");
  if (m < 0) throw std::invalid_argument("project_kernel: m must be nonnegative");
  if (m > 0 && !gradient)
    throw std::invalid_argument("project_kernel: gradient callable required when m > 0");
  if (m > 0 && config.mc_samples < m)
    throw std::invalid_argument("project_kernel: need mc_samples >= m");

  const Eigen::MatrixXd u = bounds.standardize_rows(design);
  Eigen::MatrixXd base = gaussian_kernel_matrix(u, u, config.phi);
  Eigen::MatrixXd h(n, m), H(m, m);

  if (m > 0) {
    const int mc = config.mc_samples;
    const Eigen::MatrixXd nodes_std = halton_shifted(mc, d, config.seed);
    const Eigen::MatrixXd nodes = scale_to_box(nodes_std, bounds.lower, bounds.upper);

    const Eigen::MatrixXd g_nodes =
        gradient_at_nodes(gradient, m, nodes, "project_kernel");

    const Eigen::MatrixXd k_nodes_design =
        gaussian_kernel_matrix(nodes_std, u, config.phi);
    h = k_nodes_design.transpose() * g_nodes / static_cast<double>(mc);
    H = moment_matrix_blocked(nodes_std, g_nodes, config.phi, threads);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
    if (eig.info() != Eigen::Success)
      throw singular_projection_error("project_kernel: eigendecomposition of H failed");
    const Eigen::VectorXd ev = eig.eigenvalues();
    const double lmax = ev.maxCoeff();
    const double lmin = ev.minCoeff();
    if (!(lmax > 0) || lmin <= lmax * 1e-12) {
      std::ostringstream msg;
      msg << "project_kernel: projection moment matrix H is numerically singular"
          << " (cond > 1e12); near-dependent gradient components: "
          << name_components(eig.eigenvectors().col(0));
      throw singular_projection_error(msg.str());
    }
    const Eigen::MatrixXd h_solved =
        eig.eigenvectors() *
        ev.cwiseInverse().asDiagonal() *
        (eig.eigenvectors().transpose() * h.transpose());
    base -= h * h_solved;
    base = 0.5 * (base + base.transpose()).eval();
  }

  ProjectedKernelMatrix out(std::move(base), config.eta2);
  out.h_ = std::move(h);
  out.H_ = std::move(H);
  return out;
}

SpanProjection project_kernel_span(const GradientFn& gradient, int m,
                                   const Eigen::MatrixXd& design,
                                   const DomainBounds& bounds,
                                   const KernelConfig& config, int threads) {
  if (m < 0)
    throw std::invalid_argument("project_kernel_span: m must be nonnegative");
  if (m == 0)
    return {project_kernel(gradient, 0, design, bounds, config, threads), {}};
  if (!gradient)
    throw std::invalid_argument(
        "project_kernel_span: gradient callable required when m > 0");
  bounds.validate();
  if (config.mc_samples < 1)
    throw std::invalid_argument("project_kernel_span: mc_samples must be positive");

  // Rank-revealing pass over the same node set project_kernel will use, so
  // the retained subset is independent exactly where the moments are taken.
  const Eigen::MatrixXd nodes_std =
      halton_shifted(config.mc_samples, bounds.dim(), config.seed);
  const Eigen::MatrixXd nodes =
      scale_to_box(nodes_std, bounds.lower, bounds.upper);
  const Eigen::MatrixXd g_nodes =
      gradient_at_nodes(gradient, m, nodes, "project_kernel_span");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g_nodes);
  const Eigen::VectorXd rdiag = qr.matrixR()
                                    .topLeftCorner(std::min<int>(config.mc_samples, m), m)
                                    .diagonal()
                                    .cwiseAbs();
  const auto pivots = qr.colsPermutation().indices();
  int rank = 0;
  if (rdiag.size() > 0 && rdiag[0] > 0)
    while (rank < rdiag.size() && rdiag[rank] > 1e-5 * rdiag[0]) ++rank;

  // Components past the numeric rank add nothing to the span; if the moment
  // matrix is still too ill-conditioned for project_kernel (the kernel
  // weighting can degrade it further), shed the weakest pivot and retry.
  for (;; --rank) {
    if (rank == 0)
      return {project_kernel(GradientFn{}, 0, design, bounds, config, threads),
              {}};
    std::vector<int> keep(pivots.data(), pivots.data() + rank);
    std::sort(keep.begin(), keep.end());
    GradientFn sub = [gradient, keep](const Eigen::VectorXd& x) {
      const Eigen::VectorXd g = gradient(x);
      Eigen::VectorXd out(static_cast<int>(keep.size()));
      for (size_t i = 0; i < keep.size(); ++i)
        out[static_cast<int>(i)] = g[keep[i]];
      return out;
    };
    try {
      return {project_kernel(sub, rank, design, bounds, config, threads),
              std::move(keep)};
    } catch (const singular_projection_error&) {
      // fall through to the next smaller subset
    }
  }
}

double quadratic_form(const ProjectedKernelMatrix& pk,
                      const Eigen::VectorXd& residual) {
  if (residual.size() != pk.n())
    throw std::invalid_argument("quadratic_form: residual length mismatch");
  const double v = residual.dot(pk.solve(residual).col(0));
  return v < 0 ? 0.0 : v;  // guards float dust on near-zero residuals
}

}  // namespace pocal
