#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

#include "pocal/errors.hpp"

namespace pocal {

// Rectangular domain of the control inputs. Kernels act on inputs
// standardized to [0,1]^d; DomainBounds keeps the original units.
struct DomainBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  void validate() const;
  Eigen::VectorXd standardize(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd standardize_rows(const Eigen::MatrixXd& x) const;
  static DomainBounds unit(int d);
};

struct KernelConfig {
  double phi = 1.0;        // Gaussian scale on squared standardized distance
  double eta2 = 0.0;       // nugget added to the stored matrix diagonal
  int mc_samples = 4096;   // quadrature nodes for the projection moments
  std::uint64_t seed = 0;  // randomizes the quadrature node set
};

// Vector-valued surrogate gradient x -> (g_1(x), ..., g_m(x)), original units.
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// exp(-phi * |xi - xj|^2); xi, xj live on the standardized scale.
double gaussian_kernel(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj,
                       double phi);

// Gaussian kernel matrix between two standardized row sets.
Eigen::MatrixXd gaussian_kernel_matrix(const Eigen::MatrixXd& a,
                                       const Eigen::MatrixXd& b, double phi);

// Kernel of the design projected onto the orthogonal complement of the
// gradient span:
//   K(i,j) = Phi(x_i,x_j) - h(x_i)^T H^{-1} h(x_j),
//   h(x)   = int g(x') Phi(x',x) dx',
//   H      = int int g(x') g(x)^T Phi(x',x) dx' dx.
// Both integrals are taken against the uniform probability measure on the
// domain (the normalization cancels inside h^T H^{-1} h) and are discretized
// on one shared quadrature node set, so the projection annihilates the
// gradient span exactly in the discrete geometry. eta2 is added to the
// diagonal of the stored matrix and the factorization covers (K + eta2 I).
class ProjectedKernelMatrix {
 public:
  // Wraps a precomputed covariance and factors (base + eta2 I) immediately.
  ProjectedKernelMatrix(Eigen::MatrixXd base, double eta2);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::MatrixXd& h_at_design() const { return h_; }  // n x m
  const Eigen::MatrixXd& H() const { return H_; }            // m x m
  double eta2() const { return eta2_; }
  int n() const { return static_cast<int>(matrix_.rows()); }
  int m() const { return static_cast<int>(H_.rows()); }

  // Solves (matrix) X = rhs through the cached Cholesky factor.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  double log_det() const;

 private:
  friend ProjectedKernelMatrix project_kernel(const GradientFn&, int,
                                              const Eigen::MatrixXd&,
                                              const DomainBounds&,
                                              const KernelConfig&, int);
  void factor();

  Eigen::MatrixXd matrix_;  // n x n, eta2 included on the diagonal
  Eigen::MatrixXd h_;       // n x m
  Eigen::MatrixXd H_;       // m x m
  double eta2_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

// Builds the projected kernel for `design` (rows in original units). m = 0
// yields the unprojected kernel plus nugget. threads > 1 parallelizes the
// quadrature accumulation with a deterministic block reduction.
ProjectedKernelMatrix project_kernel(const GradientFn& gradient, int m,
                                     const Eigen::MatrixXd& design,
                                     const DomainBounds& bounds,
                                     const KernelConfig& config,
                                     int threads = 1);

// project_kernel for gradients whose components may be linearly dependent as
// functions of x (components proportional to one another, exactly zero, or
// confined to a low-dimensional function space, as happens for low-degree
// polynomial surrogates with many parameters). The projection depends only on
// the span of the components, so a maximal numerically independent subset is
// chosen by a rank-revealing factorization on the projection's own quadrature
// nodes and the kernel is built from that subset; `retained` lists the
// surviving component indices (0-based, ascending). An empty subset degrades
// to the unprojected kernel plus nugget.
struct SpanProjection {
  ProjectedKernelMatrix kernel;
  std::vector<int> retained;
};

SpanProjection project_kernel_span(const GradientFn& gradient, int m,
                                   const Eigen::MatrixXd& design,
                                   const DomainBounds& bounds,
                                   const KernelConfig& config, int threads = 1);

// r^T (matrix)^{-1} r through the cached factorization; >= 0.
double quadratic_form(const ProjectedKernelMatrix& pk,
                      const Eigen::VectorXd& residual);

}  // namespace pocal
