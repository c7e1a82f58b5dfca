#include "pocal/qmc.hpp"

#include <cmath>
#include <random>

#include "pocal/errors.hpp"

namespace pocal {

namespace {

constexpr int kPrimes[] = {2,   3,   5,   7,   11,  13,  17,  19,  23,  29,
                           31,  37,  41,  43,  47,  53,  59,  61,  67,  71,
                           73,  79,  83,  89,  97,  101, 103, 107, 109, 113,
                           127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
                           179, 181, 191, 193, 197, 199, 211, 223, 227, 229};
constexpr int kMaxDim = static_cast<int>(sizeof(kPrimes) / sizeof(kPrimes[0]));

double radical_inverse(std::uint64_t k, int base) {
  const double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (k > 0) {
    r += f * static_cast<double>(k % base);
    k /= base;
    f *= inv;
  }
  return r;
}

}  // namespace

Eigen::MatrixXd halton_shifted(int n, int d, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("halton_shifted: need n >= 1");
  if (d < 1 || d > kMaxDim)
    throw std::invalid_argument("halton_shifted: dimension out of range");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd shift(d);
  for (int j = 0; j < d; ++j) shift[j] = unif(rng);

  Eigen::MatrixXd out(n, d);
  for (int j = 0; j < d; ++j) {
    const int base = kPrimes[j];
    for (int i = 0; i < n; ++i) {
      double v = radical_inverse(static_cast<std::uint64_t>(i) + 1, base) + shift[j];
      v -= std::floor(v);
      if (v >= 1.0) v = 0.0;  // guards a frac() rounding up to exactly 1
      out(i, j) = v;
    }
  }
  return out;
}

Eigen::MatrixXd scale_to_box(const Eigen::MatrixXd& unit,
                             const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper) {
  if (unit.cols() != lower.size() || lower.size() != upper.size())
    throw std::invalid_argument("scale_to_box: dimension mismatch");
  Eigen::MatrixXd out = unit;
  for (int j = 0; j < unit.cols(); ++j)
    out.col(j) = lower[j] + (upper[j] - lower[j]) * unit.col(j).array();
  return out;
}

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace pocal
