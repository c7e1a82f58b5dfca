#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace pocal {

// Randomized low-discrepancy point set on [0,1)^d: Halton sequence under a
// Cranley-Patterson rotation drawn from `seed`. Deterministic in (n, d, seed).
Eigen::MatrixXd halton_shifted(int n, int d, std::uint64_t seed);

// Maps unit-cube rows into the box [lower, upper] componentwise.
Eigen::MatrixXd scale_to_box(const Eigen::MatrixXd& unit,
                             const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper);

// Derives an independent stream seed from a master seed (splitmix64 step).
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace pocal
