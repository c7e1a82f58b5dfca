#pragma once

#include <stdexcept>

namespace pocal {

// Validation problems: bad arguments, malformed files, out-of-domain requests.
// The CLI maps these to exit code 1.
struct schema_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct config_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct extrapolation_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct insufficient_data_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical failures discovered mid-computation. The CLI maps these to exit
// code 2.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct singular_projection_error : numerical_error {
  using numerical_error::numerical_error;
};
struct regularization_error : numerical_error {
  using numerical_error::numerical_error;
};
struct fit_error : numerical_error {
  using numerical_error::numerical_error;
};
struct convergence_error : numerical_error {
  using numerical_error::numerical_error;
};
struct degenerate_model_error : numerical_error {
  using numerical_error::numerical_error;
};
struct study_error : numerical_error {
  using numerical_error::numerical_error;
};

}  // namespace pocal
