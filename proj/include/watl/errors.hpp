#pragma once

#include <stdexcept>

namespace watl {

// Covariance matrix is not positive definite and no ridge was requested.
class singular_matrix_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Local kernel window carries no usable mass: all mass sits at one point or
// the bandwidth is too small for the design.
class degenerate_window_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset ingestion failure; the message carries file and line context.
class parse_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace watl
