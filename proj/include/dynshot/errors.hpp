#pragma once

#include <stdexcept>
#include <string>

namespace dynshot {

// Construction or evaluation misuse of a Graph (frozen graph, unfed input, ...).
class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public GraphError {
 public:
  using GraphError::GraphError;
};

// Malformed files, inconsistent datasets, classes too small for a request.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or parameters during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dynshot
