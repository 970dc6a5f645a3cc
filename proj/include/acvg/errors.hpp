#pragma once

#include <stdexcept>
#include <string>

namespace acvg {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/shape contract violations (mismatched extents, bad ranks).
struct ShapeError : Error {
  using Error::Error;
};

// Impossible geometry (non-integral conv output, indivisible pooling extent).
struct GeometryError : Error {
  using Error::Error;
};

// Autodiff misuse: backward on a detached tensor or on an already-consumed graph.
struct GraphError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// Optimizer stepped with missing gradients.
struct GradError : Error {
  using Error::Error;
};

// Dataset generation/ingestion problems.
struct DataError : Error {
  using Error::Error;
};

// On-disk format problems (bad magic, truncation).
struct FormatError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Action provider exhausted or misused.
struct ProviderError : Error {
  using Error::Error;
};

// Evaluation window does not fit the available clip.
struct WindowError : Error {
  using Error::Error;
};

// Required checkpoint missing or unusable.
struct CheckpointError : Error {
  using Error::Error;
};

}  // namespace acvg
