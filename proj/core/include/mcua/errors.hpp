#pragma once

#include <stdexcept>
#include <string>

namespace mcua {

// Bad arguments, bad config, contract violations. CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/rank mismatch between tensors or between a tensor and a layer.
class DimensionError : public ValidationError {
public:
  explicit DimensionError(const std::string& msg) : ValidationError(msg) {}
};

// NaN/Inf reached a place that requires finite values. CLI exit code 4.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem and format failures. CLI exit code 3.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Misuse of the autodiff tape (e.g. backward twice on one graph).
class TapeError : public std::runtime_error {
public:
  explicit TapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Every model in a roster lacked placements for an image; nothing to classify with.
class NoContextError : public std::runtime_error {
public:
  explicit NoContextError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mcua
