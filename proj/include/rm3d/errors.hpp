#pragma once

#include <stdexcept>
#include <string>

namespace rm3d {

// Fine/coarse resolutions that do not divide evenly.
class ResolutionMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Grids, channels or tensor shapes that disagree.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Scene generator could not place the requested boxes.
class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed on-disk artifact; message always names the file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Training phases invoked out of order or without their prerequisites.
class PhaseOrderError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Loss became NaN/Inf during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rm3d
