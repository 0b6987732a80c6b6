#pragma once

#include <stdexcept>
#include <string>

namespace rtsim {

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid geometry: degenerate triangles, non-finite coordinates, bad indices,
/// non-orthonormal rotations, empty meshes where one is required.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file content (PLY, DPF1, JSON documents, X3D).
class FormatError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Merged scan has no points left after table removal.
class EmptyScanError : public Error {
 public:
  using Error::Error;
};

class ReconstructionError : public Error {
 public:
  using Error::Error;
};

class QualityError : public Error {
 public:
  using Error::Error;
};

/// A joint value outside its legal interval.
class LimitError : public Error {
 public:
  LimitError(std::string joint, double requested, double min, double max)
      : Error("joint '" + joint + "' value " + std::to_string(requested) +
              " outside [" + std::to_string(min) + ", " + std::to_string(max) + "]"),
        joint_(std::move(joint)),
        requested_(requested),
        min_(min),
        max_(max) {}

  const std::string& joint() const noexcept { return joint_; }
  double requested() const noexcept { return requested_; }
  double min() const noexcept { return min_; }
  double max() const noexcept { return max_; }

 private:
  std::string joint_;
  double requested_;
  double min_;
  double max_;
};

}  // namespace rtsim
