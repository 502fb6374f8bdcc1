#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rieman {

using Id = std::int64_t;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using VecX = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat24 = Eigen::Matrix<double, 2, 4>;
using Mat26 = Eigen::Matrix<double, 2, 6>;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using Mat36 = Eigen::Matrix<double, 3, 6>;
using MatX = Eigen::MatrixXd;

// Base for all toolkit errors. Plain precondition violations use
// std::invalid_argument directly.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Coincident endpoints, zero direction.
class DegenerateLineError : public Error {
 public:
  using Error::Error;
};

// Line through the origin: zero moment, not representable with omega > 0.
class ThroughOriginError : public Error {
 public:
  using Error::Error;
};

// Retraction update would collapse the normal onto the direction.
class RetractionDegenerateError : public Error {
 public:
  using Error::Error;
};

// Nonpositive depth in front of a camera.
class BehindCameraError : public Error {
 public:
  using Error::Error;
};

// Projected line with vanishing image-plane normal.
class DegenerateProjectionError : public Error {
 public:
  using Error::Error;
};

// Too few samples for a well-posed estimate (alignment needs >= 3 poses).
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// Scene generator could not satisfy visibility/connectivity constraints.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// Normal equations unsolvable, or an internal solver contract violated.
class SolverError : public Error {
 public:
  using Error::Error;
};

// Graph- or config-level validation failure (dangling ids, bad values).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Validation failure with a source location in a text document.
class ParseError : public ValidationError {
 public:
  ParseError(int line, int column, const std::string& message)
      : ValidationError("line " + std::to_string(line) + ", col " +
                        std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace rieman
