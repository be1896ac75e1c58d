#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace msinfer {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector2 = Eigen::Vector2d;
using Index = Eigen::Index;

inline constexpr const char* kLibraryVersion = "0.1.0";

} // namespace msinfer
