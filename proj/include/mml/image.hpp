#pragma once

#include <Eigen/Core>

namespace mml {

// Grayscale image, (row, col) indexed. Ingestion produces intensities in
// [0, 1] (8-bit gray / 255); the vision code itself is range-agnostic.
using GrayImage = Eigen::MatrixXd;

}  // namespace mml
