#pragma once

#include <Eigen/Core>

#include "mml/common.hpp"
#include "mml/image.hpp"

namespace mml::surf {

// Summed-area table. sums(r, c) = sum of the source over [0..r] x [0..c],
// so any rectangle sum costs four lookups. Exact for integer-valued
// sources (double accumulation is exact below 2^53).
class IntegralImage {
 public:
  explicit IntegralImage(const GrayImage& img) {
    if (img.rows() == 0 || img.cols() == 0)
      throw ValidationError("integral_image: empty image");
    sums_.resize(img.rows(), img.cols());
    for (int r = 0; r < img.rows(); ++r) {
      double row_acc = 0.0;
      for (int c = 0; c < img.cols(); ++c) {
        row_acc += img(r, c);
        sums_(r, c) = row_acc + (r > 0 ? sums_(r - 1, c) : 0.0);
      }
    }
  }

  int rows() const { return static_cast<int>(sums_.rows()); }
  int cols() const { return static_cast<int>(sums_.cols()); }
  const Eigen::MatrixXd& sums() const { return sums_; }
  double total() const { return sums_(sums_.rows() - 1, sums_.cols() - 1); }

  // Inclusive rectangle [r0..r1] x [c0..c1]; coordinates are clamped to the
  // image, an inverted rectangle sums to zero.
  double box_sum(int r0, int c0, int r1, int c1) const {
    r1 = std::min(r1, rows() - 1);
    c1 = std::min(c1, cols() - 1);
    r0 = std::max(r0, 0);
    c0 = std::max(c0, 0);
    if (r0 > r1 || c0 > c1) return 0.0;
    const double d = sums_(r1, c1);
    const double b = r0 > 0 ? sums_(r0 - 1, c1) : 0.0;
    const double c = c0 > 0 ? sums_(r1, c0 - 1) : 0.0;
    const double a = (r0 > 0 && c0 > 0) ? sums_(r0 - 1, c0 - 1) : 0.0;
    return d - b - c + a;
  }

 private:
  Eigen::MatrixXd sums_;
};

inline IntegralImage integral_image(const GrayImage& img) { return IntegralImage(img); }

}  // namespace mml::surf
