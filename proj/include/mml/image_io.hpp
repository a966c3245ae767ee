#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Core>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "mml/common.hpp"
#include "mml/image.hpp"

namespace mml {
// Files are decoded to 8-bit gray; color never crosses this boundary.

inline GrayImage load_gray_image(const std::filesystem::path& p) {
  cv::Mat m = cv::imread(p.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw std::runtime_error("cannot decode image: " + p.string());
  GrayImage img(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) img(r, c) = m.at<uint8_t>(r, c) / 255.0;
  return img;
}

inline bool image_readable(const std::filesystem::path& p) {
  cv::Mat m = cv::imread(p.string(), cv::IMREAD_GRAYSCALE);
  return !m.empty();
}

inline void save_gray_png(const GrayImage& img, const std::filesystem::path& p) {
  cv::Mat m(static_cast<int>(img.rows()), static_cast<int>(img.cols()), CV_8UC1);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      double v = std::clamp(img(r, c), 0.0, 1.0);
      m.at<uint8_t>(r, c) = static_cast<uint8_t>(std::lround(v * 255.0));
    }
  if (!cv::imwrite(p.string(), m))
    throw std::runtime_error("cannot write image: " + p.string());
}

}  // namespace mml
