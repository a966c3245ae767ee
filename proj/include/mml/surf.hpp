#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "mml/common.hpp"
#include "mml/integral_image.hpp"

namespace mml::surf {

// Box-filter Hessian blob detector with 64-d Haar descriptors. The base
// 9x9 filter approximates the Gaussian second derivative at sigma = 1.2;
// valid filter sizes are 9 + 6k so the three lobes stay symmetric.

struct Keypoint {
  double x = 0;            // column, sub-pixel
  double y = 0;            // row, sub-pixel
  double scale = 1.2;      // sigma = 1.2 * filter_size / 9
  double response = 0;     // det(H) approximation at the peak
  double orientation = 0;  // radians in [0, 2*pi)
};

struct SurfDescriptor {
  std::array<double, 64> values{};

  double norm() const {
    double s = 0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }
  double dot(const SurfDescriptor& o) const {
    double s = 0;
    for (int i = 0; i < 64; ++i) s += values[i] * o.values[i];
    return s;
  }
};

struct SurfParams {
  int octaves = 2;
  double threshold = 2e-4;
  double keep_fraction = 0.8;
  bool upright = false;  // skip orientation assignment
};

// Scale ladder. The base group is the classic 9/15/21/27; each further
// group is the coarse set 33/63/99/129 (the 32/64/96/128 block widths
// snapped onto the 9+6k lattice), doubled per extra group.
inline std::vector<int> pyramid_filter_sizes(int octaves) {
  if (octaves < 1) throw ValidationError("octaves must be >= 1");
  std::vector<int> offsets = {0, 1, 2, 3};
  std::vector<int> coarse = {4, 9, 15, 20};
  for (int g = 1; g < octaves; ++g) {
    offsets.insert(offsets.end(), coarse.begin(), coarse.end());
    for (int& k : coarse) k *= 2;
  }
  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
  std::vector<int> sizes;
  sizes.reserve(offsets.size());
  for (int k : offsets) sizes.push_back(9 + 6 * k);
  return sizes;
}

inline double scale_of_filter(double filter_size) { return 1.2 * filter_size / 9.0; }

// det(H) approximation per pixel, normalized by filter area so responses
// are comparable across scales. Zero outside the region where the filter
// fits entirely.
inline Eigen::MatrixXd hessian_response(const IntegralImage& ii, int filter_size) {
  if (filter_size < 9 || filter_size % 6 != 3)
    throw ValidationError("filter_size must be of the form 9 + 6k, got " +
                          std::to_string(filter_size));
  if (filter_size > ii.rows() || filter_size > ii.cols())
    throw ValidationError("filter_size " + std::to_string(filter_size) +
                          " exceeds image " + std::to_string(ii.rows()) + "x" +
                          std::to_string(ii.cols()));

  const int L = filter_size;
  const int half = (L - 1) / 2;
  const int lobe = L / 3;            // odd by construction
  const int lh = (lobe - 1) / 2;     // half of a lobe, rounded down
  const double inv_area = 1.0 / (static_cast<double>(L) * L);

  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(ii.rows(), ii.cols());
  for (int r = half; r < ii.rows() - half; ++r) {
    for (int c = half; c < ii.cols() - half; ++c) {
      // +1 / -2 / +1 lobes via "whole strip minus 3x the middle band"
      double dyy = ii.box_sum(r - half, c - lobe + 1, r + half, c + lobe - 1) -
                   3.0 * ii.box_sum(r - lh, c - lobe + 1, r + lh, c + lobe - 1);
      double dxx = ii.box_sum(r - lobe + 1, c - half, r + lobe - 1, c + half) -
                   3.0 * ii.box_sum(r - lobe + 1, c - lh, r + lobe - 1, c + lh);
      double dxy = ii.box_sum(r - lobe, c + 1, r - 1, c + lobe) +
                   ii.box_sum(r + 1, c - lobe, r + lobe, c - 1) -
                   ii.box_sum(r - lobe, c - lobe, r - 1, c - 1) -
                   ii.box_sum(r + 1, c + 1, r + lobe, c + lobe);
      dxx *= inv_area;
      dyy *= inv_area;
      dxy *= inv_area;
      resp(r, c) = dxx * dyy - 0.81 * dxy * dxy;  // (0.9 * Dxy)^2
    }
  }
  return resp;
}

namespace detail {

// Haar wavelet responses of side 2h centered at (r, c)
inline double haar_x(const IntegralImage& ii, int r, int c, int h) {
  return ii.box_sum(r - h, c, r + h - 1, c + h - 1) -
         ii.box_sum(r - h, c - h, r + h - 1, c - 1);
}

inline double haar_y(const IntegralImage& ii, int r, int c, int h) {
  return ii.box_sum(r, c - h, r + h - 1, c + h - 1) -
         ii.box_sum(r - h, c - h, r - 1, c + h - 1);
}

// reach of the descriptor sampling pattern, in pixels
inline int descriptor_margin(double scale, bool oriented) {
  const double grid = 9.5 + 1.0;  // outermost sample plus the Haar support
  const double reach = oriented ? grid * std::sqrt(2.0) : grid;
  return static_cast<int>(std::ceil(reach * scale)) + 1;
}

inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a;
}

// dominant gradient direction from Haar responses in a 6s-radius disc,
// selected with a pi/3 sliding window
inline double assign_orientation(const IntegralImage& ii, double x, double y, double scale) {
  const int s = std::max(1, static_cast<int>(std::lround(scale)));
  const int h = 2 * s;  // wavelet side 4s
  std::vector<double> dx, dy, ang;
  for (int i = -6; i <= 6; ++i) {
    for (int j = -6; j <= 6; ++j) {
      if (i * i + j * j >= 36) continue;
      const int pc = static_cast<int>(std::lround(x + i * s));
      const int pr = static_cast<int>(std::lround(y + j * s));
      const double w = std::exp(-(i * i + j * j) / (2.0 * 2.5 * 2.5));
      const double rx = w * haar_x(ii, pr, pc, h);
      const double ry = w * haar_y(ii, pr, pc, h);
      if (rx == 0.0 && ry == 0.0) continue;
      dx.push_back(rx);
      dy.push_back(ry);
      ang.push_back(wrap_angle(std::atan2(ry, rx)));
    }
  }
  if (ang.empty()) return 0.0;

  double best_mag = -1.0, best_ori = 0.0;
  for (double a0 = 0.0; a0 < 2.0 * M_PI; a0 += 0.15) {
    double sx = 0.0, sy = 0.0;
    for (size_t t = 0; t < ang.size(); ++t) {
      const double d = wrap_angle(ang[t] - a0);
      if (d < M_PI / 3.0) {
        sx += dx[t];
        sy += dy[t];
      }
    }
    const double mag = sx * sx + sy * sy;
    if (mag > best_mag) {
      best_mag = mag;
      best_ori = std::atan2(sy, sx);
    }
  }
  return wrap_angle(best_ori);
}

}  // namespace detail

// 20s x 20s oriented window, 4x4 sub-regions, 5x5 samples each; per
// sub-region (sum dx, sum dy, sum |dx|, sum |dy|), L2-normalized.
inline SurfDescriptor compute_descriptor(const IntegralImage& ii, const Keypoint& kp,
                                         bool upright = false) {
  const double s = kp.scale;
  const double ori = upright ? 0.0 : kp.orientation;
  const int margin = detail::descriptor_margin(s, !upright);
  if (kp.x < margin || kp.y < margin || kp.x > ii.cols() - 1 - margin ||
      kp.y > ii.rows() - 1 - margin)
    throw ValidationError("descriptor window out of bounds for keypoint at (" +
                          fmt_double(kp.x) + ", " + fmt_double(kp.y) + "), scale " +
                          fmt_double(s));

  const double co = std::cos(ori), si = std::sin(ori);
  const int h = std::max(1, static_cast<int>(std::lround(s)));  // wavelet side 2s
  const double gs = 3.3 * s;

  SurfDescriptor desc;
  for (int a = 0; a < 20; ++a) {
    const double u = (a - 9.5) * s;
    for (int b = 0; b < 20; ++b) {
      const double v = (b - 9.5) * s;
      const int pc = static_cast<int>(std::lround(kp.x + u * co - v * si));
      const int pr = static_cast<int>(std::lround(kp.y + u * si + v * co));
      const double rx = detail::haar_x(ii, pr, pc, h);
      const double ry = detail::haar_y(ii, pr, pc, h);
      const double w = std::exp(-(u * u + v * v) / (2.0 * gs * gs));
      const double du = w * (co * rx + si * ry);
      const double dv = w * (-si * rx + co * ry);
      const int sub = 4 * (a / 5) + (b / 5);
      desc.values[static_cast<size_t>(4 * sub) + 0] += du;
      desc.values[static_cast<size_t>(4 * sub) + 1] += dv;
      desc.values[static_cast<size_t>(4 * sub) + 2] += std::abs(du);
      desc.values[static_cast<size_t>(4 * sub) + 3] += std::abs(dv);
    }
  }
  const double n = desc.norm();
  if (n > 0)
    for (double& v : desc.values) v /= n;
  return desc;
}

// Scale-space detection: per-size response maps, strict 3x3x3 non-maximum
// suppression, quadratic sub-pixel refinement, optional orientation,
// then the strongest keep_fraction of keypoints.
inline std::vector<Keypoint> detect_keypoints(const IntegralImage& ii, const SurfParams& p) {
  if (!(p.keep_fraction > 0.0 && p.keep_fraction <= 1.0))
    throw ValidationError("keep_fraction must be in (0, 1]");

  std::vector<int> sizes;
  for (int L : pyramid_filter_sizes(p.octaves))
    if (L <= ii.rows() && L <= ii.cols()) sizes.push_back(L);
  if (sizes.size() < 3) return {};

  std::vector<Eigen::MatrixXd> maps;
  maps.reserve(sizes.size());
  for (int L : sizes) maps.push_back(hessian_response(ii, L));

  std::vector<Keypoint> found;
  for (size_t s = 1; s + 1 < sizes.size(); ++s) {
    const int half = (sizes[s] - 1) / 2;
    for (int r = half + 1; r < ii.rows() - half - 1; ++r) {
      for (int c = half + 1; c < ii.cols() - half - 1; ++c) {
        const double v = maps[s](r, c);
        if (!(v > p.threshold)) continue;
        bool is_max = true;
        for (size_t ds = s - 1; ds <= s + 1 && is_max; ++ds)
          for (int dr = -1; dr <= 1 && is_max; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
              if (ds == s && dr == 0 && dc == 0) continue;
              if (!(v > maps[ds](r + dr, c + dc))) {  // ties suppress both
                is_max = false;
                break;
              }
            }
        if (!is_max) continue;

        // quadratic refinement in (x, y, scale index), each step clamped
        // to half a sample
        Eigen::Vector3d g;
        g << (maps[s](r, c + 1) - maps[s](r, c - 1)) / 2.0,
            (maps[s](r + 1, c) - maps[s](r - 1, c)) / 2.0,
            (maps[s + 1](r, c) - maps[s - 1](r, c)) / 2.0;
        Eigen::Matrix3d H;
        const double dxx = maps[s](r, c + 1) - 2 * v + maps[s](r, c - 1);
        const double dyy = maps[s](r + 1, c) - 2 * v + maps[s](r - 1, c);
        const double dss = maps[s + 1](r, c) - 2 * v + maps[s - 1](r, c);
        const double dxy = (maps[s](r + 1, c + 1) - maps[s](r + 1, c - 1) -
                            maps[s](r - 1, c + 1) + maps[s](r - 1, c - 1)) /
                           4.0;
        const double dxs = (maps[s + 1](r, c + 1) - maps[s + 1](r, c - 1) -
                            maps[s - 1](r, c + 1) + maps[s - 1](r, c - 1)) /
                           4.0;
        const double dys = (maps[s + 1](r + 1, c) - maps[s + 1](r - 1, c) -
                            maps[s - 1](r + 1, c) + maps[s - 1](r - 1, c)) /
                           4.0;
        H << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;
        Eigen::Vector3d step = Eigen::Vector3d::Zero();
        const double det = H.determinant();
        if (std::abs(det) > 1e-30) {
          step = -H.inverse() * g;
          for (int i = 0; i < 3; ++i) step[i] = std::clamp(step[i], -0.5, 0.5);
        }

        Keypoint kp;
        kp.x = c + step[0];
        kp.y = r + step[1];
        const double fs = step[2] >= 0
                              ? sizes[s] + step[2] * (sizes[s + 1] - sizes[s])
                              : sizes[s] + step[2] * (sizes[s] - sizes[s - 1]);
        kp.scale = scale_of_filter(fs);
        kp.response = v;
        found.push_back(kp);
      }
    }
  }

  // enforce the descriptor-window margin
  std::vector<Keypoint> kept;
  for (const Keypoint& kp : found) {
    const int margin = detail::descriptor_margin(kp.scale, !p.upright);
    if (kp.x >= margin && kp.y >= margin && kp.x <= ii.cols() - 1 - margin &&
        kp.y <= ii.rows() - 1 - margin)
      kept.push_back(kp);
  }

  if (!p.upright)
    for (Keypoint& kp : kept)
      kp.orientation = detail::assign_orientation(ii, kp.x, kp.y, kp.scale);

  std::sort(kept.begin(), kept.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.scale < b.scale;
  });
  const size_t keep = static_cast<size_t>(
      std::ceil(p.keep_fraction * static_cast<double>(kept.size())));
  kept.resize(std::min(kept.size(), keep));
  return kept;
}

inline std::vector<Keypoint> detect_keypoints(const IntegralImage& ii, int octaves,
                                              double threshold, double keep_fraction,
                                              bool upright = false) {
  return detect_keypoints(ii, SurfParams{octaves, threshold, keep_fraction, upright});
}

// full per-image pipeline: detect, then describe every surviving keypoint
inline std::vector<std::pair<Keypoint, SurfDescriptor>> extract(const GrayImage& img,
                                                                const SurfParams& p) {
  IntegralImage ii(img);
  std::vector<std::pair<Keypoint, SurfDescriptor>> out;
  for (const Keypoint& kp : detect_keypoints(ii, p))
    out.emplace_back(kp, compute_descriptor(ii, kp, p.upright));
  return out;
}

}  // namespace mml::surf
