#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mml/common.hpp"
#include "mml/feature_vector.hpp"
#include "mml/kmeans.hpp"

namespace mml::bovw {

constexpr int kDescriptorDim = 64;

struct Vocabulary {
  Eigen::MatrixXd centers;  // k x 64
  int k = 0;
  uint64_t seed = 0;
  // training meta
  double image_fraction = 1.0;
  int images_used = 0;
  int iterations = 0;
  std::vector<double> inertia_trace;

  bool operator==(const Vocabulary& o) const {
    return k == o.k && seed == o.seed && image_fraction == o.image_fraction &&
           images_used == o.images_used && iterations == o.iterations &&
           centers.rows() == o.centers.rows() && centers == o.centers;
  }
};

// Per-image descriptor sets, keyed "<profile_id>/<image>". std::map keeps
// every traversal order deterministic.
struct DescriptorStore {
  std::map<std::string, std::vector<std::array<double, kDescriptorDim>>> by_image;
  std::map<std::string, std::vector<std::string>> images_of_profile;

  void add(const std::string& profile, const std::string& image,
           std::vector<std::array<double, kDescriptorDim>> descs) {
    const std::string key = profile + "/" + image;
    images_of_profile[profile].push_back(key);
    by_image[key] = std::move(descs);
  }

  size_t total_descriptors() const {
    size_t t = 0;
    for (const auto& [_, v] : by_image) t += v.size();
    return t;
  }

  std::vector<std::array<double, kDescriptorDim>> profile_descriptors(
      const std::string& profile) const {
    std::vector<std::array<double, kDescriptorDim>> out;
    auto it = images_of_profile.find(profile);
    if (it == images_of_profile.end()) return out;
    for (const auto& key : it->second) {
      const auto& descs = by_image.at(key);
      out.insert(out.end(), descs.begin(), descs.end());
    }
    return out;
  }
};

inline Eigen::MatrixXd descriptor_matrix(
    const std::vector<std::array<double, kDescriptorDim>>& descs) {
  Eigen::MatrixXd m(static_cast<int>(descs.size()), kDescriptorDim);
  for (size_t i = 0; i < descs.size(); ++i)
    for (int j = 0; j < kDescriptorDim; ++j) m(static_cast<int>(i), j) = descs[i][static_cast<size_t>(j)];
  return m;
}

// k-means over pooled descriptors; duplicate centers violate the
// vocabulary contract and are reported rather than silently kept
inline Vocabulary kmeans_vocabulary(const Eigen::MatrixXd& points, int k, uint64_t seed,
                                    int max_iter = 100, double tol = 1e-6) {
  KMeansResult km = kmeans(points, k, seed, max_iter, tol);
  for (int a = 0; a < k; ++a)
    for (int b = a + 1; b < k; ++b)
      if (km.centers.row(a) == km.centers.row(b))
        throw ValidationError("vocabulary has duplicate centers (" + std::to_string(a) + ", " +
                              std::to_string(b) + "); reduce k or add more distinct descriptors");
  Vocabulary v;
  v.centers = std::move(km.centers);
  v.k = k;
  v.seed = seed;
  v.iterations = km.iterations;
  v.inertia_trace = std::move(km.inertia_trace);
  return v;
}

// Samples ceil(fraction * #images) images (uniform, seeded), pools their
// descriptors and clusters them.
inline Vocabulary build_vocabulary(const DescriptorStore& store, double image_fraction, int k,
                                   uint64_t seed, int max_iter = 100, double tol = 1e-6) {
  if (!(image_fraction > 0.0 && image_fraction <= 1.0))
    throw ValidationError("image_fraction must be in (0, 1]");
  if (store.by_image.empty()) throw ValidationError("descriptor store is empty");

  std::vector<std::string> keys;
  keys.reserve(store.by_image.size());
  for (const auto& [key, _] : store.by_image) keys.push_back(key);

  const size_t m = static_cast<size_t>(
      std::ceil(image_fraction * static_cast<double>(keys.size())));
  Rng rng(seed);
  // partial Fisher-Yates: first m entries are a uniform sample without
  // replacement
  for (size_t i = 0; i < m && i + 1 < keys.size(); ++i) {
    const size_t j = i + static_cast<size_t>(rng.uniform_index(keys.size() - i));
    std::swap(keys[i], keys[j]);
  }
  keys.resize(m);
  std::sort(keys.begin(), keys.end());

  size_t pool_size = 0;
  for (const auto& key : keys) pool_size += store.by_image.at(key).size();
  if (pool_size < static_cast<size_t>(k))
    throw ValidationError("sampled pool has " + std::to_string(pool_size) +
                          " descriptors, fewer than k=" + std::to_string(k) +
                          "; increase the image fraction");

  Eigen::MatrixXd pool(static_cast<int>(pool_size), kDescriptorDim);
  int row = 0;
  for (const auto& key : keys)
    for (const auto& desc : store.by_image.at(key)) {
      for (int j = 0; j < kDescriptorDim; ++j) pool(row, j) = desc[static_cast<size_t>(j)];
      ++row;
    }

  Vocabulary v = kmeans_vocabulary(pool, k, seed, max_iter, tol);
  v.image_fraction = image_fraction;
  v.images_used = static_cast<int>(m);
  return v;
}

// Histogram of nearest-center counts, L1-normalized. Empty input yields
// the zero vector with the degenerate flag set.
inline FeatureVector encode(const Eigen::MatrixXd& descriptors, const Vocabulary& vocab) {
  if (vocab.k < 1 || vocab.centers.rows() != vocab.k)
    throw ValidationError("encode: invalid vocabulary");
  FeatureVector fv;
  fv.space = FeatureSpace::BoVW;
  fv.values = Eigen::VectorXd::Zero(vocab.k);
  if (descriptors.rows() == 0) {
    fv.degenerate = true;
    return fv;
  }
  if (descriptors.cols() != vocab.centers.cols())
    throw ValidationError("encode: descriptor dimension " + std::to_string(descriptors.cols()) +
                          " != vocabulary dimension " + std::to_string(vocab.centers.cols()));
  for (int i = 0; i < descriptors.rows(); ++i) {
    int best = 0;
    double bd = (descriptors.row(i) - vocab.centers.row(0)).squaredNorm();
    for (int j = 1; j < vocab.k; ++j) {
      const double dist = (descriptors.row(i) - vocab.centers.row(j)).squaredNorm();
      if (dist < bd) {  // ties: lowest center index
        bd = dist;
        best = j;
      }
    }
    fv.values[best] += 1.0;
  }
  fv.values /= fv.values.sum();
  return fv;
}

inline FeatureVector encode(const std::vector<std::array<double, kDescriptorDim>>& descriptors,
                            const Vocabulary& vocab) {
  return encode(descriptor_matrix(descriptors), vocab);
}

}  // namespace mml::bovw
