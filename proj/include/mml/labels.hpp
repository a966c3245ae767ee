#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mml/common.hpp"

namespace mml {

// The five needs, in fixed order. Label strings and their positions are a
// wire-format contract; serialization depends on this order.
inline const std::array<std::string, 5>& label_names() {
  static const std::array<std::string, 5> kNames = {"survival", "belonging",
                                                    "power", "freedom", "fun"};
  return kNames;
}

inline constexpr int kNumLabels = 5;

// Non-empty subset of the five labels. The empty set is rejected at every
// construction point.
class GlasserLabelSet {
 public:
  static GlasserLabelSet from_mask(unsigned mask) {
    if (mask == 0) throw ValidationError("empty label set");
    if (mask >= 32) throw ValidationError("label mask out of range");
    return GlasserLabelSet(static_cast<uint8_t>(mask));
  }

  static GlasserLabelSet from_names(const std::vector<std::string>& names) {
    unsigned mask = 0;
    for (const auto& n : names) {
      int idx = -1;
      for (int j = 0; j < kNumLabels; ++j)
        if (label_names()[j] == n) idx = j;
      if (idx < 0) throw ValidationError("unknown label name: \"" + n + "\"");
      mask |= 1u << idx;
    }
    if (mask == 0) throw ValidationError("empty label set");
    return GlasserLabelSet(static_cast<uint8_t>(mask));
  }

  // 5-character string of {0,1}, position j = label j
  static GlasserLabelSet from_bits(const std::string& bits) {
    if (bits.size() != kNumLabels)
      throw ValidationError("label bit string must have length 5, got \"" + bits + "\"");
    unsigned mask = 0;
    for (int j = 0; j < kNumLabels; ++j) {
      if (bits[j] == '1')
        mask |= 1u << j;
      else if (bits[j] != '0')
        throw ValidationError("label bit string must be over {0,1}, got \"" + bits + "\"");
    }
    if (mask == 0) throw ValidationError("empty label set");
    return GlasserLabelSet(static_cast<uint8_t>(mask));
  }

  std::string to_bits() const {
    std::string s(kNumLabels, '0');
    for (int j = 0; j < kNumLabels; ++j)
      if (has(j)) s[j] = '1';
    return s;
  }

  std::vector<std::string> to_names() const {
    std::vector<std::string> out;
    for (int j = 0; j < kNumLabels; ++j)
      if (has(j)) out.push_back(label_names()[j]);
    return out;
  }

  bool has(int j) const { return (mask_ >> j) & 1u; }
  unsigned mask() const { return mask_; }
  int count() const {
    int c = 0;
    for (int j = 0; j < kNumLabels; ++j) c += has(j);
    return c;
  }

  bool operator==(const GlasserLabelSet&) const = default;

 private:
  explicit GlasserLabelSet(uint8_t mask) : mask_(mask) {}
  uint8_t mask_;
};

// columns are instances, rows the five labels, entries in {-1,+1}
inline Eigen::MatrixXi labelsets_to_matrix(const std::vector<GlasserLabelSet>& sets) {
  if (sets.empty()) throw ValidationError("labelsets_to_matrix: empty list");
  Eigen::MatrixXi m(kNumLabels, static_cast<int>(sets.size()));
  for (int i = 0; i < m.cols(); ++i)
    for (int j = 0; j < kNumLabels; ++j)
      m(j, i) = sets[static_cast<size_t>(i)].has(j) ? 1 : -1;
  return m;
}

inline std::vector<GlasserLabelSet> matrix_to_labelsets(const Eigen::MatrixXi& m) {
  if (m.rows() != kNumLabels) throw ValidationError("label matrix must have 5 rows");
  std::vector<GlasserLabelSet> out;
  out.reserve(static_cast<size_t>(m.cols()));
  for (int i = 0; i < m.cols(); ++i) {
    unsigned mask = 0;
    for (int j = 0; j < kNumLabels; ++j) {
      if (m(j, i) == 1)
        mask |= 1u << j;
      else if (m(j, i) != -1)
        throw ValidationError("label matrix entries must be -1 or +1");
    }
    out.push_back(GlasserLabelSet::from_mask(mask));  // throws on all-negative column
  }
  return out;
}

}  // namespace mml
