#pragma once

#include <map>
#include <string>

#include "mml/common.hpp"
#include "mml/feature_vector.hpp"

namespace mml::harness {

// Concatenation in fixed order (BoVW, Places, Azure, Text), each block
// scaled to unit L2 norm first so no single space dominates by dimension.
// Zero blocks (degenerate profiles) pass through and keep the flag.
inline FeatureVector fuse(const std::map<FeatureSpace, FeatureVector>& parts,
                          const std::string& profile_id = "") {
  static constexpr FeatureSpace kOrder[] = {FeatureSpace::BoVW, FeatureSpace::Places,
                                            FeatureSpace::Azure, FeatureSpace::Text};
  int total = 0;
  for (FeatureSpace s : kOrder) {
    auto it = parts.find(s);
    if (it == parts.end())
      throw ValidationError("fuse: profile \"" + profile_id + "\" is missing the " +
                            feature_space_name(s) + " feature space");
    total += it->second.dim();
  }
  FeatureVector out;
  out.space = FeatureSpace::Fusion;
  out.values = Eigen::VectorXd::Zero(total);
  int offset = 0;
  for (FeatureSpace s : kOrder) {
    const FeatureVector& part = parts.at(s);
    const double norm = part.values.norm();
    if (norm > 0.0)
      out.values.segment(offset, part.dim()) = part.values / norm;
    out.degenerate |= part.degenerate;
    offset += part.dim();
  }
  return out;
}

}  // namespace mml::harness
