#pragma once

#include <string>

#include <Eigen/Core>

#include "mml/common.hpp"

namespace mml {

enum class FeatureSpace { BoVW, Places, Azure, Text, Fusion };

inline const char* feature_space_name(FeatureSpace s) {
  switch (s) {
    case FeatureSpace::BoVW: return "bovw";
    case FeatureSpace::Places: return "places";
    case FeatureSpace::Azure: return "azure";
    case FeatureSpace::Text: return "text";
    case FeatureSpace::Fusion: return "fusion";
  }
  return "?";
}

inline FeatureSpace feature_space_from_name(const std::string& s) {
  for (FeatureSpace fs : {FeatureSpace::BoVW, FeatureSpace::Places, FeatureSpace::Azure,
                          FeatureSpace::Text, FeatureSpace::Fusion})
    if (s == feature_space_name(fs)) return fs;
  throw ValidationError("unknown feature space: \"" + s + "\"");
}

// Paper-scale default dimensions. Tag-space dimensions are data dependent
// (dictionary sizes); these are the sizes reported for the reference data.
inline int default_space_dim(FeatureSpace s) {
  switch (s) {
    case FeatureSpace::BoVW: return 256;
    case FeatureSpace::Places: return 344;
    case FeatureSpace::Azure: return 734;
    case FeatureSpace::Text: return 128;
    case FeatureSpace::Fusion: return 256 + 344 + 734 + 128;
  }
  return 0;
}

struct FeatureVector {
  FeatureSpace space = FeatureSpace::BoVW;
  Eigen::VectorXd values;
  // set when a profile had no usable input for this space (no descriptors,
  // no known tags, no in-vocabulary tokens); the vector is then all zero
  bool degenerate = false;

  int dim() const { return static_cast<int>(values.size()); }

  bool all_finite() const { return values.allFinite(); }

  bool operator==(const FeatureVector& o) const {
    return space == o.space && degenerate == o.degenerate && values.size() == o.values.size() &&
           values == o.values;
  }
};

}  // namespace mml
