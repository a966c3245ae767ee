#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mml/common.hpp"
#include "mml/dataset.hpp"
#include "mml/feature_vector.hpp"

namespace mml::tags {

// One recognizer output for one image. Tags are case-folded on entry;
// matching is exact string equality after folding.
struct TagObservation {
  std::string image;
  std::string tag;
  double score = 0.0;

  bool operator==(const TagObservation&) const = default;
};

enum class TagSource { objects, scenes };

inline const char* tag_source_name(TagSource s) {
  return s == TagSource::objects ? "objects" : "scenes";
}

inline TagObservation make_observation(const std::string& image, const std::string& tag,
                                       double score) {
  if (tag.empty()) throw ValidationError("tag observation with empty tag for image " + image);
  if (!(score >= 0.0 && score <= 1.0))
    throw ValidationError("tag \"" + tag + "\" has score " + fmt_double(score) +
                          " outside [0,1]");
  return TagObservation{image, ascii_lower(tag), score};
}

// Sorted, duplicate-free tag list; the index of a tag is stable across
// runs and processes.
struct TagDictionary {
  TagSource source = TagSource::objects;
  std::vector<std::string> tags;

  int size() const { return static_cast<int>(tags.size()); }

  int index_of(const std::string& tag) const {
    auto it = std::lower_bound(tags.begin(), tags.end(), tag);
    if (it == tags.end() || *it != tag) return -1;
    return static_cast<int>(it - tags.begin());
  }

  bool operator==(const TagDictionary&) const = default;
};

inline TagDictionary build_dictionary(const std::vector<TagObservation>& observations,
                                      TagSource source,
                                      std::vector<std::string>* warnings = nullptr) {
  TagDictionary dict;
  dict.source = source;
  std::set<std::string> uniq;
  for (const auto& obs : observations) uniq.insert(obs.tag);
  dict.tags.assign(uniq.begin(), uniq.end());
  if (dict.tags.empty() && warnings)
    warnings->push_back(std::string("empty ") + tag_source_name(source) + " tag dictionary");
  return dict;
}

namespace detail {

inline FeatureVector normalized_histogram(Eigen::VectorXd mass, FeatureSpace space) {
  FeatureVector fv;
  fv.space = space;
  const double total = mass.sum();
  if (total <= 0.0) {
    fv.values = Eigen::VectorXd::Zero(mass.size());
    fv.degenerate = true;
  } else {
    fv.values = mass / total;
  }
  return fv;
}

}  // namespace detail

// Count-based histogram over object tags (one occurrence per observation),
// L1-normalized. Observations whose tag is absent from the dictionary are
// dropped with a warning. min_score optionally discards low-confidence
// observations before counting (off by default).
inline FeatureVector object_histogram(const std::vector<TagObservation>& observations,
                                      const TagDictionary& dict,
                                      std::vector<std::string>* warnings = nullptr,
                                      double min_score = 0.0) {
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(dict.size());
  for (const auto& obs : observations) {
    if (obs.score < min_score) continue;
    const int idx = dict.index_of(obs.tag);
    if (idx < 0) {
      if (warnings) warnings->push_back("unknown tag \"" + obs.tag + "\" dropped");
      continue;
    }
    mass[idx] += 1.0;
  }
  return detail::normalized_histogram(std::move(mass), FeatureSpace::Azure);
}

// Scene predictions are mutually exclusive, so each observation
// contributes its score rather than a unit count.
inline FeatureVector scene_histogram(const std::vector<TagObservation>& observations,
                                     const TagDictionary& dict,
                                     std::vector<std::string>* warnings = nullptr) {
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(dict.size());
  for (const auto& obs : observations) {
    const int idx = dict.index_of(obs.tag);
    if (idx < 0) {
      if (warnings) warnings->push_back("unknown tag \"" + obs.tag + "\" dropped");
      continue;
    }
    mass[idx] += obs.score;
  }
  return detail::normalized_histogram(std::move(mass), FeatureSpace::Places);
}

// Abstraction over the external recognizer services. Only offline
// implementations ship: a fixture-file reader and a deterministic mock.
class RecognizerClient {
 public:
  virtual ~RecognizerClient() = default;
  // observations for one profile, in a deterministic order
  virtual std::vector<TagObservation> observations(const Dataset& ds, int profile) const = 0;
};

// Reads <root>/profiles/<id>/tags/azure.json or places.json:
//   [{"image": str, "tags": [{"tag": str, "score": float}, ...]}, ...]
class FixtureReader : public RecognizerClient {
 public:
  explicit FixtureReader(TagSource source) : source_(source) {}

  std::vector<TagObservation> observations(const Dataset& ds, int profile) const override {
    const auto& rec = ds.profiles[static_cast<size_t>(profile)];
    const std::filesystem::path p = ds.root / "profiles" / rec.id / "tags" /
                                    (source_ == TagSource::objects ? "azure.json" : "places.json");
    if (!std::filesystem::exists(p))
      throw ValidationError("missing tag fixture " + p.string());
    const nlohmann::json j = mml::detail::read_json_file(p);
    if (!j.is_array()) throw ValidationError("tag fixture must be an array: " + p.string());
    std::vector<TagObservation> out;
    for (const auto& entry : j) {
      const std::string image = entry.value("image", std::string());
      for (const auto& t : entry.value("tags", nlohmann::json::array()))
        out.push_back(make_observation(image, t.at("tag").get<std::string>(),
                                       t.at("score").get<double>()));
    }
    return out;
  }

 private:
  TagSource source_;
};

// Hash-based stand-in for tests: tags depend only on (seed, profile id,
// image name), so repeated calls agree.
class MockRecognizer : public RecognizerClient {
 public:
  MockRecognizer(TagSource source, uint64_t seed, int tags_per_image = 3,
                 int vocabulary_size = 16)
      : source_(source), seed_(seed), per_image_(tags_per_image), vocab_(vocabulary_size) {}

  std::vector<TagObservation> observations(const Dataset& ds, int profile) const override {
    const auto& rec = ds.profiles[static_cast<size_t>(profile)];
    std::vector<TagObservation> out;
    for (const auto& image : rec.image_refs) {
      Rng rng(mix_seed(seed_, fnv1a(rec.id + "/" + image)));
      for (int t = 0; t < per_image_; ++t) {
        const int id = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(vocab_)));
        const double score = 0.05 + 0.9 * rng.uniform();
        out.push_back(make_observation(
            image, std::string(tag_source_name(source_)) + "_" + std::to_string(id), score));
      }
    }
    return out;
  }

 private:
  TagSource source_;
  uint64_t seed_;
  int per_image_;
  int vocab_;
};

}  // namespace mml::tags
