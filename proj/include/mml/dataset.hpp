#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mml/common.hpp"
#include "mml/image_io.hpp"
#include "mml/labels.hpp"

namespace mml {

enum class Gender { female, male, unknown };

inline const char* gender_name(Gender g) {
  switch (g) {
    case Gender::female: return "female";
    case Gender::male: return "male";
    case Gender::unknown: return "unknown";
  }
  return "unknown";
}

inline Gender gender_from_name(const std::string& s) {
  if (s == "female") return Gender::female;
  if (s == "male") return Gender::male;
  if (s == "unknown" || s.empty()) return Gender::unknown;
  throw ValidationError("unknown gender: \"" + s + "\"");
}

struct GeoTag {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const GeoTag&) const = default;
};

struct Caption {
  std::string image;  // file name under the profile's images/ directory
  std::string text;
  std::vector<std::string> hashtags;
  std::optional<GeoTag> geo;
  bool operator==(const Caption&) const = default;
};

struct ProfileRecord {
  std::string id;
  std::string region;  // opaque; "iran" and "spain" are the stock values
  Gender gender = Gender::unknown;
  std::vector<std::string> image_refs;  // sorted file names
  std::vector<Caption> captions;
  GlasserLabelSet labels = GlasserLabelSet::from_mask(1);

  bool operator==(const ProfileRecord&) const = default;
};

struct Dataset {
  std::vector<ProfileRecord> profiles;
  Eigen::MatrixXi label_matrix;  // 5 x n, {-1,+1}, column j <-> profiles[j]
  std::filesystem::path root;    // where image files resolve; empty for in-memory sets

  int size() const { return static_cast<int>(profiles.size()); }

  std::filesystem::path image_path(int profile, const std::string& ref) const {
    return root / "profiles" / profiles[static_cast<size_t>(profile)].id / "images" / ref;
  }

  bool operator==(const Dataset& o) const {
    return profiles == o.profiles && label_matrix.rows() == o.label_matrix.rows() &&
           label_matrix.cols() == o.label_matrix.cols() && label_matrix == o.label_matrix;
  }
};

inline Eigen::MatrixXi labels_to_matrix(const std::vector<ProfileRecord>& profiles) {
  if (profiles.empty()) throw ValidationError("labels_to_matrix: no profiles");
  std::vector<GlasserLabelSet> sets;
  sets.reserve(profiles.size());
  for (const auto& p : profiles) sets.push_back(p.labels);
  return labelsets_to_matrix(sets);
}

struct LoadReport {
  int n_profiles = 0;
  int n_images = 0;
  int n_captions = 0;
  std::vector<std::string> warnings;
  std::vector<std::string> excluded_images;  // "<profile>/<image>"

  std::string summary() const {
    return "profiles=" + std::to_string(n_profiles) + " images=" + std::to_string(n_images) +
           " captions=" + std::to_string(n_captions) +
           " warnings=" + std::to_string(warnings.size());
  }
};

struct LoadResult {
  Dataset dataset;
  LoadReport report;
};

namespace detail {

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + p.string() + ": " + e.what());
  }
  return j;
}

inline bool has_image_extension(const std::filesystem::path& p) {
  std::string ext = ascii_lower(p.extension().string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace detail

// Directory layout:
//   <root>/profiles/<id>/meta.json
//   <root>/profiles/<id>/captions.json
//   <root>/profiles/<id>/images/*.png|jpg
//   <root>/profiles/<id>/tags/azure.json, places.json   (read by the tags module)
inline LoadResult load_dataset(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  LoadResult out;
  out.dataset.root = root;

  const fs::path profiles_dir = root / "profiles";
  if (!fs::is_directory(profiles_dir))
    throw ValidationError("dataset root has no profiles/ directory: " + root.string());

  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(profiles_dir))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());

  for (const auto& dir : dirs) {
    const std::string dirname = dir.filename().string();
    const fs::path meta_path = dir / "meta.json";
    if (!fs::exists(meta_path))
      throw ValidationError("profile \"" + dirname + "\": missing meta.json");

    const nlohmann::json meta = detail::read_json_file(meta_path);
    ProfileRecord rec;
    rec.id = meta.value("id", dirname);
    if (rec.id != dirname)
      out.report.warnings.push_back("profile \"" + dirname + "\": meta id \"" + rec.id +
                                    "\" differs from directory name");
    rec.region = meta.value("region", std::string("unknown"));
    rec.gender = gender_from_name(meta.value("gender", std::string("unknown")));
    if (!meta.contains("labels") || !meta["labels"].is_array() || meta["labels"].empty())
      throw ValidationError("profile \"" + rec.id + "\": empty label set");
    try {
      rec.labels = GlasserLabelSet::from_names(meta["labels"].get<std::vector<std::string>>());
    } catch (const ValidationError& e) {
      throw ValidationError("profile \"" + rec.id + "\": " + e.what());
    }

    // images: directory scan, decode check, deterministic order
    const fs::path images_dir = dir / "images";
    std::vector<fs::path> image_files;
    if (fs::is_directory(images_dir)) {
      for (const auto& e : fs::directory_iterator(images_dir))
        if (e.is_regular_file() && detail::has_image_extension(e.path()))
          image_files.push_back(e.path());
      std::sort(image_files.begin(), image_files.end());
    }
    for (const auto& f : image_files) {
      if (image_readable(f)) {
        rec.image_refs.push_back(f.filename().string());
      } else {
        out.report.warnings.push_back("profile \"" + rec.id + "\": unreadable image " +
                                      f.filename().string() + " excluded");
        out.report.excluded_images.push_back(rec.id + "/" + f.filename().string());
      }
    }

    // captions
    const fs::path cap_path = dir / "captions.json";
    if (fs::exists(cap_path)) {
      const nlohmann::json caps = detail::read_json_file(cap_path);
      if (!caps.is_array())
        throw ValidationError("profile \"" + rec.id + "\": captions.json must be an array");
      for (const auto& c : caps) {
        Caption cap;
        cap.image = c.value("image", std::string());
        cap.text = c.value("caption", std::string());
        if (c.contains("hashtags")) cap.hashtags = c["hashtags"].get<std::vector<std::string>>();
        if (c.contains("geo") && !c["geo"].is_null()) {
          const auto& g = c["geo"];
          if (g.contains("lat") && g.contains("lon"))
            cap.geo = GeoTag{g["lat"].get<double>(), g["lon"].get<double>()};
          else
            out.report.warnings.push_back("profile \"" + rec.id +
                                          "\": geo tag without lat/lon ignored");
        }
        rec.captions.push_back(std::move(cap));
      }
    } else {
      out.report.warnings.push_back("profile \"" + rec.id + "\": no captions.json");
    }

    // orphan flagging happens here, at load time
    std::set<std::string> listed(rec.image_refs.begin(), rec.image_refs.end());
    for (const auto& cap : rec.captions)
      if (!listed.count(cap.image))
        out.report.warnings.push_back("profile \"" + rec.id + "\": caption references image \"" +
                                      cap.image + "\" which is not listed (orphaned)");

    out.report.n_images += static_cast<int>(rec.image_refs.size());
    out.report.n_captions += static_cast<int>(rec.captions.size());
    out.dataset.profiles.push_back(std::move(rec));
  }

  if (out.dataset.profiles.empty())
    throw ValidationError("dataset at " + root.string() + " has no profiles");
  out.report.n_profiles = static_cast<int>(out.dataset.profiles.size());
  out.dataset.label_matrix = labels_to_matrix(out.dataset.profiles);
  return out;
}

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Report-only; never mutates the dataset.
inline ValidationReport validate_dataset(const Dataset& d) {
  ValidationReport rep;
  std::set<std::string> seen;
  for (const auto& p : d.profiles) {
    if (!seen.insert(p.id).second)
      rep.violations.push_back("duplicate id: \"" + p.id + "\"");
    if (p.id.empty() || p.id.find_first_of(" \t\n/") != std::string::npos)
      rep.violations.push_back("profile id \"" + p.id + "\" is empty or contains separators");
    std::set<std::string> listed(p.image_refs.begin(), p.image_refs.end());
    for (const auto& cap : p.captions)
      if (!listed.count(cap.image))
        rep.violations.push_back("orphaned caption in \"" + p.id + "\": image \"" + cap.image +
                                 "\" not listed");
  }
  if (d.label_matrix.rows() != kNumLabels ||
      d.label_matrix.cols() != static_cast<int>(d.profiles.size())) {
    rep.violations.push_back("label matrix shape mismatch");
    return rep;
  }
  for (int i = 0; i < d.label_matrix.cols(); ++i) {
    bool any_pos = false;
    for (int j = 0; j < kNumLabels; ++j) {
      const int v = d.label_matrix(j, i);
      if (v != 1 && v != -1)
        rep.violations.push_back("label matrix entry (" + std::to_string(j) + "," +
                                 std::to_string(i) + ") not in {-1,+1}");
      const bool has = d.profiles[static_cast<size_t>(i)].labels.has(j);
      if ((v == 1) != has)
        rep.violations.push_back("label matrix column " + std::to_string(i) +
                                 " disagrees with profile labels at row " + std::to_string(j));
      any_pos |= (v == 1);
    }
    if (!any_pos)
      rep.violations.push_back("label matrix column " + std::to_string(i) + " is all -1");
  }
  return rep;
}

}  // namespace mml
