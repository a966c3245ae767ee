#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mml/common.hpp"
#include "mml/dataset.hpp"
#include "mml/image_io.hpp"
#include "mml/tags.hpp"

namespace mml::harness {

// Synthetic stand-in for the private profile data. A latent class per
// profile drives the label distribution (a mixture of independent
// Bernoullis - a low-rank model over the 2^5 label table), the blob style
// of its images, and the caption/tag pools, so every feature space
// carries signal about the labels.

struct SynthSpec {
  int n_profiles = 20;
  int images_per_profile = 3;
  int image_size = 96;
  int latent_classes = 3;
  std::vector<double> class_weights;  // default uniform
  Eigen::MatrixXd label_probs;        // 5 x latent_classes; default planted
  std::vector<std::string> regions = {"iran", "spain"};
  int caption_tokens = 5;
};

struct SynthResult {
  Dataset dataset;
  std::map<std::string, GrayImage> images;  // "<profile>/<image>" -> pixels
  std::map<std::string, std::vector<tags::TagObservation>> azure, places;  // per profile
  Eigen::MatrixXd planted_correlation;  // exact {-1,+1} label correlation, 5x5
  std::vector<int> latent_class;
  uint64_t seed = 0;
};

namespace detail {

inline Eigen::MatrixXd default_label_probs(int q) {
  Eigen::MatrixXd p(kNumLabels, q);
  const double base[3][5] = {{0.85, 0.75, 0.08, 0.10, 0.15},
                             {0.10, 0.15, 0.85, 0.70, 0.10},
                             {0.12, 0.10, 0.12, 0.25, 0.90}};
  for (int c = 0; c < q; ++c)
    for (int j = 0; j < kNumLabels; ++j) p(j, c) = base[c % 3][j];
  return p;
}

// exact correlation of the +-1 labels under "sample class, then labels,
// reject empty draws", by enumerating all 31 non-empty patterns
inline Eigen::MatrixXd exact_label_correlation(const Eigen::MatrixXd& probs,
                                               const std::vector<double>& weights) {
  const int q = static_cast<int>(probs.cols());
  std::array<double, 32> mixture{};
  for (int c = 0; c < q; ++c) {
    std::array<double, 32> pc{};
    double nonempty = 0.0;
    for (unsigned mask = 1; mask < 32; ++mask) {
      double p = 1.0;
      for (int j = 0; j < kNumLabels; ++j)
        p *= (mask >> j & 1u) ? probs(j, c) : 1.0 - probs(j, c);
      pc[mask] = p;
      nonempty += p;
    }
    if (nonempty <= 0.0)
      throw ValidationError("synth: latent class " + std::to_string(c) +
                            " can never produce a non-empty label set");
    for (unsigned mask = 1; mask < 32; ++mask)
      mixture[mask] += weights[static_cast<size_t>(c)] * pc[mask] / nonempty;
  }

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kNumLabels);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(kNumLabels, kNumLabels);
  for (unsigned mask = 1; mask < 32; ++mask) {
    Eigen::VectorXd s(kNumLabels);
    for (int j = 0; j < kNumLabels; ++j) s[j] = (mask >> j & 1u) ? 1.0 : -1.0;
    mean += mixture[mask] * s;
    second += mixture[mask] * s * s.transpose();
  }
  Eigen::MatrixXd cov = second - mean * mean.transpose();
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(kNumLabels, kNumLabels);
  for (int a = 0; a < kNumLabels; ++a)
    for (int b = 0; b < kNumLabels; ++b) {
      if (a == b) continue;
      const double denom = std::sqrt(cov(a, a) * cov(b, b));
      corr(a, b) = denom > 1e-15 ? cov(a, b) / denom : 0.0;
    }
  return corr;
}

inline void add_blob(GrayImage& img, double cy, double cx, double sy, double sx, double amp) {
  for (int r = 0; r < img.rows(); ++r)
    for (int c = 0; c < img.cols(); ++c) {
      const double dy = (r - cy) / sy, dx = (c - cx) / sx;
      img(r, c) += amp * std::exp(-0.5 * (dy * dy + dx * dx));
    }
}

// class 0: round blobs; class 1: strongly elongated blobs; class 2: blob
// pairs. Distinct local structure keeps the BoVW histograms separable.
inline GrayImage render_image(Rng& rng, int size, int latent) {
  GrayImage img = GrayImage::Constant(size, size, 0.08);
  const double margin = 24.0;
  const int blobs = 4;
  for (int b = 0; b < blobs; ++b) {
    const double cy = rng.uniform(margin, size - margin);
    const double cx = rng.uniform(margin, size - margin);
    switch (latent % 3) {
      case 0: {
        const double s = rng.uniform(2.2, 3.0);
        add_blob(img, cy, cx, s, s, rng.uniform(0.7, 0.95));
        break;
      }
      case 1: {
        const double sx = rng.uniform(4.6, 5.6);
        const double sy = rng.uniform(1.3, 1.7);
        const bool flip = rng.uniform() < 0.5;
        add_blob(img, cy, cx, flip ? sx : sy, flip ? sy : sx, rng.uniform(0.7, 0.95));
        break;
      }
      default: {
        const double s = rng.uniform(2.0, 2.5);
        const double angle = M_PI / 4.0 * static_cast<double>(rng.uniform_index(4));
        const double off = 3.2 * s;
        add_blob(img, cy - 0.5 * off * std::sin(angle), cx - 0.5 * off * std::cos(angle), s, s,
                 rng.uniform(0.65, 0.85));
        add_blob(img, cy + 0.5 * off * std::sin(angle), cx + 0.5 * off * std::cos(angle), s, s,
                 rng.uniform(0.45, 0.6));
        break;
      }
    }
  }
  return img.cwiseMin(1.0);
}

inline std::vector<std::string> label_word_pool(int label) {
  std::vector<std::string> pool;
  for (int i = 0; i < 10; ++i) pool.push_back(label_names()[static_cast<size_t>(label)] + std::to_string(i));
  return pool;
}

inline const std::vector<std::string>& filler_pool(const std::string& region) {
  static const std::vector<std::string> iran = {"ruz",  "khub", "donya", "روز", "دوست",
                                                "zibast"};
  static const std::vector<std::string> other = {"dia", "sol", "vida", "tarde", "amigo",
                                                 "bonito"};
  return region == "iran" ? iran : other;
}

}  // namespace detail

inline SynthResult synth_gen(const SynthSpec& spec, uint64_t seed) {
  if (spec.n_profiles < 1) throw ValidationError("synth: need at least one profile");
  if (spec.latent_classes < 1) throw ValidationError("synth: need at least one latent class");
  if (spec.regions.empty()) throw ValidationError("synth: need at least one region");

  SynthSpec s = spec;
  if (s.class_weights.empty())
    s.class_weights.assign(static_cast<size_t>(s.latent_classes),
                           1.0 / s.latent_classes);
  if (s.label_probs.size() == 0) s.label_probs = detail::default_label_probs(s.latent_classes);
  if (s.label_probs.rows() != kNumLabels || s.label_probs.cols() != s.latent_classes)
    throw ValidationError("synth: label_probs must be 5 x latent_classes");
  if ((s.label_probs.array() < 0).any() || (s.label_probs.array() > 1).any())
    throw ValidationError("synth: label probabilities must lie in [0,1]");
  if (s.label_probs.colwise().maxCoeff().minCoeff() <= 0.0)
    throw ValidationError("synth: a latent class has no possible label (infeasible spec)");

  SynthResult out;
  out.seed = seed;
  out.planted_correlation = detail::exact_label_correlation(s.label_probs, s.class_weights);
  Rng rng(seed);

  // per-label pools for azure object tags and places scenes
  std::vector<std::vector<std::string>> azure_pool, places_pool;
  for (int j = 0; j < kNumLabels; ++j) {
    std::vector<std::string> a, p;
    for (int i = 0; i < 6; ++i) a.push_back("obj" + label_names()[static_cast<size_t>(j)] + std::to_string(i));
    for (int i = 0; i < 4; ++i) p.push_back("scene" + label_names()[static_cast<size_t>(j)] + std::to_string(i));
    azure_pool.push_back(std::move(a));
    places_pool.push_back(std::move(p));
  }
  const std::vector<std::string> shared_objects = {"person", "indoor"};

  for (int i = 0; i < s.n_profiles; ++i) {
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "p%04d", i);
    ProfileRecord rec;
    rec.id = idbuf;
    rec.region = s.regions[static_cast<size_t>(i) % s.regions.size()];
    rec.gender = i % 3 == 0 ? Gender::female : (i % 3 == 1 ? Gender::male : Gender::unknown);

    // latent class, then labels with empty draws rejected and resampled
    int latent;
    {
      const double r = rng.uniform();
      double acc = 0.0;
      latent = s.latent_classes - 1;
      for (int c = 0; c < s.latent_classes; ++c) {
        acc += s.class_weights[static_cast<size_t>(c)];
        if (r < acc) {
          latent = c;
          break;
        }
      }
    }
    unsigned mask = 0;
    for (int attempt = 0; attempt < 10000 && mask == 0; ++attempt) {
      mask = 0;
      for (int j = 0; j < kNumLabels; ++j)
        if (rng.uniform() < s.label_probs(j, latent)) mask |= 1u << j;
    }
    if (mask == 0) throw std::runtime_error("synth: label rejection loop failed");
    rec.labels = GlasserLabelSet::from_mask(mask);
    out.latent_class.push_back(latent);

    std::vector<int> active;
    for (int j = 0; j < kNumLabels; ++j)
      if (rec.labels.has(j)) active.push_back(j);
    auto pick_active = [&]() {
      return active[static_cast<size_t>(rng.uniform_index(active.size()))];
    };

    std::vector<tags::TagObservation>& az = out.azure[rec.id];
    std::vector<tags::TagObservation>& pl = out.places[rec.id];
    for (int img_i = 0; img_i < s.images_per_profile; ++img_i) {
      char namebuf[16];
      std::snprintf(namebuf, sizeof(namebuf), "img_%03d.png", img_i);
      const std::string name = namebuf;
      rec.image_refs.push_back(name);
      out.images[rec.id + "/" + name] = detail::render_image(rng, s.image_size, latent);

      // caption from the active labels' word pools
      std::vector<std::string> words;
      for (int t = 0; t < s.caption_tokens; ++t) {
        const auto pool = detail::label_word_pool(pick_active());
        words.push_back(pool[static_cast<size_t>(rng.uniform_index(pool.size()))]);
      }
      const auto& filler = detail::filler_pool(rec.region);
      words.push_back(filler[static_cast<size_t>(rng.uniform_index(filler.size()))]);
      words.push_back(rec.region);
      std::string text;
      for (size_t w = 0; w < words.size(); ++w) text += (w ? " " : "") + words[w];

      Caption cap;
      cap.image = name;
      cap.text = text;
      const auto hpool = detail::label_word_pool(pick_active());
      cap.hashtags.push_back(hpool[static_cast<size_t>(rng.uniform_index(hpool.size()))]);
      if ((i + img_i) % 5 == 0)
        cap.geo = GeoTag{35.0 + rng.uniform(), 51.0 + rng.uniform()};
      rec.captions.push_back(std::move(cap));

      // azure: two object tags per active label plus one shared tag
      for (int j : active)
        for (int t = 0; t < 2; ++t)
          az.push_back(tags::make_observation(
              name,
              azure_pool[static_cast<size_t>(j)][static_cast<size_t>(rng.uniform_index(azure_pool[static_cast<size_t>(j)].size()))],
              rng.uniform(0.55, 0.95)));
      az.push_back(tags::make_observation(
          name, shared_objects[static_cast<size_t>(rng.uniform_index(shared_objects.size()))],
          rng.uniform(0.3, 0.9)));

      // places: top-3 mutually exclusive scenes from one active label
      const auto& sp = places_pool[static_cast<size_t>(pick_active())];
      const size_t first = static_cast<size_t>(rng.uniform_index(sp.size()));
      pl.push_back(tags::make_observation(name, sp[first], rng.uniform(0.35, 0.5)));
      pl.push_back(tags::make_observation(name, sp[(first + 1) % sp.size()], rng.uniform(0.2, 0.32)));
      pl.push_back(tags::make_observation(name, sp[(first + 2) % sp.size()], rng.uniform(0.1, 0.18)));
    }

    out.dataset.profiles.push_back(std::move(rec));
  }
  out.dataset.label_matrix = labels_to_matrix(out.dataset.profiles);
  return out;
}

// Writes the dataset directory layout plus a synth_truth.json record of
// the planted structure.
inline void write_dataset(const SynthResult& synth, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  for (size_t i = 0; i < synth.dataset.profiles.size(); ++i) {
    const auto& rec = synth.dataset.profiles[i];
    const fs::path dir = root / "profiles" / rec.id;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "tags");

    nlohmann::json meta;
    meta["id"] = rec.id;
    meta["region"] = rec.region;
    meta["gender"] = gender_name(rec.gender);
    meta["labels"] = rec.labels.to_names();
    std::ofstream(dir / "meta.json", std::ios::binary) << meta.dump(2) << "\n";

    nlohmann::json caps = nlohmann::json::array();
    for (const auto& cap : rec.captions) {
      nlohmann::json c;
      c["image"] = cap.image;
      c["caption"] = cap.text;
      c["hashtags"] = cap.hashtags;
      if (cap.geo)
        c["geo"] = {{"lat", cap.geo->lat}, {"lon", cap.geo->lon}};
      else
        c["geo"] = nullptr;
      caps.push_back(std::move(c));
    }
    std::ofstream(dir / "captions.json", std::ios::binary) << caps.dump(2) << "\n";

    for (const auto& name : rec.image_refs)
      save_gray_png(synth.images.at(rec.id + "/" + name), dir / "images" / name);

    auto write_tags = [&](const std::vector<tags::TagObservation>& obs, const fs::path& p) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& name : rec.image_refs) {
        nlohmann::json entry;
        entry["image"] = name;
        nlohmann::json ts = nlohmann::json::array();
        for (const auto& o : obs)
          if (o.image == name) ts.push_back({{"tag", o.tag}, {"score", o.score}});
        entry["tags"] = std::move(ts);
        arr.push_back(std::move(entry));
      }
      std::ofstream(p, std::ios::binary) << arr.dump(2) << "\n";
    };
    write_tags(synth.azure.count(rec.id) ? synth.azure.at(rec.id) : std::vector<tags::TagObservation>{},
               dir / "tags" / "azure.json");
    write_tags(synth.places.count(rec.id) ? synth.places.at(rec.id) : std::vector<tags::TagObservation>{},
               dir / "tags" / "places.json");
  }

  nlohmann::json truth;
  truth["seed"] = synth.seed;
  truth["latent_class"] = synth.latent_class;
  truth["planted_correlation"] = nlohmann::json::array();
  for (int r = 0; r < synth.planted_correlation.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < synth.planted_correlation.cols(); ++c)
      row.push_back(synth.planted_correlation(r, c));
    truth["planted_correlation"].push_back(std::move(row));
  }
  std::filesystem::create_directories(root);
  std::ofstream(root / "synth_truth.json", std::ios::binary) << truth.dump(2) << "\n";
}

}  // namespace mml::harness
