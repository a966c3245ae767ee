#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mml/bovw.hpp"
#include "mml/config.hpp"
#include "mml/dataset.hpp"
#include "mml/fusion.hpp"
#include "mml/glocal.hpp"
#include "mml/image_io.hpp"
#include "mml/metrics.hpp"
#include "mml/stats.hpp"
#include "mml/surf.hpp"
#include "mml/tags.hpp"
#include "mml/text.hpp"

namespace mml::harness {

inline const std::vector<std::string>& metric_order() {
  static const std::vector<std::string> kOrder = {"rkl", "auc", "cvg", "ap", "hl", "jsc"};
  return kOrder;
}

struct MetricRecord {
  std::string metric;
  double value = std::numeric_limits<double>::quiet_NaN();
  int n_excluded = 0;
  std::string notes;

  bool operator==(const MetricRecord& o) const {
    const bool same_value = value == o.value || (std::isnan(value) && std::isnan(o.value));
    return metric == o.metric && same_value && n_excluded == o.n_excluded && notes == o.notes;
  }
};

struct SpaceResult {
  FeatureSpace space = FeatureSpace::BoVW;
  int dim = 0;
  std::vector<MetricRecord> pooled;     // headline numbers, metric_order()
  std::vector<MetricRecord> fold_mean;  // Student-t aggregation across folds
  std::map<std::string, double> fold_ci;
  std::map<std::string, int> fold_used;
  int excluded_label_folds = 0;
  std::vector<uint64_t> component_checksums;  // per fold; differ when training sets differ
  std::vector<double> objective_trace;        // first fold's solver trace
  double seconds = 0.0;                       // wall clock; excluded from comparisons

  bool operator==(const SpaceResult& o) const {
    return space == o.space && dim == o.dim && pooled == o.pooled && fold_mean == o.fold_mean &&
           fold_ci == o.fold_ci && fold_used == o.fold_used &&
           excluded_label_folds == o.excluded_label_folds &&
           component_checksums == o.component_checksums && objective_trace == o.objective_trace;
  }
};

struct EvaluationReport {
  int n_folds = 0;
  uint64_t seed = 0;
  bool leaky = false;
  std::vector<SpaceResult> spaces;

  bool operator==(const EvaluationReport& o) const {
    return n_folds == o.n_folds && seed == o.seed && leaky == o.leaky && spaces == o.spaces;
  }
};

// ------------------------------------------------------------------ inputs

struct PipelineInputs {
  bovw::DescriptorStore descriptors;
  std::map<std::string, std::vector<surf::Keypoint>> keypoints;
  std::map<std::string, std::vector<tags::TagObservation>> azure;  // profile id -> observations
  std::map<std::string, std::vector<tags::TagObservation>> places;
  std::vector<std::vector<std::string>> tokens;  // per profile index
  bool has_descriptors = false, has_azure = false, has_places = false, has_text = false;
};

// SURF over every image; jobs > 1 parallelizes per image with results
// placed by index, so output is identical to a sequential run.
inline void extract_all_descriptors(const Dataset& ds, const surf::SurfParams& params, int jobs,
                                    bovw::DescriptorStore& store,
                                    std::map<std::string, std::vector<surf::Keypoint>>* keypoints) {
  struct Job {
    int profile;
    std::string image;
  };
  std::vector<Job> work;
  for (int i = 0; i < ds.size(); ++i)
    for (const auto& name : ds.profiles[static_cast<size_t>(i)].image_refs)
      work.push_back({i, name});

  std::vector<std::vector<surf::Keypoint>> kps(work.size());
  std::vector<std::vector<std::array<double, 64>>> descs(work.size());

  auto run_one = [&](size_t w) {
    const GrayImage img = load_gray_image(ds.image_path(work[w].profile, work[w].image));
    const auto extracted = surf::extract(img, params);
    for (const auto& [kp, d] : extracted) {
      kps[w].push_back(kp);
      descs[w].push_back(d.values);
    }
  };

  if (jobs <= 1) {
    for (size_t w = 0; w < work.size(); ++w) run_one(w);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&]() {
      for (size_t w = next.fetch_add(1); w < work.size(); w = next.fetch_add(1)) run_one(w);
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (size_t w = 0; w < work.size(); ++w) {
    const std::string& id = ds.profiles[static_cast<size_t>(work[w].profile)].id;
    store.add(id, work[w].image, std::move(descs[w]));
    if (keypoints) (*keypoints)[id + "/" + work[w].image] = std::move(kps[w]);
  }
}

inline PipelineInputs load_inputs(const Dataset& ds, const ExperimentConfig& cfg) {
  bool need_bovw = false, need_azure = false, need_places = false, need_text = false;
  for (FeatureSpace s : cfg.evaluated_spaces()) {
    need_bovw |= s == FeatureSpace::BoVW || s == FeatureSpace::Fusion;
    need_azure |= s == FeatureSpace::Azure || s == FeatureSpace::Fusion;
    need_places |= s == FeatureSpace::Places || s == FeatureSpace::Fusion;
    need_text |= s == FeatureSpace::Text || s == FeatureSpace::Fusion;
  }

  PipelineInputs in;
  if (need_bovw) {
    extract_all_descriptors(ds, cfg.surf_params, cfg.jobs, in.descriptors, &in.keypoints);
    in.has_descriptors = true;
  }
  if (need_azure || need_places) {
    tags::FixtureReader azure_reader(tags::TagSource::objects);
    tags::FixtureReader places_reader(tags::TagSource::scenes);
    for (int i = 0; i < ds.size(); ++i) {
      const auto& id = ds.profiles[static_cast<size_t>(i)].id;
      if (need_azure) in.azure[id] = azure_reader.observations(ds, i);
      if (need_places) in.places[id] = places_reader.observations(ds, i);
    }
    in.has_azure = need_azure;
    in.has_places = need_places;
  }
  if (need_text) {
    for (int i = 0; i < ds.size(); ++i)
      in.tokens.push_back(text::profile_tokens(ds.profiles[static_cast<size_t>(i)]));
    in.has_text = true;
  }
  return in;
}

// ------------------------------------------------------- per-fold components

struct FoldComponents {
  std::optional<bovw::Vocabulary> vocab;
  std::optional<tags::TagDictionary> azure_dict, places_dict;
  std::map<std::string, text::EmbeddingTable> text_tables;
  uint64_t checksum = 0;
};

namespace detail {

inline uint64_t matrix_checksum(const Eigen::MatrixXd& m, uint64_t h) {
  return fnv1a(m.data(), sizeof(double) * static_cast<size_t>(m.size()), h);
}

}  // namespace detail

inline FoldComponents fit_components(const Dataset& ds, const PipelineInputs& in,
                                     const ExperimentConfig& cfg, const std::vector<int>& train,
                                     uint64_t component_seed) {
  FoldComponents comps;
  uint64_t h = 0xcbf29ce484222325ULL;

  if (in.has_descriptors) {
    bovw::DescriptorStore sub;
    for (int i : train) {
      const auto& id = ds.profiles[static_cast<size_t>(i)].id;
      auto it = in.descriptors.images_of_profile.find(id);
      if (it == in.descriptors.images_of_profile.end()) continue;
      for (const auto& key : it->second)
        sub.add(id, key.substr(id.size() + 1), in.descriptors.by_image.at(key));
    }
    comps.vocab =
        bovw::build_vocabulary(sub, cfg.vocab_fraction, cfg.vocab_k, component_seed);
    h = detail::matrix_checksum(comps.vocab->centers, h);
  }
  if (in.has_azure) {
    std::vector<tags::TagObservation> all;
    for (int i : train) {
      const auto& obs = in.azure.at(ds.profiles[static_cast<size_t>(i)].id);
      all.insert(all.end(), obs.begin(), obs.end());
    }
    comps.azure_dict = tags::build_dictionary(all, tags::TagSource::objects);
    if (comps.azure_dict->size() == 0)
      throw ValidationError("training fold has no object tag observations");
    for (const auto& t : comps.azure_dict->tags) h = fnv1a(t, h);
  }
  if (in.has_places) {
    std::vector<tags::TagObservation> all;
    for (int i : train) {
      const auto& obs = in.places.at(ds.profiles[static_cast<size_t>(i)].id);
      all.insert(all.end(), obs.begin(), obs.end());
    }
    comps.places_dict = tags::build_dictionary(all, tags::TagSource::scenes);
    if (comps.places_dict->size() == 0)
      throw ValidationError("training fold has no scene tag observations");
    for (const auto& t : comps.places_dict->tags) h = fnv1a(t, h);
  }
  if (in.has_text) {
    text::SkipgramConfig scfg = cfg.skipgram;
    scfg.seed = component_seed;
    std::map<std::string, std::vector<std::vector<std::string>>> corpora;
    for (int i : train) {
      const auto& rec = ds.profiles[static_cast<size_t>(i)];
      for (const auto& cap : rec.captions) {
        auto toks = text::tokenize(cap.text, cap.hashtags);
        if (!toks.empty()) corpora[rec.region].push_back(std::move(toks));
      }
    }
    for (auto& [region, corpus] : corpora) {
      text::SkipgramConfig rcfg = scfg;
      rcfg.seed = mix_seed(scfg.seed, fnv1a(region));
      comps.text_tables[region] = text::train_skipgram(corpus, rcfg);
      h = detail::matrix_checksum(comps.text_tables[region].vectors, h);
    }
  }
  comps.checksum = h;
  return comps;
}

inline FeatureVector space_vector(const Dataset& ds, const PipelineInputs& in,
                                  const FoldComponents& comps, const ExperimentConfig& cfg,
                                  int profile, FeatureSpace space) {
  const auto& rec = ds.profiles[static_cast<size_t>(profile)];
  switch (space) {
    case FeatureSpace::BoVW:
      return bovw::encode(in.descriptors.profile_descriptors(rec.id), *comps.vocab);
    case FeatureSpace::Azure:
      return tags::object_histogram(in.azure.at(rec.id), *comps.azure_dict, nullptr,
                                    cfg.tag_min_score);
    case FeatureSpace::Places:
      return tags::scene_histogram(in.places.at(rec.id), *comps.places_dict);
    case FeatureSpace::Text: {
      auto it = comps.text_tables.find(rec.region);
      if (it == comps.text_tables.end()) {
        FeatureVector fv;
        fv.space = FeatureSpace::Text;
        fv.values = Eigen::VectorXd::Zero(cfg.skipgram.dim);
        fv.degenerate = true;  // region absent from the training corpus
        return fv;
      }
      return text::user_vector(in.tokens[static_cast<size_t>(profile)], it->second);
    }
    case FeatureSpace::Fusion: {
      std::map<FeatureSpace, FeatureVector> parts;
      for (FeatureSpace s : {FeatureSpace::BoVW, FeatureSpace::Places, FeatureSpace::Azure,
                             FeatureSpace::Text})
        parts[s] = space_vector(ds, in, comps, cfg, profile, s);
      return fuse(parts, rec.id);
    }
  }
  throw ValidationError("space_vector: unknown space");
}

// --------------------------------------------------------------------- LOSO

namespace detail {

struct PooledAccumulator {
  Eigen::MatrixXd scores;
  Eigen::MatrixXi pred;
  std::map<std::string, std::vector<double>> fold_values;
};

inline int space_salt(FeatureSpace s) { return static_cast<int>(s) + 1; }

}  // namespace detail

// Leave-one-subject-out: every profile serves once as the test fold;
// vocabularies, tag dictionaries and embedding tables are refit per fold
// from the training profiles only (unless cfg.fast_leaky).
inline EvaluationReport run_loso(const Dataset& ds, const ExperimentConfig& cfg) {
  const int n = ds.size();
  if (n < 3) throw ValidationError("run_loso: need at least 3 profiles");

  const PipelineInputs in = load_inputs(ds, cfg);
  const auto spaces = cfg.evaluated_spaces();
  const Eigen::MatrixXi& truth = ds.label_matrix;

  EvaluationReport report;
  report.n_folds = n;
  report.seed = cfg.seed;
  report.leaky = cfg.fast_leaky;

  std::map<FeatureSpace, detail::PooledAccumulator> pooled;
  std::map<FeatureSpace, SpaceResult> results;
  for (FeatureSpace s : spaces) {
    pooled[s].scores = Eigen::MatrixXd::Zero(kNumLabels, n);
    pooled[s].pred = Eigen::MatrixXi::Constant(kNumLabels, n, -1);
    results[s].space = s;
  }

  std::optional<FoldComponents> shared;
  if (cfg.fast_leaky) {
    std::vector<int> all(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
    shared = fit_components(ds, in, cfg, all, mix_seed(cfg.seed, 0xA11));
  }

  for (int fold = 0; fold < n; ++fold) {
    std::vector<int> train;
    train.reserve(static_cast<size_t>(n) - 1);
    for (int i = 0; i < n; ++i)
      if (i != fold) train.push_back(i);

    const FoldComponents comps =
        shared ? *shared : fit_components(ds, in, cfg, train, mix_seed(cfg.seed, static_cast<uint64_t>(fold)));

    // labels with no positive training instance are dropped for this fold
    std::vector<int> kept_labels;
    for (int j = 0; j < kNumLabels; ++j) {
      bool any = false;
      for (int i : train) any |= truth(j, i) == 1;
      if (any) kept_labels.push_back(j);
    }

    for (FeatureSpace s : spaces) {
      const auto started = std::chrono::steady_clock::now();
      auto& res = results[s];
      auto& acc = pooled[s];

      std::vector<FeatureVector> train_features;
      train_features.reserve(train.size());
      for (int i : train) train_features.push_back(space_vector(ds, in, comps, cfg, i, s));
      const FeatureVector test_feature = space_vector(ds, in, comps, cfg, fold, s);

      const int d = test_feature.dim();
      Eigen::MatrixXd X_train(d, static_cast<int>(train.size()));
      for (size_t i = 0; i < train.size(); ++i) X_train.col(static_cast<int>(i)) = train_features[i].values;
      Eigen::MatrixXd Y_train(static_cast<int>(kept_labels.size()), static_cast<int>(train.size()));
      for (size_t j = 0; j < kept_labels.size(); ++j)
        for (size_t i = 0; i < train.size(); ++i)
          Y_train(static_cast<int>(j), static_cast<int>(i)) = truth(kept_labels[j], train[i]);

      glocal::GlocalHyperparams hp = cfg.glocal_hp;
      hp.k = std::min(hp.k, static_cast<int>(kept_labels.size()));
      hp.g = std::min(hp.g, static_cast<int>(train.size()));
      hp.seed = mix_seed(cfg.seed, static_cast<uint64_t>(fold * 131 + detail::space_salt(s)));
      const glocal::GlocalModel model = glocal::train(X_train, Y_train, hp);
      const glocal::PredictionScores p = glocal::predict(model, test_feature.values);

      double min_score = p.scores.col(0).minCoeff();
      for (size_t j = 0; j < kept_labels.size(); ++j) {
        acc.scores(kept_labels[j], fold) = p.scores(static_cast<int>(j), 0);
        acc.pred(kept_labels[j], fold) = p.labels(static_cast<int>(j), 0);
      }
      // dropped labels rank strictly last and predict negative
      for (int j = 0; j < kNumLabels; ++j)
        if (std::find(kept_labels.begin(), kept_labels.end(), j) == kept_labels.end())
          acc.scores(j, fold) = min_score - 1.0;
      if (static_cast<int>(kept_labels.size()) < kNumLabels) ++res.excluded_label_folds;

      res.component_checksums.push_back(comps.checksum);
      if (fold == 0) {
        res.dim = d;
        res.objective_trace = model.objective_trace;
      }

      // per-fold metric values on the singleton test instance
      const Eigen::MatrixXd fs = acc.scores.col(fold);
      const Eigen::MatrixXi fp = acc.pred.col(fold);
      const Eigen::MatrixXi ft = truth.col(fold);
      int pos = 0, neg = 0;
      for (int j = 0; j < kNumLabels; ++j) (ft(j, 0) == 1 ? pos : neg)++;
      acc.fold_values["hl"].push_back(metrics::hamming_loss(ft, fp));
      acc.fold_values["jsc"].push_back(metrics::jaccard_score(ft, fp));
      if (pos > 0 && neg > 0) {
        acc.fold_values["rkl"].push_back(metrics::ranking_loss(fs, ft));
        acc.fold_values["auc"].push_back(metrics::auc_per_instance(fs, ft));
      }
      if (pos > 0) {
        acc.fold_values["cvg"].push_back(metrics::coverage(fs, ft));
        acc.fold_values["ap"].push_back(metrics::average_precision_per_instance(fs, ft));
      }
      res.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                         .count();
    }
  }

  for (FeatureSpace s : spaces) {
    auto& res = results[s];
    auto& acc = pooled[s];

    auto pooled_metric = [&](const std::string& name) {
      MetricRecord rec;
      rec.metric = name;
      metrics::Exclusions ex;
      try {
        if (name == "rkl") rec.value = metrics::ranking_loss(acc.scores, truth, &ex);
        else if (name == "auc") rec.value = metrics::auc_macro(acc.scores, truth, &ex);
        else if (name == "cvg") rec.value = metrics::coverage(acc.scores, truth, &ex);
        else if (name == "ap") rec.value = metrics::average_precision(acc.scores, truth, &ex);
        else if (name == "hl") rec.value = metrics::hamming_loss(truth, acc.pred);
        else if (name == "jsc") rec.value = metrics::jaccard_score(truth, acc.pred);
      } catch (const ValidationError& e) {
        rec.notes = e.what();
      }
      rec.n_excluded = ex.count;
      return rec;
    };
    for (const auto& name : metric_order()) {
      res.pooled.push_back(pooled_metric(name));

      MetricRecord fm;
      fm.metric = name;
      const auto& vals = acc.fold_values[name];
      const auto ci = stats::mean_ci95(vals);
      if (ci.n > 0) fm.value = ci.mean;
      fm.n_excluded = n - ci.n;
      res.fold_mean.push_back(fm);
      res.fold_ci[name] = ci.half_width;
      res.fold_used[name] = ci.n;
    }
    report.spaces.push_back(std::move(res));
  }
  return report;
}

}  // namespace mml::harness
