#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mml/common.hpp"
#include "mml/feature_vector.hpp"
#include "mml/glocal.hpp"
#include "mml/surf.hpp"
#include "mml/text.hpp"

namespace mml::harness {

struct ExperimentConfig {
  std::vector<FeatureSpace> spaces = {FeatureSpace::BoVW, FeatureSpace::Places,
                                      FeatureSpace::Azure, FeatureSpace::Text};
  bool fusion = true;
  uint64_t seed = 0;
  int jobs = 1;
  bool fast_leaky = false;  // fit vocab/dicts/embeddings once on all profiles
  std::string out_dir = "out";
  bool timing = false;      // include wall-clock times in report.json
  bool plots = false;

  surf::SurfParams surf_params;        // octaves 2, threshold 2e-4, keep 0.8
  int vocab_k = 256;
  double vocab_fraction = 0.30;
  double tag_min_score = 0.0;
  text::SkipgramConfig skipgram;       // dim 128, window 5, negatives 5, ...
  glocal::GlocalHyperparams glocal_hp; // k 4, g 3, lambda 1/.125/.01/.01

  std::vector<FeatureSpace> evaluated_spaces() const {
    std::vector<FeatureSpace> out = spaces;
    if (fusion) out.push_back(FeatureSpace::Fusion);
    return out;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config: key \"" + key + "\" expects a boolean, got \"" + v + "\"");
}

inline std::vector<std::string> split_csv(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

}  // namespace detail

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
  using detail::parse_bool;
  auto as_int = [&]() { return std::stoi(value); };
  auto as_double = [&]() { return std::stod(value); };
  auto as_u64 = [&]() { return static_cast<uint64_t>(std::stoull(value)); };

  if (key == "spaces") {
    cfg.spaces.clear();
    for (const auto& name : detail::split_csv(value)) {
      const FeatureSpace s = feature_space_from_name(name);
      if (s == FeatureSpace::Fusion)
        cfg.fusion = true;
      else
        cfg.spaces.push_back(s);
    }
  } else if (key == "fusion") cfg.fusion = parse_bool(value, key);
  else if (key == "seed") cfg.seed = as_u64();
  else if (key == "jobs") cfg.jobs = as_int();
  else if (key == "fast_leaky") cfg.fast_leaky = parse_bool(value, key);
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "timing") cfg.timing = parse_bool(value, key);
  else if (key == "plots") cfg.plots = parse_bool(value, key);
  else if (key == "surf.octaves") cfg.surf_params.octaves = as_int();
  else if (key == "surf.threshold") cfg.surf_params.threshold = as_double();
  else if (key == "surf.keep") cfg.surf_params.keep_fraction = as_double();
  else if (key == "surf.upright") cfg.surf_params.upright = parse_bool(value, key);
  else if (key == "vocab.k") cfg.vocab_k = as_int();
  else if (key == "vocab.fraction") cfg.vocab_fraction = as_double();
  else if (key == "tags.min_score") cfg.tag_min_score = as_double();
  else if (key == "text.dim") cfg.skipgram.dim = as_int();
  else if (key == "text.window") cfg.skipgram.window = as_int();
  else if (key == "text.negatives") cfg.skipgram.negatives = as_int();
  else if (key == "text.epochs") cfg.skipgram.epochs = as_int();
  else if (key == "text.min_count") cfg.skipgram.min_count = as_int();
  else if (key == "text.learning_rate") cfg.skipgram.learning_rate = as_double();
  else if (key == "glocal.k") cfg.glocal_hp.k = as_int();
  else if (key == "glocal.g") cfg.glocal_hp.g = as_int();
  else if (key == "glocal.lambda1") cfg.glocal_hp.lambda1 = as_double();
  else if (key == "glocal.lambda2") cfg.glocal_hp.lambda2 = as_double();
  else if (key == "glocal.lambda3") cfg.glocal_hp.lambda3 = as_double();
  else if (key == "glocal.lambda4") cfg.glocal_hp.lambda4 = as_double();
  else if (key == "glocal.z_rank") cfg.glocal_hp.z_rank = as_int();
  else if (key == "glocal.max_sweeps") cfg.glocal_hp.max_sweeps = as_int();
  else if (key == "glocal.tol") cfg.glocal_hp.tol = as_double();
  else throw ValidationError("config: unknown key \"" + key + "\"");
}

// flat "key = value" file, '#' starts a comment
inline ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path.string());
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config: line " + std::to_string(lineno) + " has no '='");
    apply_config_entry(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace mml::harness
