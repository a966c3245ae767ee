#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mml/bovw.hpp"
#include "mml/common.hpp"
#include "mml/feature_vector.hpp"
#include "mml/glocal.hpp"
#include "mml/surf.hpp"
#include "mml/text.hpp"

// Text formats are space-separated with %.17g-style doubles, so writes are
// byte-stable and values round-trip exactly.

namespace mml::io {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + p.string());
  return in;
}

inline std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline double to_double(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

}  // namespace detail

// ---------------------------------------------------------------- descriptors

// image <profile>/<name> <n>
// <kp_index> <x> <y> <scale> <orientation> <response> <64 values>
inline void write_descriptor_store(
    const bovw::DescriptorStore& store,
    const std::map<std::string, std::vector<surf::Keypoint>>& keypoints,
    const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "# surf descriptors: image rows are 'id x y scale orientation response v0..v63'\n";
  for (const auto& [key, descs] : store.by_image) {
    out << "image " << key << " " << descs.size() << "\n";
    const auto kp_it = keypoints.find(key);
    for (size_t i = 0; i < descs.size(); ++i) {
      surf::Keypoint kp;
      if (kp_it != keypoints.end() && i < kp_it->second.size()) kp = kp_it->second[i];
      out << i << " " << fmt_double(kp.x) << " " << fmt_double(kp.y) << " "
          << fmt_double(kp.scale) << " " << fmt_double(kp.orientation) << " "
          << fmt_double(kp.response);
      for (double v : descs[i]) out << " " << fmt_double(v);
      out << "\n";
    }
  }
}

inline bovw::DescriptorStore read_descriptor_store(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  bovw::DescriptorStore store;
  std::string line;
  std::string current_key;
  size_t expected = 0;
  std::vector<std::array<double, 64>> current;
  auto flush = [&]() {
    if (current_key.empty()) return;
    if (current.size() != expected)
      throw ValidationError("descriptor store: image " + current_key + " expected " +
                            std::to_string(expected) + " rows, got " +
                            std::to_string(current.size()));
    const auto slash = current_key.find('/');
    if (slash == std::string::npos)
      throw ValidationError("descriptor store: malformed image key " + current_key);
    store.add(current_key.substr(0, slash), current_key.substr(slash + 1), current);
    current.clear();
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = detail::fields(line);
    if (f[0] == "image") {
      if (f.size() != 3) throw ValidationError("descriptor store: malformed image line");
      flush();
      current_key = f[1];
      expected = static_cast<size_t>(std::stoull(f[2]));
    } else {
      if (f.size() != 6 + 64)
        throw ValidationError("descriptor store: keypoint row with " +
                              std::to_string(f.size()) + " fields");
      std::array<double, 64> d{};
      for (int j = 0; j < 64; ++j) d[static_cast<size_t>(j)] = detail::to_double(f[static_cast<size_t>(6 + j)]);
      current.push_back(d);
    }
  }
  flush();
  if (store.by_image.empty()) throw ValidationError("descriptor store is empty: " + path.string());
  return store;
}

// ---------------------------------------------------------------- vocabulary

inline void write_vocabulary(const bovw::Vocabulary& v, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "vocabulary " << v.k << " " << v.centers.cols() << " " << v.seed << " "
      << fmt_double(v.image_fraction) << " " << v.images_used << " " << v.iterations << "\n";
  for (int r = 0; r < v.centers.rows(); ++r) {
    for (int c = 0; c < v.centers.cols(); ++c)
      out << (c ? " " : "") << fmt_double(v.centers(r, c));
    out << "\n";
  }
}

inline bovw::Vocabulary read_vocabulary(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty vocabulary file");
  auto f = detail::fields(line);
  if (f.size() != 7 || f[0] != "vocabulary")
    throw ValidationError("malformed vocabulary header in " + path.string());
  bovw::Vocabulary v;
  v.k = std::stoi(f[1]);
  const int dim = std::stoi(f[2]);
  v.seed = std::stoull(f[3]);
  v.image_fraction = detail::to_double(f[4]);
  v.images_used = std::stoi(f[5]);
  v.iterations = std::stoi(f[6]);
  v.centers.resize(v.k, dim);
  for (int r = 0; r < v.k; ++r) {
    if (!std::getline(in, line)) throw ValidationError("vocabulary file truncated");
    auto row = detail::fields(line);
    if (static_cast<int>(row.size()) != dim)
      throw ValidationError("vocabulary row " + std::to_string(r) + " has wrong arity");
    for (int c = 0; c < dim; ++c) v.centers(r, c) = detail::to_double(row[static_cast<size_t>(c)]);
  }
  return v;
}

// ---------------------------------------------------------------- embeddings

inline void write_embedding_table(const text::EmbeddingTable& t,
                                  const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  const auto& c = t.config;
  out << "embedding " << t.dim() << " " << t.size() << " " << c.window << " " << c.negatives
      << " " << c.epochs << " " << c.min_count << " " << fmt_double(c.learning_rate) << " "
      << c.seed << "\n";
  for (int i = 0; i < t.size(); ++i) {
    out << t.vocab[static_cast<size_t>(i)] << " " << t.counts[static_cast<size_t>(i)];
    for (int j = 0; j < t.dim(); ++j) out << " " << fmt_double(t.vectors(i, j));
    out << "\n";
  }
  out << "eval_loss";
  for (double v : t.eval_loss) out << " " << fmt_double(v);
  out << "\n";
}

inline text::EmbeddingTable read_embedding_table(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty embedding file");
  auto f = detail::fields(line);
  if (f.size() != 9 || f[0] != "embedding")
    throw ValidationError("malformed embedding header in " + path.string());
  text::EmbeddingTable t;
  t.config.dim = std::stoi(f[1]);
  const int vocab = std::stoi(f[2]);
  t.config.window = std::stoi(f[3]);
  t.config.negatives = std::stoi(f[4]);
  t.config.epochs = std::stoi(f[5]);
  t.config.min_count = std::stoi(f[6]);
  t.config.learning_rate = detail::to_double(f[7]);
  t.config.seed = std::stoull(f[8]);
  t.vectors.resize(vocab, t.config.dim);
  for (int i = 0; i < vocab; ++i) {
    if (!std::getline(in, line)) throw ValidationError("embedding file truncated");
    auto row = detail::fields(line);
    if (static_cast<int>(row.size()) != 2 + t.config.dim)
      throw ValidationError("embedding row " + std::to_string(i) + " has wrong arity");
    t.index[row[0]] = i;
    t.vocab.push_back(row[0]);
    t.counts.push_back(std::stoll(row[1]));
    for (int j = 0; j < t.config.dim; ++j)
      t.vectors(i, j) = detail::to_double(row[static_cast<size_t>(2 + j)]);
  }
  if (std::getline(in, line)) {
    auto row = detail::fields(line);
    if (!row.empty() && row[0] == "eval_loss")
      for (size_t i = 1; i < row.size(); ++i) t.eval_loss.push_back(detail::to_double(row[i]));
  }
  return t;
}

// ---------------------------------------------------------------- features

inline void write_features(const std::vector<std::string>& ids,
                           const std::vector<FeatureVector>& vectors,
                           const std::filesystem::path& path) {
  if (ids.size() != vectors.size())
    throw ValidationError("write_features: ids and vectors disagree");
  if (vectors.empty()) throw ValidationError("write_features: nothing to write");
  auto out = detail::open_out(path);
  out << "features " << feature_space_name(vectors[0].space) << " " << vectors[0].dim() << " "
      << vectors.size() << "\n";
  for (size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != vectors[0].dim() || vectors[i].space != vectors[0].space)
      throw ValidationError("write_features: inconsistent vectors");
    out << ids[i] << " " << (vectors[i].degenerate ? 1 : 0);
    for (int j = 0; j < vectors[i].dim(); ++j) out << " " << fmt_double(vectors[i].values[j]);
    out << "\n";
  }
}

struct FeatureFile {
  FeatureSpace space;
  std::vector<std::string> ids;
  std::vector<FeatureVector> vectors;
};

inline FeatureFile read_features(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty feature file");
  auto f = detail::fields(line);
  if (f.size() != 4 || f[0] != "features")
    throw ValidationError("malformed feature header in " + path.string());
  FeatureFile file;
  file.space = feature_space_from_name(f[1]);
  const int dim = std::stoi(f[2]);
  const int n = std::stoi(f[3]);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw ValidationError("feature file truncated");
    auto row = detail::fields(line);
    if (static_cast<int>(row.size()) != 2 + dim)
      throw ValidationError("feature row " + std::to_string(i) + " has wrong arity");
    FeatureVector fv;
    fv.space = file.space;
    fv.degenerate = row[1] == "1";
    fv.values.resize(dim);
    for (int j = 0; j < dim; ++j) fv.values[j] = detail::to_double(row[static_cast<size_t>(2 + j)]);
    file.ids.push_back(row[0]);
    file.vectors.push_back(std::move(fv));
  }
  return file;
}

// ---------------------------------------------------------------- labels

inline void write_labels(const std::vector<std::string>& ids, const Eigen::MatrixXi& labels,
                         const std::filesystem::path& path) {
  if (static_cast<int>(ids.size()) != labels.cols())
    throw ValidationError("write_labels: ids and matrix disagree");
  auto out = detail::open_out(path);
  out << "labels " << labels.rows() << " " << labels.cols() << "\n";
  for (int i = 0; i < labels.cols(); ++i) {
    out << ids[static_cast<size_t>(i)];
    for (int j = 0; j < labels.rows(); ++j) out << " " << labels(j, i);
    out << "\n";
  }
}

struct LabelFile {
  std::vector<std::string> ids;
  Eigen::MatrixXi labels;
};

inline LabelFile read_labels(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty label file");
  auto f = detail::fields(line);
  if (f.size() != 3 || f[0] != "labels")
    throw ValidationError("malformed label header in " + path.string());
  const int l = std::stoi(f[1]), n = std::stoi(f[2]);
  LabelFile file;
  file.labels.resize(l, n);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw ValidationError("label file truncated");
    auto row = detail::fields(line);
    if (static_cast<int>(row.size()) != 1 + l)
      throw ValidationError("label row " + std::to_string(i) + " has wrong arity");
    file.ids.push_back(row[0]);
    for (int j = 0; j < l; ++j) {
      const int v = std::stoi(row[static_cast<size_t>(1 + j)]);
      if (v != 1 && v != -1) throw ValidationError("label entries must be -1 or +1");
      file.labels(j, i) = v;
    }
  }
  return file;
}

// ------------------------------------------------------------------- model

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = j[static_cast<size_t>(r)][static_cast<size_t>(c)].get<double>();
  return m;
}

inline void write_model(const glocal::GlocalModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "glocal-model-v1";
  j["hyperparams"] = {{"k", model.hp.k},           {"g", model.hp.g},
                      {"lambda1", model.hp.lambda1}, {"lambda2", model.hp.lambda2},
                      {"lambda3", model.hp.lambda3}, {"lambda4", model.hp.lambda4},
                      {"z_rank", model.hp.z_rank},   {"max_sweeps", model.hp.max_sweeps},
                      {"tol", model.hp.tol},         {"seed", model.hp.seed}};
  j["shapes"] = {{"labels", model.labels()},
                 {"instances", model.instances()},
                 {"features", model.W.rows()},
                 {"groups", model.groups()}};
  j["U"] = matrix_to_json(model.U);
  j["V"] = matrix_to_json(model.V);
  j["W"] = matrix_to_json(model.W);
  nlohmann::json zs = nlohmann::json::array();
  for (const auto& Zm : model.Z) zs.push_back(matrix_to_json(Zm));
  j["Z"] = std::move(zs);
  j["group_of"] = model.group_of;
  j["objective_trace"] = model.objective_trace;
  j["warnings"] = model.warnings;
  auto out = detail::open_out(path);
  out << j.dump(2) << "\n";
}

inline glocal::GlocalModel read_model(const std::filesystem::path& path) {
  const nlohmann::json j = mml::detail::read_json_file(path);
  if (j.value("format", "") != "glocal-model-v1")
    throw ValidationError("not a glocal model file: " + path.string());
  glocal::GlocalModel model;
  const auto& hp = j.at("hyperparams");
  model.hp.k = hp.at("k").get<int>();
  model.hp.g = hp.at("g").get<int>();
  model.hp.lambda1 = hp.at("lambda1").get<double>();
  model.hp.lambda2 = hp.at("lambda2").get<double>();
  model.hp.lambda3 = hp.at("lambda3").get<double>();
  model.hp.lambda4 = hp.at("lambda4").get<double>();
  model.hp.z_rank = hp.at("z_rank").get<int>();
  model.hp.max_sweeps = hp.at("max_sweeps").get<int>();
  model.hp.tol = hp.at("tol").get<double>();
  model.hp.seed = hp.at("seed").get<uint64_t>();
  model.U = matrix_from_json(j.at("U"));
  model.V = matrix_from_json(j.at("V"));
  model.W = matrix_from_json(j.at("W"));
  for (const auto& z : j.at("Z")) model.Z.push_back(matrix_from_json(z));
  model.group_of = j.at("group_of").get<std::vector<int>>();
  model.objective_trace = j.at("objective_trace").get<std::vector<double>>();
  model.warnings = j.at("warnings").get<std::vector<std::string>>();
  model.J = Eigen::MatrixXd::Ones(model.U.rows(), model.V.cols());
  return model;
}

}  // namespace mml::io
