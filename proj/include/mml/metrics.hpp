#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mml/common.hpp"

namespace mml::metrics {

// The six multi-label measures. Matrices are labels x instances; truth
// and thresholded predictions take values in {-1,+1}, scores are real.
// Degenerate labels or instances (no positives, or no negatives where
// needed) are excluded with a note instead of failing the evaluation.

struct Exclusions {
  int count = 0;
  std::vector<std::string> notes;

  void add(const std::string& note) {
    ++count;
    notes.push_back(note);
  }
};

namespace detail {

inline void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXi& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError("metrics: shape mismatch");
}

inline void check_same_shape(const Eigen::MatrixXi& a, const Eigen::MatrixXi& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError("metrics: shape mismatch");
}

}  // namespace detail

// fraction of label slots predicted incorrectly
inline double hamming_loss(const Eigen::MatrixXi& truth, const Eigen::MatrixXi& predicted) {
  detail::check_same_shape(truth, predicted);
  int wrong = 0;
  for (int i = 0; i < truth.cols(); ++i)
    for (int j = 0; j < truth.rows(); ++j) wrong += (truth(j, i) != predicted(j, i));
  return static_cast<double>(wrong) / (static_cast<double>(truth.rows()) * truth.cols());
}

// per-instance |pred ∩ true| / |pred ∪ true| over positive labels,
// averaged; two empty sets count as a perfect match
inline double jaccard_score(const Eigen::MatrixXi& truth, const Eigen::MatrixXi& predicted) {
  detail::check_same_shape(truth, predicted);
  double acc = 0;
  for (int i = 0; i < truth.cols(); ++i) {
    int inter = 0, uni = 0;
    for (int j = 0; j < truth.rows(); ++j) {
      const bool t = truth(j, i) == 1, p = predicted(j, i) == 1;
      inter += (t && p);
      uni += (t || p);
    }
    acc += uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
  }
  return acc / truth.cols();
}

// fraction of positive/negative label pairs ordered wrongly; a tie counts
// as a violation. Instances without negatives are excluded.
inline double ranking_loss(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& truth,
                           Exclusions* excluded = nullptr) {
  detail::check_same_shape(scores, truth);
  double acc = 0;
  int used = 0;
  for (int i = 0; i < truth.cols(); ++i) {
    std::vector<int> pos, neg;
    for (int j = 0; j < truth.rows(); ++j) (truth(j, i) == 1 ? pos : neg).push_back(j);
    if (pos.empty() || neg.empty()) {
      if (excluded)
        excluded->add("instance " + std::to_string(i) + " has no " +
                      (pos.empty() ? "positive" : "negative") + " labels");
      continue;
    }
    int violations = 0;
    for (int jp : pos)
      for (int jn : neg) violations += (scores(jp, i) <= scores(jn, i));
    acc += static_cast<double>(violations) / (static_cast<double>(pos.size()) * neg.size());
    ++used;
  }
  if (used == 0) throw ValidationError("ranking_loss: every instance is degenerate");
  return acc / used;
}

namespace detail {

// 1-based rank of each label under descending scores, ties broken by
// label index
inline std::vector<int> descending_ranks(const Eigen::MatrixXd& scores, int col) {
  const int l = static_cast<int>(scores.rows());
  std::vector<int> order(static_cast<size_t>(l));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores(a, col) != scores(b, col)) return scores(a, col) > scores(b, col);
    return a < b;
  });
  std::vector<int> rank(static_cast<size_t>(l));
  for (int r = 0; r < l; ++r) rank[static_cast<size_t>(order[static_cast<size_t>(r)])] = r + 1;
  return rank;
}

}  // namespace detail

// mean over instances of (deepest rank holding a positive label) - 1
inline double coverage(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& truth,
                       Exclusions* excluded = nullptr) {
  detail::check_same_shape(scores, truth);
  double acc = 0;
  int used = 0;
  for (int i = 0; i < truth.cols(); ++i) {
    const auto rank = detail::descending_ranks(scores, i);
    int deepest = 0;
    for (int j = 0; j < truth.rows(); ++j)
      if (truth(j, i) == 1) deepest = std::max(deepest, rank[static_cast<size_t>(j)]);
    if (deepest == 0) {
      if (excluded) excluded->add("instance " + std::to_string(i) + " has no positive labels");
      continue;
    }
    acc += deepest - 1;
    ++used;
  }
  if (used == 0) throw ValidationError("coverage: every instance is degenerate");
  return acc / used;
}

namespace detail {

// Ap = sum_i (R_i - R_{i-1}) P_i over descending score thresholds for one
// label across instances (or one instance across labels)
inline double threshold_ap(const std::vector<std::pair<double, bool>>& scored) {
  std::vector<double> thresholds;
  thresholds.reserve(scored.size());
  for (const auto& [s, _] : scored) thresholds.push_back(s);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  int total_pos = 0;
  for (const auto& [_, pos] : scored) total_pos += pos;

  double ap = 0, prev_recall = 0;
  for (double th : thresholds) {
    int tp = 0, fp = 0;
    for (const auto& [s, pos] : scored) {
      if (s >= th) (pos ? tp : fp)++;
    }
    const double recall = static_cast<double>(tp) / total_pos;
    const double precision = static_cast<double>(tp) / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

// Mann-Whitney statistic with half credit for ties
inline double pairwise_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0;
  for (double p : pos)
    for (double n : neg) {
      if (p > n)
        wins += 1.0;
      else if (p == n)
        wins += 0.5;
    }
  return wins / (static_cast<double>(pos.size()) * neg.size());
}

}  // namespace detail

// macro average over labels of the PR-curve summary; labels without
// positive instances are excluded
inline double average_precision(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& truth,
                                Exclusions* excluded = nullptr) {
  detail::check_same_shape(scores, truth);
  double acc = 0;
  int used = 0;
  for (int j = 0; j < truth.rows(); ++j) {
    std::vector<std::pair<double, bool>> scored;
    int pos = 0;
    for (int i = 0; i < truth.cols(); ++i) {
      scored.emplace_back(scores(j, i), truth(j, i) == 1);
      pos += (truth(j, i) == 1);
    }
    if (pos == 0) {
      if (excluded) excluded->add("label " + std::to_string(j) + " has no positive instances");
      continue;
    }
    acc += detail::threshold_ap(scored);
    ++used;
  }
  if (used == 0) throw ValidationError("average_precision: no label has positive instances");
  return acc / used;
}

// macro average over labels of the ROC area; labels lacking either class
// are excluded
inline double auc_macro(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& truth,
                        Exclusions* excluded = nullptr) {
  detail::check_same_shape(scores, truth);
  double acc = 0;
  int used = 0;
  for (int j = 0; j < truth.rows(); ++j) {
    std::vector<double> pos, neg;
    for (int i = 0; i < truth.cols(); ++i)
      (truth(j, i) == 1 ? pos : neg).push_back(scores(j, i));
    if (pos.empty() || neg.empty()) {
      if (excluded)
        excluded->add("label " + std::to_string(j) + " lacks " +
                      (pos.empty() ? "positives" : "negatives"));
      continue;
    }
    acc += detail::pairwise_auc(pos, neg);
    ++used;
  }
  if (used == 0) throw ValidationError("auc_macro: every label is degenerate");
  return acc / used;
}

// Per-instance variants: the ranking is over the label scores of each
// instance. Used for per-fold aggregation when test folds are singletons.
inline double average_precision_per_instance(const Eigen::MatrixXd& scores,
                                             const Eigen::MatrixXi& truth,
                                             Exclusions* excluded = nullptr) {
  detail::check_same_shape(scores, truth);
  double acc = 0;
  int used = 0;
  for (int i = 0; i < truth.cols(); ++i) {
    std::vector<std::pair<double, bool>> scored;
    int pos = 0;
    for (int j = 0; j < truth.rows(); ++j) {
      scored.emplace_back(scores(j, i), truth(j, i) == 1);
      pos += (truth(j, i) == 1);
    }
    if (pos == 0) {
      if (excluded) excluded->add("instance " + std::to_string(i) + " has no positive labels");
      continue;
    }
    acc += detail::threshold_ap(scored);
    ++used;
  }
  if (used == 0) throw ValidationError("average_precision_per_instance: all degenerate");
  return acc / used;
}

inline double auc_per_instance(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& truth,
                               Exclusions* excluded = nullptr) {
  detail::check_same_shape(scores, truth);
  double acc = 0;
  int used = 0;
  for (int i = 0; i < truth.cols(); ++i) {
    std::vector<double> pos, neg;
    for (int j = 0; j < truth.rows(); ++j)
      (truth(j, i) == 1 ? pos : neg).push_back(scores(j, i));
    if (pos.empty() || neg.empty()) {
      if (excluded) excluded->add("instance " + std::to_string(i) + " lacks a class");
      continue;
    }
    acc += detail::pairwise_auc(pos, neg);
    ++used;
  }
  if (used == 0) throw ValidationError("auc_per_instance: all degenerate");
  return acc / used;
}

}  // namespace mml::metrics
