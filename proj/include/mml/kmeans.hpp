#pragma once

#include <limits>
#include <vector>

#include <Eigen/Core>

#include "mml/common.hpp"

namespace mml {

struct KMeansResult {
  Eigen::MatrixXd centers;            // k x d
  std::vector<int> assignment;        // per point, nearest center (ties: lowest index)
  std::vector<double> inertia_trace;  // total squared distance after each assignment pass
  int iterations = 0;
};

// Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed
// seed. Empty clusters are re-seeded at the point farthest from its
// assigned center.
inline KMeansResult kmeans(const Eigen::MatrixXd& points, int k, uint64_t seed,
                           int max_iter = 100, double tol = 1e-6) {
  const int n = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());
  if (k < 1) throw ValidationError("kmeans: k must be >= 1");
  if (n < k)
    throw ValidationError("kmeans: need at least k=" + std::to_string(k) + " points, got " +
                          std::to_string(n));

  Rng rng(seed);
  Eigen::MatrixXd centers(k, d);

  // k-means++ seeding
  std::vector<double> d2(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
  centers.row(0) = points.row(static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n))));
  for (int j = 1; j < k; ++j) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dist = (points.row(i) - centers.row(j - 1)).squaredNorm();
      d2[static_cast<size_t>(i)] = std::min(d2[static_cast<size_t>(i)], dist);
      total += d2[static_cast<size_t>(i)];
    }
    int pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2[static_cast<size_t>(i)];
        if (acc > r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n)));
    }
    centers.row(j) = points.row(pick);
  }

  KMeansResult res;
  res.assignment.assign(static_cast<size_t>(n), 0);

  auto assign_pass = [&]() {
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = (points.row(i) - centers.row(0)).squaredNorm();
      for (int j = 1; j < k; ++j) {
        const double dist = (points.row(i) - centers.row(j)).squaredNorm();
        if (dist < bd) {
          bd = dist;
          best = j;
        }
      }
      res.assignment[static_cast<size_t>(i)] = best;
      inertia += bd;
    }
    res.inertia_trace.push_back(inertia);
  };

  double shift = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter && shift >= tol; ++it) {
    assign_pass();
    res.iterations = it + 1;

    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, d);
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      next.row(res.assignment[static_cast<size_t>(i)]) += points.row(i);
      counts[static_cast<size_t>(res.assignment[static_cast<size_t>(i)])]++;
    }
    std::vector<bool> claimed(static_cast<size_t>(n), false);
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<size_t>(j)] > 0) {
        next.row(j) /= counts[static_cast<size_t>(j)];
        continue;
      }
      // re-seed at the farthest point not already claimed by another
      // empty cluster this round
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (claimed[static_cast<size_t>(i)]) continue;
        const double dist =
            (points.row(i) - centers.row(res.assignment[static_cast<size_t>(i)])).squaredNorm();
        if (dist > far_d) {
          far_d = dist;
          far = i;
        }
      }
      next.row(j) = points.row(far);
      claimed[static_cast<size_t>(far)] = true;
      res.assignment[static_cast<size_t>(far)] = j;
    }

    shift = 0.0;
    for (int j = 0; j < k; ++j)
      shift = std::max(shift, (next.row(j) - centers.row(j)).norm());
    centers = next;
  }

  // keep the returned assignment consistent with the returned centers
  if (shift > 0.0) assign_pass();
  res.centers = centers;
  return res;
}

}  // namespace mml
