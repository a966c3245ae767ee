#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "mml/common.hpp"
#include "mml/kmeans.hpp"

namespace mml::glocal {

// Multi-label learner: low-rank label factorization Y ~ UV with a linear
// feature map V ~ W^T X, plus learned global and per-group label
// correlation factors Z_m. Trained by block-coordinate descent.

struct GlocalHyperparams {
  int k = 4;               // latent label dimension
  int g = 3;               // instance groups
  double lambda1 = 1.0;    // ||V - W^T X||^2 weight
  double lambda2 = 0.125;  // Frobenius regularizer weight
  double lambda3 = 0.01;   // global correlation weight
  double lambda4 = 0.01;   // local correlation weight
  int z_rank = 0;          // columns of each Z_m; 0 means k
  int max_sweeps = 200;
  double tol = 1e-6;       // relative objective decrease per sweep
  uint64_t seed = 0;

  int rank() const { return z_rank > 0 ? z_rank : k; }
};

struct GlocalModel {
  Eigen::MatrixXd U;               // labels x k
  Eigen::MatrixXd V;               // k x n
  Eigen::MatrixXd W;               // d x k
  std::vector<Eigen::MatrixXd> Z;  // g matrices, labels x rank, unit-norm rows
  std::vector<int> group_of;       // instance -> group
  Eigen::MatrixXd J;               // labels x n observation indicator (0/1)
  GlocalHyperparams hp;
  std::vector<double> objective_trace;  // after init, then after each sweep
  std::vector<std::string> warnings;

  int labels() const { return static_cast<int>(U.rows()); }
  int instances() const { return static_cast<int>(V.cols()); }
  int groups() const { return static_cast<int>(Z.size()); }
};

struct ObjectiveTerms {
  double reconstruction = 0;
  double feature_fit = 0;
  double global_corr = 0;
  double local_corr = 0;
  double regularizer = 0;
  double total = 0;
};

struct PredictionScores {
  Eigen::MatrixXd scores;  // labels x instances
  Eigen::MatrixXi labels;  // {-1,+1}, never an all-negative column
};

enum class Block { U, V, W, Z };

// k-means over instance columns; groups are guaranteed non-empty by
// moving the nearest instances out of larger groups if needed.
inline std::vector<int> partition_groups(const Eigen::MatrixXd& X, int g, uint64_t seed) {
  const int n = static_cast<int>(X.cols());
  if (g < 1 || g > n)
    throw ValidationError("partition_groups: need 1 <= g <= n, got g=" + std::to_string(g) +
                          ", n=" + std::to_string(n));
  KMeansResult km = kmeans(X.transpose(), g, seed);
  std::vector<int> group = km.assignment;

  std::vector<int> sizes(static_cast<size_t>(g), 0);
  for (int m : group) sizes[static_cast<size_t>(m)]++;
  for (int m = 0; m < g; ++m) {
    while (sizes[static_cast<size_t>(m)] == 0) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (sizes[static_cast<size_t>(group[static_cast<size_t>(i)])] <= 1) continue;
        const double d = (X.col(i) - km.centers.row(m).transpose()).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      if (best < 0) throw std::runtime_error("partition_groups: cannot fill empty group");
      sizes[static_cast<size_t>(group[static_cast<size_t>(best)])]--;
      group[static_cast<size_t>(best)] = m;
      sizes[static_cast<size_t>(m)]++;
    }
  }
  return group;
}

namespace detail {

inline void check_shapes(const GlocalModel& model, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Y) {
  if (Y.rows() != model.U.rows() || Y.cols() != model.V.cols() || X.cols() != Y.cols() ||
      X.rows() != model.W.rows() || model.U.cols() != model.V.rows() ||
      model.W.cols() != model.U.cols() || model.J.rows() != Y.rows() ||
      model.J.cols() != Y.cols())
    throw ValidationError("glocal: shape mismatch between model, X and Y");
}

inline std::vector<std::vector<int>> group_columns(const std::vector<int>& group_of, int g) {
  std::vector<std::vector<int>> cols(static_cast<size_t>(g));
  for (size_t i = 0; i < group_of.size(); ++i)
    cols[static_cast<size_t>(group_of[i])].push_back(static_cast<int>(i));
  return cols;
}

inline void renormalize_rows(Eigen::MatrixXd& Z) {
  for (int r = 0; r < Z.rows(); ++r) {
    const double norm = Z.row(r).norm();
    if (norm > 0)
      Z.row(r) /= norm;
    else
      Z(r, 0) = 1.0;  // degenerate row; any unit vector satisfies the constraint
  }
}

}  // namespace detail

inline ObjectiveTerms objective_terms(const GlocalModel& model, const Eigen::MatrixXd& X,
                                      const Eigen::MatrixXd& Y) {
  detail::check_shapes(model, X, Y);
  const auto& hp = model.hp;
  const int n = model.instances();
  const int g = model.groups();

  ObjectiveTerms t;
  t.reconstruction = (model.J.array() * (Y - model.U * model.V).array()).matrix().squaredNorm();
  const Eigen::MatrixXd P = model.W.transpose() * X;  // k x n
  t.feature_fit = hp.lambda1 * (model.V - P).squaredNorm();
  const Eigen::MatrixXd F0 = model.U * P;  // labels x n

  const auto cols = detail::group_columns(model.group_of, g);
  for (int m = 0; m < g; ++m) {
    const auto n_m = static_cast<double>(cols[static_cast<size_t>(m)].size());
    const Eigen::MatrixXd ZtF0 = model.Z[static_cast<size_t>(m)].transpose() * F0;
    t.global_corr += (hp.lambda3 * n_m / n) * ZtF0.squaredNorm();
    double local = 0.0;
    for (int c : cols[static_cast<size_t>(m)])
      local += (model.Z[static_cast<size_t>(m)].transpose() * F0.col(c)).squaredNorm();
    t.local_corr += hp.lambda4 * local;
  }
  t.regularizer = hp.lambda2 * (model.U.squaredNorm() + model.V.squaredNorm() +
                                model.W.squaredNorm());
  t.total = t.reconstruction + t.feature_fit + t.global_corr + t.local_corr + t.regularizer;
  return t;
}

inline double objective(const GlocalModel& model, const Eigen::MatrixXd& X,
                        const Eigen::MatrixXd& Y) {
  return objective_terms(model, X, Y).total;
}

// Analytic gradient of the full objective with respect to one block, the
// others held fixed. For Z the gradient is of the unconstrained
// objective; the unit-row constraint is enforced by the update.
inline Eigen::MatrixXd gradient(const GlocalModel& model, const Eigen::MatrixXd& X,
                                const Eigen::MatrixXd& Y, Block block, int m = -1) {
  detail::check_shapes(model, X, Y);
  const auto& hp = model.hp;
  const int n = model.instances();
  const int g = model.groups();
  const auto cols = detail::group_columns(model.group_of, g);

  const Eigen::MatrixXd P = model.W.transpose() * X;  // k x n

  if (block == Block::V) {
    const Eigen::MatrixXd R = (model.J.array() * (Y - model.U * model.V).array()).matrix();
    return -2.0 * model.U.transpose() * R + 2.0 * hp.lambda1 * (model.V - P) +
           2.0 * hp.lambda2 * model.V;
  }

  const Eigen::MatrixXd F0 = model.U * P;
  // A F0 + lambda4 * (per-column S_m F0), shared by the U and W gradients
  Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(model.labels(), n);
  for (int gm = 0; gm < g; ++gm) {
    const auto n_m = static_cast<double>(cols[static_cast<size_t>(gm)].size());
    const Eigen::MatrixXd S = model.Z[static_cast<size_t>(gm)] *
                              model.Z[static_cast<size_t>(gm)].transpose();
    corr += (hp.lambda3 * n_m / n) * S * F0;
    for (int c : cols[static_cast<size_t>(gm)]) corr.col(c) += hp.lambda4 * (S * F0.col(c));
  }

  switch (block) {
    case Block::U: {
      const Eigen::MatrixXd R = (model.J.array() * (Y - model.U * model.V).array()).matrix();
      return -2.0 * R * model.V.transpose() + 2.0 * corr * P.transpose() +
             2.0 * hp.lambda2 * model.U;
    }
    case Block::W:
      return -2.0 * hp.lambda1 * X * (model.V - P).transpose() +
             2.0 * X * corr.transpose() * model.U + 2.0 * hp.lambda2 * model.W;
    case Block::Z: {
      if (m < 0 || m >= g) throw ValidationError("gradient: Z block needs a group index");
      const auto n_m = static_cast<double>(cols[static_cast<size_t>(m)].size());
      Eigen::MatrixXd FFt = (hp.lambda3 * n_m / n) * (F0 * F0.transpose());
      if (hp.lambda4 != 0.0) {
        Eigen::MatrixXd Fm(model.labels(), cols[static_cast<size_t>(m)].size());
        int idx = 0;
        for (int c : cols[static_cast<size_t>(m)]) Fm.col(idx++) = F0.col(c);
        FFt += hp.lambda4 * (Fm * Fm.transpose());
      }
      return 2.0 * FFt * model.Z[static_cast<size_t>(m)];
    }
    default:
      throw ValidationError("gradient: unknown block");
  }
}

// (U, V) from the truncated SVD of Y, W from ridge regression of V on X,
// Z from seeded unit-norm random rows, J all ones.
inline GlocalModel init_model(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                              const GlocalHyperparams& hp,
                              const std::vector<int>* groups = nullptr) {
  const int l = static_cast<int>(Y.rows());
  const int n = static_cast<int>(Y.cols());
  if (X.cols() != n) throw ValidationError("init_model: X and Y disagree on instance count");
  if (hp.k < 1 || hp.k > l)
    throw ValidationError("init_model: need 1 <= k <= labels");
  if (hp.g < 1 || hp.g > n) throw ValidationError("init_model: need 1 <= g <= n");
  if (hp.lambda1 < 0 || hp.lambda2 < 0 || hp.lambda3 < 0 || hp.lambda4 < 0)
    throw ValidationError("init_model: trade-off weights must be non-negative");

  GlocalModel model;
  model.hp = hp;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > sv[0] * 1e-12) ++rank;
  int k = hp.k;
  if (k > rank) {
    model.warnings.push_back("k=" + std::to_string(k) + " exceeds rank(Y)=" +
                             std::to_string(rank) + "; shrinking");
    k = std::max(1, rank);
    model.hp.k = k;
    if (model.hp.z_rank == 0) model.hp.z_rank = hp.rank();  // keep the requested Z rank
  }
  const Eigen::VectorXd root = sv.head(k).array().sqrt();
  model.U = svd.matrixU().leftCols(k) * root.asDiagonal();
  model.V = root.asDiagonal() * svd.matrixV().leftCols(k).transpose();

  // ridge: (X X^T + lambda2 I) W = X V^T
  const double ridge = std::max(hp.lambda2, 1e-12);
  Eigen::MatrixXd gram = X * X.transpose();
  gram.diagonal().array() += ridge;
  model.W = gram.ldlt().solve(X * model.V.transpose());

  model.group_of = groups ? *groups : partition_groups(X, hp.g, hp.seed);

  Rng rng(mix_seed(hp.seed, 0x5A5Au));
  const int r = model.hp.rank();
  for (int m = 0; m < hp.g; ++m) {
    Eigen::MatrixXd Zm(l, r);
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < r; ++j) Zm(i, j) = rng.normal();
    detail::renormalize_rows(Zm);
    model.Z.push_back(std::move(Zm));
  }
  model.J = Eigen::MatrixXd::Ones(l, n);
  return model;
}

namespace detail {

inline void check_finite(const GlocalModel& model, int sweep) {
  auto bad = [&](const Eigen::MatrixXd& mat) { return !mat.allFinite(); };
  const char* block = nullptr;
  if (bad(model.U)) block = "U";
  else if (bad(model.V)) block = "V";
  else if (bad(model.W)) block = "W";
  else
    for (size_t m = 0; m < model.Z.size() && !block; ++m)
      if (bad(model.Z[m])) block = "Z";
  if (block)
    throw std::runtime_error("glocal: NaN in block " + std::string(block) + " at sweep " +
                             std::to_string(sweep));
}

}  // namespace detail

// Block-coordinate descent, sweep order V, U, W, then each Z_m. V, U, W
// take Armijo backtracking gradient steps; Z_m takes a projected step
// (row renormalization) accepted only if the objective does not increase,
// halving up to 20 times before skipping.
inline GlocalModel train(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                         const GlocalHyperparams& hp) {
  if (!X.allFinite() || !Y.allFinite())
    throw std::runtime_error("glocal: NaN in block input at sweep 0");
  GlocalModel model = init_model(X, Y, hp);
  const int g = model.groups();

  double f_cur = objective(model, X, Y);
  model.objective_trace.push_back(f_cur);

  constexpr double kArmijoC = 1e-4;
  double step_u = 1.0, step_v = 1.0, step_w = 1.0;
  std::vector<double> step_z(static_cast<size_t>(g), 1.0);

  auto armijo_update = [&](Eigen::MatrixXd& blockref, Block which, double& step0) {
    const Eigen::MatrixXd grad = gradient(model, X, Y, which);
    const double g2 = grad.squaredNorm();
    if (g2 < 1e-30) return;
    const Eigen::MatrixXd saved = blockref;
    double t = step0;
    for (int halvings = 0; halvings < 60; ++halvings) {
      blockref = saved - t * grad;
      const double f_new = objective(model, X, Y);
      if (f_new <= f_cur - kArmijoC * t * g2) {
        f_cur = f_new;
        step0 = t * 2.0;
        return;
      }
      t *= 0.5;
    }
    blockref = saved;  // no acceptable step; leave the block unchanged
  };

  for (int sweep = 1; sweep <= hp.max_sweeps; ++sweep) {
    const double f_prev = f_cur;

    armijo_update(model.V, Block::V, step_v);
    armijo_update(model.U, Block::U, step_u);
    armijo_update(model.W, Block::W, step_w);

    for (int m = 0; m < g; ++m) {
      const Eigen::MatrixXd grad = gradient(model, X, Y, Block::Z, m);
      if (grad.squaredNorm() < 1e-30) continue;
      auto& Zm = model.Z[static_cast<size_t>(m)];
      const Eigen::MatrixXd saved = Zm;
      double t = step_z[static_cast<size_t>(m)];
      bool accepted = false;
      for (int halvings = 0; halvings < 20 && !accepted; ++halvings) {
        Zm = saved - t * grad;
        detail::renormalize_rows(Zm);
        const double f_new = objective(model, X, Y);
        if (f_new <= f_cur) {  // projected step must not increase the objective
          f_cur = f_new;
          step_z[static_cast<size_t>(m)] = t * 2.0;
          accepted = true;
        } else {
          t *= 0.5;
        }
      }
      if (!accepted) Zm = saved;
    }

    detail::check_finite(model, sweep);
    model.objective_trace.push_back(f_cur);
    if (f_prev - f_cur < hp.tol * std::max(1.0, std::abs(f_prev))) break;
  }
  return model;
}

// F = U W^T X. Labels are +1 for strictly positive scores; an
// all-negative column falls back to its top-scoring label so predictions
// are never empty.
inline PredictionScores predict(const GlocalModel& model, const Eigen::MatrixXd& X_new) {
  if (X_new.rows() != model.W.rows())
    throw ValidationError("predict: feature dimension " + std::to_string(X_new.rows()) +
                          " does not match model (" + std::to_string(model.W.rows()) + ")");
  PredictionScores out;
  out.scores = model.U * (model.W.transpose() * X_new);
  out.labels = Eigen::MatrixXi::Constant(out.scores.rows(), out.scores.cols(), -1);
  for (int i = 0; i < out.scores.cols(); ++i) {
    bool any = false;
    for (int j = 0; j < out.scores.rows(); ++j) {
      if (out.scores(j, i) > 0.0) {  // ties at zero stay negative
        out.labels(j, i) = 1;
        any = true;
      }
    }
    if (!any) {
      int best = 0;
      for (int j = 1; j < out.scores.rows(); ++j)
        if (out.scores(j, i) > out.scores(best, i)) best = j;
      out.labels(best, i) = 1;
    }
  }
  return out;
}

}  // namespace mml::glocal
