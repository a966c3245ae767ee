#include <catch2/catch_amalgamated.hpp>

#include "mml/glocal.hpp"
#include "mml/labels.hpp"

using namespace mml;
using namespace mml::glocal;

namespace {

Eigen::MatrixXd randn(int rows, int cols, Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  return m;
}

Eigen::MatrixXd random_sign_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    bool any = false;
    for (int r = 0; r < rows; ++r) {
      m(r, c) = rng.uniform() < 0.5 ? -1.0 : 1.0;
      any |= m(r, c) > 0;
    }
    if (!any) m(static_cast<int>(rng.uniform_index(static_cast<uint64_t>(rows))), c) = 1.0;
  }
  return m;
}

GlocalModel random_model(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                         const GlocalHyperparams& hp, Rng& rng) {
  GlocalModel model = init_model(X, Y, hp);
  // move away from the SVD point so gradients are generic
  model.U += randn(model.U.rows(), model.U.cols(), rng, 0.3);
  model.V += randn(model.V.rows(), model.V.cols(), rng, 0.3);
  model.W += randn(model.W.rows(), model.W.cols(), rng, 0.3);
  return model;
}

// term-by-term evaluator with explicit loops; no shared code with the
// implementation path
double naive_objective(const GlocalModel& model, const Eigen::MatrixXd& X,
                       const Eigen::MatrixXd& Y) {
  const int l = model.labels(), n = model.instances(), k = static_cast<int>(model.U.cols());
  const int d = static_cast<int>(X.rows());
  const auto& hp = model.hp;

  double recon = 0;
  for (int j = 0; j < l; ++j)
    for (int i = 0; i < n; ++i) {
      double uv = 0;
      for (int a = 0; a < k; ++a) uv += model.U(j, a) * model.V(a, i);
      const double r = model.J(j, i) * (Y(j, i) - uv);
      recon += r * r;
    }

  double fit = 0;
  std::vector<std::vector<double>> P(static_cast<size_t>(k),
                                     std::vector<double>(static_cast<size_t>(n), 0.0));
  for (int a = 0; a < k; ++a)
    for (int i = 0; i < n; ++i) {
      double wx = 0;
      for (int p = 0; p < d; ++p) wx += model.W(p, a) * X(p, i);
      P[static_cast<size_t>(a)][static_cast<size_t>(i)] = wx;
      const double r = model.V(a, i) - wx;
      fit += r * r;
    }

  std::vector<std::vector<double>> F0(static_cast<size_t>(l),
                                      std::vector<double>(static_cast<size_t>(n), 0.0));
  for (int j = 0; j < l; ++j)
    for (int i = 0; i < n; ++i) {
      double f = 0;
      for (int a = 0; a < k; ++a) f += model.U(j, a) * P[static_cast<size_t>(a)][static_cast<size_t>(i)];
      F0[static_cast<size_t>(j)][static_cast<size_t>(i)] = f;
    }

  double global = 0, local = 0;
  const int g = model.groups();
  const int rank = static_cast<int>(model.Z[0].cols());
  for (int m = 0; m < g; ++m) {
    double n_m = 0;
    for (int i = 0; i < n; ++i)
      if (model.group_of[static_cast<size_t>(i)] == m) n_m += 1.0;
    for (int t = 0; t < rank; ++t)
      for (int i = 0; i < n; ++i) {
        double zf = 0;
        for (int j = 0; j < l; ++j)
          zf += model.Z[static_cast<size_t>(m)](j, t) * F0[static_cast<size_t>(j)][static_cast<size_t>(i)];
        global += (hp.lambda3 * n_m / n) * zf * zf;
        if (model.group_of[static_cast<size_t>(i)] == m) local += hp.lambda4 * zf * zf;
      }
  }

  double reg = 0;
  reg += model.U.array().square().sum();
  reg += model.V.array().square().sum();
  reg += model.W.array().square().sum();
  return recon + hp.lambda1 * fit + global + local + hp.lambda2 * reg;
}

}  // namespace

TEST_CASE("partition_groups basics", "[glocal]") {
  Rng rng(3);
  Eigen::MatrixXd X = randn(4, 12, rng);
  SECTION("g = 1 puts everything in one group") {
    auto p = partition_groups(X, 1, 7);
    for (int m : p) REQUIRE(m == 0);
  }
  SECTION("g = n gives singleton groups") {
    auto p = partition_groups(X, 12, 7);
    std::vector<int> counts(12, 0);
    for (int m : p) counts[static_cast<size_t>(m)]++;
    for (int c : counts) REQUIRE(c == 1);
  }
  SECTION("planted two-cluster structure recovered on >= 90% of instances") {
    const int per = 20;
    Eigen::MatrixXd planted(3, 2 * per);
    for (int i = 0; i < per; ++i) {
      planted.col(i) = Eigen::Vector3d(0, 0, 0) + Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 0.3;
      planted.col(per + i) =
          Eigen::Vector3d(8, 8, 8) + Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 0.3;
    }
    auto p = partition_groups(planted, 2, 11);
    int votes_a = 0;
    for (int i = 0; i < per; ++i) votes_a += (p[static_cast<size_t>(i)] == p[0]);
    int votes_b = 0;
    for (int i = 0; i < per; ++i) votes_b += (p[static_cast<size_t>(per + i)] != p[0]);
    REQUIRE(votes_a + votes_b >= static_cast<int>(0.9 * 2 * per));
  }
  SECTION("g > n rejected") {
    REQUIRE_THROWS_AS(partition_groups(X, 13, 7), ValidationError);
  }
}

TEST_CASE("init_model from the truncated SVD", "[glocal]") {
  Rng rng(21);
  const int l = 5, n = 20, d = 8, k = 3;
  Eigen::MatrixXd Y = randn(l, k, rng) * randn(k, n, rng);  // exactly rank k
  Eigen::MatrixXd X = randn(d, n, rng);
  GlocalHyperparams hp;
  hp.k = k;
  hp.g = 2;
  hp.seed = 5;

  auto model = init_model(X, Y, hp);
  REQUIRE((Y - model.U * model.V).norm() / Y.norm() <= 1e-8);
  for (const auto& Zm : model.Z)
    for (int r = 0; r < Zm.rows(); ++r)
      REQUIRE(Zm.row(r).norm() == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(model.J.minCoeff() == 1.0);

  SECTION("same seed, same init") {
    auto again = init_model(X, Y, hp);
    REQUIRE(model.U == again.U);
    REQUIRE(model.V == again.V);
    REQUIRE(model.W == again.W);
    for (size_t m = 0; m < model.Z.size(); ++m) REQUIRE(model.Z[m] == again.Z[m]);
  }
  SECTION("k above rank shrinks with a warning") {
    GlocalHyperparams big = hp;
    big.k = 5;  // rank(Y) == 3
    auto shrunk = init_model(X, Y, big);
    REQUIRE(shrunk.hp.k == 3);
    REQUIRE_FALSE(shrunk.warnings.empty());
  }
}

TEST_CASE("objective special values", "[glocal]") {
  Rng rng(33);
  const int l = 5, n = 12, d = 6, k = 2;
  Eigen::MatrixXd X = randn(d, n, rng);
  Eigen::MatrixXd Y = random_sign_matrix(l, n, rng);
  GlocalHyperparams hp;
  hp.k = k;
  hp.g = 2;
  hp.lambda1 = 0.7;
  hp.lambda2 = 0.3;
  hp.lambda3 = 0.2;
  hp.lambda4 = 0.9;

  SECTION("all-zero blocks leave only ||Y||^2") {
    auto model = init_model(X, Y, hp);
    model.U.setZero();
    model.V.setZero();
    model.W.setZero();
    REQUIRE(objective(model, X, Y) == Y.squaredNorm());
  }
  SECTION("exact factorization with zero weights gives zero") {
    GlocalHyperparams exact = hp;
    exact.lambda2 = exact.lambda3 = exact.lambda4 = 0.0;
    Eigen::MatrixXd U0 = randn(l, k, rng), V0 = randn(k, n, rng);
    Eigen::MatrixXd Yx = U0 * V0;
    // X with full column rank so V = W^T X is solvable exactly
    Eigen::MatrixXd Xbig = randn(n + 4, n, rng);
    auto model = init_model(Xbig, Yx, exact);
    model.U = U0;
    model.V = V0;
    model.W = Xbig.transpose()
                  .jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV)
                  .solve(V0.transpose());
    REQUIRE(objective(model, Xbig, Yx) <= 1e-18);
  }
  SECTION("matches the independent term-by-term evaluator") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
      Rng local(100 + seed);
      Eigen::MatrixXd Xs = randn(d, n, local);
      Eigen::MatrixXd Ys = random_sign_matrix(l, n, local);
      auto model = random_model(Xs, Ys, hp, local);
      const double fast = objective(model, Xs, Ys);
      const double slow = naive_objective(model, Xs, Ys);
      REQUIRE(fast == Catch::Approx(slow).epsilon(1e-10));
    }
  }
  SECTION("term breakdown sums to the total") {
    auto model = random_model(X, Y, hp, rng);
    auto t = objective_terms(model, X, Y);
    REQUIRE(t.total == Catch::Approx(t.reconstruction + t.feature_fit + t.global_corr +
                                     t.local_corr + t.regularizer));
  }
  SECTION("shape mismatch errors") {
    auto model = init_model(X, Y, hp);
    REQUIRE_THROWS_AS(objective(model, randn(d + 1, n, rng), Y), ValidationError);
  }
}

TEST_CASE("analytic gradients match finite differences", "[glocal]") {
  const int l = 5, n = 20, d = 10;
  GlocalHyperparams hp;
  hp.k = 3;
  hp.g = 3;
  hp.lambda1 = 0.8;
  hp.lambda2 = 0.15;
  hp.lambda3 = 0.3;
  hp.lambda4 = 0.45;

  for (uint64_t trial = 0; trial < 10; ++trial) {
    Rng rng(500 + trial);
    Eigen::MatrixXd X = randn(d, n, rng);
    Eigen::MatrixXd Y = random_sign_matrix(l, n, rng);
    hp.seed = trial;
    auto model = random_model(X, Y, hp, rng);

    auto fd_check = [&](Block block, int m, Eigen::MatrixXd& target) {
      const Eigen::MatrixXd analytic = gradient(model, X, Y, block, m);
      Eigen::MatrixXd fd(target.rows(), target.cols());
      for (int r = 0; r < target.rows(); ++r)
        for (int c = 0; c < target.cols(); ++c) {
          const double keep = target(r, c);
          const double h = 1e-5 * (1.0 + std::abs(keep));
          target(r, c) = keep + h;
          const double up = objective(model, X, Y);
          target(r, c) = keep - h;
          const double dn = objective(model, X, Y);
          target(r, c) = keep;
          fd(r, c) = (up - dn) / (2.0 * h);
        }
      const double rel = (analytic - fd).norm() / std::max(1e-12, fd.norm());
      REQUIRE(rel <= 1e-4);
    };

    fd_check(Block::U, -1, model.U);
    fd_check(Block::V, -1, model.V);
    fd_check(Block::W, -1, model.W);
    for (int m = 0; m < hp.g; ++m) fd_check(Block::Z, m, model.Z[static_cast<size_t>(m)]);
  }
}

TEST_CASE("zero correlation weights kill the Z gradient", "[glocal]") {
  Rng rng(9);
  GlocalHyperparams hp;
  hp.k = 2;
  hp.g = 2;
  hp.lambda3 = 0.0;
  hp.lambda4 = 0.0;
  Eigen::MatrixXd X = randn(6, 10, rng);
  Eigen::MatrixXd Y = random_sign_matrix(5, 10, rng);
  auto model = random_model(X, Y, hp, rng);
  for (int m = 0; m < 2; ++m)
    REQUIRE(gradient(model, X, Y, Block::Z, m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient vanishes at a closed-form block minimizer", "[glocal]") {
  Rng rng(71);
  const int l = 5, n = 16, d = 7, k = 3;
  GlocalHyperparams hp;
  hp.k = k;
  hp.g = 2;
  hp.lambda1 = 0.9;
  hp.lambda2 = 0.2;
  hp.lambda3 = 0.1;
  hp.lambda4 = 0.1;
  Eigen::MatrixXd X = randn(d, n, rng);
  Eigen::MatrixXd Y = random_sign_matrix(l, n, rng);
  auto model = random_model(X, Y, hp, rng);

  // V enters only reconstruction, fit and regularizer; its subproblem is
  // quadratic with the closed form (U^T U + (l1+l2) I) V = U^T Y + l1 P
  const Eigen::MatrixXd P = model.W.transpose() * X;
  Eigen::MatrixXd lhs = model.U.transpose() * model.U;
  lhs.diagonal().array() += hp.lambda1 + hp.lambda2;
  model.V = lhs.ldlt().solve(model.U.transpose() * Y + hp.lambda1 * P);

  const Eigen::MatrixXd grad = gradient(model, X, Y, Block::V);
  REQUIRE(grad.norm() <= 1e-6 * (1.0 + model.V.norm()));
}

TEST_CASE("training decreases the objective monotonically", "[glocal]") {
  Rng rng(1234);
  const int l = 5, n = 24, d = 8;
  Eigen::MatrixXd X = randn(d, n, rng);
  Eigen::MatrixXd Y = random_sign_matrix(l, n, rng);
  GlocalHyperparams hp;
  hp.k = 3;
  hp.g = 2;
  hp.max_sweeps = 40;
  hp.seed = 3;

  auto model = train(X, Y, hp);
  REQUIRE(model.objective_trace.size() >= 2);
  for (size_t i = 1; i < model.objective_trace.size(); ++i)
    REQUIRE(model.objective_trace[i] <= model.objective_trace[i - 1] + 1e-10);

  SECTION("unit-norm Z rows after training") {
    for (const auto& Zm : model.Z)
      for (int r = 0; r < Zm.rows(); ++r)
        REQUIRE(std::abs(Zm.row(r).squaredNorm() - 1.0) <= 1e-10);
  }
  SECTION("fixed seed reproduces the model bitwise") {
    auto again = train(X, Y, hp);
    REQUIRE(model.U == again.U);
    REQUIRE(model.V == again.V);
    REQUIRE(model.W == again.W);
    for (size_t m = 0; m < model.Z.size(); ++m) REQUIRE(model.Z[m] == again.Z[m]);
    REQUIRE(model.objective_trace == again.objective_trace);
  }
}

TEST_CASE("exact recovery of a rank-k label matrix", "[glocal]") {
  Rng rng(2024);
  const int l = 5, n = 20, d = 25, k = 2;
  Eigen::MatrixXd Y = randn(l, k, rng) * randn(k, n, rng);
  Eigen::MatrixXd X = randn(d, n, rng);  // full column rank, V = W^T X solvable

  GlocalHyperparams hp;
  hp.k = k;
  hp.g = 1;
  hp.lambda1 = 1.0;
  hp.lambda2 = 1e-8;
  hp.lambda3 = 0.0;
  hp.lambda4 = 0.0;
  hp.max_sweeps = 200;
  hp.tol = 1e-14;
  auto model = train(X, Y, hp);
  const double rel = (model.J.array() * (Y - model.U * model.V).array()).matrix().squaredNorm() /
                     Y.squaredNorm();
  REQUIRE(rel <= 1e-6);
}

TEST_CASE("planted label correlation shapes the ranking", "[glocal]") {
  Rng rng(777);
  const int d = 10, n_train = 80, n_test = 40;
  Eigen::VectorXd w_pair = Eigen::VectorXd::NullaryExpr(d, [&](int) { return rng.normal(); });
  std::vector<Eigen::VectorXd> w_rest;
  for (int j = 0; j < 3; ++j)
    w_rest.push_back(Eigen::VectorXd::NullaryExpr(d, [&](int) { return rng.normal(); }));

  auto make_data = [&](int n, Eigen::MatrixXd& X, Eigen::MatrixXd& Y) {
    X = randn(d, n, rng);
    Y.resize(5, n);
    for (int i = 0; i < n; ++i) {
      const double base = w_pair.dot(X.col(i));
      Y(0, i) = base > 0 ? 1.0 : -1.0;
      Y(1, i) = Y(0, i);  // label 2 copies label 1
      for (int j = 0; j < 3; ++j) Y(2 + j, i) = w_rest[static_cast<size_t>(j)].dot(X.col(i)) > 0 ? 1.0 : -1.0;
    }
  };
  Eigen::MatrixXd X_train, Y_train, X_test, Y_test;
  make_data(n_train, X_train, Y_train);
  make_data(n_test, X_test, Y_test);

  GlocalHyperparams hp;
  hp.k = 4;
  hp.g = 2;
  hp.seed = 5;
  hp.max_sweeps = 100;
  auto model = train(X_train, Y_train, hp);
  auto pred = predict(model, X_test);

  double mean2 = 0, mean_rest = 0;
  std::array<double, 3> mean_uncorr{};
  int count = 0;
  for (int i = 0; i < n_test; ++i) {
    if (Y_test(0, i) != 1.0) continue;
    ++count;
    mean2 += pred.scores(1, i);
    for (int j = 0; j < 3; ++j) mean_uncorr[static_cast<size_t>(j)] += pred.scores(2 + j, i);
  }
  REQUIRE(count > 5);
  mean2 /= count;
  for (auto& v : mean_uncorr) v /= count;
  mean_rest = *std::max_element(mean_uncorr.begin(), mean_uncorr.end());
  REQUIRE(mean2 > mean_rest);
}

TEST_CASE("NaN input aborts with a diagnostic", "[glocal]") {
  Rng rng(8);
  Eigen::MatrixXd X = randn(4, 10, rng);
  Eigen::MatrixXd Y = random_sign_matrix(5, 10, rng);
  X(2, 3) = std::numeric_limits<double>::quiet_NaN();
  GlocalHyperparams hp;
  hp.k = 2;
  hp.g = 2;
  REQUIRE_THROWS_WITH(train(X, Y, hp), Catch::Matchers::ContainsSubstring("NaN"));
}

TEST_CASE("predict thresholds and never returns empty labels", "[glocal]") {
  GlocalModel model;
  model.hp.k = 5;
  // identity-ish model so scores == X_new rows
  model.U = Eigen::MatrixXd::Identity(5, 5);
  model.W = Eigen::MatrixXd::Identity(5, 5);
  model.V = Eigen::MatrixXd::Zero(5, 1);
  model.J = Eigen::MatrixXd::Ones(5, 1);
  model.Z.push_back(Eigen::MatrixXd::Identity(5, 5));
  model.group_of = {0};

  Eigen::MatrixXd X(5, 2);
  X.col(0) << 0.3, -0.2, 0.0, 1.1, -0.7;
  X.col(1) << -1.0, -0.5, -2.0, -3.0, -0.2;
  auto pred = predict(model, X);

  Eigen::VectorXi expect0(5), expect1(5);
  expect0 << 1, -1, -1, 1, -1;    // tie at zero stays negative
  expect1 << -1, -1, -1, -1, 1;   // all-negative column falls back to the top score
  REQUIRE(pred.labels.col(0) == expect0);
  REQUIRE(pred.labels.col(1) == expect1);

  SECTION("scores are linear in the columns of X_new") {
    Rng rng(19);
    Eigen::MatrixXd A = randn(5, 3, rng), B = randn(5, 3, rng);
    auto fa = predict(model, A).scores;
    auto fb = predict(model, B).scores;
    auto fsum = predict(model, Eigen::MatrixXd(2.0 * A + 3.0 * B)).scores;
    REQUIRE((fsum - (2.0 * fa + 3.0 * fb)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("dimension mismatch errors") {
    REQUIRE_THROWS_AS(predict(model, Eigen::MatrixXd::Zero(4, 1)), ValidationError);
  }
}

TEST_CASE("predict on training data reproduces the final F0", "[glocal]") {
  Rng rng(456);
  Eigen::MatrixXd X = randn(6, 14, rng);
  Eigen::MatrixXd Y = random_sign_matrix(5, 14, rng);
  GlocalHyperparams hp;
  hp.k = 3;
  hp.g = 2;
  hp.max_sweeps = 20;
  auto model = train(X, Y, hp);

  const Eigen::MatrixXd P = model.W.transpose() * X;
  const Eigen::MatrixXd F0 = model.U * P;
  auto pred = predict(model, X);
  REQUIRE(pred.scores == F0);
}
