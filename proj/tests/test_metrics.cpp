#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "mml/metrics.hpp"

using namespace mml;
using namespace mml::metrics;

// ---------------------------------------------------------------------------
// brute-force oracles, written independently of the implementation
// ---------------------------------------------------------------------------
namespace oracle {

double hamming(const Eigen::MatrixXi& t, const Eigen::MatrixXi& p) {
  double wrong = 0, total = 0;
  for (int i = 0; i < t.cols(); ++i)
    for (int j = 0; j < t.rows(); ++j) {
      const bool tb = t(j, i) == 1, pb = p(j, i) == 1;
      wrong += (tb != pb) ? 1 : 0;  // XOR
      total += 1;
    }
  return wrong / total;
}

double jaccard(const Eigen::MatrixXi& t, const Eigen::MatrixXi& p) {
  double acc = 0;
  for (int i = 0; i < t.cols(); ++i) {
    std::set<int> ts, ps;
    for (int j = 0; j < t.rows(); ++j) {
      if (t(j, i) == 1) ts.insert(j);
      if (p(j, i) == 1) ps.insert(j);
    }
    std::set<int> inter, uni;
    std::set_intersection(ts.begin(), ts.end(), ps.begin(), ps.end(),
                          std::inserter(inter, inter.begin()));
    std::set_union(ts.begin(), ts.end(), ps.begin(), ps.end(), std::inserter(uni, uni.begin()));
    acc += uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
  }
  return acc / t.cols();
}

// literal Q_i = {(j', j'') in C+ x C- : f_{j'} <= f_{j''}} enumeration
double ranking_loss(const Eigen::MatrixXd& f, const Eigen::MatrixXi& t) {
  double acc = 0;
  int used = 0;
  for (int i = 0; i < t.cols(); ++i) {
    std::vector<int> cpos, cneg;
    for (int j = 0; j < t.rows(); ++j) (t(j, i) == 1 ? cpos : cneg).push_back(j);
    if (cpos.empty() || cneg.empty()) continue;
    double q = 0;
    for (int jp : cpos)
      for (int jn : cneg)
        if (f(jp, i) <= f(jn, i)) q += 1;
    acc += q / (static_cast<double>(cpos.size()) * static_cast<double>(cneg.size()));
    ++used;
  }
  return acc / used;
}

// walk down the ranking (ties by label index) until all positives seen
double coverage(const Eigen::MatrixXd& f, const Eigen::MatrixXi& t) {
  double acc = 0;
  int used = 0;
  for (int i = 0; i < t.cols(); ++i) {
    std::vector<int> order;
    for (int j = 0; j < t.rows(); ++j) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (f(a, i) != f(b, i)) return f(a, i) > f(b, i);
      return a < b;
    });
    int remaining = 0;
    for (int j = 0; j < t.rows(); ++j) remaining += (t(j, i) == 1);
    if (remaining == 0) continue;
    int steps = 0;
    for (int j : order) {
      ++steps;
      remaining -= (t(j, i) == 1);
      if (remaining == 0) break;
    }
    acc += steps - 1;
    ++used;
  }
  return acc / used;
}

// rank-based cumulative AP; equals the threshold form when scores are
// distinct within each label
double average_precision_distinct(const Eigen::MatrixXd& f, const Eigen::MatrixXi& t) {
  double acc = 0;
  int used = 0;
  for (int j = 0; j < t.rows(); ++j) {
    int total_pos = 0;
    for (int i = 0; i < t.cols(); ++i) total_pos += (t(j, i) == 1);
    if (total_pos == 0) continue;
    std::vector<int> order;
    for (int i = 0; i < t.cols(); ++i) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return f(j, a) > f(j, b); });
    double ap = 0, seen_pos = 0;
    for (size_t r = 0; r < order.size(); ++r) {
      if (t(j, order[r]) == 1) {
        seen_pos += 1;
        ap += seen_pos / static_cast<double>(r + 1);
      }
    }
    acc += ap / total_pos;
    ++used;
  }
  return acc / used;
}

double auc(const Eigen::MatrixXd& f, const Eigen::MatrixXi& t) {
  double acc = 0;
  int used = 0;
  for (int j = 0; j < t.rows(); ++j) {
    double wins = 0, pairs = 0;
    bool any_pos = false, any_neg = false;
    for (int i = 0; i < t.cols(); ++i) {
      if (t(j, i) == 1) any_pos = true;
      else any_neg = true;
    }
    if (!any_pos || !any_neg) continue;
    for (int a = 0; a < t.cols(); ++a) {
      if (t(j, a) != 1) continue;
      for (int b = 0; b < t.cols(); ++b) {
        if (t(j, b) == 1) continue;
        pairs += 1;
        if (f(j, a) > f(j, b)) wins += 1;
        else if (f(j, a) == f(j, b)) wins += 0.5;
      }
    }
    acc += wins / pairs;
    ++used;
  }
  return acc / used;
}

}  // namespace oracle

namespace {

// random instance respecting the "every instance has a positive" invariant
void random_instance(Rng& rng, int labels, int instances, Eigen::MatrixXd& scores,
                     Eigen::MatrixXi& truth) {
  scores.resize(labels, instances);
  truth.resize(labels, instances);
  for (int i = 0; i < instances; ++i) {
    bool any = false;
    for (int j = 0; j < labels; ++j) {
      scores(j, i) = rng.normal();
      truth(j, i) = rng.uniform() < 0.5 ? 1 : -1;
      any |= truth(j, i) == 1;
    }
    if (!any) truth(static_cast<int>(rng.uniform_index(static_cast<uint64_t>(labels))), i) = 1;
  }
}

Eigen::MatrixXi column(std::initializer_list<int> vals) {
  Eigen::MatrixXi m(static_cast<int>(vals.size()), 1);
  int j = 0;
  for (int v : vals) m(j++, 0) = v;
  return m;
}

Eigen::MatrixXd column_d(std::initializer_list<double> vals) {
  Eigen::MatrixXd m(static_cast<int>(vals.size()), 1);
  int j = 0;
  for (double v : vals) m(j++, 0) = v;
  return m;
}

}  // namespace

TEST_CASE("hamming loss examples", "[metrics]") {
  Rng rng(1);
  Eigen::MatrixXd scores;
  Eigen::MatrixXi truth;
  random_instance(rng, 5, 4, scores, truth);
  REQUIRE(hamming_loss(truth, truth) == 0.0);
  REQUIRE(hamming_loss(truth, Eigen::MatrixXi(-truth)) == 1.0);

  // N=2, L=5, three mismatched entries
  Eigen::MatrixXi t(5, 2), p(5, 2);
  t.setConstant(-1);
  t(0, 0) = t(1, 1) = 1;
  p = t;
  p(2, 0) = 1;
  p(4, 0) = 1;
  p(1, 1) = -1;
  REQUIRE(hamming_loss(t, p) == 0.3);

  // symmetry
  REQUIRE(hamming_loss(t, p) == hamming_loss(p, t));
  REQUIRE_THROWS_AS(hamming_loss(t, Eigen::MatrixXi::Ones(5, 3)), ValidationError);
}

TEST_CASE("jaccard score examples", "[metrics]") {
  // pred == true == {fun}
  REQUIRE(jaccard_score(column({-1, -1, -1, -1, 1}), column({-1, -1, -1, -1, 1})) == 1.0);
  // pred {survival, fun}, true {fun, power} -> 1/3
  REQUIRE(jaccard_score(column({-1, -1, 1, -1, 1}), column({1, -1, -1, -1, 1})) ==
          Catch::Approx(1.0 / 3.0));
  // disjoint non-empty sets
  REQUIRE(jaccard_score(column({1, -1, -1, -1, -1}), column({-1, 1, -1, -1, -1})) == 0.0);
}

TEST_CASE("ranking loss examples", "[metrics]") {
  // perfect ranking: positives {1,2} scored highest
  REQUIRE(ranking_loss(column_d({0.9, 0.8, 0.1}), column({1, 1, -1})) == 0.0);
  // worst case
  REQUIRE(ranking_loss(column_d({0.1, 0.9}), column({1, -1})) == 1.0);
  // tie counts as violation: pairs (1,2) tied, (1,3) fine
  REQUIRE(ranking_loss(column_d({0.5, 0.5, 0.2}), column({1, -1, -1})) == 0.5);

  SECTION("instances without negatives are excluded with a warning") {
    Eigen::MatrixXd f(2, 2);
    f << 0.9, 0.6, 0.1, 0.4;
    Eigen::MatrixXi t(2, 2);
    t << 1, 1, 1, -1;  // first instance all positive
    Exclusions ex;
    REQUIRE(ranking_loss(f, t, &ex) == 0.0);
    REQUIRE(ex.count == 1);
  }
}

TEST_CASE("coverage examples", "[metrics]") {
  // single positive with the highest score
  REQUIRE(coverage(column_d({0.9, 0.1, 0.2}), column({1, -1, -1})) == 0.0);
  // all five positive: must traverse all labels
  REQUIRE(coverage(column_d({0.5, 0.4, 0.3, 0.2, 0.1}), column({1, 1, 1, 1, 1})) == 4.0);
  // positives at ranks 1 and 2
  REQUIRE(coverage(column_d({0.9, 0.2, 0.8, 0.1, 0.3}), column({1, -1, 1, -1, -1})) == 1.0);
}

TEST_CASE("average precision examples", "[metrics]") {
  // perfectly separated label
  Eigen::MatrixXd f(1, 4);
  f << 0.9, 0.8, 0.4, 0.2;
  Eigen::MatrixXi t(1, 4);
  t << 1, 1, -1, -1;
  REQUIRE(average_precision(f, t) == 1.0);

  // interleaved: 0.5 * 1 + 0.5 * (2/3)
  t << 1, -1, 1, -1;
  REQUIRE(average_precision(f, t) == Catch::Approx(0.5 + 0.5 * (2.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("auc examples", "[metrics]") {
  Eigen::MatrixXd f(1, 4);
  f << 0.9, 0.8, 0.4, 0.2;
  Eigen::MatrixXi t(1, 4);
  t << 1, 1, -1, -1;
  REQUIRE(auc_macro(f, t) == 1.0);
  t << -1, -1, 1, 1;
  REQUIRE(auc_macro(f, t) == 0.0);
  t << 1, -1, 1, -1;
  REQUIRE(auc_macro(f, t) == 0.75);
}

TEST_CASE("all six metrics match their brute-force oracles", "[metrics]") {
  Rng rng(12345);
  for (int trial = 0; trial < 200; ++trial) {
    const int p = 1 + static_cast<int>(rng.uniform_index(6));
    Eigen::MatrixXd scores;
    Eigen::MatrixXi truth;
    random_instance(rng, 5, p, scores, truth);
    Eigen::MatrixXi predicted;
    Eigen::MatrixXd s2;
    random_instance(rng, 5, p, s2, predicted);

    REQUIRE(hamming_loss(truth, predicted) ==
            Catch::Approx(oracle::hamming(truth, predicted)).margin(1e-12));
    REQUIRE(jaccard_score(truth, predicted) ==
            Catch::Approx(oracle::jaccard(truth, predicted)).margin(1e-12));

    bool any_rkl = false;
    for (int i = 0; i < p; ++i) {
      bool has_neg = false;
      for (int j = 0; j < 5; ++j) has_neg |= truth(j, i) == -1;
      any_rkl |= has_neg;
    }
    if (any_rkl)
      REQUIRE(ranking_loss(scores, truth) ==
              Catch::Approx(oracle::ranking_loss(scores, truth)).margin(1e-12));
    REQUIRE(coverage(scores, truth) ==
            Catch::Approx(oracle::coverage(scores, truth)).margin(1e-12));
    REQUIRE(average_precision(scores, truth) ==
            Catch::Approx(oracle::average_precision_distinct(scores, truth)).margin(1e-12));
    bool any_auc = false;
    for (int j = 0; j < 5; ++j) {
      bool hp = false, hn = false;
      for (int i = 0; i < p; ++i) (truth(j, i) == 1 ? hp : hn) = true;
      any_auc |= (hp && hn);
    }
    if (any_auc)
      REQUIRE(auc_macro(scores, truth) ==
              Catch::Approx(oracle::auc(scores, truth)).margin(1e-12));
  }
}

TEST_CASE("ranking metrics are invariant to strictly increasing transforms", "[metrics]") {
  Rng rng(777);
  Eigen::MatrixXd scores;
  Eigen::MatrixXi truth;
  random_instance(rng, 5, 6, scores, truth);

  Eigen::MatrixXd affine = (2.0 * scores.array() + 1.0).matrix();
  Eigen::MatrixXd expd = scores.array().exp().matrix();

  for (const auto* s : {&affine, &expd}) {
    REQUIRE(ranking_loss(*s, truth) == Catch::Approx(ranking_loss(scores, truth)).margin(1e-12));
    REQUIRE(coverage(*s, truth) == Catch::Approx(coverage(scores, truth)).margin(1e-12));
    REQUIRE(average_precision(*s, truth) ==
            Catch::Approx(average_precision(scores, truth)).margin(1e-12));
    REQUIRE(auc_macro(*s, truth) == Catch::Approx(auc_macro(scores, truth)).margin(1e-12));
  }
}

TEST_CASE("metric directionality", "[metrics]") {
  Rng rng(31337);
  Eigen::MatrixXd ignored;
  Eigen::MatrixXi truth;
  random_instance(rng, 5, 40, ignored, truth);

  // perfect predictor scores +1 for positives, -1 for negatives
  Eigen::MatrixXd perfect = truth.cast<double>();
  // label-permuted predictor: rotate the label rows
  Eigen::MatrixXd shuffled(5, truth.cols());
  for (int j = 0; j < 5; ++j) shuffled.row(j) = perfect.row((j + 2) % 5);
  Eigen::MatrixXi pred_perfect = truth;
  Eigen::MatrixXi pred_shuffled(5, truth.cols());
  for (int j = 0; j < 5; ++j) pred_shuffled.row(j) = truth.row((j + 2) % 5);

  REQUIRE(auc_macro(perfect, truth) > auc_macro(shuffled, truth));
  REQUIRE(average_precision(perfect, truth) > average_precision(shuffled, truth));
  REQUIRE(jaccard_score(truth, pred_perfect) > jaccard_score(truth, pred_shuffled));
  REQUIRE(ranking_loss(perfect, truth) < ranking_loss(shuffled, truth));
  REQUIRE(coverage(perfect, truth) < coverage(shuffled, truth));
  REQUIRE(hamming_loss(truth, pred_perfect) < hamming_loss(truth, pred_shuffled));
}

TEST_CASE("per-instance variants behave on singleton instances", "[metrics]") {
  // one instance, ranking over its five label scores
  Eigen::MatrixXd f = column_d({0.9, 0.2, 0.8, 0.1, 0.3});
  Eigen::MatrixXi t = column({1, -1, 1, -1, -1});
  REQUIRE(auc_per_instance(f, t) == 1.0);  // both positives above all negatives
  REQUIRE(average_precision_per_instance(f, t) == 1.0);

  Eigen::MatrixXi worst = column({-1, 1, -1, 1, 1});
  REQUIRE(auc_per_instance(f, worst) == 0.0);
}
