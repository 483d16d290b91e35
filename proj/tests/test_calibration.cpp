#include <doctest.h>

#include <cmath>

#include "latentlens/calibration.hpp"
#include "latentlens/error.hpp"
#include "latentlens/rng.hpp"
#include "oracles.hpp"

using namespace latentlens;

namespace {

std::vector<LabeledScore> make(std::vector<double> s, std::vector<int> l) {
  std::vector<LabeledScore> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back({"s" + std::to_string(i), s[i], l[i]});
  return out;
}

std::vector<LabeledScore> random_set(SplitMix64& g, std::size_t n, int levels) {
  std::vector<LabeledScore> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(g.below(2));
    // Coarse levels force ties.
    const double s = static_cast<double>(g.below(static_cast<std::uint64_t>(levels))) / levels +
                     0.1 * label;
    out.push_back({"r" + std::to_string(i), s, label});
  }
  out[0].label = 1;
  out[1].label = 0;
  return out;
}

}  // namespace

TEST_SUITE("calibration") {
  TEST_CASE("auc worked examples") {
    CHECK(roc_auc(make({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})) == 1.0);
    CHECK(roc_auc(make({0.9, 0.5, 0.5, 0.1}, {1, 1, 0, 0})) == 0.875);
    CHECK_THROWS_AS(roc_auc(make({0.2, 0.4}, {1, 1})), Error);
  }

  TEST_CASE("sort-based auc equals pair counting, ties included") {
    SplitMix64 g(7);
    for (int t = 0; t < 1000; ++t) {
      const auto s = random_set(g, 2 + g.below(60), 1 + static_cast<int>(g.below(12)));
      REQUIRE(std::abs(roc_auc(s) - oracle::auc_pairs(s)) < 1e-12);
    }
  }

  TEST_CASE("auc is invariant under increasing transforms") {
    SplitMix64 g(8);
    for (int t = 0; t < 50; ++t) {
      auto s = random_set(g, 40, 9);
      const double a = roc_auc(s);
      for (auto& x : s) x.certainty = x.certainty * x.certainty * x.certainty;
      CHECK(roc_auc(s) == a);
    }
  }

  TEST_CASE("confusion matrix conventions") {
    const auto all_pos = make({0.3, 0.6}, {1, 1});
    const auto c1 = confusion_at(all_pos, 0.1);
    CHECK(c1.precision == 1.0);
    CHECK(c1.recall == 1.0);
    CHECK(c1.f1 == 1.0);
    const auto c2 = confusion_at(all_pos, 0.9);
    CHECK(c2.true_positive == 0);
    CHECK(c2.false_positive == 0);
    CHECK(c2.precision == 1.0);
    CHECK(c2.recall == 0.0);
    CHECK(c2.f1 == 0.0);
    const auto c3 = confusion_at(make({0.9, 0.6, 0.4}, {1, 0, 1}), 0.5);
    CHECK(c3.true_positive == 1);
    CHECK(c3.false_positive == 1);
    CHECK(c3.false_negative == 1);
    CHECK(c3.precision == 0.5);
    CHECK(c3.recall == 0.5);
    CHECK(c3.f1 == 0.5);
    CHECK(confusion_at(make({0.5}, {1}), 0.5).true_positive == 1);
  }

  TEST_CASE("recall and predicted positives are nonincreasing in the threshold") {
    SplitMix64 g(9);
    const auto s = random_set(g, 80, 20);
    double prev_recall = 2;
    int prev_pos = 1 << 30;
    for (double th = -0.1; th <= 1.2; th += 0.01) {
      const auto c = confusion_at(s, th);
      CHECK(c.recall <= prev_recall);
      CHECK(c.true_positive + c.false_positive <= prev_pos);
      prev_recall = c.recall;
      prev_pos = c.true_positive + c.false_positive;
    }
  }

  TEST_CASE("separable classes are split with F1 = 1") {
    SplitMix64 g(10);
    for (int t = 0; t < 100; ++t) {
      std::vector<LabeledScore> s;
      double lo_max = -1, hi_min = 2;
      for (int i = 0; i < 20; ++i) {
        const double neg = g.uniform(0.0, 0.5), pos = g.uniform(0.55, 1.0);
        s.push_back({"n", neg, 0});
        s.push_back({"p", pos, 1});
        lo_max = std::max(lo_max, neg);
        hi_min = std::min(hi_min, pos);
      }
      const auto r = calibrate_threshold(s);
      CHECK(r.f1 == 1.0);
      CHECK(r.epsilon > lo_max);
      CHECK(r.epsilon < hi_min);
      CHECK(r.auc == 1.0);
    }
  }

  TEST_CASE("calibrated metrics are reproduced at epsilon") {
    SplitMix64 g(11);
    for (int t = 0; t < 200; ++t) {
      const auto s = random_set(g, 3 + g.below(40), 1 + static_cast<int>(g.below(10)));
      const auto r = calibrate_threshold(s);
      const auto c = confusion_at(s, r.epsilon);
      CHECK(c.f1 == r.f1);
      CHECK(c.precision == r.precision);
      CHECK(c.recall == r.recall);
      // no candidate does better
      std::vector<double> v;
      for (const auto& x : s) v.push_back(x.certainty);
      std::sort(v.begin(), v.end());
      for (double th : v) CHECK(confusion_at(s, th).f1 <= r.f1 + 1e-15);
    }
  }

  TEST_CASE("single distinct score lands on a sentinel candidate") {
    const auto s = make({0.4, 0.4, 0.4}, {1, 0, 1});
    const auto r = calibrate_threshold(s);
    CHECK(r.epsilon < 0.4);  // all-positive: F1 = 0.8 beats all-negative F1 = 0
    CHECK(r.f1 == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(r.threshold_candidates_evaluated == 2);
  }

  TEST_CASE("table-shaped reference with precision 1 and high recall") {
    // 49 positives, 30 negatives; three positives fall below every negative.
    std::vector<LabeledScore> s;
    for (int i = 0; i < 46; ++i) s.push_back({"p", 0.80 + 0.004 * i, 1});
    for (int i = 0; i < 3; ++i) s.push_back({"p", 0.10 + 0.01 * i, 1});
    for (int i = 0; i < 30; ++i) s.push_back({"n", 0.20 + 0.018 * i, 0});
    const auto r = calibrate_threshold(s);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == doctest::Approx(46.0 / 49).epsilon(1e-12));
    CHECK(r.auc == doctest::Approx(1 - 90.0 / (49 * 30)).epsilon(1e-12));
    CHECK(r.auc > 0.93);
  }

  TEST_CASE("csv rendering") {
    CHECK(calibration_csv_header() == "Uncertainty Estimate,AUC,F1-score,Precision,Recall,epsilon\n");
    CalibrationResult r{0.7434, 0.96944, 0.97, 1.0, 0.93877, 5};
    CHECK(calibration_csv_row("cosine similarity", r) ==
          "cosine similarity,0.9694,0.9700,1.0000,0.9388,0.7434\n");
  }
}
