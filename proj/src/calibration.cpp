#include "latentlens/calibration.hpp"

#include <algorithm>
#include <cstdio>

#include "latentlens/error.hpp"

namespace latentlens {

namespace {

void require_both_classes(const std::vector<LabeledScore>& scores) {
  bool pos = false, neg = false;
  for (const auto& s : scores) {
    if (s.label != 0 && s.label != 1) {
      throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    }
    (s.label == 1 ? pos : neg) = true;
  }
  if (!pos || !neg) {
    throw Error(ErrorCode::DegenerateLabels, "need at least one positive and one negative label");
  }
}

}  // namespace

double roc_auc(const std::vector<LabeledScore>& scores) {
  require_both_classes(scores);
  std::vector<const LabeledScore*> sorted;
  sorted.reserve(scores.size());
  for (const auto& s : scores) sorted.push_back(&s);
  std::sort(sorted.begin(), sorted.end(),
            [](const LabeledScore* a, const LabeledScore* b) { return a->certainty < b->certainty; });
  // Walk groups of tied scores: each positive beats every negative strictly
  // below it and ties with the negatives in its own group.
  double credit = 0.0;
  double neg_below = 0.0;
  double positives = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    double pos_group = 0.0, neg_group = 0.0;
    while (j < sorted.size() && sorted[j]->certainty == sorted[i]->certainty) {
      (sorted[j]->label == 1 ? pos_group : neg_group) += 1.0;
      ++j;
    }
    credit += pos_group * (neg_below + 0.5 * neg_group);
    neg_below += neg_group;
    positives += pos_group;
    i = j;
  }
  return credit / (positives * neg_below);
}

Confusion confusion_at(const std::vector<LabeledScore>& scores, double threshold) {
  if (scores.empty()) throw Error(ErrorCode::InvalidArgument, "no scores");
  Confusion c;
  for (const auto& s : scores) {
    const bool predicted = s.certainty >= threshold;
    if (predicted && s.label == 1) ++c.true_positive;
    else if (predicted) ++c.false_positive;
    else if (s.label == 1) ++c.false_negative;
    else ++c.true_negative;
  }
  const int pp = c.true_positive + c.false_positive;
  const int ap = c.true_positive + c.false_negative;
  c.precision = pp == 0 ? 1.0 : static_cast<double>(c.true_positive) / pp;
  c.recall = ap == 0 ? 0.0 : static_cast<double>(c.true_positive) / ap;
  c.f1 = c.precision + c.recall == 0.0 ? 0.0
                                       : 2.0 * c.precision * c.recall / (c.precision + c.recall);
  return c;
}

CalibrationResult calibrate_threshold(const std::vector<LabeledScore>& scores) {
  require_both_classes(scores);
  std::vector<double> distinct;
  for (const auto& s : scores) distinct.push_back(s.certainty);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> candidates;
  candidates.push_back(distinct.front() - 1.0);
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  }
  candidates.push_back(distinct.back() + 1.0);

  CalibrationResult best;
  bool have = false;
  for (double t : candidates) {
    const Confusion c = confusion_at(scores, t);
    const bool better = !have || c.f1 > best.f1 ||
                        (c.f1 == best.f1 && c.precision > best.precision) ||
                        (c.f1 == best.f1 && c.precision == best.precision && t > best.epsilon);
    if (better) {
      best.epsilon = t;
      best.f1 = c.f1;
      best.precision = c.precision;
      best.recall = c.recall;
      have = true;
    }
  }
  best.threshold_candidates_evaluated = static_cast<int>(candidates.size());
  best.auc = roc_auc(scores);
  return best;
}

std::string calibration_csv_header() {
  return "Uncertainty Estimate,AUC,F1-score,Precision,Recall,epsilon\n";
}

std::string calibration_csv_row(const std::string& estimate_name, const CalibrationResult& r) {
  char buf[200];
  std::snprintf(buf, sizeof buf, ",%.4f,%.4f,%.4f,%.4f,%.4f\n", r.auc, r.f1, r.precision, r.recall,
                r.epsilon);
  return estimate_name + buf;
}

}  // namespace latentlens
