#pragma once

#include <string>
#include <vector>

namespace latentlens {

// Published operating point, used when no calibration data is supplied.
constexpr double kDefaultEpsilon = 0.7434;

struct LabeledScore {
  std::string sequence_id;
  double certainty = 0.0;
  int label = 0;  // 1 = a human sees a clear pattern
};

struct Confusion {
  double precision = 1.0;
  double recall = 0.0;
  double f1 = 0.0;
  int true_positive = 0;
  int false_positive = 0;
  int false_negative = 0;
  int true_negative = 0;
};

struct CalibrationResult {
  double epsilon = kDefaultEpsilon;
  double auc = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  int threshold_candidates_evaluated = 0;
};

// Probability that a random positive outscores a random negative, ties
// counted as one half. Sort-based, O(n log n).
double roc_auc(const std::vector<LabeledScore>& scores);

// Predict positive when certainty >= threshold. Precision is 1 when nothing
// is predicted positive; f1 is 0 when precision + recall is 0.
Confusion confusion_at(const std::vector<LabeledScore>& scores, double threshold);

// Candidates are the midpoints between consecutive distinct certainties plus
// one below the minimum and one above the maximum. Picks the F1-maximizing
// candidate, ties broken by higher precision, then by larger threshold.
CalibrationResult calibrate_threshold(const std::vector<LabeledScore>& scores);

std::string calibration_csv_header();
std::string calibration_csv_row(const std::string& estimate_name, const CalibrationResult& r);

}  // namespace latentlens
