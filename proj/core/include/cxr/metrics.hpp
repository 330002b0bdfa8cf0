#pragma once

#include <cstddef>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cxr/label.hpp"

namespace cxr::metrics {

/// 2x2 cross-tabulation; label 1 is the positive class.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Throws ValidationError on empty input or a length mismatch.
ConfusionMatrix confusion_matrix(std::span<const Label> predictions, std::span<const Label> labels);

/// Flags raised when a statistic's denominator is zero (its value is then 0).
inline constexpr const char* kPrecisionUndefined = "precision_zero_denominator";
inline constexpr const char* kRecallUndefined = "recall_zero_denominator";
inline constexpr const char* kF1Undefined = "f1_zero_denominator";
inline constexpr const char* kAccuracyUndefined = "accuracy_zero_denominator";

struct Summary {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  std::vector<std::string> flags;
};

Summary precision_recall_f1_accuracy(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr;
  double tpr;

  bool operator==(const RocPoint&) const = default;
};

/// points[i] is the operating point for "positive when score >= thresholds[i]".
/// The first point is (0, 0) at threshold +infinity; the last is (1, 1).
struct RocCurve {
  std::vector<RocPoint> points;
  std::vector<double> thresholds;
};

struct RocResult {
  RocCurve curve;
  double auc = 0.0;
};

/// ROC over every distinct score, with trapezoidal AUC. Tied scores form a
/// single step, so the AUC equals the Mann-Whitney statistic with ties
/// credited 1/2. Throws ValidationError when only one class is present
/// ("AUC undefined for one-class sample"), on a length mismatch or on
/// non-finite scores.
RocResult roc_and_auc(std::span<const double> scores, std::span<const Label> labels);

/// AUC only, O(n log n) without building the curve. Same preconditions.
double auc(std::span<const double> scores, std::span<const Label> labels);

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
  double level = 0.95;
  std::size_t n_resamples = 0;
  std::uint64_t seed = 0;
};

struct BootstrapOptions {
  std::size_t n_resamples = 10000;
  double level = 0.95;
  std::uint64_t seed = 42;
  unsigned threads = 1;  // 0 = hardware concurrency; results do not depend on it
};

/// Redraws allowed across all resamples, as a multiple of n_resamples.
inline constexpr std::size_t kBootstrapRedrawFactor = 100;

/// Percentile bootstrap of the AUC.
///
/// Resample r draws n indices uniformly with replacement from
/// Rng::for_stream(seed, r); a one-class draw is discarded and redrawn from
/// the same stream. Throws Error if more than 100 x n_resamples draws are
/// needed in total. The bounds are the (1 - level) / 2 and
/// 1 - (1 - level) / 2 quantiles, linearly interpolated between order
/// statistics.
ConfidenceInterval bootstrap_auc_ci(std::span<const double> scores, std::span<const Label> labels,
                                    const BootstrapOptions& options);

/// Quantile q of ascending-sorted data, interpolating linearly between
/// order statistics at position q * (n - 1).
double quantile_sorted(std::span<const double> sorted, double q);

/// `threshold,fpr,tpr` rows; the +infinity threshold is written as `inf`.
void write_roc_csv(std::ostream& out, const RocCurve& curve);

/// Everything written to metrics.json.
struct EvaluationRecord {
  std::optional<std::string> task;
  std::size_t k = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  ConfusionMatrix cm;
  Summary summary;
  double auc = 0.0;
  ConfidenceInterval ci;
};

nlohmann::json to_json(const EvaluationRecord& record);

/// Shortest decimal that round-trips.
std::string format_number(double v);

}  // namespace cxr::metrics
