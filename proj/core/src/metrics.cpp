#include "cxr/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "cxr/error.hpp"
#include "cxr/rng.hpp"

namespace cxr::metrics {
namespace {

void check_scores(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("scores (" + std::to_string(scores.size()) + ") and labels (" +
                          std::to_string(labels.size()) + ") differ in length");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("scores must be finite");
  }
  const auto positives = std::count(labels.begin(), labels.end(), Label::kPositive);
  if (positives == 0 || static_cast<std::size_t>(positives) == labels.size()) {
    throw ValidationError("AUC undefined for one-class sample");
  }
}

double ratio(std::size_t num, std::size_t den, const char* flag, std::vector<std::string>& flags) {
  if (den == 0) {
    flags.emplace_back(flag);
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

// Pairs sorted by ascending score. Returns 2 * (#pos > neg) + (#ties) over
// all positive/negative pairs, plus the class counts.
struct PairCounts {
  double twice_wins;
  double positives;
  double negatives;
};

PairCounts count_pairs(std::vector<std::pair<double, Label>>& pairs) {
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double twice_wins = 0.0;
  double negatives_below = 0.0;
  double positives = 0.0;
  for (std::size_t i = 0; i < pairs.size();) {
    std::size_t j = i;
    double group_pos = 0.0;
    double group_neg = 0.0;
    for (; j < pairs.size() && pairs[j].first == pairs[i].first; ++j) {
      (pairs[j].second == Label::kPositive ? group_pos : group_neg) += 1.0;
    }
    twice_wins += group_pos * (2.0 * negatives_below + group_neg);
    negatives_below += group_neg;
    positives += group_pos;
    i = j;
  }
  return {twice_wins, positives, negatives_below};
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const Label> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size()) {
    throw ValidationError("predictions (" + std::to_string(predictions.size()) + ") and labels (" +
                          std::to_string(labels.size()) + ") differ in length");
  }
  if (labels.empty()) throw ValidationError("confusion matrix of an empty sample");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == Label::kPositive;
    const bool truth = labels[i] == Label::kPositive;
    if (pred && truth) ++cm.tp;
    else if (pred) ++cm.fp;
    else if (truth) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

Summary precision_recall_f1_accuracy(const ConfusionMatrix& cm) {
  Summary s;
  s.precision = ratio(cm.tp, cm.tp + cm.fp, kPrecisionUndefined, s.flags);
  s.recall = ratio(cm.tp, cm.tp + cm.fn, kRecallUndefined, s.flags);
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  } else {
    s.flags.emplace_back(kF1Undefined);
  }
  s.accuracy = ratio(cm.tp + cm.tn, cm.total(), kAccuracyUndefined, s.flags);
  return s;
}

RocResult roc_and_auc(std::span<const double> scores, std::span<const Label> labels) {
  check_scores(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const auto total_pos = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), Label::kPositive));
  const std::size_t total_neg = labels.size() - total_pos;

  RocResult out;
  out.curve.points.push_back({0.0, 0.0});
  out.curve.thresholds.push_back(std::numeric_limits<double>::infinity());

  // Trapezoids accumulated on integer counts so the area is exact.
  std::size_t tp = 0;
  std::size_t fp = 0;
  double twice_area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    const std::size_t prev_tp = tp;
    const std::size_t prev_fp = fp;
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      (labels[order[i]] == Label::kPositive ? tp : fp) += 1;
    }
    twice_area += static_cast<double>(fp - prev_fp) * static_cast<double>(tp + prev_tp);
    out.curve.points.push_back({static_cast<double>(fp) / static_cast<double>(total_neg),
                                static_cast<double>(tp) / static_cast<double>(total_pos)});
    out.curve.thresholds.push_back(threshold);
  }
  out.auc = twice_area / (2.0 * static_cast<double>(total_pos) * static_cast<double>(total_neg));
  return out;
}

double auc(std::span<const double> scores, std::span<const Label> labels) {
  check_scores(scores, labels);
  std::vector<std::pair<double, Label>> pairs(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pairs[i] = {scores[i], labels[i]};
  const auto c = count_pairs(pairs);
  return c.twice_wins / (2.0 * c.positives * c.negatives);
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile must be in [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return std::lerp(sorted[lo], sorted[lo + 1], pos - static_cast<double>(lo));
}

ConfidenceInterval bootstrap_auc_ci(std::span<const double> scores, std::span<const Label> labels,
                                    const BootstrapOptions& options) {
  check_scores(scores, labels);
  if (options.n_resamples < 1) throw ValidationError("bootstrap needs at least one resample");
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw ValidationError("confidence level must be in (0, 1)");
  }
  const std::size_t n = scores.size();
  const std::size_t resamples = options.n_resamples;
  const std::size_t cap = kBootstrapRedrawFactor * resamples;

  std::vector<double> aucs(resamples);
  std::vector<std::size_t> draws(resamples, 0);

  auto work = [&](std::size_t begin, std::size_t step) {
    std::vector<std::pair<double, Label>> sample(n);
    for (std::size_t r = begin; r < resamples; r += step) {
      auto rng = Rng::for_stream(options.seed, r);
      for (;;) {
        ++draws[r];
        std::size_t positives = 0;
        for (auto& s : sample) {
          const auto i = static_cast<std::size_t>(rng.uniform_below(n));
          s = {scores[i], labels[i]};
          positives += labels[i] == Label::kPositive;
        }
        if (positives != 0 && positives != n) break;
        if (draws[r] > cap) break;
      }
      const auto c = count_pairs(sample);
      aucs[r] = c.positives > 0 && c.negatives > 0
                    ? c.twice_wins / (2.0 * c.positives * c.negatives)
                    : 0.0;
    }
  };

  unsigned threads = options.threads == 0 ? std::max(1U, std::thread::hardware_concurrency())
                                          : options.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, resamples));
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }

  const std::size_t total_draws = std::accumulate(draws.begin(), draws.end(), std::size_t{0});
  if (total_draws > cap) {
    throw Error("bootstrap needed more than " + std::to_string(cap) +
                " draws to obtain two-class resamples; data too imbalanced");
  }

  std::sort(aucs.begin(), aucs.end());
  const double tail = (1.0 - options.level) / 2.0;
  ConfidenceInterval ci;
  ci.low = quantile_sorted(aucs, tail);
  ci.high = quantile_sorted(aucs, 1.0 - tail);
  ci.level = options.level;
  ci.n_resamples = resamples;
  ci.seed = options.seed;
  return ci;
}

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
  out << "threshold,fpr,tpr\n";
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    out << format_number(curve.thresholds[i]) << ',' << format_number(curve.points[i].fpr) << ','
        << format_number(curve.points[i].tpr) << '\n';
  }
}

nlohmann::json to_json(const EvaluationRecord& r) {
  nlohmann::json j;
  j["task"] = r.task ? nlohmann::json(*r.task) : nlohmann::json(nullptr);
  j["k"] = r.k;
  j["n_train"] = r.n_train;
  j["n_test"] = r.n_test;
  j["tp"] = r.cm.tp;
  j["fp"] = r.cm.fp;
  j["tn"] = r.cm.tn;
  j["fn"] = r.cm.fn;
  j["precision"] = r.summary.precision;
  j["recall"] = r.summary.recall;
  j["f1"] = r.summary.f1;
  j["accuracy"] = r.summary.accuracy;
  j["auc"] = r.auc;
  j["ci_low"] = r.ci.low;
  j["ci_high"] = r.ci.high;
  j["ci_level"] = r.ci.level;
  j["n_resamples"] = r.ci.n_resamples;
  j["seed"] = r.ci.seed;
  j["flags"] = r.summary.flags;
  return j;
}

}  // namespace cxr::metrics
