#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cxr/label.hpp"

namespace cxr::knn {

/// sqrt(sum((a - b)^2)). Throws ValidationError naming both dimensions when
/// they differ.
double euclidean_distance(std::span<const double> a, std::span<const double> b);

struct Neighbor {
  std::size_t index;  // position in the training set
  double distance;

  bool operator==(const Neighbor&) const = default;
};

/// Exact brute-force k-nearest-neighbors binary classifier.
///
/// Neighbors are the k smallest Euclidean distances, ties broken by ascending
/// training index. The score is the positive fraction among them. A 50/50
/// vote goes to the class with the smaller summed neighbor distance, and to
/// the positive class if those sums are equal.
///
/// Immutable after fit; concurrent queries are safe.
class KnnModel {
 public:
  /// Throws ValidationError on empty input, length mismatch, ragged
  /// dimensions or k outside [1, n].
  static KnnModel fit(std::vector<std::vector<double>> embeddings, std::vector<Label> labels,
                      std::size_t k);

  std::vector<Neighbor> neighbors(std::span<const double> query) const;
  double score(std::span<const double> query) const;
  Label predict(std::span<const double> query) const;

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dimension() const noexcept { return dim_; }
  std::span<const Label> labels() const noexcept { return labels_; }
  std::span<const double> embedding(std::size_t i) const { return train_[i]; }

 private:
  KnnModel(std::vector<std::vector<double>> train, std::vector<Label> labels, std::size_t k);

  std::vector<std::vector<double>> train_;
  std::vector<Label> labels_;
  std::size_t k_;
  std::size_t dim_;
};

/// Vote rule shared by KnnModel::predict: `neighbors` must be the k nearest,
/// `labels` the training labels they index into.
Label vote(std::span<const Neighbor> neighbors, std::span<const Label> labels);

/// Scores and predictions for a batch of queries, in query order, using up
/// to `threads` workers (0 = hardware concurrency).
struct BatchResult {
  std::vector<double> scores;
  std::vector<Label> predictions;
};
BatchResult classify_all(const KnnModel& model, std::span<const std::vector<double>> queries,
                         unsigned threads = 1);

}  // namespace cxr::knn
