#include "cxr/knn.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "cxr/error.hpp"

namespace cxr::knn {
namespace {

void check_dims(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ValidationError("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

}  // namespace

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  check_dims(a.size(), b.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

KnnModel::KnnModel(std::vector<std::vector<double>> train, std::vector<Label> labels,
                   std::size_t k)
    : train_(std::move(train)), labels_(std::move(labels)), k_(k), dim_(train_.front().size()) {}

KnnModel KnnModel::fit(std::vector<std::vector<double>> embeddings, std::vector<Label> labels,
                       std::size_t k) {
  if (embeddings.empty()) throw ValidationError("KNN needs at least one training example");
  if (embeddings.size() != labels.size()) {
    throw ValidationError("embeddings (" + std::to_string(embeddings.size()) + ") and labels (" +
                          std::to_string(labels.size()) + ") differ in length");
  }
  if (k < 1 || k > embeddings.size()) {
    throw ValidationError("k must be in [1, " + std::to_string(embeddings.size()) + "], got " +
                          std::to_string(k));
  }
  const std::size_t dim = embeddings.front().size();
  for (const auto& e : embeddings) check_dims(e.size(), dim);
  return KnnModel(std::move(embeddings), std::move(labels), k);
}

std::vector<Neighbor> KnnModel::neighbors(std::span<const double> query) const {
  check_dims(query.size(), dim_);
  std::vector<Neighbor> all(train_.size());
  for (std::size_t i = 0; i < train_.size(); ++i) all[i] = {i, euclidean_distance(train_[i], query)};
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k_), all.end(), closer);
  all.resize(k_);
  return all;
}

double KnnModel::score(std::span<const double> query) const {
  std::size_t positives = 0;
  for (const auto& n : neighbors(query)) positives += labels_[n.index] == Label::kPositive;
  return static_cast<double>(positives) / static_cast<double>(k_);
}

Label vote(std::span<const Neighbor> neighbors, std::span<const Label> labels) {
  std::size_t positives = 0;
  double positive_distance = 0.0;
  double negative_distance = 0.0;
  for (const auto& n : neighbors) {
    if (labels[n.index] == Label::kPositive) {
      ++positives;
      positive_distance += n.distance;
    } else {
      negative_distance += n.distance;
    }
  }
  const std::size_t negatives = neighbors.size() - positives;
  if (positives != negatives) return label_from_bool(positives > negatives);
  return label_from_bool(positive_distance <= negative_distance);
}

Label KnnModel::predict(std::span<const double> query) const {
  return vote(neighbors(query), labels_);
}

BatchResult classify_all(const KnnModel& model, std::span<const std::vector<double>> queries,
                         unsigned threads) {
  BatchResult out{std::vector<double>(queries.size()), std::vector<Label>(queries.size())};
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < queries.size(); i += step) {
      const auto nn = model.neighbors(queries[i]);
      std::size_t positives = 0;
      for (const auto& n : nn) positives += model.labels()[n.index] == Label::kPositive;
      out.scores[i] = static_cast<double>(positives) / static_cast<double>(model.k());
      out.predictions[i] = vote(nn, model.labels());
    }
  };
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  if (threads == 1 || queries.size() < 2) {
    work(0, 1);
    return out;
  }
  for (const auto& q : queries) check_dims(q.size(), model.dimension());
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  return out;
}

}  // namespace cxr::knn
