#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cxr/label.hpp"

namespace cxr::dataset {

enum class View { kAP, kPA, kOther };
enum class Intubation { kYes, kNo, kUnknown };
enum class Task { kCovid, kIntubation };

std::string_view to_string(View v) noexcept;
std::string_view to_string(Task t) noexcept;
/// Accepts "covid" / "intubation" (case-insensitive).
std::optional<Task> parse_task(std::string_view s);

/// Maps a raw view string onto AP/PA/other. Case-insensitive; AP-prefixed
/// variants such as "AP Supine" count as AP.
View parse_view(std::string_view raw);

/// One row of the dataset metadata table.
struct StudyRecord {
  std::string patient_id;
  View view = View::kOther;
  std::set<std::string> pathologies;  // never empty
  Intubation intubated = Intubation::kUnknown;
  std::string image_filename;  // relative path, never empty

  bool operator==(const StudyRecord&) const = default;
};

struct LabeledExample {
  StudyRecord record;
  Label label = Label::kNegative;
  Task task = Task::kCovid;

  bool operator==(const LabeledExample&) const = default;
};

/// Names of the columns `parse_metadata` requires.
inline constexpr std::string_view kRequiredColumns[] = {"patientid", "view", "finding",
                                                        "intubated", "filename"};

/// Parses the metadata CSV. Columns other than the required ones are ignored.
/// Row indices in errors are 1-based and count data rows (the header is row 0).
std::vector<StudyRecord> parse_metadata(std::string_view csv_text);

/// Writes records as a metadata CSV containing exactly the required columns.
/// `parse_metadata(serialize_metadata(r)) == r` for any valid record list.
std::string serialize_metadata(std::span<const StudyRecord> records);

/// Labels records for a task. Intubation-unknown records are dropped for
/// Task::kIntubation; every record is kept for Task::kCovid.
std::vector<LabeledExample> derive_labels(std::span<const StudyRecord> records, Task task);

/// Keeps AP and PA views, preserving order.
std::vector<StudyRecord> filter_views(std::span<const StudyRecord> records);

/// Number of positive occurrences of every pathology token.
std::map<std::string, std::size_t> pathology_positive_counts(std::span<const StudyRecord> records);

enum class SplitMode {
  kRandom,      // one shuffle over all examples
  kStratified,  // per-class shuffle, per-class floor(f * n_c) to train
  kGrouped,     // whole patients assigned to one side
};

struct SplitSpec {
  double train_fraction = 0.75;
  std::uint64_t seed = 42;
  SplitMode mode = SplitMode::kRandom;

  /// Throws ValidationError unless train_fraction is in (0, 1].
  void validate() const;
};

/// floor(fraction * n), guarded against binary representation error so that
/// e.g. 0.29 * 100 gives 29.
std::size_t train_count(std::size_t n, double fraction);

struct IndexSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Fisher-Yates shuffle of [0, n) driven by Rng(seed); the first
/// train_count(n, f) shuffled indices form the training half.
IndexSplit split_indices(std::size_t n, const SplitSpec& spec);

/// Each class is shuffled on its own stream and split at floor(f * n_class).
IndexSplit stratified_split_indices(std::span<const Label> labels, const SplitSpec& spec);

/// Groups (e.g. patient ids) are shuffled and added to the training half
/// until it holds at least train_count(n, f) items. No group straddles halves.
IndexSplit grouped_split_indices(std::span<const std::string> groups, const SplitSpec& spec);

template <typename T>
struct Split {
  std::vector<T> train;
  std::vector<T> test;
};

template <typename T>
Split<T> take(std::span<const T> items, const IndexSplit& idx) {
  Split<T> out;
  out.train.reserve(idx.train.size());
  out.test.reserve(idx.test.size());
  for (std::size_t i : idx.train) out.train.push_back(items[i]);
  for (std::size_t i : idx.test) out.test.push_back(items[i]);
  return out;
}

/// Splits labeled examples according to spec.mode. Throws ValidationError on
/// empty input or an invalid spec.
Split<LabeledExample> split(std::span<const LabeledExample> examples, const SplitSpec& spec);

/// Dataset manifest: a JSON array of
/// {patient_id, view, pathologies, intubated, image_filename[, label]}.
/// `label` is written when the manifest carries task labels.
nlohmann::json to_manifest(std::span<const StudyRecord> records);
nlohmann::json to_manifest(std::span<const LabeledExample> examples);

struct ManifestEntry {
  StudyRecord record;
  std::optional<Label> label;
};

/// Throws ParseError (row = 1-based array position) on malformed entries.
std::vector<ManifestEntry> from_manifest(const nlohmann::json& doc);

}  // namespace cxr::dataset
