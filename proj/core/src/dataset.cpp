#include "cxr/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_map>

#include "cxr/csv.hpp"
#include "cxr/error.hpp"
#include "cxr/rng.hpp"

namespace cxr::dataset {
namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool has_view_prefix(std::string_view v, std::string_view prefix) {
  if (!v.starts_with(prefix)) return false;
  return v.size() == prefix.size() ||
         !std::isalpha(static_cast<unsigned char>(v[prefix.size()]));
}

std::string_view to_manifest_string(Intubation i) {
  switch (i) {
    case Intubation::kYes: return "Y";
    case Intubation::kNo: return "N";
    case Intubation::kUnknown: break;
  }
  return "";
}

Intubation parse_intubated(std::string_view raw, std::size_t row) {
  const std::string v = upper(trim(raw));
  if (v.empty()) return Intubation::kUnknown;
  if (v == "Y") return Intubation::kYes;
  if (v == "N") return Intubation::kNo;
  throw ParseError("row " + std::to_string(row) + ": unrecognized intubated value '" +
                       std::string(raw) + "'",
                   row, "intubated");
}

std::set<std::string> split_finding(std::string_view finding) {
  std::set<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto slash = finding.find('/', start);
    const auto token = trim(finding.substr(start, slash == std::string_view::npos
                                                      ? std::string_view::npos
                                                      : slash - start));
    if (!token.empty()) out.emplace(token);
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return out;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

std::string_view to_string(View v) noexcept {
  switch (v) {
    case View::kAP: return "AP";
    case View::kPA: return "PA";
    case View::kOther: break;
  }
  return "OTHER";
}

std::string_view to_string(Task t) noexcept {
  return t == Task::kCovid ? "covid" : "intubation";
}

std::optional<Task> parse_task(std::string_view s) {
  const std::string v = upper(trim(s));
  if (v == "COVID") return Task::kCovid;
  if (v == "INTUBATION") return Task::kIntubation;
  return std::nullopt;
}

View parse_view(std::string_view raw) {
  const std::string v = upper(trim(raw));
  if (has_view_prefix(v, "AP")) return View::kAP;
  if (has_view_prefix(v, "PA")) return View::kPA;
  return View::kOther;
}

std::vector<StudyRecord> parse_metadata(std::string_view csv_text) {
  const auto rows = csv::parse(csv_text);
  if (rows.empty()) throw ParseError("metadata is empty: a header row is required");

  const auto& header = rows.front();
  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t i = 0; i < header.size(); ++i) {
    column_of.try_emplace(std::string(trim(header[i])), i);
  }
  std::size_t cols[std::size(kRequiredColumns)];
  for (std::size_t i = 0; i < std::size(kRequiredColumns); ++i) {
    const std::string name(kRequiredColumns[i]);
    const auto it = column_of.find(name);
    if (it == column_of.end()) {
      throw ParseError("missing required column '" + name + "'", std::nullopt, name);
    }
    cols[i] = it->second;
  }
  const auto [c_patient, c_view, c_finding, c_intubated, c_filename] =
      std::tuple{cols[0], cols[1], cols[2], cols[3], cols[4]};

  std::vector<StudyRecord> records;
  records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw ParseError("row " + std::to_string(r) + ": expected " +
                           std::to_string(header.size()) + " fields, found " +
                           std::to_string(row.size()),
                       r);
    }
    StudyRecord rec;
    rec.patient_id = std::string(trim(row[c_patient]));
    rec.view = parse_view(row[c_view]);
    rec.pathologies = split_finding(row[c_finding]);
    rec.intubated = parse_intubated(row[c_intubated], r);
    rec.image_filename = std::string(trim(row[c_filename]));
    if (rec.pathologies.empty()) {
      throw ParseError("row " + std::to_string(r) + ": empty finding", r, "finding");
    }
    if (rec.image_filename.empty()) {
      throw ParseError("row " + std::to_string(r) + ": empty filename", r, "filename");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string serialize_metadata(std::span<const StudyRecord> records) {
  std::ostringstream out;
  const std::vector<std::string> header(std::begin(kRequiredColumns), std::end(kRequiredColumns));
  csv::write_row(out, header);
  for (const auto& rec : records) {
    std::string finding;
    for (const auto& p : rec.pathologies) {
      if (!finding.empty()) finding.push_back('/');
      finding += p;
    }
    const std::vector<std::string> fields{rec.patient_id, std::string(to_string(rec.view)),
                                          finding, std::string(to_manifest_string(rec.intubated)),
                                          rec.image_filename};
    csv::write_row(out, fields);
  }
  return std::move(out).str();
}

std::vector<LabeledExample> derive_labels(std::span<const StudyRecord> records, Task task) {
  std::vector<LabeledExample> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    if (task == Task::kCovid) {
      out.push_back({rec, label_from_bool(rec.pathologies.contains("COVID-19")), task});
    } else if (rec.intubated != Intubation::kUnknown) {
      out.push_back({rec, label_from_bool(rec.intubated == Intubation::kYes), task});
    }
  }
  return out;
}

std::vector<StudyRecord> filter_views(std::span<const StudyRecord> records) {
  std::vector<StudyRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [](const StudyRecord& r) { return r.view == View::kAP || r.view == View::kPA; });
  return out;
}

std::map<std::string, std::size_t> pathology_positive_counts(std::span<const StudyRecord> records) {
  std::map<std::string, std::size_t> counts;
  for (const auto& rec : records) {
    for (const auto& p : rec.pathologies) ++counts[p];
  }
  return counts;
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ValidationError("train fraction must be in (0, 1], got " +
                          std::to_string(train_fraction));
  }
}

std::size_t train_count(std::size_t n, double fraction) {
  const double exact = fraction * static_cast<double>(n);
  return std::min(n, static_cast<std::size_t>(std::floor(exact + 1e-9 * std::max(1.0, exact))));
}

IndexSplit split_indices(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n == 0) throw ValidationError("cannot split an empty example list");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(spec.seed);
  shuffle(order, rng);
  const auto cut = static_cast<std::ptrdiff_t>(train_count(n, spec.train_fraction));
  return {{order.begin(), order.begin() + cut}, {order.begin() + cut, order.end()}};
}

IndexSplit stratified_split_indices(std::span<const Label> labels, const SplitSpec& spec) {
  spec.validate();
  if (labels.empty()) throw ValidationError("cannot split an empty example list");
  IndexSplit out;
  for (const Label cls : {Label::kNegative, Label::kPositive}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    auto rng = Rng::for_stream(spec.seed, static_cast<std::uint64_t>(to_int(cls)));
    shuffle(members, rng);
    const auto cut = static_cast<std::ptrdiff_t>(train_count(members.size(), spec.train_fraction));
    out.train.insert(out.train.end(), members.begin(), members.begin() + cut);
    out.test.insert(out.test.end(), members.begin() + cut, members.end());
  }
  // Interleave classes so neither half is sorted by label.
  auto rng = Rng::for_stream(spec.seed, 2);
  shuffle(out.train, rng);
  shuffle(out.test, rng);
  return out;
}

IndexSplit grouped_split_indices(std::span<const std::string> groups, const SplitSpec& spec) {
  spec.validate();
  if (groups.empty()) throw ValidationError("cannot split an empty example list");
  std::vector<std::vector<std::size_t>> members;
  std::unordered_map<std::string, std::size_t> group_of;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto [it, inserted] = group_of.try_emplace(groups[i], members.size());
    if (inserted) members.emplace_back();
    members[it->second].push_back(i);
  }
  std::vector<std::size_t> order(members.size());
  for (std::size_t g = 0; g < order.size(); ++g) order[g] = g;
  Rng rng(spec.seed);
  shuffle(order, rng);

  const std::size_t target = train_count(groups.size(), spec.train_fraction);
  IndexSplit out;
  for (const std::size_t g : order) {
    auto& side = out.train.size() < target ? out.train : out.test;
    side.insert(side.end(), members[g].begin(), members[g].end());
  }
  return out;
}

Split<LabeledExample> split(std::span<const LabeledExample> examples, const SplitSpec& spec) {
  if (examples.empty()) throw ValidationError("cannot split an empty example list");
  switch (spec.mode) {
    case SplitMode::kRandom:
      return take(examples, split_indices(examples.size(), spec));
    case SplitMode::kStratified: {
      std::vector<Label> labels;
      for (const auto& e : examples) labels.push_back(e.label);
      return take(examples, stratified_split_indices(labels, spec));
    }
    case SplitMode::kGrouped: {
      std::vector<std::string> groups;
      for (const auto& e : examples) groups.push_back(e.record.patient_id);
      return take(examples, grouped_split_indices(groups, spec));
    }
  }
  throw ValidationError("unknown split mode");
}

namespace {

nlohmann::json record_json(const StudyRecord& rec) {
  nlohmann::json j;
  j["patient_id"] = rec.patient_id;
  j["view"] = std::string(to_string(rec.view));
  j["pathologies"] = nlohmann::json(std::vector<std::string>(rec.pathologies.begin(),
                                                             rec.pathologies.end()));
  if (rec.intubated == Intubation::kUnknown) {
    j["intubated"] = nullptr;
  } else {
    j["intubated"] = std::string(to_manifest_string(rec.intubated));
  }
  j["image_filename"] = rec.image_filename;
  return j;
}

}  // namespace

nlohmann::json to_manifest(std::span<const StudyRecord> records) {
  auto doc = nlohmann::json::array();
  for (const auto& rec : records) doc.push_back(record_json(rec));
  return doc;
}

nlohmann::json to_manifest(std::span<const LabeledExample> examples) {
  auto doc = nlohmann::json::array();
  for (const auto& ex : examples) {
    auto j = record_json(ex.record);
    j["label"] = to_int(ex.label);
    doc.push_back(std::move(j));
  }
  return doc;
}

std::vector<ManifestEntry> from_manifest(const nlohmann::json& doc) {
  if (!doc.is_array()) throw ParseError("dataset manifest must be a JSON array");
  std::vector<ManifestEntry> out;
  out.reserve(doc.size());
  std::size_t row = 0;
  for (const auto& j : doc) {
    ++row;
    auto fail = [row](const std::string& why) -> ParseError {
      return ParseError("manifest entry " + std::to_string(row) + ": " + why, row);
    };
    if (!j.is_object()) throw fail("not an object");
    ManifestEntry e;
    try {
      e.record.patient_id = j.at("patient_id").get<std::string>();
      const auto view = j.at("view").get<std::string>();
      e.record.view = view == "AP" ? View::kAP : view == "PA" ? View::kPA : View::kOther;
      for (const auto& p : j.at("pathologies")) e.record.pathologies.insert(p.get<std::string>());
      const auto& intub = j.at("intubated");
      if (intub.is_null()) {
        e.record.intubated = Intubation::kUnknown;
      } else {
        const auto s = intub.get<std::string>();
        if (s != "Y" && s != "N") throw fail("intubated must be \"Y\", \"N\" or null");
        e.record.intubated = s == "Y" ? Intubation::kYes : Intubation::kNo;
      }
      e.record.image_filename = j.at("image_filename").get<std::string>();
      if (const auto it = j.find("label"); it != j.end()) {
        const int v = it->get<int>();
        if (v != 0 && v != 1) throw fail("label must be 0 or 1");
        e.label = label_from_bool(v == 1);
      }
    } catch (const nlohmann::json::exception& ex) {
      throw fail(ex.what());
    }
    if (e.record.pathologies.empty()) throw fail("pathologies is empty");
    if (e.record.image_filename.empty()) throw fail("image_filename is empty");
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace cxr::dataset
