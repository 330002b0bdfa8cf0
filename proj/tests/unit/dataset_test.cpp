#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <set>

#include "cxr/dataset.hpp"
#include "cxr/digest.hpp"
#include "cxr/error.hpp"
#include "cxr/rng.hpp"
#include "support/synthetic.hpp"

namespace cxr::dataset {
namespace {

constexpr const char* kHeader = "patientid,offset,finding,intubated,view,filename,notes\n";

StudyRecord record(std::string id, View view, std::set<std::string> path, Intubation intub,
                   std::string file) {
  return {std::move(id), view, std::move(path), intub, std::move(file)};
}

std::vector<LabeledExample> numbered_examples(std::size_t n) {
  std::vector<LabeledExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({record("P" + std::to_string(i / 3), View::kPA, {"Pneumonia"},
                          Intubation::kNo, "img" + std::to_string(i) + ".png"),
                   label_from_bool(i % 3 == 0), Task::kCovid});
  }
  return out;
}

TEST(ParseMetadata, MultiLabelFindingAndFields) {
  const std::string csv = std::string(kHeader) +
                          "p1,0,Pneumonia/Viral/COVID-19,Y,PA,a.png,\"note, with comma\"\n";
  const auto recs = parse_metadata(csv);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].patient_id, "p1");
  EXPECT_EQ(recs[0].pathologies, (std::set<std::string>{"Pneumonia", "Viral", "COVID-19"}));
  EXPECT_EQ(recs[0].intubated, Intubation::kYes);
  EXPECT_EQ(recs[0].view, View::kPA);
  EXPECT_EQ(recs[0].image_filename, "a.png");
}

TEST(ParseMetadata, TokensAreTrimmedAndEmptyIntubationIsUnknown) {
  const auto recs =
      parse_metadata(std::string(kHeader) + "p2,1, Pneumonia / No Finding ,,AP Supine,b.png,\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].intubated, Intubation::kUnknown);
  EXPECT_EQ(recs[0].pathologies, (std::set<std::string>{"Pneumonia", "No Finding"}));
  EXPECT_EQ(recs[0].view, View::kAP);
}

TEST(ParseMetadata, MissingColumnIsNamed) {
  try {
    parse_metadata("patientid,intubated,view,filename\np,Y,PA,a.png\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.column(), "finding");
    EXPECT_NE(std::string(e.what()).find("finding"), std::string::npos);
  }
}

TEST(ParseMetadata, WrongFieldCountNamesRow) {
  const std::string csv = std::string(kHeader) + "p1,0,COVID-19,Y,PA,a.png,\n" +
                          "p2,0,COVID-19,Y,PA\n";
  try {
    parse_metadata(csv);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    ASSERT_TRUE(e.row().has_value());
    EXPECT_EQ(*e.row(), 2u);
  }
}

TEST(ParseMetadata, RejectsEmptyFindingFilenameAndBadIntubation) {
  EXPECT_THROW(parse_metadata(std::string(kHeader) + "p,0,,Y,PA,a.png,\n"), ParseError);
  EXPECT_THROW(parse_metadata(std::string(kHeader) + "p,0,COVID-19,Y,PA,,\n"), ParseError);
  EXPECT_THROW(parse_metadata(std::string(kHeader) + "p,0,COVID-19,maybe,PA,a.png,\n"),
               ParseError);
  EXPECT_THROW(parse_metadata(""), ParseError);
}

TEST(ParseView, Variants) {
  EXPECT_EQ(parse_view("AP"), View::kAP);
  EXPECT_EQ(parse_view("ap"), View::kAP);
  EXPECT_EQ(parse_view("AP Supine"), View::kAP);
  EXPECT_EQ(parse_view("AP semi erect"), View::kAP);
  EXPECT_EQ(parse_view(" PA "), View::kPA);
  EXPECT_EQ(parse_view("L"), View::kOther);
  EXPECT_EQ(parse_view("Axial"), View::kOther);
  EXPECT_EQ(parse_view("APX"), View::kOther);
  EXPECT_EQ(parse_view(""), View::kOther);
}

TEST(DeriveLabels, CovidLabelsEveryRecord) {
  const std::vector<StudyRecord> recs{
      record("a", View::kPA, {"Pneumonia", "COVID-19"}, Intubation::kUnknown, "1.png"),
      record("b", View::kPA, {"Pneumonia"}, Intubation::kYes, "2.png")};
  const auto out = derive_labels(recs, Task::kCovid);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].label, Label::kPositive);
  EXPECT_EQ(out[1].label, Label::kNegative);
}

TEST(DeriveLabels, IntubationDropsUnknown) {
  const std::vector<StudyRecord> recs{
      record("a", View::kPA, {"COVID-19"}, Intubation::kUnknown, "1.png"),
      record("b", View::kPA, {"COVID-19"}, Intubation::kYes, "2.png"),
      record("c", View::kAP, {"COVID-19"}, Intubation::kNo, "3.png")};
  const auto out = derive_labels(recs, Task::kIntubation);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].record.patient_id, "b");
  EXPECT_EQ(out[0].label, Label::kPositive);
  EXPECT_EQ(out[1].label, Label::kNegative);
  for (const auto& e : out) EXPECT_NE(e.record.intubated, Intubation::kUnknown);
  EXPECT_TRUE(derive_labels(std::vector<StudyRecord>{}, Task::kCovid).empty());
}

TEST(FilterViews, KeepsApAndPaInOrder) {
  const std::vector<StudyRecord> recs{record("1", View::kAP, {"x"}, Intubation::kNo, "1"),
                                      record("2", View::kOther, {"x"}, Intubation::kNo, "2"),
                                      record("3", View::kPA, {"x"}, Intubation::kNo, "3")};
  const auto out = filter_views(recs);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].patient_id, "1");
  EXPECT_EQ(out[1].patient_id, "3");
  EXPECT_TRUE(filter_views(std::vector<StudyRecord>{recs[1]}).empty());
  EXPECT_TRUE(filter_views(std::vector<StudyRecord>{}).empty());
}

TEST(Split, ReportedSplitSizes) {
  const auto a = split(numbered_examples(535), {0.8, 42});
  EXPECT_EQ(a.train.size(), 428u);
  EXPECT_EQ(a.test.size(), 107u);
  const auto b = split(numbered_examples(159), {0.75, 42});
  EXPECT_EQ(b.train.size(), 119u);
  EXPECT_EQ(b.test.size(), 40u);
  const auto c = split(numbered_examples(10), {1.0, 42});
  EXPECT_EQ(c.train.size(), 10u);
  EXPECT_EQ(c.test.size(), 0u);
}

TEST(Split, FloorIsRobustToRepresentationError) {
  EXPECT_EQ(train_count(100, 0.29), 29u);
  EXPECT_EQ(train_count(10, 0.7), 7u);
  EXPECT_EQ(train_count(3, 0.5), 1u);
}

TEST(Split, ErrorsOnEmptyInputAndBadFraction) {
  EXPECT_THROW(split(std::vector<LabeledExample>{}, {0.5, 1}), ValidationError);
  EXPECT_THROW(split(numbered_examples(5), {0.0, 1}), ValidationError);
  EXPECT_THROW(split(numbered_examples(5), {1.5, 1}), ValidationError);
}

TEST(SplitProperty, PartitionWithFloorSizes) {
  Rng gen(1234);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + gen.uniform_below(300);
    const double f = 0.01 + 0.99 * gen.uniform_unit();
    const auto idx = split_indices(n, {f, gen.next_u64()});
    EXPECT_EQ(idx.train.size(), train_count(n, f));
    EXPECT_EQ(idx.train.size() + idx.test.size(), n);
    std::vector<std::size_t> all = idx.train;
    all.insert(all.end(), idx.test.begin(), idx.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(all[i], i);
  }
}

TEST(SplitProperty, SeedDeterminismAndSensitivity) {
  const auto examples = numbered_examples(50);
  int differing = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = split(examples, {0.7, s});
    const auto b = split(examples, {0.7, s});
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    const auto c = split(examples, {0.7, s + 1000});
    differing += a.train != c.train;
  }
  EXPECT_GE(differing, 1);
}

TEST(SplitModes, StratifiedKeepsClassProportions) {
  const auto examples = numbered_examples(90);  // 30 positive, 60 negative
  const auto s = split(examples, {0.5, 3, SplitMode::kStratified});
  auto positives = [](const std::vector<LabeledExample>& v) {
    return std::count_if(v.begin(), v.end(),
                         [](const LabeledExample& e) { return e.label == Label::kPositive; });
  };
  EXPECT_EQ(positives(s.train), 15);
  EXPECT_EQ(positives(s.test), 15);
  EXPECT_EQ(s.train.size(), 45u);
}

TEST(SplitModes, GroupedNeverSharesAPatient) {
  const auto examples = numbered_examples(60);  // patients of three images each
  const auto s = split(examples, {0.75, 11, SplitMode::kGrouped});
  std::set<std::string> train_patients;
  for (const auto& e : s.train) train_patients.insert(e.record.patient_id);
  for (const auto& e : s.test) EXPECT_FALSE(train_patients.contains(e.record.patient_id));
  EXPECT_EQ(s.train.size() + s.test.size(), 60u);
  EXPECT_GE(s.train.size(), train_count(60, 0.75));
}

TEST(MetadataProperty, SerializeParseRoundTrip) {
  Rng gen(77);
  const char* tokens[] = {"COVID-19", "Pneumonia", "Viral", "No Finding", "ARDS, severe",
                          "quoted \"x\""};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<StudyRecord> recs;
    const auto n = gen.uniform_below(20);
    for (std::uint64_t i = 0; i < n; ++i) {
      StudyRecord r;
      r.patient_id = "patient " + std::to_string(gen.uniform_below(1000));
      r.view = static_cast<View>(gen.uniform_below(3));
      const auto k = 1 + gen.uniform_below(3);
      for (std::uint64_t t = 0; t < k; ++t) r.pathologies.insert(tokens[gen.uniform_below(6)]);
      r.intubated = static_cast<Intubation>(gen.uniform_below(3));
      r.image_filename = "dir/img " + std::to_string(i) + ".png";
      recs.push_back(r);
    }
    EXPECT_EQ(parse_metadata(serialize_metadata(recs)), recs);
  }
}

TEST(Manifest, RoundTripWithLabels) {
  const std::vector<StudyRecord> recs{
      record("a", View::kPA, {"COVID-19", "Pneumonia"}, Intubation::kYes, "1.png"),
      record("b", View::kAP, {"No Finding"}, Intubation::kNo, "2.png"),
      record("c", View::kAP, {"Viral"}, Intubation::kUnknown, "3.png")};
  const auto labeled = derive_labels(recs, Task::kCovid);
  const auto doc = to_manifest(labeled);
  ASSERT_TRUE(doc.is_array());
  EXPECT_TRUE(doc[2]["intubated"].is_null());
  EXPECT_EQ(doc[0]["intubated"], "Y");
  const auto back = from_manifest(doc);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].record, recs[i]);
    EXPECT_EQ(back[i].label, labeled[i].label);
  }
  EXPECT_FALSE(from_manifest(to_manifest(recs))[0].label.has_value());
}

TEST(Manifest, MalformedEntryNamesPosition) {
  auto doc = to_manifest(std::vector<StudyRecord>{
      record("a", View::kPA, {"x"}, Intubation::kYes, "1.png"),
      record("b", View::kPA, {"x"}, Intubation::kYes, "2.png")});
  doc[1]["intubated"] = "maybe";
  try {
    from_manifest(doc);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), std::optional<std::size_t>(2));
  }
}

TEST(SyntheticFixture, IngestCounts) {
  const auto recs = parse_metadata(read_file(testing::data_dir() / "synthetic40/metadata.csv"));
  EXPECT_EQ(recs.size(), 45u);
  const auto kept = filter_views(recs);
  EXPECT_EQ(kept.size(), 40u);
  const auto covid = derive_labels(kept, Task::kCovid);
  EXPECT_EQ(std::count_if(covid.begin(), covid.end(),
                          [](const auto& e) { return e.label == Label::kPositive; }),
            24);
  EXPECT_EQ(derive_labels(kept, Task::kIntubation).size(), 40u);
}

// Runs only when the public dataset's metadata is available locally.
TEST(RealDataset, CovidCountsMatchKnownTotals) {
  const char* path = std::getenv("CXR_REAL_METADATA");
  if (path == nullptr) GTEST_SKIP() << "set CXR_REAL_METADATA to the dataset's metadata.csv";
  const auto kept = filter_views(parse_metadata(read_file(path)));
  const auto covid = derive_labels(kept, Task::kCovid);
  const auto positives = std::count_if(covid.begin(), covid.end(),
                                       [](const auto& e) { return e.label == Label::kPositive; });
  RecordProperty("ap_pa_records", static_cast<int>(kept.size()));
  EXPECT_EQ(positives, 342);
  EXPECT_EQ(static_cast<long>(covid.size()) - positives, 193);
}

}  // namespace
}  // namespace cxr::dataset
