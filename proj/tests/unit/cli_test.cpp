#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cxr/digest.hpp"
#include "cxr_triage/commands.hpp"
#include "support/synthetic.hpp"

namespace cxr::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path synthetic() { return testing::data_dir() / "synthetic40"; }

std::string count_columns(const std::string& line) {
  return std::to_string(std::count(line.begin(), line.end(), ',') + 1);
}

// Writes an embeddings CSV whose two classes sit in well separated clusters.
void write_separable(const fs::path& path, int n, bool both_classes = true) {
  std::ofstream f(path);
  f << "id,label";
  char name[8];
  for (int j = 0; j < 1024; ++j) {
    std::snprintf(name, sizeof name, "f%04d", j);
    f << ',' << name;
  }
  f << '\n';
  for (int i = 0; i < n; ++i) {
    const int label = both_classes ? i % 2 : 1;
    f << "s" << i << ',' << label;
    for (int j = 0; j < 1024; ++j) f << ',' << (label ? 10.0 : -10.0) + 0.01 * ((i * 7 + j) % 5);
    f << '\n';
  }
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testing::scratch_dir("cli_pipeline");
    const auto ingest =
        invoke({"ingest", "--metadata", (synthetic() / "metadata.csv").string(), "--images-dir",
                (synthetic() / "images").string(), "--task", "intubation", "--out",
                (dir_ / "dataset.json").string()});
    ASSERT_EQ(ingest.code, 0) << ingest.err;
    const auto embed = invoke({"embed", "--dataset", (dir_ / "dataset.json").string(), "--stub",
                               "--out", (dir_ / "emb.csv").string()});
    ASSERT_EQ(embed.code, 0) << embed.err;
  }

  static fs::path dir_;
};

fs::path Pipeline::dir_;

TEST_F(Pipeline, IngestReportsCounts) {
  const auto r = invoke({"ingest", "--metadata", (synthetic() / "metadata.csv").string(),
                         "--images-dir", (synthetic() / "images").string(), "--task", "covid",
                         "--out", (dir_ / "covid.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("positives=24 negatives=16"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(sidecar_path((dir_ / "covid.json").string())));
}

TEST_F(Pipeline, EmbedWritesOneRowPerImage) {
  std::ifstream f(dir_ / "emb.csv");
  std::string line;
  int rows = 0;
  std::getline(f, line);
  EXPECT_EQ(count_columns(line), "1026");
  while (std::getline(f, line)) {
    EXPECT_EQ(count_columns(line), "1026");
    ++rows;
  }
  EXPECT_EQ(rows, 40);
}

TEST_F(Pipeline, EmbedIsDeterministic) {
  const auto again = dir_ / "emb2.csv";
  ASSERT_EQ(invoke({"embed", "--dataset", (dir_ / "dataset.json").string(), "--stub", "--out",
                    again.string(), "--threads", "3"})
                .code,
            0);
  EXPECT_EQ(read_file(again), read_file(dir_ / "emb.csv"));
}

TEST_F(Pipeline, EmbedWithGraph) {
  const auto out = dir_ / "graph.csv";
  const auto r = invoke({"embed", "--dataset", (dir_ / "dataset.json").string(), "--graph",
                         (testing::fixture_dir() / "tiny_features.onnx").string(), "--out",
                         out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out));
}

TEST_F(Pipeline, EvalWritesReportsAndMetrics) {
  const auto report = dir_ / "report";
  const auto r = invoke({"eval", "--embeddings", (dir_ / "emb.csv").string(), "--k", "5",
                         "--bootstrap", "500", "--report-dir", report.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("auc="), std::string::npos);
  for (const char* name : {"confusion_matrix.csv", "confusion_matrix.txt", "roc.csv", "roc.svg",
                           "metrics.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(report / name)) << name;
  }
  const auto metrics = nlohmann::json::parse(read_file(report / "metrics.json"));
  EXPECT_EQ(metrics["n_train"], 30);
  EXPECT_EQ(metrics["n_test"], 10);
  EXPECT_EQ(metrics["task"], "intubation");
  const auto manifest = nlohmann::json::parse(read_file(report / "manifest.json"));
  EXPECT_EQ(manifest["input_digests"]["metadata_csv"],
            sha256_file_hex(synthetic() / "metadata.csv"));
}

TEST_F(Pipeline, EvalIsDeterministic) {
  const auto a = dir_ / "det_a";
  const auto b = dir_ / "det_b";
  for (const auto& d : {a, b}) {
    ASSERT_EQ(invoke({"eval", "--embeddings", (dir_ / "emb.csv").string(), "--bootstrap", "300",
                      "--report-dir", d.string()})
                  .code,
              0);
  }
  for (const char* name : {"confusion_matrix.csv", "roc.csv", "roc.svg", "metrics.json"}) {
    EXPECT_EQ(read_file(a / name), read_file(b / name)) << name;
  }
  auto ma = nlohmann::json::parse(read_file(a / "manifest.json"));
  auto mb = nlohmann::json::parse(read_file(b / "manifest.json"));
  ma.erase("created_utc");
  mb.erase("created_utc");
  EXPECT_EQ(ma, mb);
}

TEST_F(Pipeline, SweepWritesOneRowPerK) {
  const auto report = dir_ / "sweep";
  const auto r = invoke({"sweep-k", "--embeddings", (dir_ / "emb.csv").string(), "--report-dir",
                         report.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream f(report / "sweep.csv");
  std::string line;
  std::getline(f, line);
  EXPECT_EQ(line, "k,precision,recall,f1,accuracy,auc");
  int rows = 0;
  while (std::getline(f, line)) ++rows;
  EXPECT_EQ(rows, 13);
  EXPECT_NE(r.out.find("best_k="), std::string::npos);
}

TEST(Cli, SeparableDataPicksSmallestK) {
  const auto dir = testing::scratch_dir("cli_separable");
  write_separable(dir / "emb.csv", 60);
  const auto r = invoke({"sweep-k", "--embeddings", (dir / "emb.csv").string(), "--report-dir",
                         (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("best_k=2 f1=1"), std::string::npos) << r.out;
}

TEST(Cli, ExitCodes) {
  const auto dir = testing::scratch_dir("cli_exit");
  const auto metadata = (synthetic() / "metadata.csv").string();

  EXPECT_EQ(invoke({"eval", "--embeddings", "x.csv", "--k", "0", "--report-dir", "r"}).code,
            kUsage);
  EXPECT_EQ(invoke({"nonsense"}).code, kUsage);
  EXPECT_EQ(invoke({"--version"}).code, kOk);

  std::ofstream(dir / "bad.csv") << "patientid,view\np,PA\n";
  EXPECT_EQ(invoke({"ingest", "--metadata", (dir / "bad.csv").string(), "--images-dir",
                    dir.string(), "--task", "covid", "--out", (dir / "d.json").string()})
                .code,
            kParse);

  const auto missing = invoke({"ingest", "--metadata", metadata, "--images-dir",
                               (dir / "nowhere").string(), "--task", "covid", "--out",
                               (dir / "d.json").string()});
  EXPECT_EQ(missing.code, kImage);
  EXPECT_NE(missing.err.find("synthetic-001.png"), std::string::npos) << missing.err;

  ASSERT_EQ(invoke({"ingest", "--metadata", metadata, "--images-dir",
                    (synthetic() / "images").string(), "--task", "covid", "--out",
                    (dir / "ok.json").string()})
                .code,
            kOk);
  EXPECT_EQ(invoke({"embed", "--dataset", (dir / "ok.json").string(), "--graph",
                    (testing::fixture_dir() / "wrong_input.onnx").string(), "--out",
                    (dir / "e.csv").string()})
                .code,
            kGraph);
  EXPECT_EQ(invoke({"embed", "--dataset", (dir / "ok.json").string(), "--stub", "--graph", "g",
                    "--out", (dir / "e.csv").string()})
                .code,
            kUsage);

  write_separable(dir / "one_class.csv", 20, false);
  EXPECT_EQ(invoke({"eval", "--embeddings", (dir / "one_class.csv").string(), "--metadata",
                    metadata, "--report-dir", (dir / "r1").string()})
                .code,
            kClassAbsent);

  write_separable(dir / "small.csv", 8);
  EXPECT_EQ(invoke({"eval", "--embeddings", (dir / "small.csv").string(), "--metadata", metadata,
                    "--k", "7", "--report-dir", (dir / "r2").string()})
                .code,
            kUsage);
  EXPECT_EQ(invoke({"sweep-k", "--embeddings", (dir / "small.csv").string(), "--k-min", "5", "--k-max", "3", "--report-dir",
                    (dir / "r3").string()})
                .code,
            kUsage);

  std::ofstream(dir / "ragged.csv") << "id,label,f0000\na,1,0.5\n";
  EXPECT_EQ(invoke({"eval", "--embeddings", (dir / "ragged.csv").string(), "--metadata",
                    metadata, "--report-dir", (dir / "r4").string()})
                .code,
            kParse);
}

}  // namespace
}  // namespace cxr::cli
