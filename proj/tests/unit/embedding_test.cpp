#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cxr/digest.hpp"
#include "cxr/embedding.hpp"
#include "cxr/error.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

namespace cxr::embedding {
namespace {

using imaging::PreprocessedImage;

std::filesystem::path fixture(const char* name) { return testing::fixture_dir() / name; }

PreprocessedImage random_preprocessed(Rng& rng) {
  std::vector<double> v(PreprocessedImage::kSize);
  for (auto& x : v) x = 1024.0 * rng.uniform_symmetric();
  return PreprocessedImage(std::move(v));
}

PreprocessedImage fixture_input() {
  return imaging::preprocess(imaging::load_png_file(fixture("fixture_pa_01.png")));
}

ExtractorConfig graph_config() {
  return {ExtractorMode::kGraph, fixture("tiny_features.onnx"), 0};
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(GraphExtractor, MatchesReferenceTensor) {
  GraphExtractor graph(fixture("tiny_features.onnx"));
  const auto map = graph.extract(fixture_input());
  const auto expected = load_feature_map_csv(read_file(fixture("fixture_features.csv")));
  EXPECT_LE(max_abs_diff(map.values(), expected.values()), 1e-3);
}

TEST(GraphExtractor, PooledEmbeddingMatchesPooledReference) {
  Extractor ex(graph_config());
  const auto emb = ex.embed(fixture_input(), "fixture_pa_01");
  const auto expected = load_feature_map_csv(read_file(fixture("fixture_features.csv")));
  const auto ref = oracle::pool(expected.values(), kFeatureChannels, FeatureMap::kCells);
  EXPECT_EQ(emb.image_id, "fixture_pa_01");
  EXPECT_LE(max_abs_diff(emb.values, ref), 1e-3);
}

TEST(GraphExtractor, WrongInputShapeNamesBothShapes) {
  try {
    GraphExtractor graph(fixture("wrong_input.onnx"));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("[1,1,224,224]"), std::string::npos) << what;
    EXPECT_NE(what.find("[1,3,224,224]"), std::string::npos) << what;
  }
}

TEST(GraphExtractor, WrongOutputShape) {
  EXPECT_THROW(GraphExtractor{fixture("wrong_output.onnx")}, ShapeError);
}

TEST(GraphExtractor, MissingAndCorruptFiles) {
  EXPECT_THROW(GraphExtractor{"/nonexistent/model.onnx"}, GraphLoadError);
  EXPECT_THROW(GraphExtractor{fixture("corrupt.onnx")}, GraphLoadError);
}

TEST(GraphExtractor, ExtractFeaturesRequiresGraphMode) {
  EXPECT_THROW(extract_features(ExtractorConfig{}, PreprocessedImage{}), ValidationError);
  ExtractorConfig no_path{ExtractorMode::kGraph, std::nullopt, 0};
  EXPECT_THROW(no_path.validate(), ValidationError);
}

TEST(Pooling, ConstantMap) {
  const auto emb = global_average_pool(FeatureMap(std::vector<double>(FeatureMap::kSize, 2.5)));
  for (double v : emb.values) EXPECT_DOUBLE_EQ(v, 2.5);
}

TEST(Pooling, PerChannelConstants) {
  std::vector<double> v(FeatureMap::kSize);
  for (std::size_t c = 0; c < kFeatureChannels; ++c) {
    for (std::size_t i = 0; i < FeatureMap::kCells; ++i) v[c * FeatureMap::kCells + i] = c;
  }
  const auto emb = global_average_pool(FeatureMap(v));
  for (std::size_t c = 0; c < kFeatureChannels; ++c) EXPECT_DOUBLE_EQ(emb.values[c], c);
}

TEST(Pooling, RandomMapsMatchOracleAndAreLinear) {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = testing::random_vector(rng, FeatureMap::kSize, 10.0);
    const auto b = testing::random_vector(rng, FeatureMap::kSize, 10.0);
    const double alpha = 3.0 * rng.uniform_symmetric();
    std::vector<double> mix(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) mix[i] = a[i] + alpha * b[i];
    const auto pa = global_average_pool(FeatureMap(a));
    const auto pb = global_average_pool(FeatureMap(b));
    const auto pm = global_average_pool(FeatureMap(mix));
    const auto ref = oracle::pool(a, kFeatureChannels, FeatureMap::kCells);
    for (std::size_t c = 0; c < kFeatureChannels; ++c) {
      EXPECT_NEAR(pa.values[c], ref[c], 1e-12);
      EXPECT_NEAR(pm.values[c], pa.values[c] + alpha * pb.values[c], 1e-12);
    }
  }
}

TEST(FeatureMap, RejectsWrongSizeAndNonFinite) {
  EXPECT_THROW(FeatureMap(std::vector<double>(10)), ValidationError);
  std::vector<double> v(FeatureMap::kSize, 0.0);
  v[3] = INFINITY;
  EXPECT_THROW(FeatureMap{v}, ValidationError);
}

TEST(Stub, DeterministicForSeed) {
  Rng rng(4);
  const auto img = random_preprocessed(rng);
  const ExtractorConfig cfg{ExtractorMode::kStub, std::nullopt, 7};
  const auto a = stub_extract(cfg, img, "x");
  const auto b = stub_extract(cfg, img, "x");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.values.size(), kEmbeddingDim);
  const auto c = stub_extract({ExtractorMode::kStub, std::nullopt, 8}, img, "x");
  EXPECT_NE(a.values, c.values);
}

TEST(Stub, ZeroImageGivesZeroEmbedding) {
  const auto e = stub_extract(ExtractorConfig{}, PreprocessedImage{});
  for (double v : e.values) EXPECT_EQ(v, 0.0);
}

TEST(Stub, SinglePixelChangesEmbedding) {
  std::vector<double> v(PreprocessedImage::kSize, 0.0);
  v[100 * 224 + 37] = 500.0;
  const auto e = stub_extract(ExtractorConfig{}, PreprocessedImage(v));
  double norm = 0.0;
  for (double x : e.values) norm += x * x;
  EXPECT_GT(norm, 0.0);
}

TEST(Stub, MatchesIndependentProjection) {
  Rng rng(12);
  const auto img = random_preprocessed(rng);
  const std::uint64_t seed = 99;

  // Block means by direct summation, then the projection drawn afresh.
  std::vector<double> means(256, 0.0);
  for (int y = 0; y < 224; ++y) {
    for (int x = 0; x < 224; ++x) means[(y / 14) * 16 + x / 14] += img.at(x, y) / 196.0;
  }
  Rng draw(seed);
  std::vector<double> expected(1024, 0.0);
  for (std::size_t j = 0; j < 1024; ++j) {
    for (std::size_t i = 0; i < 256; ++i) expected[j] += draw.uniform_symmetric() * means[i];
    expected[j] /= 256.0;
  }
  const auto e = stub_extract({ExtractorMode::kStub, std::nullopt, seed}, img);
  for (std::size_t j = 0; j < 1024; ++j) EXPECT_NEAR(e.values[j], expected[j], 1e-9);
}

TEST(Stub, LinearInTheImage) {
  Rng rng(13);
  std::vector<double> v(PreprocessedImage::kSize);
  for (auto& x : v) x = 500.0 * rng.uniform_symmetric();
  std::vector<double> doubled = v;
  for (auto& x : doubled) x *= 2.0;
  const auto a = stub_extract(ExtractorConfig{}, PreprocessedImage(v));
  const auto b = stub_extract(ExtractorConfig{}, PreprocessedImage(doubled));
  for (std::size_t j = 0; j < kEmbeddingDim; ++j) EXPECT_NEAR(b.values[j], 2 * a.values[j], 1e-9);
}

TEST(EmbeddingsCsv, RoundTripWithinPrintedPrecision) {
  Rng rng(30);
  std::vector<Embedding> embs;
  std::vector<Label> labels;
  for (int i = 0; i < 5; ++i) {
    embs.push_back({"img," + std::to_string(i), testing::random_vector(rng, kEmbeddingDim, 3.0)});
    labels.push_back(label_from_bool(i % 2 == 0));
  }
  std::stringstream buf;
  EXPECT_EQ(save_embeddings(embs, labels, buf), 5u);
  const auto text = buf.str();
  EXPECT_EQ(text.substr(0, 20), "id,label,f0000,f0001");
  const auto set = load_embeddings(std::string_view(text));
  ASSERT_EQ(set.embeddings.size(), 5u);
  EXPECT_EQ(set.labels, labels);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(set.embeddings[i].image_id, embs[i].image_id);
    for (std::size_t j = 0; j < kEmbeddingDim; ++j) {
      EXPECT_NEAR(set.embeddings[i].values[j], embs[i].values[j],
                  1e-8 * std::max(1.0, std::abs(embs[i].values[j])));
    }
  }
}

TEST(EmbeddingsCsv, ShortRowNamesRow) {
  std::stringstream buf;
  const std::vector<Embedding> one{{"a", std::vector<double>(kEmbeddingDim, 1.0)}};
  const std::vector<Label> lab{Label::kPositive};
  save_embeddings(one, lab, buf);
  std::string text = buf.str() + "b,0";
  for (int j = 0; j < 1023; ++j) text += ",0.5";
  text += "\n";
  try {
    load_embeddings(std::string_view(text));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), std::optional<std::size_t>(2));
  }
}

TEST(EmbeddingsCsv, HeaderOnlyAndBadLabel) {
  std::stringstream buf;
  save_embeddings(std::vector<Embedding>{}, std::vector<Label>{}, buf);
  const auto header_only = buf.str();
  const auto set = load_embeddings(std::string_view(header_only));
  EXPECT_TRUE(set.embeddings.empty());
  std::string bad = header_only + "a,2";
  for (int j = 0; j < 1024; ++j) bad += ",0";
  EXPECT_THROW(load_embeddings(std::string_view(bad)), ParseError);
  EXPECT_THROW(load_embeddings(std::string_view("id,label,x\n")), ParseError);
}

TEST(FeatureMapCsv, RoundTrip) {
  Rng rng(31);
  const FeatureMap map(testing::random_vector(rng, FeatureMap::kSize, 5.0));
  std::stringstream buf;
  save_feature_map_csv(map, buf);
  const auto back = load_feature_map_csv(buf.str());
  EXPECT_LE(max_abs_diff(back.values(), map.values()), 1e-7);
  EXPECT_THROW(load_feature_map_csv("1,2,3\n"), ParseError);
}

TEST(EmbedAll, ParallelEqualsSequential) {
  Rng rng(40);
  std::vector<PreprocessedImage> images;
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) {
    images.push_back(random_preprocessed(rng));
    ids.push_back("i" + std::to_string(i));
  }
  const ImageSource source = [&](std::size_t i) { return images[i]; };
  for (const auto& cfg : {graph_config(), ExtractorConfig{}}) {
    const auto seq = embed_all(cfg, images.size(), source, ids, 1);
    const auto par = embed_all(cfg, images.size(), source, ids, 3);
    EXPECT_EQ(seq, par);
    EXPECT_EQ(seq[4].image_id, "i4");
  }
}

TEST(EmbedAll, LowestFailingIndexIsReported) {
  std::vector<std::string> ids(8, "x");
  const ImageSource source = [](std::size_t i) -> PreprocessedImage {
    if (i == 3 || i == 6) throw IoError("failed item " + std::to_string(i));
    return PreprocessedImage{};
  };
  try {
    embed_all(ExtractorConfig{}, 8, source, ids, 4);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_STREQ(e.what(), "failed item 3");
  }
}

}  // namespace
}  // namespace cxr::embedding
