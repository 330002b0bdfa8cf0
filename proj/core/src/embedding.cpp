#include "cxr/embedding.hpp"

#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "cxr/csv.hpp"
#include "cxr/digest.hpp"
#include "cxr/error.hpp"
#include "cxr/rng.hpp"

namespace cxr::embedding {

FeatureMap::FeatureMap(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() != kSize) {
    throw ValidationError("feature map must hold 1024x7x7 values, got " +
                          std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw ValidationError("feature map contains a non-finite value");
  }
}

void Embedding::validate() const {
  if (values.size() != kEmbeddingDim) {
    throw ValidationError("embedding '" + image_id + "' has " + std::to_string(values.size()) +
                          " values, expected 1024");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("embedding '" + image_id + "' is not finite");
  }
}

void ExtractorConfig::validate() const {
  if (mode == ExtractorMode::kGraph && !graph_path) {
    throw ValidationError("graph mode requires a graph path");
  }
}

Embedding global_average_pool(const FeatureMap& map, std::string image_id) {
  Embedding out{std::move(image_id), std::vector<double>(kFeatureChannels)};
  const auto& v = map.values();
  for (std::size_t c = 0; c < kFeatureChannels; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < FeatureMap::kCells; ++i) sum += v[c * FeatureMap::kCells + i];
    out.values[c] = sum / static_cast<double>(FeatureMap::kCells);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph mode

struct GraphExtractor::Impl {
  cv::dnn::Net net;
  GraphSignature signature;
};

namespace {

void check_decl(const TensorDecl* decl, std::string_view role, std::string_view name,
                std::span<const std::int64_t> expected, const std::vector<TensorDecl>& all) {
  if (decl == nullptr) {
    std::string declared;
    for (const auto& d : all) declared += (declared.empty() ? "" : ", ") + d.name;
    throw ShapeError("graph has no " + std::string(role) + " named '" + std::string(name) +
                     "' (declares: " + declared + ")");
  }
  if (!std::equal(decl->dims.begin(), decl->dims.end(), expected.begin(), expected.end())) {
    throw ShapeError("graph " + std::string(role) + " '" + std::string(name) + "' declares " +
                     format_dims(decl->dims) + ", expected " + format_dims(expected));
  }
}

}  // namespace

GraphExtractor::GraphExtractor(const std::filesystem::path& graph_path)
    : impl_(std::make_unique<Impl>()) {
  std::string bytes;
  try {
    bytes = read_file(graph_path);
  } catch (const IoError& e) {
    throw GraphLoadError(std::string("cannot load inference graph: ") + e.what());
  }
  impl_->signature = read_graph_signature(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
  check_decl(impl_->signature.find_input(kGraphInputName), "input", kGraphInputName,
             kGraphInputDims, impl_->signature.inputs);
  check_decl(impl_->signature.find_output(kGraphOutputName), "output", kGraphOutputName,
             kGraphOutputDims, impl_->signature.outputs);
  try {
    impl_->net = cv::dnn::readNetFromONNX(bytes.data(), bytes.size());
  } catch (const cv::Exception& e) {
    throw GraphLoadError("cannot load inference graph " + graph_path.string() + ": " + e.what());
  }
  if (impl_->net.empty()) throw GraphLoadError("inference graph is empty: " + graph_path.string());
  impl_->net.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
  impl_->net.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
}

GraphExtractor::~GraphExtractor() = default;
GraphExtractor::GraphExtractor(GraphExtractor&&) noexcept = default;
GraphExtractor& GraphExtractor::operator=(GraphExtractor&&) noexcept = default;

const GraphSignature& GraphExtractor::signature() const noexcept { return impl_->signature; }

FeatureMap GraphExtractor::extract(const imaging::PreprocessedImage& image) {
  const int dims[] = {1, 1, imaging::kInputSide, imaging::kInputSide};
  cv::Mat blob(4, dims, CV_32F);
  auto* dst = blob.ptr<float>();
  const auto& src = image.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]);

  cv::Mat out;
  try {
    impl_->net.setInput(blob, std::string(kGraphInputName));
    out = impl_->net.forward(std::string(kGraphOutputName));
  } catch (const cv::Exception& e) {
    throw GraphLoadError(std::string("inference failed: ") + e.what());
  }
  if (out.dims != 4 || out.size[0] != 1 || out.size[1] != static_cast<int>(kFeatureChannels) ||
      out.size[2] != static_cast<int>(kFeatureHeight) ||
      out.size[3] != static_cast<int>(kFeatureWidth) || out.type() != CV_32F) {
    std::vector<std::int64_t> got;
    for (int i = 0; i < out.dims; ++i) got.push_back(out.size[i]);
    throw ShapeError("graph produced " + format_dims(got) + ", expected " +
                     format_dims(kGraphOutputDims));
  }
  if (!out.isContinuous()) out = out.clone();
  const auto* p = out.ptr<float>();
  return FeatureMap(std::vector<double>(p, p + FeatureMap::kSize));
}

FeatureMap extract_features(const ExtractorConfig& config, const imaging::PreprocessedImage& image) {
  config.validate();
  if (config.mode != ExtractorMode::kGraph) {
    throw ValidationError("extract_features requires graph mode");
  }
  GraphExtractor extractor(*config.graph_path);
  return extractor.extract(image);
}

// ---------------------------------------------------------------------------
// Stub mode

std::vector<double> block_means(const imaging::PreprocessedImage& image) {
  constexpr int kBlock = imaging::kInputSide / StubProjection::kGrid;
  std::vector<double> out(StubProjection::kInputs);
  for (int by = 0; by < StubProjection::kGrid; ++by) {
    for (int bx = 0; bx < StubProjection::kGrid; ++bx) {
      double sum = 0.0;
      for (int y = by * kBlock; y < (by + 1) * kBlock; ++y) {
        for (int x = bx * kBlock; x < (bx + 1) * kBlock; ++x) sum += image.at(x, y);
      }
      out[static_cast<std::size_t>(by) * StubProjection::kGrid + bx] = sum / (kBlock * kBlock);
    }
  }
  return out;
}

StubProjection::StubProjection(std::uint64_t seed) : weights_(kEmbeddingDim * kInputs) {
  Rng rng(seed);
  for (auto& w : weights_) w = rng.uniform_symmetric();
}

Embedding StubProjection::apply(const imaging::PreprocessedImage& image,
                                std::string image_id) const {
  const auto blocks = block_means(image);
  Embedding out{std::move(image_id), std::vector<double>(kEmbeddingDim)};
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
    const auto w = row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < kInputs; ++j) acc += w[j] * blocks[j];
    out.values[i] = acc * kScale;
  }
  return out;
}

Embedding stub_extract(const ExtractorConfig& config, const imaging::PreprocessedImage& image,
                       std::string image_id) {
  if (config.mode != ExtractorMode::kStub) throw ValidationError("stub_extract requires stub mode");
  return StubProjection(config.stub_seed).apply(image, std::move(image_id));
}

// ---------------------------------------------------------------------------

Extractor::Extractor(const ExtractorConfig& config) : config_(config) {
  config_.validate();
  if (config_.mode == ExtractorMode::kGraph) {
    graph_.emplace(*config_.graph_path);
  } else {
    stub_ = std::make_shared<const StubProjection>(config_.stub_seed);
  }
}

Embedding Extractor::embed(const imaging::PreprocessedImage& image, std::string image_id) {
  if (graph_) return global_average_pool(graph_->extract(image), std::move(image_id));
  return stub_->apply(image, std::move(image_id));
}

std::vector<Embedding> embed_all(const ExtractorConfig& config, std::size_t count,
                                 const ImageSource& source,
                                 std::span<const std::string> image_ids, unsigned threads) {
  if (image_ids.size() != count) throw ValidationError("one image id per item is required");
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));

  std::vector<Embedding> out(count);
  std::vector<std::exception_ptr> errors(count);

  // Worker t handles items t, t + threads, ... with its own extractor.
  auto work = [&](unsigned t, Extractor& extractor) {
    for (std::size_t i = t; i < count; i += threads) {
      try {
        out[i] = extractor.embed(source(i), image_ids[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  if (threads == 1) {
    Extractor extractor(config);
    work(0, extractor);
  } else {
    // Construct every extractor up front so load errors surface on this thread.
    std::vector<Extractor> extractors;
    extractors.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) extractors.emplace_back(config);
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, std::ref(extractors[t]));
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings file

namespace {

std::vector<std::string> embeddings_header() {
  std::vector<std::string> header{"id", "label"};
  char buf[8];
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
    std::snprintf(buf, sizeof buf, "f%04zu", i);
    header.emplace_back(buf);
  }
  return header;
}

}  // namespace

std::size_t save_embeddings(std::span<const Embedding> embeddings, std::span<const Label> labels,
                            std::ostream& sink) {
  if (embeddings.size() != labels.size()) {
    throw ValidationError("embeddings and labels differ in length");
  }
  csv::write_row(sink, embeddings_header());
  char buf[40];
  for (std::size_t r = 0; r < embeddings.size(); ++r) {
    const auto& e = embeddings[r];
    e.validate();
    sink << csv::escape(e.image_id) << ',' << to_int(labels[r]);
    for (double v : e.values) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
      sink << ',';
      sink.write(buf, res.ptr - buf);
    }
    sink << '\n';
  }
  if (!sink) throw IoError("failed to write embeddings");
  return embeddings.size();
}

FeatureMap load_feature_map_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.size() != kFeatureChannels) {
    throw ParseError("feature tensor must have 1024 lines, found " + std::to_string(rows.size()));
  }
  std::vector<double> values;
  values.reserve(FeatureMap::kSize);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != FeatureMap::kCells) {
      throw ParseError("line " + std::to_string(r + 1) + ": expected 49 values", r + 1);
    }
    for (const auto& field : rows[r]) {
      double v = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw ParseError("line " + std::to_string(r + 1) + ": non-numeric value '" + field + "'",
                         r + 1);
      }
      values.push_back(v);
    }
  }
  return FeatureMap(std::move(values));
}

void save_feature_map_csv(const FeatureMap& map, std::ostream& sink) {
  char buf[40];
  const auto& v = map.values();
  for (std::size_t c = 0; c < kFeatureChannels; ++c) {
    for (std::size_t i = 0; i < FeatureMap::kCells; ++i) {
      if (i != 0) sink << ',';
      const auto res = std::to_chars(buf, buf + sizeof buf, v[c * FeatureMap::kCells + i],
                                     std::chars_format::general, 9);
      sink.write(buf, res.ptr - buf);
    }
    sink << '\n';
  }
  if (!sink) throw IoError("failed to write feature tensor");
}

EmbeddingSet load_embeddings(std::string_view text) {
  const auto rows = csv::parse(text);
  EmbeddingSet out;
  if (rows.empty()) return out;
  if (rows.front() != embeddings_header()) {
    throw ParseError("embeddings header must be id,label,f0000,...,f1023", 0);
  }
  const std::size_t width = kEmbeddingDim + 2;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != width) {
      throw ParseError("row " + std::to_string(r) + ": expected " + std::to_string(width) +
                           " columns, found " + std::to_string(row.size()),
                       r);
    }
    if (row[1] != "0" && row[1] != "1") {
      throw ParseError("row " + std::to_string(r) + ": label must be 0 or 1", r, "label");
    }
    Embedding e{row[0], std::vector<double>(kEmbeddingDim)};
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
      const auto& field = row[i + 2];
      const auto res = std::from_chars(field.data(), field.data() + field.size(), e.values[i]);
      if (res.ec != std::errc() || res.ptr != field.data() + field.size() ||
          !std::isfinite(e.values[i])) {
        throw ParseError("row " + std::to_string(r) + ": non-numeric feature '" + field + "'", r,
                         embeddings_header()[i + 2]);
      }
    }
    out.labels.push_back(label_from_bool(row[1] == "1"));
    out.embeddings.push_back(std::move(e));
  }
  return out;
}

EmbeddingSet load_embeddings(std::istream& source) {
  std::ostringstream buf;
  buf << source.rdbuf();
  return load_embeddings(std::string_view(buf.view()));
}

}  // namespace cxr::embedding
