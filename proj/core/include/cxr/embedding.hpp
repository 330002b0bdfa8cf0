#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cxr/imaging.hpp"
#include "cxr/label.hpp"
#include "cxr/onnx_inspect.hpp"

namespace cxr::embedding {

inline constexpr std::size_t kFeatureChannels = 1024;
inline constexpr std::size_t kFeatureHeight = 7;
inline constexpr std::size_t kFeatureWidth = 7;
inline constexpr std::size_t kEmbeddingDim = kFeatureChannels;

inline constexpr std::string_view kGraphInputName = "input";
inline constexpr std::string_view kGraphOutputName = "features";
inline constexpr std::int64_t kGraphInputDims[] = {1, 1, imaging::kInputSide, imaging::kInputSide};
inline constexpr std::int64_t kGraphOutputDims[] = {1, kFeatureChannels, kFeatureHeight,
                                                    kFeatureWidth};

/// Last convolutional feature map, 1024 x 7 x 7, channel-major.
class FeatureMap {
 public:
  static constexpr std::size_t kCells = kFeatureHeight * kFeatureWidth;
  static constexpr std::size_t kSize = kFeatureChannels * kCells;

  FeatureMap() : values_(kSize, 0.0) {}
  /// Throws ValidationError on wrong size or non-finite values.
  explicit FeatureMap(std::vector<double> values);

  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return values_[c * kCells + y * kFeatureWidth + x];
  }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

/// 1024-dimensional image representation.
struct Embedding {
  std::string image_id;
  std::vector<double> values;

  /// Throws ValidationError unless there are 1024 finite values.
  void validate() const;

  bool operator==(const Embedding&) const = default;
};

enum class ExtractorMode { kGraph, kStub };

struct ExtractorConfig {
  ExtractorMode mode = ExtractorMode::kStub;
  std::optional<std::filesystem::path> graph_path;
  std::uint64_t stub_seed = 0;

  /// Throws ValidationError when mode is kGraph without a graph path.
  void validate() const;
};

/// Mean over the 49 spatial cells of every channel.
Embedding global_average_pool(const FeatureMap& map, std::string image_id = {});

/// Runs an exported inference graph with input "input" [1,1,224,224] and
/// output "features" [1,1024,7,7].
///
/// Not safe for concurrent use; create one instance per thread.
class GraphExtractor {
 public:
  /// Throws GraphLoadError when the file is missing or unreadable and
  /// ShapeError when the declared tensors disagree with the contract.
  explicit GraphExtractor(const std::filesystem::path& graph_path);
  ~GraphExtractor();
  GraphExtractor(GraphExtractor&&) noexcept;
  GraphExtractor& operator=(GraphExtractor&&) noexcept;

  FeatureMap extract(const imaging::PreprocessedImage& image);
  const GraphSignature& signature() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Loads the configured graph and returns its pre-pooling feature map.
/// Requires mode == kGraph.
FeatureMap extract_features(const ExtractorConfig& config, const imaging::PreprocessedImage& image);

/// Fixed pseudo-random linear map used in place of the network: 16x16
/// block means (256 values) times a 1024x256 matrix with entries uniform in
/// [-1, 1) drawn row-major from Rng(seed), scaled by 1/256.
class StubProjection {
 public:
  static constexpr int kGrid = 16;
  static constexpr std::size_t kInputs = kGrid * kGrid;
  static constexpr double kScale = 1.0 / 256.0;

  explicit StubProjection(std::uint64_t seed);

  Embedding apply(const imaging::PreprocessedImage& image, std::string image_id = {}) const;
  std::span<const double> row(std::size_t i) const {
    return {weights_.data() + i * kInputs, kInputs};
  }

 private:
  std::vector<double> weights_;
};

/// 16x16 grid of 14x14 block means, row-major.
std::vector<double> block_means(const imaging::PreprocessedImage& image);

/// Requires mode == kStub.
Embedding stub_extract(const ExtractorConfig& config, const imaging::PreprocessedImage& image,
                       std::string image_id = {});

/// Mode-independent front end: image in, pooled embedding out.
class Extractor {
 public:
  explicit Extractor(const ExtractorConfig& config);

  Embedding embed(const imaging::PreprocessedImage& image, std::string image_id);
  const ExtractorConfig& config() const noexcept { return config_; }

 private:
  ExtractorConfig config_;
  std::optional<GraphExtractor> graph_;
  std::shared_ptr<const StubProjection> stub_;
};

/// Supplies the preprocessed image for item i; may throw.
using ImageSource = std::function<imaging::PreprocessedImage(std::size_t)>;

/// Embeds `count` images with up to `threads` workers (0 = hardware
/// concurrency), one extractor per worker. Output order equals input order.
/// If any item fails, the exception of the lowest failing index is rethrown.
std::vector<Embedding> embed_all(const ExtractorConfig& config, std::size_t count,
                                 const ImageSource& source,
                                 std::span<const std::string> image_ids, unsigned threads = 1);

/// Reference feature tensor file: 1024 lines (channels) of 49 comma-separated
/// values (row-major 7x7 cells), 9 significant digits. Throws ParseError with
/// the 1-based line on malformed input.
FeatureMap load_feature_map_csv(std::string_view text);
void save_feature_map_csv(const FeatureMap& map, std::ostream& sink);

struct EmbeddingSet {
  std::vector<Embedding> embeddings;
  std::vector<Label> labels;
};

/// CSV with header `id,label,f0000,...,f1023`; values use 9 significant
/// digits. Returns the number of rows written.
std::size_t save_embeddings(std::span<const Embedding> embeddings, std::span<const Label> labels,
                            std::ostream& sink);

/// Inverse of save_embeddings. Throws ParseError with the 1-based data row
/// on a wrong column count, non-numeric feature or label outside {0, 1}.
EmbeddingSet load_embeddings(std::istream& source);
EmbeddingSet load_embeddings(std::string_view text);

}  // namespace cxr::embedding
