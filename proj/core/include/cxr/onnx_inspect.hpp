#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cxr::embedding {

/// A graph input or output as declared in the model file.
struct TensorDecl {
  std::string name;
  std::int32_t elem_type = 0;       // ONNX TensorProto.DataType; 1 = float
  std::vector<std::int64_t> dims;   // -1 for symbolic or missing dimensions
};

struct GraphSignature {
  std::vector<TensorDecl> inputs;
  std::vector<TensorDecl> outputs;

  const TensorDecl* find_input(std::string_view name) const;
  const TensorDecl* find_output(std::string_view name) const;
};

/// Reads the declared inputs and outputs of a serialized ONNX model without
/// executing it. Graph inputs that are initializers (weights) are omitted.
/// Throws GraphLoadError on malformed protobuf data.
GraphSignature read_graph_signature(std::span<const std::uint8_t> model);

/// "[1,1024,7,7]", with "?" for symbolic dimensions.
std::string format_dims(std::span<const std::int64_t> dims);

}  // namespace cxr::embedding
