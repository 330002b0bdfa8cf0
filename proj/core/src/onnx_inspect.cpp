#include "cxr/onnx_inspect.hpp"

#include <set>

#include "cxr/error.hpp"

namespace cxr::embedding {
namespace {

// Protobuf wire format reader, just enough for ModelProto -> GraphProto ->
// ValueInfoProto -> TypeProto.Tensor -> TensorShapeProto.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  bool done() const { return pos_ >= data_.size(); }

  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (done()) fail("truncated varint");
      const std::uint8_t b = data_[pos_++];
      v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
      if ((b & 0x80) == 0) return v;
    }
    fail("varint too long");
  }

  std::span<const std::uint8_t> bytes() {
    const auto len = varint();
    if (len > data_.size() - pos_) fail("length-delimited field overruns buffer");
    const auto out = data_.subspan(pos_, static_cast<std::size_t>(len));
    pos_ += static_cast<std::size_t>(len);
    return out;
  }

  void skip(std::uint32_t wire_type) {
    switch (wire_type) {
      case 0: varint(); return;
      case 1: advance(8); return;
      case 2: bytes(); return;
      case 5: advance(4); return;
      default: fail("unsupported wire type " + std::to_string(wire_type));
    }
  }

  // Returns (field number, wire type).
  std::pair<std::uint32_t, std::uint32_t> tag() {
    const auto t = varint();
    return {static_cast<std::uint32_t>(t >> 3), static_cast<std::uint32_t>(t & 7)};
  }

  [[noreturn]] static void fail(const std::string& why) {
    throw GraphLoadError("malformed model file: " + why);
  }

 private:
  void advance(std::size_t n) {
    if (n > data_.size() - pos_) fail("fixed-width field overruns buffer");
    pos_ += n;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::string as_string(std::span<const std::uint8_t> b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

std::int64_t parse_dimension(std::span<const std::uint8_t> data) {
  Reader r(data);
  std::int64_t value = -1;
  while (!r.done()) {
    const auto [field, wt] = r.tag();
    if (field == 1 && wt == 0) {
      value = static_cast<std::int64_t>(r.varint());
    } else {
      r.skip(wt);
    }
  }
  return value;
}

void parse_tensor_type(std::span<const std::uint8_t> data, TensorDecl& decl) {
  Reader r(data);
  while (!r.done()) {
    const auto [field, wt] = r.tag();
    if (field == 1 && wt == 0) {
      decl.elem_type = static_cast<std::int32_t>(r.varint());
    } else if (field == 2 && wt == 2) {
      Reader shape(r.bytes());
      while (!shape.done()) {
        const auto [f, w] = shape.tag();
        if (f == 1 && w == 2) {
          decl.dims.push_back(parse_dimension(shape.bytes()));
        } else {
          shape.skip(w);
        }
      }
    } else {
      r.skip(wt);
    }
  }
}

TensorDecl parse_value_info(std::span<const std::uint8_t> data) {
  TensorDecl decl;
  Reader r(data);
  while (!r.done()) {
    const auto [field, wt] = r.tag();
    if (field == 1 && wt == 2) {
      decl.name = as_string(r.bytes());
    } else if (field == 2 && wt == 2) {
      Reader type(r.bytes());
      while (!type.done()) {
        const auto [f, w] = type.tag();
        if (f == 1 && w == 2) {
          parse_tensor_type(type.bytes(), decl);
        } else {
          type.skip(w);
        }
      }
    } else {
      r.skip(wt);
    }
  }
  return decl;
}

std::string initializer_name(std::span<const std::uint8_t> data) {
  Reader r(data);
  while (!r.done()) {
    const auto [field, wt] = r.tag();
    if (field == 8 && wt == 2) return as_string(r.bytes());  // TensorProto.name
    r.skip(wt);
  }
  return {};
}

}  // namespace

const TensorDecl* GraphSignature::find_input(std::string_view name) const {
  for (const auto& d : inputs) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

const TensorDecl* GraphSignature::find_output(std::string_view name) const {
  for (const auto& d : outputs) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

GraphSignature read_graph_signature(std::span<const std::uint8_t> model) {
  Reader top(model);
  std::optional<std::span<const std::uint8_t>> graph;
  while (!top.done()) {
    const auto [field, wt] = top.tag();
    if (field == 7 && wt == 2) {
      graph = top.bytes();
    } else {
      top.skip(wt);
    }
  }
  if (!graph) throw GraphLoadError("model file contains no graph");

  GraphSignature sig;
  std::set<std::string> initializers;
  Reader g(*graph);
  while (!g.done()) {
    const auto [field, wt] = g.tag();
    if (field == 11 && wt == 2) {
      sig.inputs.push_back(parse_value_info(g.bytes()));
    } else if (field == 12 && wt == 2) {
      sig.outputs.push_back(parse_value_info(g.bytes()));
    } else if (field == 5 && wt == 2) {
      initializers.insert(initializer_name(g.bytes()));
    } else {
      g.skip(wt);
    }
  }
  std::erase_if(sig.inputs, [&](const TensorDecl& d) { return initializers.contains(d.name); });
  return sig;
}

std::string format_dims(std::span<const std::int64_t> dims) {
  std::string out = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i != 0) out += ',';
    out += dims[i] < 0 ? std::string("?") : std::to_string(dims[i]);
  }
  out += ']';
  return out;
}

}  // namespace cxr::embedding
