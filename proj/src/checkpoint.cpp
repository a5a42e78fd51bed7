#include "hsmgnn/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "hsmgnn/error.hpp"

namespace hsmgnn {

namespace binary {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace binary

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& tensors) {
  binary::Writer w;
  w.bytes("HSMG");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xFFFF) throw FormatError("checkpoint: tensor name too long");
    if (t.rank() > 0xFF) throw FormatError("checkpoint: tensor rank too large");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  }
  return std::move(w.buffer());
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  binary::Reader r(bytes, "checkpoint");
  if (r.bytes(4) != "HSMG") throw FormatError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u16());
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const std::size_t n = shape_numel(shape);
    if (n > r.remaining() / 8) throw FormatError("checkpoint: truncated tensor '" + name + "'");
    std::vector<double> data(n);
    for (auto& v : data) v = r.f64();
    try {
      out.push_back({std::move(name), Tensor::from_data(std::move(shape), std::move(data))});
    } catch (const ShapeError& e) {
      throw FormatError(std::string("checkpoint: ") + e.what());
    }
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return out;
}

void save_checkpoint(const std::string& path, const ParameterSet& params) {
  binary::write_file(path, encode_checkpoint(params.entries()));
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  return decode_checkpoint(binary::read_file(path));
}

void restore_parameters(ParameterSet& params, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != params.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(tensors.size()) +
                      " tensors, model expects " + std::to_string(params.size()));
  }
  for (const auto& [name, t] : tensors) {
    if (!params.contains(name)) throw ConfigError("checkpoint tensor '" + name + "' not in model");
    Tensor& dst = params.at(name);
    if (dst.shape() != t.shape()) {
      throw ConfigError("checkpoint tensor '" + name + "' has shape " +
                        shape_to_string(t.shape()) + ", model expects " +
                        shape_to_string(dst.shape()));
    }
    std::copy(t.data().begin(), t.data().end(), dst.mutable_data().begin());
  }
}

}  // namespace hsmgnn
