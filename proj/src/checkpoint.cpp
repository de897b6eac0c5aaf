#include "svddlab/checkpoint.hpp"

#include <fstream>

#include "svddlab/binio.hpp"
#include "svddlab/error.hpp"

namespace svddlab {

namespace {
constexpr char kMagic[4] = {'S', 'V', 'D', 'P'};
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, 4);
  binio::put_uint<std::uint16_t>(out, kCheckpointVersion);
  for (const auto& [name, tensor] : tensors) {
    if (name.size() > 0xFFFF) throw IoError("tensor name too long: " + name);
    binio::put_uint<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    out.put(2);
    binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rows()));
    binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.cols()));
    for (double v : tensor.values()) binio::put_f64(out, v);
  }
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kMagic, 4)) {
    throw IoError("not a checkpoint file (bad magic): " + path.string());
  }
  const auto version = binio::get_uint<std::uint16_t>(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
  }
  std::vector<NamedTensor> tensors;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto len = binio::get_uint<std::uint16_t>(in, "tensor name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw IoError("truncated tensor name in " + path.string());
    const int rank = in.get();
    if (rank < 1 || rank > 2) throw IoError("unsupported tensor rank for '" + name + "' in " + path.string());
    std::size_t rows = 1, cols = 1;
    if (rank == 1) {
      cols = binio::get_uint<std::uint32_t>(in, name);
    } else {
      rows = binio::get_uint<std::uint32_t>(in, name);
      cols = binio::get_uint<std::uint32_t>(in, name);
    }
    std::vector<double> values(rows * cols);
    for (double& v : values) v = binio::get_f64(in, name);
    tensors.push_back({name, Tensor::from({rows, cols}, std::move(values))});
  }
  return tensors;
}

}  // namespace svddlab
