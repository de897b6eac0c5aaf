#include "svddlab/dataset_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "svddlab/binio.hpp"
#include "svddlab/error.hpp"

namespace svddlab {

void save_dataset(const std::filesystem::path& path, const ImageCorpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open dataset for writing: " + path.string());
  out.write("TDS1", 4);
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(corpus.count()));
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(corpus.dims.channels));
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(corpus.dims.height));
  binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(corpus.dims.width));
  for (float v : corpus.pixels) binio::put_f32(out, v);
  for (std::uint8_t f : corpus.anomaly_flags) out.put(static_cast<char>(f));
  for (std::int32_t l : corpus.class_labels) binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(l));
  for (const std::string& p : corpus.provenance) {
    binio::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(p.size()));
    out.write(p.data(), static_cast<std::streamsize>(p.size()));
  }
  if (!out) throw IoError("failed writing dataset: " + path.string());
}

ImageCorpus load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "TDS1") throw IoError("not a TDS1 dataset: " + path.string());
  const auto count = binio::get_uint<std::uint32_t>(in, "count");
  ImageCorpus corpus;
  corpus.dims.channels = binio::get_uint<std::uint32_t>(in, "channels");
  corpus.dims.height = binio::get_uint<std::uint32_t>(in, "height");
  corpus.dims.width = binio::get_uint<std::uint32_t>(in, "width");
  corpus.pixels.resize(static_cast<std::size_t>(count) * corpus.dims.size());
  for (float& v : corpus.pixels) v = binio::get_f32(in, "pixels");
  corpus.anomaly_flags.resize(count);
  for (auto& f : corpus.anomaly_flags) f = binio::get_uint<std::uint8_t>(in, "anomaly flags");
  corpus.class_labels.resize(count);
  for (auto& l : corpus.class_labels) l = static_cast<std::int32_t>(binio::get_uint<std::uint32_t>(in, "labels"));
  corpus.provenance.resize(count);
  for (auto& p : corpus.provenance) {
    const auto len = binio::get_uint<std::uint32_t>(in, "provenance length");
    p.resize(len);
    in.read(p.data(), len);
    if (!in) throw IoError("truncated provenance in " + path.string());
  }
  corpus.validate();
  return corpus;
}

void save_splits(const std::filesystem::path& path, const Splits& s) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open split file for writing: " + path.string());
  for (std::size_t i = 0; i < s.train.size(); ++i) {
    out << "train " << s.train[i] << ' ' << static_cast<int>(s.train_labels[i]) << '\n';
  }
  for (std::size_t i = 0; i < s.val.size(); ++i) out << "val " << s.val[i] << ' ' << int(s.val_truth[i]) << '\n';
  for (std::size_t i = 0; i < s.test.size(); ++i) out << "test " << s.test[i] << ' ' << int(s.test_truth[i]) << '\n';
  if (!out) throw IoError("failed writing split file: " + path.string());
}

Splits load_splits(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open split file: " + path.string());
  Splits s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string set;
    std::size_t index = 0;
    int label = 0;
    if (!(fields >> set >> index >> label)) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed split entry");
    }
    if (set == "train") {
      if (label < -1 || label > 1) throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad train label");
      s.train.push_back(index);
      s.train_labels.push_back(static_cast<RowLabel>(label));
    } else if (set == "val" || set == "test") {
      if (label != 0 && label != 1) throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad truth label");
      (set == "val" ? s.val : s.test).push_back(index);
      (set == "val" ? s.val_truth : s.test_truth).push_back(static_cast<std::uint8_t>(label));
    } else {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": unknown split '" + set + "'");
    }
  }
  return s;
}

void export_ppm(const std::filesystem::path& path, const ImageCorpus& corpus, std::size_t index) {
  if (index >= corpus.count()) throw ConfigError("export_ppm: index out of range");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open image for writing: " + path.string());
  const auto& d = corpus.dims;
  out << "P6\n" << d.width << ' ' << d.height << "\n255\n";
  const auto img = corpus.image(index);
  const std::size_t plane = d.height * d.width;
  for (std::size_t k = 0; k < plane; ++k) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = img[(d.channels == 3 ? c : 0) * plane + k];
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
    }
  }
  if (!out) throw IoError("failed writing image: " + path.string());
}

}  // namespace svddlab
