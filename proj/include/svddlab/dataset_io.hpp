#pragma once

#include <filesystem>

#include "svddlab/corpus.hpp"

namespace svddlab {

// TDS1 dataset layout (little-endian):
//   "TDS1" | u32 count | u32 C | u32 H | u32 W | f32 pixels[count*C*H*W]
//   | u8 anomaly_flags[count] | i32 class_labels[count]
//   | per image: u32 byte_length + UTF-8 provenance text
void save_dataset(const std::filesystem::path& path, const ImageCorpus& corpus);
ImageCorpus load_dataset(const std::filesystem::path& path);

// Split sidecar: one "<set> <index> <label>" line per entry, where set is
// train/val/test; train labels are 0 (unlabeled), 1 or -1, val/test labels
// are 0 (normal) or 1 (anomalous).
void save_splits(const std::filesystem::path& path, const Splits& splits);
Splits load_splits(const std::filesystem::path& path);

/// Binary PPM (P6) of one image; single-channel images are replicated to grey.
void export_ppm(const std::filesystem::path& path, const ImageCorpus& corpus, std::size_t index);

}  // namespace svddlab
