#pragma once
// On-disk bundle layout (directory):
//   manifest.json         format tag, EncoderConfig, frozen_base, adapter and
//                         head specs, and one entry per tensor:
//                         {"name", "rows", "cols", "file", "offset"}
//   base.bin              tensors of the shared stack
//   adapter.<task>.bin    one file per adapter set
//   head.<task>.bin       one file per head
// Each .bin file is a flat sequence of IEEE-754 binary64 values, little
// endian, tensors concatenated in manifest order, row-major within a tensor.
// "offset" counts values (not bytes) from the start of the file.

#include <filesystem>

#include "boolmrc/tinyformer/bundle.hpp"

namespace boolmrc::tinyformer {

inline constexpr const char* kBundleFormat = "boolmrc-bundle-v1";

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& dir);
ModelBundle load_bundle(const std::filesystem::path& dir);

// Stable digest of every tensor value, for version strings.
std::string bundle_fingerprint(const ModelBundle& bundle);

}  // namespace boolmrc::tinyformer
