#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "xnor_rram/emulator.hpp"

namespace xnor_rram {

inline constexpr int kManifestVersion = 1;

/// Row-major bit packing: bit 1 = +1, MSB first, each row padded to whole bytes.
std::vector<std::uint8_t> pack_bits(const BinaryMatrix& m);
BinaryMatrix unpack_bits(std::span<const std::uint8_t> bytes, int rows, int cols);
std::size_t packed_size(int rows, int cols);

/// Reads a manifest and its weight files (paths relative to the manifest). Throws
/// ConfigError on schema violations and IoError on unreadable files.
BnnModel load_model(const std::filesystem::path& manifest);

/// Writes `<dir>/manifest.json` plus one `<name>.bin` per layer.
void save_model(const BnnModel& model, const std::filesystem::path& dir);

}  // namespace xnor_rram
