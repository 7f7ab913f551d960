#pragma once

#include <string>

#include "vdm/sparse_conv.hpp"

namespace vdm {

// Flat little-endian weight blob:
//   magic "VDMW" | version u32 | kz ky kx u32 | in_channels u32 |
//   out_channels u32 | weights f64 (offset-major row-major) | bias f64.
inline constexpr std::uint32_t kWeightsBlobVersion = 1;

/// Writes kernel dims, channels, weights and bias of `spec` to `path`.
void write_weights_blob(const std::string& path, const ConvSpec& spec);

/// Reads a blob back into `spec`'s weight and bias storage. Kernel dims and
/// channel counts must match the spec; throws IoError or ConfigError otherwise.
void read_weights_blob(const std::string& path, ConvSpec& spec);

} // namespace vdm
