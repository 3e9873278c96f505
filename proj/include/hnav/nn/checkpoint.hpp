#pragma once

#include <filesystem>
#include <iosfwd>

#include "hnav/nn/network.hpp"

namespace hnav::nn {

// Binary checkpoint layout (little-endian):
//   "HNAVNET" '\0' | u32 version | u64 adam_step | u32 layer_count
//   per layer: u8 kind | u8 activation | i32 stride | f64 leak | u32 param_count
//     per param: u32 rank | u64 dims[rank] | f64 values[prod(dims)]
// Only parameter values are stored; gradient and moment buffers restart at zero.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_params(const NetworkParams& params, std::ostream& out);
NetworkParams load_params(std::istream& in);

void save_params(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_params(const std::filesystem::path& path);

}  // namespace hnav::nn
