#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hnav/perception/camera.hpp"

namespace hnav::perception {

/// Matched (RGB image, reduced normalized depth map) pairs. Images are held
/// quantized to 8 bits per channel.
struct DepthDataset {
  CameraModel camera;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::uint8_t>> images;
  std::vector<DepthMap> targets;

  std::size_t size() const { return images.size(); }
  void add(const RgbImage& image, const DepthMap& reduced_normalized);
  RgbImage image(std::size_t i) const;
};

std::vector<std::uint8_t> quantize(const RgbImage& image);
RgbImage dequantize(const std::vector<std::uint8_t>& bytes, std::size_t height, std::size_t width);

/// Writes `<stem>.bin` (per pair: u8 image bytes then f64 depth cells) and
/// `<stem>.json` (count, shapes, normalization constants, generator seed).
void save_depth_dataset(const DepthDataset& data, const std::filesystem::path& stem);
DepthDataset load_depth_dataset(const std::filesystem::path& stem);

}  // namespace hnav::perception
