#include "hnav/perception/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace hnav::perception {

void DepthDataset::add(const RgbImage& image, const DepthMap& reduced_normalized) {
  if (image.height != camera.height || image.width != camera.width)
    throw ConfigError("dataset image shape does not match camera");
  if (reduced_normalized.rows != camera.reduced_rows() || reduced_normalized.cols != camera.reduced_cols() ||
      reduced_normalized.units != DepthUnits::Normalized)
    throw ConfigError("dataset target must be a reduced normalized depth map");
  images.push_back(quantize(image));
  targets.push_back(reduced_normalized);
}

RgbImage DepthDataset::image(std::size_t i) const {
  return dequantize(images.at(i), camera.height, camera.width);
}

std::vector<std::uint8_t> quantize(const RgbImage& image) {
  std::vector<std::uint8_t> out(image.data.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
  return out;
}

RgbImage dequantize(const std::vector<std::uint8_t>& bytes, std::size_t height, std::size_t width) {
  if (bytes.size() != height * width * 3) throw DataError("image byte count does not match shape");
  RgbImage img;
  img.height = height;
  img.width = width;
  img.data.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

void save_depth_dataset(const DepthDataset& data, const std::filesystem::path& stem) {
  auto bin = stem;
  bin += ".bin";
  auto idx = stem;
  idx += ".json";
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw ArtifactError("cannot write dataset: " + bin.string());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.write(reinterpret_cast<const char*>(data.images[i].data()),
              static_cast<std::streamsize>(data.images[i].size()));
    out.write(reinterpret_cast<const char*>(data.targets[i].values.data()),
              static_cast<std::streamsize>(data.targets[i].values.size() * sizeof(double)));
  }
  nlohmann::json j;
  j["format"] = "hnav-depth-pairs";
  j["version"] = 1;
  j["count"] = data.size();
  j["image_shape"] = {data.camera.height, data.camera.width, 3};
  j["image_encoding"] = "u8";
  j["depth_shape"] = {data.camera.reduced_rows(), data.camera.reduced_cols()};
  j["depth_encoding"] = "f64";
  j["normalization"] = {{"far_clip", data.camera.far_clip}, {"meters_range", {0.0, data.camera.far_clip}},
                        {"normalized_range", {-1.0, 1.0}}};
  j["camera"] = {{"horizontal_fov", data.camera.horizontal_fov}, {"altitude", data.camera.altitude},
                 {"pool_block", data.camera.pool_block}};
  j["seed"] = data.seed;
  std::ofstream js(idx);
  js << j.dump(2) << '\n';
  if (!out || !js) throw ArtifactError("failed writing dataset " + stem.string());
}

DepthDataset load_depth_dataset(const std::filesystem::path& stem) {
  auto bin = stem;
  bin += ".bin";
  auto idx = stem;
  idx += ".json";
  std::ifstream js(idx);
  if (!js) throw ArtifactError("missing dataset index: " + idx.string());
  nlohmann::json j;
  js >> j;
  if (j.value("format", "") != "hnav-depth-pairs") throw ArtifactError("not a depth dataset index");
  DepthDataset data;
  data.camera.height = j["image_shape"][0].get<std::size_t>();
  data.camera.width = j["image_shape"][1].get<std::size_t>();
  data.camera.far_clip = j["normalization"]["far_clip"].get<double>();
  data.camera.horizontal_fov = j["camera"]["horizontal_fov"].get<double>();
  data.camera.altitude = j["camera"]["altitude"].get<double>();
  data.camera.pool_block = j["camera"]["pool_block"].get<std::size_t>();
  data.seed = j["seed"].get<std::uint64_t>();
  const auto count = j["count"].get<std::size_t>();
  const std::size_t rows = j["depth_shape"][0].get<std::size_t>();
  const std::size_t cols = j["depth_shape"][1].get<std::size_t>();
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw ArtifactError("missing dataset payload: " + bin.string());
  const std::size_t image_bytes = data.camera.height * data.camera.width * 3;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::uint8_t> img(image_bytes);
    in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(image_bytes));
    DepthMap t(rows, cols, 0.0, Resolution::Reduced, DepthUnits::Normalized);
    in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    if (!in) throw ArtifactError("dataset payload truncated at pair " + std::to_string(i));
    data.images.push_back(std::move(img));
    data.targets.push_back(std::move(t));
  }
  return data;
}

}  // namespace hnav::perception
