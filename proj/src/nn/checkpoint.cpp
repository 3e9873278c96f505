#include "hnav/nn/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "hnav/common.hpp"

namespace hnav::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'H', 'N', 'A', 'V', 'N', 'E', 'T', '\0'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ArtifactError("checkpoint truncated");
  return v;
}

}  // namespace

void save_params(const NetworkParams& params, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(params.adam_step));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const Layer& l : params.layers) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(l.kind));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(l.activation));
    put<std::int32_t>(out, l.stride);
    put<double>(out, l.leak);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.params.size()));
    for (const Param& p : l.params) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
      for (std::size_t d : p.value.shape) put<std::uint64_t>(out, d);
      out.write(reinterpret_cast<const char*>(p.value.data.data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    }
  }
  if (!out) throw ArtifactError("failed writing checkpoint");
}

NetworkParams load_params(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ArtifactError("not a network checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw ArtifactError("unsupported checkpoint version " + std::to_string(version));
  NetworkParams params;
  params.adam_step = static_cast<std::int64_t>(get<std::uint64_t>(in));
  const auto layer_count = get<std::uint32_t>(in);
  for (std::uint32_t li = 0; li < layer_count; ++li) {
    Layer l;
    const auto kind = get<std::uint8_t>(in);
    const auto act = get<std::uint8_t>(in);
    if (kind > 2 || act > 2) throw ArtifactError("checkpoint has unknown layer kind or activation");
    l.kind = static_cast<LayerKind>(kind);
    l.activation = static_cast<Activation>(act);
    l.stride = get<std::int32_t>(in);
    l.leak = get<double>(in);
    const auto pc = get<std::uint32_t>(in);
    for (std::uint32_t pi = 0; pi < pc; ++pi) {
      const auto rank = get<std::uint32_t>(in);
      if (rank == 0 || rank > 8) throw ArtifactError("checkpoint tensor rank out of range");
      Shape shape(rank);
      for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(in));
      std::vector<double> values(shape_size(shape));
      in.read(reinterpret_cast<char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
      if (!in) throw ArtifactError("checkpoint truncated");
      l.params.emplace_back(Tensor(std::move(shape), std::move(values)));
    }
    l.validate();
    params.layers.push_back(std::move(l));
  }
  return params;
}

void save_params(const NetworkParams& params, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot open checkpoint for writing: " + path.string());
  save_params(params, out);
}

NetworkParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("missing checkpoint: " + path.string());
  return load_params(in);
}

}  // namespace hnav::nn
