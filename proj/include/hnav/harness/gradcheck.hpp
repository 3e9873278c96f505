#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hnav::harness {

struct GradcheckCase {
  std::string name;
  std::size_t parameters = 0;
  std::size_t checked = 0;  // coordinates compared
  double error = 0.0;       // max relative error
  double tolerance = 0.0;
  bool pass() const { return error < tolerance; }
};

struct GradcheckOptions {
  std::uint64_t seed = 7;
  /// Coordinates checked on the convolutional case (0 = all of them).
  std::size_t cnn_coordinates = 4000;
  /// Coordinates checked on the full-size dense networks (0 = all).
  std::size_t dense_coordinates = 0;
};

/// Central-difference checks on: the depth CNN at 1/8 channel width, the
/// full collision MLP, the full dueling Q-network (1e-3), and three small
/// dense-only networks (1e-4).
std::vector<GradcheckCase> run_gradchecks(const GradcheckOptions& options = {});

}  // namespace hnav::harness
