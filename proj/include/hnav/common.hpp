#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hnav {

/// Invalid shapes, infeasible geometry, bad config values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data outside its documented domain (e.g. depth beyond far clip).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the optimizer when the batch loss is not finite.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::int64_t batch_index, std::int64_t sample_index)
      : std::runtime_error(what), batch_index_(batch_index), sample_index_(sample_index) {}
  std::int64_t batch_index() const noexcept { return batch_index_; }
  std::int64_t sample_index() const noexcept { return sample_index_; }

 private:
  std::int64_t batch_index_;
  std::int64_t sample_index_;
};

/// Missing checkpoint, unreadable file, malformed container.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
  bool operator==(const Vec2&) const = default;
};

inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

inline constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

/// 64-bit FNV-1a, used for record and config hashes.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v);

}  // namespace hnav
