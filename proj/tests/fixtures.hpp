#pragma once

#include "hairlang/hairlang.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

namespace hairlang::testing {

// Smooth random curve rooted on the scalp: a few random low-frequency
// bends on top of a hanging direction.
inline Strand random_strand(std::mt19937_64& rng, int points, const ScalpManifold& scalp = {}) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  const UVCoord uv{unit(rng), 0.05 + 0.9 * unit(rng)};
  const Vec3 root = uv_to_position(uv, scalp);
  const Vec3 dir = (uv_direction(uv, scalp) - scalp.up).normalized();
  Vec3 a(normal(rng), normal(rng), normal(rng)), b(normal(rng), normal(rng), normal(rng));
  const double length = 0.05 + 0.25 * unit(rng);
  const double f1 = 1.0 + 3.0 * unit(rng), f2 = 2.0 + 5.0 * unit(rng);
  Strand s;
  s.root_uv = uv;
  for (int i = 0; i < points; ++i) {
    const double t = static_cast<double>(i) / (points - 1);
    s.points.push_back(root + length * (t * dir + 0.05 * std::sin(f1 * t * 3.0) * a + 0.02 * std::sin(f2 * t * 3.0) * b));
  }
  s.points[0] = root;
  return s;
}

inline Strand helix_strand(int points, double radius, double pitch, double length = 0.2) {
  Strand s;
  for (int i = 0; i < points; ++i) {
    const double z = length * i / (points - 1);
    const double th = 2.0 * std::numbers::pi * z / pitch;
    s.points.emplace_back(radius * (std::cos(th) - 1.0), radius * std::sin(th), z);
  }
  return s;
}

inline Strand line_strand(int points, const Vec3& from, const Vec3& to) {
  Strand s;
  for (int i = 0; i < points; ++i) s.points.push_back(from + (to - from) * (static_cast<double>(i) / (points - 1)));
  return s;
}

// Random token-level hairstyle for grammar tests.
inline std::vector<StrandTokens> random_tokens(std::mt19937_64& rng, const Vocabulary& vocab, int count,
                                               const RegionPartition& partition = RegionPartition::default_partition()) {
  std::uniform_int_distribution<int> uv(0, kUVGrid - 1);
  std::uniform_int_distribution<int> c(0, vocab.config().coarse_entries - 1);
  std::uniform_int_distribution<int> st(0, vocab.config().style_entries - 1);
  std::vector<StrandTokens> out;
  for (int i = 0; i < count; ++i) {
    StrandTokens t;
    t.uv = {uv(rng), uv(rng)};
    t.region = assign_region(dequantize_uv(t.uv), partition);
    t.alpha = anchor_of(t.uv);
    for (int h = 0; h < kHeads; ++h) {
      t.coarse[static_cast<std::size_t>(h)] = static_cast<std::uint32_t>(c(rng));
      t.style[static_cast<std::size_t>(h)] = static_cast<std::uint32_t>(st(rng));
    }
    out.push_back(t);
  }
  return out;
}

inline std::vector<std::uint32_t> random_density(std::mt19937_64& rng, const Vocabulary& vocab) {
  std::uniform_int_distribution<int> d(0, vocab.config().density_entries - 1);
  std::vector<std::uint32_t> out(kDensityTokens);
  for (auto& x : out) x = static_cast<std::uint32_t>(d(rng));
  return out;
}

inline double max_point_error(std::span<const Vec3> a, std::span<const Vec3> b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, (a[i] - b[i]).norm());
  return e;
}

// Errc captured from a throwing callable; nullopt if it did not throw.
template <typename F>
std::optional<Errc> error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hairlang_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace hairlang::testing
