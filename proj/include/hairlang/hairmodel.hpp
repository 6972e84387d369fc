#pragma once

#include "hairlang/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace hairlang {

inline constexpr int kDefaultStrandPoints = 64;
inline constexpr double kDefaultScalpRadius = 0.09;
inline constexpr int kDensityResolution = 256;

struct UVCoord {
  double u = 0.0;
  double v = 0.0;
  friend bool operator==(const UVCoord&, const UVCoord&) = default;
};

struct Strand {
  std::vector<Vec3> points;
  UVCoord root_uv;

  std::size_t size() const { return points.size(); }
  const Vec3& root() const { return points.front(); }
};

// Upper hemisphere of a sphere. `up` is the pole, `front` the azimuth origin.
struct ScalpManifold {
  Vec3 center = Vec3::Zero();
  double radius = kDefaultScalpRadius;
  Vec3 up = Vec3::UnitY();
  Vec3 front = Vec3::UnitZ();

  // Azimuth increases from front toward up x front, the head's left side.
  Vec3 left() const { return up.cross(front); }
};

inline void validate_scalp(const ScalpManifold& scalp) {
  if (!(scalp.radius > 0.0) || !std::isfinite(scalp.radius))
    throw Error(Errc::invalid_argument, "scalp radius must be positive");
  if (std::abs(scalp.up.norm() - 1.0) > 1e-6 || std::abs(scalp.front.norm() - 1.0) > 1e-6 ||
      std::abs(scalp.up.dot(scalp.front)) > 1e-6)
    throw Error(Errc::invalid_argument, "scalp axes must be orthonormal");
}

struct Hairstyle {
  std::vector<Strand> strands;
  ScalpManifold scalp;
};

// ---------------------------------------------------------------------------
// Regions

enum class Region : std::uint8_t {
  Front = 0,
  Top,
  Crown,
  Nape,
  LeftSide,
  RightSide,
  LeftTemple,
  RightTemple,
};

inline constexpr int kRegionCount = 8;

// Sequence order used by the token grammar; matches the enum values.
inline constexpr std::array<Region, kRegionCount> kRegionOrder = {
    Region::Front,    Region::Top,       Region::Crown,      Region::Nape,
    Region::LeftSide, Region::RightSide, Region::LeftTemple, Region::RightTemple};

inline const char* region_name(Region r) {
  static constexpr std::array<const char*, kRegionCount> names = {
      "Front", "Top", "Crown", "Nape", "LeftSide", "RightSide", "LeftTemple", "RightTemple"};
  return names[static_cast<std::size_t>(r)];
}

inline std::optional<Region> region_from_name(std::string_view name) {
  for (auto r : kRegionOrder)
    if (name == region_name(r)) return r;
  return std::nullopt;
}

// Half-open [u0,u1) x [v0,v1).
struct UVRect {
  double u0 = 0, v0 = 0, u1 = 0, v1 = 0;
  bool contains(const UVCoord& uv) const {
    return uv.u >= u0 && uv.u < u1 && uv.v >= v0 && uv.v < v1;
  }
  double area() const { return (u1 - u0) * (v1 - v0); }
};

struct RegionPartition {
  std::array<UVRect, kRegionCount> rects;  // indexed by Region

  const UVRect& rect(Region r) const { return rects[static_cast<std::size_t>(r)]; }
  UVRect& rect(Region r) { return rects[static_cast<std::size_t>(r)]; }

  // v = 0 is the pole. The cap splits into Top (u < 0.5) and Crown; the
  // lower band runs Front -> LeftTemple -> LeftSide -> Nape -> RightSide ->
  // RightTemple in azimuth.
  static RegionPartition default_partition() {
    RegionPartition p;
    constexpr double cap = 0.35;
    p.rect(Region::Top) = {0.0, 0.0, 0.5, cap};
    p.rect(Region::Crown) = {0.5, 0.0, 1.0, cap};
    p.rect(Region::Front) = {0.0, cap, 0.125, 1.0};
    p.rect(Region::LeftTemple) = {0.125, cap, 0.25, 1.0};
    p.rect(Region::LeftSide) = {0.25, cap, 0.4, 1.0};
    p.rect(Region::Nape) = {0.4, cap, 0.6, 1.0};
    p.rect(Region::RightSide) = {0.6, cap, 0.75, 1.0};
    p.rect(Region::RightTemple) = {0.75, cap, 1.0, 1.0};
    return p;
  }
};

// Rectangles must lie in the unit square, be pairwise disjoint and have
// total area one; together that makes them a tiling up to measure zero.
inline void validate_partition(const RegionPartition& p) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.rects.size(); ++i) {
    const auto& a = p.rects[i];
    if (!(a.u0 >= 0 && a.v0 >= 0 && a.u1 <= 1 && a.v1 <= 1 && a.u0 < a.u1 && a.v0 < a.v1))
      throw Error(Errc::invalid_argument,
                  std::string("region rectangle out of range: ") + region_name(Region(i)));
    total += a.area();
    for (std::size_t j = i + 1; j < p.rects.size(); ++j) {
      const auto& b = p.rects[j];
      bool disjoint = a.u1 <= b.u0 || b.u1 <= a.u0 || a.v1 <= b.v0 || b.v1 <= a.v0;
      if (!disjoint)
        throw Error(Errc::invalid_argument, std::string("regions overlap: ") + region_name(Region(i)) +
                                                " and " + region_name(Region(j)));
    }
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw Error(Errc::invalid_argument, "region rectangles do not tile the unit square");
}

inline Region assign_region(const UVCoord& uv, const RegionPartition& partition) {
  for (auto r : kRegionOrder)
    if (partition.rect(r).contains(uv)) return r;
  throw Error(Errc::invalid_argument, "uv outside the region partition");
}

// ---------------------------------------------------------------------------
// Scalp parameterization

inline constexpr double kBelowOne = 1.0 - 1e-12;

inline UVCoord project_root_to_uv(const Vec3& root, const ScalpManifold& scalp) {
  Vec3 d = root - scalp.center;
  double r = d.norm();
  if (r < 1e-12) throw Error(Errc::degenerate, "degenerate projection");
  if (r > 2.0 * scalp.radius) throw Error(Errc::invalid_argument, "root too far from scalp");
  d /= r;
  const double y = d.dot(scalp.up);
  const double x = d.dot(scalp.front);
  const double z = d.dot(scalp.left());
  const double horiz = std::hypot(x, z);
  const double polar = std::atan2(horiz, y);
  UVCoord uv;
  if (horiz > 1e-12) {
    double az = std::atan2(z, x);
    if (az < 0) az += 2.0 * std::numbers::pi;
    uv.u = az / (2.0 * std::numbers::pi);
  }
  uv.v = polar / (0.5 * std::numbers::pi);
  uv.u = std::clamp(uv.u, 0.0, kBelowOne);
  uv.v = std::clamp(uv.v, 0.0, kBelowOne);
  return uv;
}

inline Vec3 uv_direction(const UVCoord& uv, const ScalpManifold& scalp) {
  const double az = uv.u * 2.0 * std::numbers::pi;
  const double polar = uv.v * 0.5 * std::numbers::pi;
  return std::cos(polar) * scalp.up +
         std::sin(polar) * (std::cos(az) * scalp.front + std::sin(az) * scalp.left());
}

inline Vec3 uv_to_position(const UVCoord& uv, const ScalpManifold& scalp) {
  return scalp.center + scalp.radius * uv_direction(uv, scalp);
}

// ---------------------------------------------------------------------------
// Strands

inline double arc_length(std::span<const Vec3> pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

// Uniform arc-length resampling; both endpoints are copied exactly.
inline std::vector<Vec3> resample_polyline(std::span<const Vec3> raw, int count) {
  if (raw.size() < 2) throw Error(Errc::invalid_argument, "polyline needs at least 2 points");
  if (count < 2) throw Error(Errc::invalid_argument, "resample count must be >= 2");
  std::vector<double> cum(raw.size(), 0.0);
  for (std::size_t i = 1; i < raw.size(); ++i) cum[i] = cum[i - 1] + (raw[i] - raw[i - 1]).norm();
  const double total = cum.back();
  if (!(total >= 1e-9)) throw Error(Errc::degenerate, "zero-length strand");

  std::vector<Vec3> out(static_cast<std::size_t>(count));
  out.front() = raw.front();
  out.back() = raw.back();
  std::size_t seg = 0;
  for (int i = 1; i + 1 < count; ++i) {
    const double s = total * i / (count - 1);
    while (seg + 2 < raw.size() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double t = len > 0 ? (s - cum[seg]) / len : 0.0;
    out[static_cast<std::size_t>(i)] = raw[seg] + t * (raw[seg + 1] - raw[seg]);
  }
  return out;
}

inline Strand resample_strand(std::span<const Vec3> raw, int count, const ScalpManifold& scalp) {
  Strand s;
  s.points = resample_polyline(raw, count);
  s.root_uv = project_root_to_uv(s.points.front(), scalp);
  return s;
}

inline void validate_strand(const Strand& s, const ScalpManifold& scalp, std::size_t expected_points) {
  if (s.points.size() != expected_points)
    throw Error(Errc::invalid_argument, "strand has " + std::to_string(s.points.size()) +
                                            " points, expected " + std::to_string(expected_points));
  if (expected_points < 4) throw Error(Errc::invalid_argument, "strands need at least 4 points");
  for (const auto& p : s.points)
    if (!p.allFinite()) throw Error(Errc::invalid_argument, "non-finite strand point");
  if (std::abs((s.root() - scalp.center).norm() - scalp.radius) > 1e-4)
    throw Error(Errc::invalid_argument, "strand root is not on the scalp");
}

// ---------------------------------------------------------------------------
// Density

struct DensityMap {
  int resolution = kDensityResolution;
  std::vector<double> values;  // row-major, row = v cell, column = u cell

  double at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * resolution + col];
  }
  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * resolution + col]; }
};

// Bilinear splat of unit mass per root onto cell centers, normalized so the
// maximum cell is 1. Mass falling outside the grid is clamped to the edge.
inline DensityMap rasterize_density(std::span<const UVCoord> roots, int resolution = kDensityResolution) {
  if (roots.empty()) throw Error(Errc::invalid_argument, "empty hairstyle");
  DensityMap m;
  m.resolution = resolution;
  m.values.assign(static_cast<std::size_t>(resolution) * resolution, 0.0);
  auto splat_axis = [resolution](double c, int& i0, int& i1, double& w1) {
    const double x = c * resolution - 0.5;
    const double f = std::floor(x);
    w1 = x - f;
    i0 = std::clamp(static_cast<int>(f), 0, resolution - 1);
    i1 = std::clamp(static_cast<int>(f) + 1, 0, resolution - 1);
  };
  for (const auto& uv : roots) {
    int c0, c1, r0, r1;
    double wu, wv;
    splat_axis(uv.u, c0, c1, wu);
    splat_axis(uv.v, r0, r1, wv);
    m.at(r0, c0) += (1 - wv) * (1 - wu);
    m.at(r0, c1) += (1 - wv) * wu;
    m.at(r1, c0) += wv * (1 - wu);
    m.at(r1, c1) += wv * wu;
  }
  const double peak = *std::max_element(m.values.begin(), m.values.end());
  for (auto& v : m.values) v /= peak;
  return m;
}

inline std::vector<char> encode_density_raster(const DensityMap& m) {
  ByteWriter w;
  for (double v : m.values) w.put_f32(v);
  return w.bytes();
}

inline DensityMap decode_density_raster(std::span<const char> bytes, int resolution = kDensityResolution) {
  const auto cells = static_cast<std::size_t>(resolution) * resolution;
  if (bytes.size() != cells * sizeof(float))
    throw Error(Errc::format, "density raster must be " + std::to_string(resolution) + "x" +
                                  std::to_string(resolution) + " f32");
  ByteReader r(bytes);
  DensityMap m;
  m.resolution = resolution;
  m.values.resize(cells);
  for (auto& v : m.values) {
    v = r.get_f32();
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::format, "density value outside [0,1]");
  }
  return m;
}

// ---------------------------------------------------------------------------
// .hair binary format

inline std::vector<char> encode_hair(const Hairstyle& h) {
  const std::uint32_t count = static_cast<std::uint32_t>(h.strands.size());
  const std::uint32_t L = h.strands.empty() ? 0 : static_cast<std::uint32_t>(h.strands.front().size());
  ByteWriter w;
  w.put_magic("HAIR");
  w.put<std::uint32_t>(1);
  w.put(count);
  w.put(L);
  for (int i = 0; i < 3; ++i) w.put_f32(h.scalp.center[i]);
  w.put_f32(h.scalp.radius);
  for (int i = 0; i < 3; ++i) w.put_f32(h.scalp.up[i]);
  for (int i = 0; i < 3; ++i) w.put_f32(h.scalp.front[i]);
  for (const auto& s : h.strands) {
    if (s.size() != L) throw Error(Errc::invalid_argument, "strands differ in point count");
    w.put_f32(s.root_uv.u);
    w.put_f32(s.root_uv.v);
    for (const auto& p : s.points)
      for (int i = 0; i < 3; ++i) w.put_f32(p[i]);
  }
  return w.bytes();
}

inline Hairstyle decode_hair(std::span<const char> bytes) {
  ByteReader r(bytes);
  r.expect_magic("HAIR");
  if (auto version = r.get<std::uint32_t>(); version != 1)
    throw Error(Errc::format, "unsupported .hair version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  const auto L = r.get<std::uint32_t>();
  Hairstyle h;
  for (int i = 0; i < 3; ++i) h.scalp.center[i] = r.get_f32();
  h.scalp.radius = r.get_f32();
  for (int i = 0; i < 3; ++i) h.scalp.up[i] = r.get_f32();
  for (int i = 0; i < 3; ++i) h.scalp.front[i] = r.get_f32();
  // f32 storage; re-orthonormalize so downstream checks see exact axes.
  h.scalp.up.normalize();
  h.scalp.front = (h.scalp.front - h.scalp.front.dot(h.scalp.up) * h.scalp.up).normalized();
  const std::size_t per_strand = (2 + 3 * static_cast<std::size_t>(L)) * sizeof(float);
  if (r.remaining() != per_strand * count) throw Error(Errc::format, ".hair payload size mismatch");
  h.strands.resize(count);
  for (auto& s : h.strands) {
    s.root_uv.u = r.get_f32();
    s.root_uv.v = r.get_f32();
    s.points.resize(L);
    for (auto& p : s.points)
      for (int i = 0; i < 3; ++i) p[i] = r.get_f32();
  }
  return h;
}

inline void save_hair(const std::filesystem::path& path, const Hairstyle& h) {
  write_file_atomic(path, encode_hair(h));
}

inline Hairstyle load_hair(const std::filesystem::path& path) { return decode_hair(read_file(path)); }

}  // namespace hairlang
