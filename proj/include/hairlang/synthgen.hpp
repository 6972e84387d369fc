#pragma once

#include "hairlang/hairmodel.hpp"
#include "hairlang/spectral.hpp"

#include <random>
#include <sstream>

namespace hairlang {

enum class Family : std::uint8_t { Straight, Wavy, Curly };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Straight: return "straight";
    case Family::Wavy: return "wavy";
    case Family::Curly: return "curly";
  }
  return "?";
}

inline std::optional<Family> family_from_name(std::string_view s) {
  for (Family f : {Family::Straight, Family::Wavy, Family::Curly})
    if (s == family_name(f)) return f;
  return std::nullopt;
}

struct StyleFamily {
  Family family = Family::Straight;
  double droop = 3.0;            // bend toward gravity; 0 keeps strands along the normal
  double wave_amplitude = 0.0;   // m
  double wave_frequency = 0.0;   // cycles per m
  double helix_radius = 0.0;     // m
  double helix_pitch = 0.0;      // m per turn
  double length_min = 0.2;
  double length_max = 0.3;
  int strand_count = 1000;
  std::array<double, kRegionCount> region_density{1, 1, 1, 1, 1, 1, 1, 1};
  std::uint64_t seed = 0;
  int points = kDefaultStrandPoints;
  ScalpManifold scalp;

  static StyleFamily defaults(Family f) {
    StyleFamily s;
    s.family = f;
    switch (f) {
      case Family::Straight:
        s.length_min = 0.22;
        s.length_max = 0.30;
        break;
      case Family::Wavy:
        s.length_min = 0.13;
        s.length_max = 0.17;
        s.wave_amplitude = 0.012;
        s.wave_frequency = 20.0;
        break;
      case Family::Curly:
        s.length_min = 0.05;
        s.length_max = 0.08;
        s.helix_radius = 0.006;
        s.helix_pitch = 0.015;
        break;
    }
    return s;
  }
};

inline void validate_family(const StyleFamily& s) {
  validate_scalp(s.scalp);
  if (s.strand_count < 1) throw Error(Errc::invalid_argument, "strand_count must be >= 1");
  if (s.points < 4) throw Error(Errc::invalid_argument, "strands need at least 4 points");
  if (!(s.length_min > 0.0) || !(s.length_max >= s.length_min))
    throw Error(Errc::invalid_argument, "invalid length range");
  if (s.droop < 0.0 || s.wave_amplitude < 0.0 || s.wave_frequency < 0.0 || s.helix_radius < 0.0 || s.helix_pitch < 0.0)
    throw Error(Errc::invalid_argument, "family parameters must be non-negative");
  if (s.family == Family::Wavy && !(s.wave_amplitude > 0.0 && s.wave_frequency > 0.0))
    throw Error(Errc::invalid_argument, "wavy family needs positive amplitude and frequency");
  if (s.family == Family::Curly && !(s.helix_radius > 0.0 && s.helix_pitch > 0.0))
    throw Error(Errc::invalid_argument, "curly family needs positive helix radius and pitch");
  double mx = 0.0;
  for (double d : s.region_density) {
    if (!(d >= 0.0)) throw Error(Errc::invalid_argument, "region density must be non-negative");
    mx = std::max(mx, d);
  }
  if (mx <= 0.0) throw Error(Errc::invalid_argument, "region density profile is all zero");
}

namespace detail {

inline constexpr int kRawSamples = 512;
inline constexpr double kDroopScale = 0.05;  // m
inline constexpr double kSplay = 0.15;

inline UVCoord sample_root(const StyleFamily& s, const RegionPartition& partition, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double mx = *std::max_element(s.region_density.begin(), s.region_density.end());
  for (;;) {
    UVCoord uv{unit(rng), unit(rng)};
    // Keep clear of the pole, where the azimuth is undefined.
    if (uv.v < 1e-3) continue;
    const double w = s.region_density[static_cast<std::size_t>(assign_region(uv, partition))];
    if (unit(rng) * mx < w) return uv;
  }
}

inline std::vector<Vec3> grow_strand(const StyleFamily& s, const UVCoord& uv, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double length = s.length_min + (s.length_max - s.length_min) * unit(rng);
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  const Vec3 root = uv_to_position(uv, s.scalp);
  const Vec3 normal = uv_direction(uv, s.scalp);
  const Vec3 down = -s.scalp.up;
  Vec3 outward = normal - normal.dot(s.scalp.up) * s.scalp.up;
  outward = outward.norm() > 1e-9 ? outward.normalized() : Vec3(-s.scalp.front);
  const Vec3 hang = (down + kSplay * outward).normalized();

  // Backbone: normal blending into a hanging direction.
  const int n = kRawSamples;
  const double ds = length / (n - 1);
  std::vector<Vec3> backbone(static_cast<std::size_t>(n));
  std::vector<Vec3> tangent(static_cast<std::size_t>(n));
  backbone[0] = root;
  for (int i = 0; i < n; ++i) {
    const double w = 1.0 - std::exp(-s.droop * (i * ds) / kDroopScale);
    tangent[static_cast<std::size_t>(i)] = ((1.0 - w) * normal + w * hang).normalized();
    if (i > 0) backbone[static_cast<std::size_t>(i)] = backbone[static_cast<std::size_t>(i - 1)] + ds * tangent[static_cast<std::size_t>(i - 1)];
  }
  if (s.family == Family::Straight) return backbone;

  // Transported frame for the displacement.
  Vec3 e1 = tangent[0].cross(s.scalp.up);
  if (e1.norm() < 1e-6) e1 = tangent[0].unitOrthogonal();
  e1.normalize();
  std::vector<Vec3> out(static_cast<std::size_t>(n));
  const double ramp_len = 0.1 * length;
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (i > 0) e1 = minimal_rotate(tangent[k - 1], tangent[k], e1).normalized();
    const Vec3 e2 = tangent[k].cross(e1);
    const double arc = i * ds;
    const double ramp = std::min(1.0, arc / ramp_len);
    Vec3 offset = Vec3::Zero();
    if (s.family == Family::Wavy) {
      offset = ramp * s.wave_amplitude * std::sin(2.0 * std::numbers::pi * s.wave_frequency * arc + phase) * e1;
    } else {
      const double th = 2.0 * std::numbers::pi * arc / s.helix_pitch + phase;
      offset = ramp * s.helix_radius * (std::cos(th) * e1 + std::sin(th) * e2);
    }
    out[k] = backbone[k] + offset;
  }
  return out;
}

}  // namespace detail

// Deterministic per seed.
inline Hairstyle generate_hairstyle(const StyleFamily& spec,
                                    const RegionPartition& partition = RegionPartition::default_partition()) {
  validate_family(spec);
  std::mt19937_64 rng(spec.seed);
  Hairstyle h;
  h.scalp = spec.scalp;
  h.strands.reserve(static_cast<std::size_t>(spec.strand_count));
  for (int i = 0; i < spec.strand_count; ++i) {
    const UVCoord uv = detail::sample_root(spec, partition, rng);
    Strand s;
    s.points = resample_polyline(detail::grow_strand(spec, uv, rng), spec.points);
    s.root_uv = uv;
    h.strands.push_back(std::move(s));
  }
  return h;
}

inline std::string family_manifest(const StyleFamily& s) {
  std::ostringstream os;
  os.precision(17);
  os << "family = " << family_name(s.family) << '\n'
     << "droop = " << s.droop << '\n'
     << "wave_amplitude = " << s.wave_amplitude << '\n'
     << "wave_frequency = " << s.wave_frequency << '\n'
     << "helix_radius = " << s.helix_radius << '\n'
     << "helix_pitch = " << s.helix_pitch << '\n'
     << "length_min = " << s.length_min << '\n'
     << "length_max = " << s.length_max << '\n'
     << "strand_count = " << s.strand_count << '\n'
     << "points = " << s.points << '\n'
     << "seed = " << s.seed << '\n';
  os << "region_density =";
  for (double d : s.region_density) os << ' ' << d;
  os << '\n';
  return os.str();
}

}  // namespace hairlang
