#pragma once

#include "hairlang/hairmodel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace hairlang {

using Signal3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;  // N samples x 3 axes

// Orthonormal DCT-II basis, row k = frequency k. Cached per length.
inline const Eigen::MatrixXd& dct_basis(int n) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<Eigen::MatrixXd>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) {
    auto m = std::make_unique<Eigen::MatrixXd>(n, n);
    for (int k = 0; k < n; ++k) {
      const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
      for (int j = 0; j < n; ++j)
        (*m)(k, j) = scale * std::cos(std::numbers::pi * (j + 0.5) * k / n);
    }
    slot = std::move(m);
  }
  return *slot;
}

inline Signal3 dct_forward(const Signal3& signal) {
  if (signal.rows() < 1) throw Error(Errc::invalid_argument, "empty signal");
  return dct_basis(static_cast<int>(signal.rows())) * signal;
}

inline Signal3 dct_inverse(const Signal3& coeffs) {
  if (coeffs.rows() < 1) throw Error(Errc::invalid_argument, "empty signal");
  return dct_basis(static_cast<int>(coeffs.rows())).transpose() * coeffs;
}

inline Signal3 to_signal(std::span<const Vec3> pts) {
  Signal3 s(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) s.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return s;
}

inline std::vector<Vec3> to_points(const Signal3& s) {
  std::vector<Vec3> pts(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) pts[static_cast<std::size_t>(i)] = s.row(i).transpose();
  return pts;
}

// Segment vectors p[j+1] - p[j].
inline Signal3 segment_vectors(std::span<const Vec3> pts) {
  Signal3 v(static_cast<Eigen::Index>(pts.size()) - 1, 3);
  for (std::size_t j = 0; j + 1 < pts.size(); ++j)
    v.row(static_cast<Eigen::Index>(j)) = (pts[j + 1] - pts[j]).transpose();
  return v;
}

// p[0] = root, p[j] = root + sum_{m<j} v[m].
inline std::vector<Vec3> integrate_segments(const Vec3& root, const Signal3& directions) {
  std::vector<Vec3> pts(static_cast<std::size_t>(directions.rows()) + 1);
  pts[0] = root;
  for (Eigen::Index j = 0; j < directions.rows(); ++j)
    pts[static_cast<std::size_t>(j) + 1] = pts[static_cast<std::size_t>(j)] + directions.row(j).transpose();
  return pts;
}

// ---------------------------------------------------------------------------

struct CoarseBackbone {
  std::vector<Vec3> points;
  Vec3 source_root = Vec3::Zero();
};

struct FrameSequence {
  std::vector<Mat3> frames;  // columns: tangent, normal, binormal
  std::vector<double> scales;
};

struct StyleResidual {
  std::vector<Vec3> residuals;
};

inline CoarseBackbone extract_coarse_backbone(const Strand& strand, int k_geo) {
  const int L = static_cast<int>(strand.size());
  if (L < 2) throw Error(Errc::invalid_argument, "strand too short for a backbone");
  if (k_geo < 1 || k_geo > L - 1)
    throw Error(Errc::invalid_argument, "K_geo out of range [1, L-1]: " + std::to_string(k_geo));
  Signal3 coeffs = dct_forward(segment_vectors(strand.points));
  coeffs.bottomRows(coeffs.rows() - k_geo).setZero();
  CoarseBackbone b;
  b.source_root = strand.root();
  b.points = integrate_segments(strand.root(), dct_inverse(coeffs));
  return b;
}

namespace detail {

// Rotation by the smallest angle taking unit `from` onto unit `to`, applied
// to `x`. Antiparallel inputs have no unique minimal rotation; a half-turn
// about an axis orthogonal to `from` is used.
inline Vec3 minimal_rotate(const Vec3& from, const Vec3& to, const Vec3& x) {
  const Vec3 axis = from.cross(to);
  const double s = axis.norm();
  const double c = from.dot(to);
  if (s < 1e-15) {
    if (c > 0) return x;
    Vec3 ortho = from.unitOrthogonal();
    return Eigen::AngleAxisd(std::numbers::pi, ortho) * x;
  }
  return Eigen::AngleAxisd(std::atan2(s, c), axis / s) * x;
}

}  // namespace detail

inline constexpr double kParallelTangentAngle = 1e-3;
inline constexpr double kScaleFloor = 1e-9;

inline FrameSequence compute_frames(const CoarseBackbone& backbone) {
  const auto& p = backbone.points;
  const std::size_t L = p.size();
  if (L < 3) throw Error(Errc::invalid_argument, "backbone needs at least 3 points");

  // Per-segment unit tangents; degenerate segments inherit the previous
  // tangent (leading degenerate segments take the first valid one).
  std::vector<Vec3> seg(L - 1);
  std::vector<bool> valid(L - 1);
  std::optional<std::size_t> first_valid;
  for (std::size_t j = 0; j + 1 < L; ++j) {
    const Vec3 d = p[j + 1] - p[j];
    valid[j] = d.norm() > 1e-9;
    if (valid[j]) {
      seg[j] = d.normalized();
      if (!first_valid) first_valid = j;
    }
  }
  if (!first_valid) throw Error(Errc::degenerate, "degenerate backbone");
  for (std::size_t j = 0; j + 1 < L; ++j)
    if (!valid[j]) seg[j] = j == 0 || j < *first_valid ? seg[*first_valid] : seg[j - 1];

  std::vector<Vec3> tangent(L);
  for (std::size_t j = 0; j < L; ++j) tangent[j] = seg[std::min(j, L - 2)];

  // Initial normal from curvature so the frames rotate with the strand.
  Vec3 normal;
  const Vec3 bend = tangent[1] - tangent[1].dot(tangent[0]) * tangent[0];
  const double angle = std::atan2(tangent[0].cross(tangent[1]).norm(), tangent[0].dot(tangent[1]));
  if (angle > kParallelTangentAngle) {
    normal = bend.normalized();
  } else {
    Vec3 axis = Vec3::UnitX();
    if (std::abs(axis.dot(tangent[0])) > 0.9) axis = Vec3::UnitY();
    normal = (axis - axis.dot(tangent[0]) * tangent[0]).normalized();
  }

  FrameSequence out;
  out.frames.resize(L);
  out.scales.resize(L);
  for (std::size_t j = 0; j < L; ++j) {
    if (j > 0) {
      normal = detail::minimal_rotate(tangent[j - 1], tangent[j], normal);
      normal = (normal - normal.dot(tangent[j]) * tangent[j]).normalized();
    }
    out.frames[j].col(0) = tangent[j];
    out.frames[j].col(1) = normal;
    out.frames[j].col(2) = tangent[j].cross(normal);
  }

  for (std::size_t j = 0; j < L; ++j) {
    double sigma;
    if (j == 0)
      sigma = (p[1] - p[0]).norm();
    else if (j == L - 1)
      sigma = (p[L - 1] - p[L - 2]).norm();
    else
      sigma = 0.5 * ((p[j] - p[j - 1]).norm() + (p[j + 1] - p[j]).norm());
    out.scales[j] = std::max(sigma, kScaleFloor);
  }
  return out;
}

struct Decomposition {
  CoarseBackbone backbone;
  StyleResidual residual;
};

inline Decomposition decompose(const Strand& strand, int k_geo) {
  Decomposition d;
  d.backbone = extract_coarse_backbone(strand, k_geo);
  const FrameSequence fs = compute_frames(d.backbone);
  d.residual.residuals.resize(strand.size());
  d.residual.residuals[0] = Vec3::Zero();
  for (std::size_t j = 1; j < strand.size(); ++j)
    d.residual.residuals[j] =
        fs.frames[j].transpose() * (strand.points[j] - d.backbone.points[j]) / fs.scales[j];
  return d;
}

inline std::vector<Vec3> recompose_points(const CoarseBackbone& backbone, const StyleResidual& residual) {
  if (backbone.points.size() != residual.residuals.size())
    throw Error(Errc::invalid_argument, "backbone and residual lengths differ");
  const FrameSequence fs = compute_frames(backbone);
  std::vector<Vec3> pts(backbone.points.size());
  for (std::size_t j = 0; j < pts.size(); ++j)
    pts[j] = backbone.points[j] + fs.scales[j] * (fs.frames[j] * residual.residuals[j]);
  pts[0] = backbone.points[0];
  return pts;
}

inline Strand recompose(const CoarseBackbone& backbone, const StyleResidual& residual,
                        const UVCoord& root_uv = {}) {
  Strand s;
  s.points = recompose_points(backbone, residual);
  s.root_uv = root_uv;
  return s;
}

// Decomposition cache blocks: "HDEC" + version + count + L, then per strand
// backbone points and residuals as f32.
inline std::vector<char> encode_decompositions(std::span<const Decomposition> items) {
  ByteWriter w;
  w.put_magic("HDEC");
  w.put<std::uint32_t>(1);
  w.put(static_cast<std::uint32_t>(items.size()));
  const auto L = items.empty() ? 0u : static_cast<std::uint32_t>(items.front().backbone.points.size());
  w.put(L);
  for (const auto& d : items) {
    if (d.backbone.points.size() != L || d.residual.residuals.size() != L)
      throw Error(Errc::invalid_argument, "decompositions differ in length");
    for (const auto& p : d.backbone.points)
      for (int i = 0; i < 3; ++i) w.put_f32(p[i]);
    for (const auto& r : d.residual.residuals)
      for (int i = 0; i < 3; ++i) w.put_f32(r[i]);
  }
  return w.bytes();
}

inline std::vector<Decomposition> decode_decompositions(std::span<const char> bytes) {
  ByteReader r(bytes);
  r.expect_magic("HDEC");
  if (r.get<std::uint32_t>() != 1) throw Error(Errc::format, "unsupported decomposition version");
  const auto count = r.get<std::uint32_t>();
  const auto L = r.get<std::uint32_t>();
  if (r.remaining() != static_cast<std::size_t>(count) * L * 6 * sizeof(float))
    throw Error(Errc::format, "decomposition payload size mismatch");
  std::vector<Decomposition> out(count);
  for (auto& d : out) {
    d.backbone.points.resize(L);
    d.residual.residuals.resize(L);
    for (auto& p : d.backbone.points)
      for (int i = 0; i < 3; ++i) p[i] = r.get_f32();
    for (auto& q : d.residual.residuals)
      for (int i = 0; i < 3; ++i) q[i] = r.get_f32();
    if (L > 0) d.backbone.source_root = d.backbone.points.front();
  }
  return out;
}

}  // namespace hairlang
