#pragma once

#include "hairlang/guides.hpp"
#include "hairlang/kmeans.hpp"
#include "hairlang/spectral.hpp"

#include <array>
#include <random>

namespace hairlang {

// ---------------------------------------------------------------------------
// Root position tokens

inline constexpr int kUVGrid = 256;
inline constexpr int kAnchorGrid = 32;
inline constexpr int kAnchorCount = kAnchorGrid * kAnchorGrid;

struct UVTokens {
  int u = 0;
  int v = 0;
  friend bool operator==(const UVTokens&, const UVTokens&) = default;
};

inline int quantize_coord(double c, int grid) {
  return std::clamp(static_cast<int>(std::floor(c * grid)), 0, grid - 1);
}

inline UVTokens quantize_uv(const UVCoord& uv) {
  return {quantize_coord(uv.u, kUVGrid), quantize_coord(uv.v, kUVGrid)};
}

inline UVCoord dequantize_uv(const UVTokens& t) {
  if (t.u < 0 || t.u >= kUVGrid || t.v < 0 || t.v >= kUVGrid)
    throw Error(Errc::invalid_argument, "uv token out of range");
  return {(t.u + 0.5) / kUVGrid, (t.v + 0.5) / kUVGrid};
}

// Index of the 32x32 density-token cell containing the root, row-major in v.
inline int density_anchor(const UVCoord& uv) {
  return quantize_coord(uv.v, kAnchorGrid) * kAnchorGrid + quantize_coord(uv.u, kAnchorGrid);
}

// ---------------------------------------------------------------------------
// Strand features

inline constexpr int kHeads = 4;
inline constexpr int kHeadDim = 8;
inline constexpr int kFeatureDim = kHeads * kHeadDim;
inline constexpr int kFeatureRows = 11;

using StrandFeature = Eigen::Matrix<double, kFeatureDim, 1>;
using CodeTokens = std::array<std::uint32_t, kHeads>;

enum class ComponentKind : std::uint32_t { Coarse = 0, Style = 1 };

namespace detail {

// Coefficient rows 0..10 are flattened row-major (x, y, z) and cut to 32
// values; flat entry f lands in head f % 4, slot f / 4. Interleaving spreads
// the low frequencies over all four heads.
inline int packed_index(int flat) { return (flat % kHeads) * kHeadDim + flat / kHeads; }

inline StrandFeature pack_coefficients(const Signal3& coeffs) {
  StrandFeature f = StrandFeature::Zero();
  for (int flat = 0; flat < kFeatureDim; ++flat) {
    const int row = flat / 3, axis = flat % 3;
    if (row < coeffs.rows()) f[packed_index(flat)] = coeffs(row, axis);
  }
  return f;
}

inline Signal3 unpack_coefficients(const StrandFeature& f, int rows) {
  Signal3 coeffs = Signal3::Zero(rows, 3);
  for (int flat = 0; flat < kFeatureDim; ++flat) {
    const int row = flat / 3, axis = flat % 3;
    if (row < rows) coeffs(row, axis) = f[packed_index(flat)];
  }
  return coeffs;
}

}  // namespace detail

// Raw (unnormalized) features. Coarse: DCT of backbone segment vectors.
// Style: DCT of the residual sequence.
inline StrandFeature strand_to_feature(const CoarseBackbone& backbone) {
  return detail::pack_coefficients(dct_forward(segment_vectors(backbone.points)));
}

inline StrandFeature strand_to_feature(const StyleResidual& residual) {
  return detail::pack_coefficients(dct_forward(to_signal(residual.residuals)));
}

// ---------------------------------------------------------------------------
// Product-quantization codebook

struct Codebook {
  ComponentKind kind = ComponentKind::Coarse;
  int strand_points = kDefaultStrandPoints;
  int entries = 0;  // K per head
  StrandFeature mean = StrandFeature::Zero();
  StrandFeature stddev = StrandFeature::Ones();
  std::array<PointMatrix, kHeads> tables;      // K x 8, unit rows
  std::array<Eigen::VectorXd, kHeads> gains;   // mean sub-vector norm per code

  StrandFeature normalize(const StrandFeature& f) const {
    return ((f - mean).array() / stddev.array()).matrix();
  }
  StrandFeature denormalize(const StrandFeature& f) const {
    return (f.array() * stddev.array()).matrix() + mean;
  }
};

struct PQTrainConfig {
  double ema_decay = 0.99;
  int iterations = 50;
  int dead_after = 5;
  std::uint64_t seed = 0;
};

namespace detail {

inline int nearest_by_cosine(const PointMatrix& table, const Eigen::Matrix<double, kHeadDim, 1>& x) {
  int best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < table.rows(); ++k) {
    const double d = table.row(k).dot(x.transpose());
    if (d > best_dot) {
      best_dot = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

inline Eigen::Matrix<double, kHeadDim, 1> random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Matrix<double, kHeadDim, 1> v;
  do {
    for (int i = 0; i < kHeadDim; ++i) v[i] = g(rng);
  } while (v.norm() < 1e-6);
  return v.normalized();
}

}  // namespace detail

// Spherical k-means per head: cosine assignment, EMA of assigned unit
// vectors (cluster-size and sum accumulators), row re-normalization, and
// reseeding of codes unused for `dead_after` consecutive iterations.
inline Codebook train_pq_codebook(std::span<const StrandFeature> features, int entries, ComponentKind kind,
                                  int strand_points, const PQTrainConfig& config = {}) {
  if (features.size() < 2) throw Error(Errc::invalid_argument, "need at least 2 training features");
  if (entries < 1) throw Error(Errc::invalid_argument, "codebook needs at least one entry");
  const auto n = static_cast<Eigen::Index>(features.size());

  Codebook cb;
  cb.kind = kind;
  cb.strand_points = strand_points;
  cb.entries = entries;
  for (const auto& f : features) cb.mean += f;
  cb.mean /= static_cast<double>(n);
  StrandFeature var = StrandFeature::Zero();
  for (const auto& f : features) var += (f - cb.mean).cwiseAbs2();
  var /= static_cast<double>(n);
  for (int i = 0; i < kFeatureDim; ++i) cb.stddev[i] = var[i] > 1e-24 ? std::sqrt(var[i]) : 1.0;

  std::mt19937_64 rng(config.seed);
  for (int h = 0; h < kHeads; ++h) {
    PointMatrix unit(n, kHeadDim);
    Eigen::VectorXd norms(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Matrix<double, kHeadDim, 1> sub =
          cb.normalize(features[static_cast<std::size_t>(i)]).segment<kHeadDim>(h * kHeadDim);
      norms[i] = sub.norm();
      if (norms[i] > 1e-12)
        unit.row(i) = (sub / norms[i]).transpose();
      else
        unit.row(i).setZero();
    }

    PointMatrix table = detail::kmeanspp_seed(unit, entries, rng);
    const Eigen::Index seeded = table.rows();
    table.conservativeResize(entries, kHeadDim);
    for (Eigen::Index k = seeded; k < entries; ++k) table.row(k) = detail::random_unit(rng).transpose();
    for (Eigen::Index k = 0; k < seeded; ++k) {
      if (table.row(k).norm() < 1e-12)
        table.row(k) = detail::random_unit(rng).transpose();
      else
        table.row(k).normalize();
    }

    Eigen::VectorXd ema_count = Eigen::VectorXd::Zero(entries);
    PointMatrix ema_sum = PointMatrix::Zero(entries, kHeadDim);
    std::vector<int> idle(static_cast<std::size_t>(entries), 0);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    const double decay = config.ema_decay;

    for (int it = 0; it < config.iterations; ++it) {
      Eigen::VectorXd count = Eigen::VectorXd::Zero(entries);
      PointMatrix sum = PointMatrix::Zero(entries, kHeadDim);
      for (Eigen::Index i = 0; i < n; ++i) {
        const int k = detail::nearest_by_cosine(table, unit.row(i).transpose());
        count[k] += 1.0;
        sum.row(k) += unit.row(i);
      }
      for (Eigen::Index k = 0; k < entries; ++k) {
        ema_count[k] = decay * ema_count[k] + (1.0 - decay) * count[k];
        ema_sum.row(k) = decay * ema_sum.row(k) + (1.0 - decay) * sum.row(k);
        auto& idle_k = idle[static_cast<std::size_t>(k)];
        idle_k = count[k] > 0 ? 0 : idle_k + 1;
        if (idle_k >= config.dead_after) {
          Eigen::RowVectorXd fresh = unit.row(pick(rng));
          table.row(k) = fresh.norm() > 1e-12 ? fresh.normalized() : detail::random_unit(rng).transpose();
          ema_count[k] = 0.0;
          ema_sum.row(k).setZero();
          idle_k = 0;
          continue;
        }
        if (ema_count[k] > 0.0) {
          const Eigen::RowVectorXd mean = ema_sum.row(k) / ema_count[k];
          if (mean.norm() > 1e-12) table.row(k) = mean.normalized();
        }
      }
    }

    Eigen::VectorXd gain_sum = Eigen::VectorXd::Zero(entries);
    Eigen::VectorXd gain_count = Eigen::VectorXd::Zero(entries);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int k = detail::nearest_by_cosine(table, unit.row(i).transpose());
      gain_sum[k] += norms[i];
      gain_count[k] += 1.0;
    }
    const double global_gain = norms.mean();
    cb.gains[static_cast<std::size_t>(h)] = Eigen::VectorXd(entries);
    for (Eigen::Index k = 0; k < entries; ++k)
      cb.gains[static_cast<std::size_t>(h)][k] = gain_count[k] > 0 ? gain_sum[k] / gain_count[k] : global_gain;
    cb.tables[static_cast<std::size_t>(h)] = std::move(table);
  }
  return cb;
}

// Ties resolve to the lowest code index.
inline CodeTokens encode_feature(const StrandFeature& feature, const Codebook& cb) {
  const StrandFeature z = cb.normalize(feature);
  CodeTokens t{};
  for (int h = 0; h < kHeads; ++h)
    t[static_cast<std::size_t>(h)] = static_cast<std::uint32_t>(
        detail::nearest_by_cosine(cb.tables[static_cast<std::size_t>(h)], z.segment<kHeadDim>(h * kHeadDim)));
  return t;
}

inline StrandFeature decode_feature(const CodeTokens& tokens, const Codebook& cb) {
  StrandFeature z;
  for (int h = 0; h < kHeads; ++h) {
    const auto k = tokens[static_cast<std::size_t>(h)];
    if (k >= static_cast<std::uint32_t>(cb.entries)) throw Error(Errc::invalid_argument, "token out of vocabulary range");
    const auto hs = static_cast<std::size_t>(h);
    z.segment<kHeadDim>(h * kHeadDim) = cb.gains[hs][k] * cb.tables[hs].row(k).transpose();
  }
  return cb.denormalize(z);
}

inline CodeTokens encode_strand(const CoarseBackbone& backbone, const Codebook& cb) {
  if (cb.kind != ComponentKind::Coarse) throw Error(Errc::invalid_argument, "codebook is not a coarse codebook");
  return encode_feature(strand_to_feature(backbone), cb);
}

inline CodeTokens encode_strand(const StyleResidual& residual, const Codebook& cb) {
  if (cb.kind != ComponentKind::Style) throw Error(Errc::invalid_argument, "codebook is not a style codebook");
  return encode_feature(strand_to_feature(residual), cb);
}

inline CoarseBackbone decode_coarse(const CodeTokens& tokens, const Codebook& cb, const Vec3& root) {
  if (cb.kind != ComponentKind::Coarse) throw Error(Errc::invalid_argument, "codebook is not a coarse codebook");
  const Signal3 coeffs = detail::unpack_coefficients(decode_feature(tokens, cb), cb.strand_points - 1);
  CoarseBackbone b;
  b.source_root = root;
  b.points = integrate_segments(root, dct_inverse(coeffs));
  return b;
}

inline StyleResidual decode_style(const CodeTokens& tokens, const Codebook& cb) {
  if (cb.kind != ComponentKind::Style) throw Error(Errc::invalid_argument, "codebook is not a style codebook");
  const Signal3 coeffs = detail::unpack_coefficients(decode_feature(tokens, cb), cb.strand_points);
  StyleResidual r;
  r.residuals = to_points(dct_inverse(coeffs));
  r.residuals.front() = Vec3::Zero();
  return r;
}

// 1 - mean cosine between normalized sub-vectors and their assigned codes.
inline double quantization_error(std::span<const StrandFeature> features, const Codebook& cb) {
  double total = 0.0;
  std::size_t terms = 0;
  for (const auto& f : features) {
    const StrandFeature z = cb.normalize(f);
    for (int h = 0; h < kHeads; ++h) {
      const Eigen::Matrix<double, kHeadDim, 1> sub = z.segment<kHeadDim>(h * kHeadDim);
      if (sub.norm() < 1e-12) continue;
      const auto& table = cb.tables[static_cast<std::size_t>(h)];
      const int k = detail::nearest_by_cosine(table, sub);
      total += 1.0 - table.row(k).dot(sub.transpose()) / sub.norm();
      ++terms;
    }
  }
  return terms ? total / static_cast<double>(terms) : 0.0;
}

// Fraction of (head, code) entries hit by at least one feature.
inline double codebook_utilization(std::span<const StrandFeature> features, const Codebook& cb) {
  std::array<std::vector<bool>, kHeads> used;
  for (auto& u : used) u.assign(static_cast<std::size_t>(cb.entries), false);
  for (const auto& f : features) {
    const auto t = encode_feature(f, cb);
    for (int h = 0; h < kHeads; ++h) used[static_cast<std::size_t>(h)][t[static_cast<std::size_t>(h)]] = true;
  }
  std::size_t hit = 0;
  for (const auto& u : used) hit += static_cast<std::size_t>(std::count(u.begin(), u.end(), true));
  return static_cast<double>(hit) / (static_cast<double>(kHeads) * cb.entries);
}

// HPQ1: magic, heads, K, dim, kind, L, mean[32], std[32], tables, gains.
inline std::vector<char> encode_codebook(const Codebook& cb) {
  ByteWriter w;
  w.put_magic("HPQ1");
  w.put<std::uint32_t>(kHeads);
  w.put(static_cast<std::uint32_t>(cb.entries));
  w.put<std::uint32_t>(kHeadDim);
  w.put(static_cast<std::uint32_t>(cb.kind));
  w.put(static_cast<std::uint32_t>(cb.strand_points));
  for (int i = 0; i < kFeatureDim; ++i) w.put_f32(cb.mean[i]);
  for (int i = 0; i < kFeatureDim; ++i) w.put_f32(cb.stddev[i]);
  for (const auto& t : cb.tables)
    for (Eigen::Index k = 0; k < t.rows(); ++k)
      for (int d = 0; d < kHeadDim; ++d) w.put_f32(t(k, d));
  for (const auto& g : cb.gains)
    for (Eigen::Index k = 0; k < g.size(); ++k) w.put_f32(g[k]);
  return w.bytes();
}

inline Codebook decode_codebook(std::span<const char> bytes) {
  ByteReader r(bytes);
  r.expect_magic("HPQ1");
  if (r.get<std::uint32_t>() != kHeads) throw Error(Errc::format, "codebook head count must be 4");
  Codebook cb;
  cb.entries = static_cast<int>(r.get<std::uint32_t>());
  if (r.get<std::uint32_t>() != kHeadDim) throw Error(Errc::format, "codebook head dim must be 8");
  const auto kind = r.get<std::uint32_t>();
  if (kind > 1) throw Error(Errc::format, "unknown codebook kind");
  cb.kind = static_cast<ComponentKind>(kind);
  cb.strand_points = static_cast<int>(r.get<std::uint32_t>());
  if (cb.entries < 1 || cb.strand_points < kFeatureRows + 1) throw Error(Errc::format, "bad codebook header");
  for (int i = 0; i < kFeatureDim; ++i) cb.mean[i] = r.get_f32();
  for (int i = 0; i < kFeatureDim; ++i) cb.stddev[i] = r.get_f32();
  for (auto& t : cb.tables) {
    t.resize(cb.entries, kHeadDim);
    for (Eigen::Index k = 0; k < t.rows(); ++k) {
      for (int d = 0; d < kHeadDim; ++d) t(k, d) = r.get_f32();
      t.row(k).normalize();
    }
  }
  for (auto& g : cb.gains) {
    g.resize(cb.entries);
    for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = r.get_f32();
  }
  if (!r.at_end()) throw Error(Errc::format, "trailing bytes in codebook");
  return cb;
}

// ---------------------------------------------------------------------------
// Density patches

inline constexpr int kPatch = 8;
inline constexpr int kPatchDim = kPatch * kPatch;
inline constexpr int kDensityTokens = kAnchorCount;

struct DensityCodebook {
  PointMatrix table;  // K x 64
  int entries() const { return static_cast<int>(table.rows()); }
};

inline PointMatrix density_patches(const DensityMap& map) {
  if (map.resolution != kDensityResolution ||
      map.values.size() != static_cast<std::size_t>(kDensityResolution) * kDensityResolution)
    throw Error(Errc::invalid_argument, "density map must be 256x256");
  PointMatrix patches(kDensityTokens, kPatchDim);
  for (int pr = 0; pr < kAnchorGrid; ++pr)
    for (int pc = 0; pc < kAnchorGrid; ++pc)
      for (int y = 0; y < kPatch; ++y)
        for (int x = 0; x < kPatch; ++x)
          patches(pr * kAnchorGrid + pc, y * kPatch + x) = map.at(pr * kPatch + y, pc * kPatch + x);
  return patches;
}

inline DensityCodebook train_density_codebook(std::span<const DensityMap> maps, int entries, std::uint64_t seed,
                                              int iterations = 50) {
  if (maps.empty()) throw Error(Errc::invalid_argument, "no density maps to train on");
  PointMatrix all(static_cast<Eigen::Index>(maps.size()) * kDensityTokens, kPatchDim);
  for (std::size_t m = 0; m < maps.size(); ++m)
    all.middleRows(static_cast<Eigen::Index>(m) * kDensityTokens, kDensityTokens) = density_patches(maps[m]);
  KMeansOptions opt;
  opt.max_iterations = iterations;
  DensityCodebook cb;
  cb.table = kmeans(all, entries, seed, opt).centroids;
  // Fewer distinct patches than entries: pad with copies of the first code.
  if (cb.table.rows() < entries) {
    const Eigen::Index have = cb.table.rows();
    cb.table.conservativeResize(entries, kPatchDim);
    for (Eigen::Index k = have; k < entries; ++k) cb.table.row(k) = cb.table.row(0);
  }
  return cb;
}

inline std::vector<std::uint32_t> encode_density(const DensityMap& map, const DensityCodebook& cb) {
  const PointMatrix patches = density_patches(map);
  std::vector<std::uint32_t> tokens(kDensityTokens);
  for (Eigen::Index p = 0; p < patches.rows(); ++p) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (Eigen::Index k = 0; k < cb.table.rows(); ++k) {
      const double d = (patches.row(p) - cb.table.row(k)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<std::uint32_t>(k);
      }
    }
    tokens[static_cast<std::size_t>(p)] = arg;
  }
  return tokens;
}

inline DensityMap decode_density(std::span<const std::uint32_t> tokens, const DensityCodebook& cb) {
  if (tokens.size() != static_cast<std::size_t>(kDensityTokens))
    throw Error(Errc::invalid_argument, "density needs exactly 1024 tokens");
  DensityMap m;
  m.values.assign(static_cast<std::size_t>(kDensityResolution) * kDensityResolution, 0.0);
  for (int p = 0; p < kDensityTokens; ++p) {
    const auto k = tokens[static_cast<std::size_t>(p)];
    if (k >= static_cast<std::uint32_t>(cb.entries())) throw Error(Errc::invalid_argument, "token out of vocabulary range");
    const int pr = p / kAnchorGrid, pc = p % kAnchorGrid;
    for (int y = 0; y < kPatch; ++y)
      for (int x = 0; x < kPatch; ++x)
        m.at(pr * kPatch + y, pc * kPatch + x) = std::clamp(cb.table(k, y * kPatch + x), 0.0, 1.0);
  }
  return m;
}

inline double density_patch_mse(const DensityMap& map, const DensityCodebook& cb) {
  const DensityMap rec = decode_density(encode_density(map, cb), cb);
  double mse = 0.0;
  for (std::size_t i = 0; i < map.values.size(); ++i) mse += (map.values[i] - rec.values[i]) * (map.values[i] - rec.values[i]);
  return mse / static_cast<double>(map.values.size());
}

// HDQ1: magic, K, dim, table.
inline std::vector<char> encode_density_codebook(const DensityCodebook& cb) {
  ByteWriter w;
  w.put_magic("HDQ1");
  w.put(static_cast<std::uint32_t>(cb.entries()));
  w.put<std::uint32_t>(kPatchDim);
  for (Eigen::Index k = 0; k < cb.table.rows(); ++k)
    for (int d = 0; d < kPatchDim; ++d) w.put_f32(cb.table(k, d));
  return w.bytes();
}

inline DensityCodebook decode_density_codebook(std::span<const char> bytes) {
  ByteReader r(bytes);
  r.expect_magic("HDQ1");
  const auto k = r.get<std::uint32_t>();
  if (r.get<std::uint32_t>() != kPatchDim) throw Error(Errc::format, "density codebook dim must be 64");
  if (k < 1) throw Error(Errc::format, "empty density codebook");
  DensityCodebook cb;
  cb.table.resize(k, kPatchDim);
  for (Eigen::Index i = 0; i < cb.table.rows(); ++i)
    for (int d = 0; d < kPatchDim; ++d) cb.table(i, d) = r.get_f32();
  if (!r.at_end()) throw Error(Errc::format, "trailing bytes in density codebook");
  return cb;
}

// ---------------------------------------------------------------------------
// Whole-strand tokens

struct StrandTokens {
  Region region = Region::Front;
  int alpha = 0;
  UVTokens uv;
  CodeTokens coarse{};
  CodeTokens style{};
  friend bool operator==(const StrandTokens&, const StrandTokens&) = default;
};

inline StrandTokens tokenize_strand(const Strand& strand, int k_geo, const Codebook& coarse, const Codebook& style,
                                    const RegionPartition& partition) {
  const Decomposition d = decompose(strand, k_geo);
  StrandTokens t;
  t.uv = quantize_uv(strand.root_uv);
  // Region follows the quantized root so it is recoverable from (u, v).
  t.region = assign_region(dequantize_uv(t.uv), partition);
  t.alpha = density_anchor(strand.root_uv);
  t.coarse = encode_strand(d.backbone, coarse);
  t.style = encode_strand(d.residual, style);
  return t;
}

// Roots are re-placed at the centre of their UV cell on the scalp.
inline Strand detokenize_strand(const StrandTokens& t, const Codebook& coarse, const Codebook& style,
                                const ScalpManifold& scalp) {
  const UVCoord uv = dequantize_uv(t.uv);
  const CoarseBackbone backbone = decode_coarse(t.coarse, coarse, uv_to_position(uv, scalp));
  return recompose(backbone, decode_style(t.style, style), uv);
}

}  // namespace hairlang
