#pragma once

#include "hairlang/hairmodel.hpp"
#include "hairlang/kmeans.hpp"
#include "hairlang/spectral.hpp"

#include <random>
#include <sstream>

namespace hairlang {

inline constexpr int kDefaultFeatureCoefficients = 8;
inline constexpr int kDefaultGuideCount = 512;
inline constexpr int kDefaultPoolSamples = 10;

// Truncated DCT of the root-centered strand, K_feat rows of (x, y, z).
inline Eigen::VectorXd strand_descriptor(const Strand& strand, int k_feat = kDefaultFeatureCoefficients) {
  if (k_feat < 1 || k_feat > static_cast<int>(strand.size()))
    throw Error(Errc::invalid_argument, "K_feat out of range");
  Signal3 centered = to_signal(strand.points);
  centered.rowwise() -= centered.row(0).eval();
  const Signal3 coeffs = dct_forward(centered);
  Eigen::VectorXd z(3 * k_feat);
  for (int k = 0; k < k_feat; ++k) z.segment<3>(3 * k) = coeffs.row(k).transpose();
  return z;
}

inline PointMatrix descriptor_matrix(std::span<const Strand> strands, int k_feat) {
  PointMatrix x(static_cast<Eigen::Index>(strands.size()), 3 * k_feat);
  for (std::size_t i = 0; i < strands.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = strand_descriptor(strands[i], k_feat).transpose();
  return x;
}

struct GuideConfig {
  int k_feat = kDefaultFeatureCoefficients;
  int n_guide = kDefaultGuideCount;
  std::uint64_t seed = 0;
};

struct GuideSet {
  std::vector<Strand> guides;
  std::vector<Region> regions;
  std::vector<std::size_t> source_indices;          // guide -> index in the source hairstyle
  std::vector<std::vector<std::size_t>> cluster_pools;  // guide -> member strand indices
  DensityMap density;
  ScalpManifold scalp;

  std::size_t size() const { return guides.size(); }
};

inline GuideSet extract_guides(const Hairstyle& hair, const GuideConfig& config,
                               const RegionPartition& partition = RegionPartition::default_partition()) {
  if (hair.strands.empty()) throw Error(Errc::invalid_argument, "empty hairstyle");
  const PointMatrix z = descriptor_matrix(hair.strands, config.k_feat);
  const Clustering clusters = kmeans(z, config.n_guide, config.seed);

  GuideSet g;
  g.scalp = hair.scalp;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(clusters.cluster_count()));
  for (std::size_t i = 0; i < clusters.assignments.size(); ++i)
    members[static_cast<std::size_t>(clusters.assignments[i])].push_back(i);

  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].empty()) continue;
    std::size_t best = members[c].front();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i : members[c]) {
      const double d = (z.row(static_cast<Eigen::Index>(i)) - clusters.centroids.row(static_cast<Eigen::Index>(c))).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    g.guides.push_back(hair.strands[best]);
    g.regions.push_back(assign_region(hair.strands[best].root_uv, partition));
    g.source_indices.push_back(best);
    g.cluster_pools.push_back(std::move(members[c]));
  }

  std::vector<UVCoord> roots;
  roots.reserve(hair.strands.size());
  for (const auto& s : hair.strands) roots.push_back(s.root_uv);
  g.density = rasterize_density(roots);
  return g;
}

// n strands per pool, pool by pool. Without replacement unless the pool is
// smaller than n.
inline std::vector<Strand> sample_cluster_strands(const GuideSet& guides, const Hairstyle& source,
                                                  int n_per_cluster, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Strand> out;
  out.reserve(guides.cluster_pools.size() * static_cast<std::size_t>(n_per_cluster));
  for (const auto& pool : guides.cluster_pools) {
    if (pool.empty()) throw Error(Errc::invalid_argument, "empty cluster pool");
    if (pool.size() >= static_cast<std::size_t>(n_per_cluster)) {
      std::vector<std::size_t> order(pool);
      for (int i = 0; i < n_per_cluster; ++i) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), order.size() - 1);
        std::swap(order[static_cast<std::size_t>(i)], order[pick(rng)]);
        out.push_back(source.strands.at(order[static_cast<std::size_t>(i)]));
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (int i = 0; i < n_per_cluster; ++i) out.push_back(source.strands.at(pool[pick(rng)]));
    }
  }
  return out;
}

// Persistence: guides as .hair, density as raw f32 raster, and a manifest
// with one "index region cluster_size" line per guide.
inline std::string guide_manifest(const GuideSet& g) {
  std::ostringstream os;
  os << "# guide region cluster_size source_index\n";
  for (std::size_t i = 0; i < g.size(); ++i)
    os << i << ' ' << region_name(g.regions[i]) << ' ' << g.cluster_pools[i].size() << ' '
       << g.source_indices[i] << '\n';
  return os.str();
}

struct GuideManifestEntry {
  Region region;
  std::size_t cluster_size;
  std::size_t source_index;
};

inline std::vector<GuideManifestEntry> parse_guide_manifest(const std::string& text) {
  std::vector<GuideManifestEntry> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::size_t index;
    std::string name;
    GuideManifestEntry e{};
    if (!(ls >> index >> name >> e.cluster_size >> e.source_index) || index != out.size())
      throw Error(Errc::format, "malformed guide manifest line: " + line);
    auto r = region_from_name(name);
    if (!r) throw Error(Errc::format, "unknown region in guide manifest: " + name);
    e.region = *r;
    out.push_back(e);
  }
  return out;
}

}  // namespace hairlang
