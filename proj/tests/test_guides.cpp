#include "support.hpp"

#include <set>

using namespace hairlang;
using namespace hairlang::testing;

namespace {

PointMatrix blobs(std::mt19937_64& rng, int per_blob, const std::vector<Eigen::Vector2d>& centers, double spread) {
  std::normal_distribution<double> g(0.0, spread);
  PointMatrix x(static_cast<Eigen::Index>(per_blob * centers.size()), 2);
  Eigen::Index row = 0;
  for (const auto& c : centers)
    for (int i = 0; i < per_blob; ++i, ++row) x.row(row) << c.x() + g(rng), c.y() + g(rng);
  return x;
}

double inertia_of(const PointMatrix& x, const std::vector<int>& assign, int k) {
  PointMatrix sums = PointMatrix::Zero(k, x.cols());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    sums.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
    ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int a = assign[static_cast<std::size_t>(i)];
    total += (x.row(i) - sums.row(a) / counts[static_cast<std::size_t>(a)]).squaredNorm();
  }
  return total;
}

}  // namespace

TEST(Descriptor, TranslationInvariant) {
  std::mt19937_64 rng(1);
  const Strand s = random_strand(rng, 64);
  Strand t = s;
  for (auto& p : t.points) p += Vec3(0.3, -1.0, 2.0);
  EXPECT_LT((strand_descriptor(s) - strand_descriptor(t)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(strand_descriptor(s).size(), 3 * kDefaultFeatureCoefficients);
}

// Closed-form DCT of the ramp j/(N-1): DC = sqrt(N)/2, even k >= 2 vanish,
// odd k equal -a_k cos(phi) / (2 sin^2(phi) (N-1)) with phi = pi k / 2N.
TEST(Descriptor, StraightStrandRampSpectrum) {
  const int N = 64;
  const Vec3 d = Vec3(1, 2, -2).normalized();
  const Strand s = line_strand(N, Vec3(0.1, 0.2, 0.3), Vec3(0.1, 0.2, 0.3) + d);
  const Eigen::VectorXd z = strand_descriptor(s, 8);
  for (int k = 0; k < 8; ++k) {
    double c;
    if (k == 0) {
      c = std::sqrt(static_cast<double>(N)) / 2.0;
    } else if (k % 2 == 0) {
      c = 0.0;
    } else {
      const double phi = std::numbers::pi * k / (2.0 * N);
      c = -std::sqrt(2.0 / N) * std::cos(phi) / (2.0 * std::sin(phi) * std::sin(phi) * (N - 1));
    }
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(z[3 * k + a], c * d[a], 1e-9) << "k=" << k;
  }
}

TEST(KMeans, SingleClusterIsMean) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  PointMatrix x = PointMatrix::NullaryExpr(40, 5, [&] { return g(rng); });
  const auto c = kmeans(x, 1, 0);
  EXPECT_LT((c.centroids.row(0) - x.colwise().mean()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(KMeans, SeparatedBlobs) {
  std::mt19937_64 rng(3);
  const PointMatrix x = blobs(rng, 50, {{0, 0}, {10, 10}}, 0.5);
  const auto c = kmeans(x, 2, 4);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(c.assignments[i], c.assignments[(i / 50) * 50]);
  EXPECT_NE(c.assignments[0], c.assignments[50]);
}

TEST(KMeans, BeatsRandomAssignmentsAndIsMonotone) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  PointMatrix x = PointMatrix::NullaryExpr(50, 24, [&] { return g(rng); });
  const auto c = kmeans(x, 4, 9);
  for (std::size_t i = 1; i < c.inertia_history.size(); ++i) EXPECT_LE(c.inertia_history[i], c.inertia_history[i - 1]);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> assign(50);
    for (int i = 0; i < 50; ++i) assign[static_cast<std::size_t>(i)] = i < 4 ? i : pick(rng);
    EXPECT_LE(c.inertia, inertia_of(x, assign, 4) + 1e-9);
  }
}

TEST(KMeans, Deterministic) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  PointMatrix x = PointMatrix::NullaryExpr(300, 6, [&] { return g(rng); });
  const auto a = kmeans(x, 8, 17), b = kmeans(x, 8, 17);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(std::memcmp(a.centroids.data(), b.centroids.data(), sizeof(double) * a.centroids.size()), 0);
}

TEST(KMeans, FewerDistinctPointsThanK) {
  PointMatrix x = PointMatrix::Zero(10, 3);
  x.bottomRows(5).setOnes();
  const auto c = kmeans(x, 6, 0);
  EXPECT_EQ(c.cluster_count(), 2);
  EXPECT_EQ(c.inertia, 0.0);
  EXPECT_EQ(error_code([&] { kmeans(x, 0, 0); }), Errc::invalid_argument);
}

TEST(Guides, IdenticalStrandsCollapse) {
  std::mt19937_64 rng(6);
  const Strand s = random_strand(rng, 32);
  Hairstyle h;
  h.strands.assign(512, s);
  const auto g = extract_guides(h, {8, 512, 0});
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g.cluster_pools[0].size(), 512u);
}

TEST(Guides, SingletonClustersReturnInputs) {
  Hairstyle h;
  for (int i = 0; i < 512; ++i) {
    const UVCoord uv{(i % 32 + 0.5) / 32, 0.05 + 0.9 * (i / 32 + 0.5) / 16};
    const Vec3 root = uv_to_position(uv, h.scalp);
    Strand s = line_strand(16, root, root + Vec3(0.01 * (i % 32), -0.2 - 0.01 * (i / 32), 0.0));
    s.root_uv = uv;
    h.strands.push_back(s);
  }
  const auto g = extract_guides(h, {8, 512, 1});
  ASSERT_EQ(g.size(), 512u);
  std::set<std::size_t> sources(g.source_indices.begin(), g.source_indices.end());
  EXPECT_EQ(sources.size(), 512u);
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_EQ(max_point_error(g.guides[i].points, h.strands[g.source_indices[i]].points), 0.0);
}

TEST(Guides, GuideIsNearestMemberToCentroid) {
  auto spec = StyleFamily::defaults(Family::Wavy);
  spec.strand_count = 10000;
  spec.points = 32;
  spec.seed = 4;
  const Hairstyle h = generate_hairstyle(spec);
  const auto g = extract_guides(h, {8, 512, 2});
  ASSERT_GT(g.size(), 400u);
  std::mt19937_64 rng(8);
  std::size_t total = 0;
  for (std::size_t c = 0; c < g.size(); ++c) total += g.cluster_pools[c].size();
  EXPECT_EQ(total, h.strands.size());
  for (std::size_t c = 0; c < g.size(); ++c) {
    const auto& pool = g.cluster_pools[c];
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(24);
    for (auto i : pool) centroid += strand_descriptor(h.strands[i]);
    centroid /= static_cast<double>(pool.size());
    const double gd = (strand_descriptor(g.guides[c]) - centroid).norm();
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (int probe = 0; probe < 100; ++probe)
      EXPECT_LE(gd, (strand_descriptor(h.strands[pool[pick(rng)]]) - centroid).norm() + 1e-12);
  }
}

TEST(Pools, DegenerateAndExhaustive) {
  std::mt19937_64 rng(9);
  Hairstyle h;
  for (int i = 0; i < 6; ++i) h.strands.push_back(random_strand(rng, 8));
  GuideSet g;
  g.cluster_pools = {{2}, {0, 1, 3, 4, 5}};
  const auto out = sample_cluster_strands(g, h, 10, 3);
  ASSERT_EQ(out.size(), 20u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(out[i].points, h.strands[2].points);
  g.cluster_pools = {{0, 1, 3, 4, 5}};
  const auto perm = sample_cluster_strands(g, h, 5, 4);
  std::multiset<double> seen, expected;
  for (const auto& s : perm) seen.insert(s.points[1].x());
  for (std::size_t i : {0, 1, 3, 4, 5}) expected.insert(h.strands[i].points[1].x());
  EXPECT_EQ(seen, expected);
  g.cluster_pools = {{}};
  EXPECT_EQ(error_code([&] { sample_cluster_strands(g, h, 1, 0); }), Errc::invalid_argument);
}

TEST(Pools, FiveThousandOneHundredTwenty) {
  std::mt19937_64 rng(10);
  Hairstyle h;
  for (int i = 0; i < 20; ++i) h.strands.push_back(random_strand(rng, 8));
  GuideSet g;
  std::uniform_int_distribution<std::size_t> pick(0, 19);
  for (int c = 0; c < 512; ++c) g.cluster_pools.push_back({pick(rng), pick(rng)});
  EXPECT_EQ(sample_cluster_strands(g, h, 10, 7).size(), 5120u);
}

TEST(Guides, ManifestRoundTrip) {
  auto spec = StyleFamily::defaults(Family::Straight);
  spec.strand_count = 300;
  spec.points = 16;
  const auto g = extract_guides(generate_hairstyle(spec), {8, 20, 0});
  const auto entries = parse_guide_manifest(guide_manifest(g));
  ASSERT_EQ(entries.size(), g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(entries[i].region, g.regions[i]);
    EXPECT_EQ(entries[i].cluster_size, g.cluster_pools[i].size());
    EXPECT_EQ(entries[i].source_index, g.source_indices[i]);
  }
  EXPECT_EQ(error_code([] { parse_guide_manifest("0 Nowhere 3 1\n"); }), Errc::format);
}
