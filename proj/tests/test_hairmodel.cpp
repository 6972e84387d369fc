#include "support.hpp"

using namespace hairlang;
using namespace hairlang::testing;

TEST(Resample, StraightSegmentUniform) {
  std::vector<Vec3> raw{Vec3(0, 0, 0), Vec3(0, 0, 1)};
  const auto pts = resample_polyline(raw, 5);
  ASSERT_EQ(pts.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(pts[i].z(), 0.25 * i, 1e-12);
    EXPECT_EQ(pts[i].x(), 0.0);
  }
}

TEST(Resample, IdempotentOnUniformPolyline) {
  std::vector<Vec3> raw;
  for (int i = 0; i < 7; ++i) raw.emplace_back(0.3 * i, 0.1 * i, -0.2 * i);
  const auto pts = resample_polyline(raw, 7);
  EXPECT_LT(max_point_error(pts, raw), 1e-9);
}

TEST(Resample, QuarterCircleMidpoint) {
  std::vector<Vec3> raw;
  const int n = 20000;
  for (int i = 0; i <= n; ++i) {
    const double a = 0.5 * std::numbers::pi * i / n;
    raw.emplace_back(std::cos(a), std::sin(a), 0.0);
  }
  const auto pts = resample_polyline(raw, 3);
  EXPECT_NEAR(pts[1].x(), std::sqrt(0.5), 1e-6);
  EXPECT_NEAR(pts[1].y(), std::sqrt(0.5), 1e-6);
}

TEST(Resample, Errors) {
  std::vector<Vec3> one{Vec3::Zero()};
  EXPECT_EQ(error_code([&] { resample_polyline(one, 4); }), Errc::invalid_argument);
  std::vector<Vec3> same{Vec3::Ones(), Vec3::Ones()};
  EXPECT_EQ(error_code([&] { resample_polyline(same, 4); }), Errc::degenerate);
}

TEST(ScalpUV, PoleAndFrontAxis) {
  ScalpManifold scalp;
  const auto pole = project_root_to_uv(scalp.center + scalp.radius * scalp.up, scalp);
  EXPECT_EQ(pole.u, 0.0);
  EXPECT_EQ(pole.v, 0.0);
  const auto front = project_root_to_uv(scalp.center + scalp.radius * scalp.front, scalp);
  EXPECT_EQ(front.u, 0.0);
  EXPECT_LT(front.v, 1.0);
  EXPECT_GT(front.v, 1.0 - 1e-9);
}

TEST(ScalpUV, RandomPointsInvert) {
  ScalpManifold scalp;
  scalp.center = Vec3(0.01, -0.02, 0.03);
  scalp.radius = 0.1;
  scalp.up = Vec3(0, 0, 1);
  scalp.front = Vec3(1, 0, 0);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  for (int i = 0; i < 1000; ++i) {
    Vec3 d(n(rng), n(rng), std::abs(n(rng)));
    d.normalize();
    const Vec3 p = scalp.center + scalp.radius * d;
    const UVCoord uv = project_root_to_uv(p, scalp);
    EXPECT_LT((uv_to_position(uv, scalp) - p).norm(), 1e-6);
  }
}

TEST(ScalpUV, Errors) {
  ScalpManifold scalp;
  EXPECT_EQ(error_code([&] { project_root_to_uv(scalp.center, scalp); }), Errc::degenerate);
  EXPECT_EQ(error_code([&] { project_root_to_uv(Vec3(1, 0, 0), scalp); }), Errc::invalid_argument);
}

TEST(Regions, InteriorAndEdges) {
  const auto p = RegionPartition::default_partition();
  EXPECT_EQ(assign_region({0.06, 0.7}, p), Region::Front);
  // Shared edge u = 0.125 belongs to the half-open owner on the right.
  EXPECT_EQ(assign_region({0.125, 0.7}, p), Region::LeftTemple);
  EXPECT_EQ(assign_region({0.2, 0.35}, p), Region::LeftTemple);
  EXPECT_EQ(assign_region({0.2, 0.3499}, p), Region::Top);
}

TEST(Regions, ExhaustiveGridScan) {
  const auto p = RegionPartition::default_partition();
  std::array<int, kRegionCount> hits{};
  for (int i = 0; i < 256; ++i)
    for (int j = 0; j < 256; ++j) {
      const UVCoord uv{(i + 0.5) / 256, (j + 0.5) / 256};
      int owners = 0;
      for (auto r : kRegionOrder) owners += p.rect(r).contains(uv);
      ASSERT_EQ(owners, 1);
      ++hits[static_cast<std::size_t>(assign_region(uv, p))];
    }
  for (int h : hits) EXPECT_GT(h, 0);
}

TEST(Regions, PartitionValidation) {
  auto p = RegionPartition::default_partition();
  EXPECT_NO_THROW(validate_partition(p));
  p.rect(Region::Nape).u1 = 0.65;
  EXPECT_EQ(error_code([&] { validate_partition(p); }), Errc::invalid_argument);
  auto q = RegionPartition::default_partition();
  q.rect(Region::Nape).u1 = 0.55;
  EXPECT_EQ(error_code([&] { validate_partition(q); }), Errc::invalid_argument);
}

TEST(Density, SingleRootAtCellCenter) {
  std::vector<UVCoord> roots{{(10 + 0.5) / 256, (20 + 0.5) / 256}};
  const auto m = rasterize_density(roots);
  for (int r = 0; r < 256; ++r)
    for (int c = 0; c < 256; ++c) EXPECT_EQ(m.at(r, c), (r == 20 && c == 10) ? 1.0 : 0.0);
}

TEST(Density, DuplicateRootsNormalize) {
  std::vector<UVCoord> one{{0.3, 0.6}}, two{{0.3, 0.6}, {0.3, 0.6}};
  EXPECT_EQ(rasterize_density(one).values, rasterize_density(two).values);
}

// Tent-kernel oracle over all cells, interior roots only.
TEST(Density, MatchesTentOracleAndMonteCarloMean) {
  const int res = 256;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.5 / res, 1.0 - 0.5 / res);
  std::vector<UVCoord> roots(10000);
  for (auto& r : roots) r = {unit(rng), unit(rng)};
  std::vector<double> raw(static_cast<std::size_t>(res * res), 0.0);
  for (const auto& uv : roots) {
    const int c0 = static_cast<int>(uv.u * res), r0 = static_cast<int>(uv.v * res);
    for (int r = std::max(0, r0 - 1); r <= std::min(res - 1, r0 + 1); ++r)
      for (int c = std::max(0, c0 - 1); c <= std::min(res - 1, c0 + 1); ++c) {
        const double wu = std::max(0.0, 1.0 - std::abs(uv.u * res - (c + 0.5)));
        const double wv = std::max(0.0, 1.0 - std::abs(uv.v * res - (r + 0.5)));
        raw[static_cast<std::size_t>(r * res + c)] += wu * wv;
      }
  }
  const double peak = *std::max_element(raw.begin(), raw.end());
  const auto m = rasterize_density(roots);
  double mean = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    EXPECT_NEAR(m.values[i], raw[i] / peak, 1e-9);
    mean += m.values[i];
  }
  mean /= static_cast<double>(raw.size());
  const double expected = static_cast<double>(roots.size()) / (res * res) / peak;
  EXPECT_NEAR(mean, expected, 0.2 * expected);
}

TEST(Density, RasterRoundTripAndErrors) {
  std::vector<UVCoord> roots{{0.1, 0.2}, {0.7, 0.9}};
  const auto m = rasterize_density(roots);
  const auto back = decode_density_raster(encode_density_raster(m));
  for (std::size_t i = 0; i < m.values.size(); ++i) EXPECT_NEAR(back.values[i], m.values[i], 1e-7);
  EXPECT_EQ(error_code([] { rasterize_density({}); }), Errc::invalid_argument);
  std::vector<char> shortbuf(100);
  EXPECT_EQ(error_code([&] { decode_density_raster(shortbuf); }), Errc::format);
}

TEST(HairFile, RoundTripAndTruncation) {
  std::mt19937_64 rng(3);
  Hairstyle h;
  for (int i = 0; i < 20; ++i) h.strands.push_back(random_strand(rng, 16));
  const auto bytes = encode_hair(h);
  const auto back = decode_hair(bytes);
  ASSERT_EQ(back.strands.size(), h.strands.size());
  for (std::size_t i = 0; i < h.strands.size(); ++i) {
    EXPECT_LT(max_point_error(back.strands[i].points, h.strands[i].points), 1e-6);
    EXPECT_NEAR(back.strands[i].root_uv.u, h.strands[i].root_uv.u, 1e-7);
    EXPECT_NO_THROW(validate_strand(back.strands[i], back.scalp, 16));
  }
  std::vector<char> cut(bytes.begin(), bytes.end() - 5);
  EXPECT_EQ(error_code([&] { decode_hair(cut); }), Errc::format);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(error_code([&] { decode_hair(bad); }), Errc::format);
}

TEST(HairFile, AtomicSaveAndMissingFile) {
  const auto dir = temp_dir("hairfile");
  Hairstyle h;
  h.strands.push_back(line_strand(8, uv_to_position({0.2, 0.5}, h.scalp), Vec3(0, -0.2, 0.1)));
  h.strands[0].root_uv = {0.2, 0.5};
  save_hair(dir / "a.hair", h);
  EXPECT_FALSE(std::filesystem::exists(dir / "a.hair.tmp"));
  EXPECT_EQ(load_hair(dir / "a.hair").strands.size(), 1u);
  EXPECT_EQ(error_code([&] { load_hair(dir / "missing.hair"); }), Errc::io);
}

TEST(Strand, Validation) {
  ScalpManifold scalp;
  Strand s = line_strand(8, uv_to_position({0.2, 0.5}, scalp), Vec3(0, -0.2, 0.1));
  EXPECT_NO_THROW(validate_strand(s, scalp, 8));
  EXPECT_EQ(error_code([&] { validate_strand(s, scalp, 9); }), Errc::invalid_argument);
  s.points[3].x() = std::nan("");
  EXPECT_EQ(error_code([&] { validate_strand(s, scalp, 8); }), Errc::invalid_argument);
  Strand off = line_strand(8, Vec3(0, 0, 0.5), Vec3(0, 0, 0.7));
  EXPECT_EQ(error_code([&] { validate_strand(off, scalp, 8); }), Errc::invalid_argument);
}
