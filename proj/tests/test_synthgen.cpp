#include "support.hpp"

#include <map>

using namespace hairlang;
using namespace hairlang::testing;

namespace {

double mean_residual(const Hairstyle& h, int k_geo = 4) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& s : h.strands) {
    const auto d = decompose(s, k_geo);
    for (const auto& r : d.residual.residuals) total += r.norm();
    n += d.residual.residuals.size();
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST(Synth, StraightWithoutDroopHasNoResidual) {
  auto spec = StyleFamily::defaults(Family::Straight);
  spec.droop = 0.0;
  spec.strand_count = 200;
  spec.points = 32;
  const Hairstyle h = generate_hairstyle(spec);
  double worst = 0.0;
  for (const auto& s : h.strands)
    for (const auto& r : decompose(s, 4).residual.residuals) worst = std::max(worst, r.cwiseAbs().maxCoeff());
  EXPECT_LT(worst, 1e-3);
}

TEST(Synth, CurlyResidualGrowsWithRadius) {
  double prev = 0.0;
  for (double rho : {0.002, 0.005, 0.01}) {
    auto spec = StyleFamily::defaults(Family::Curly);
    spec.helix_radius = rho;
    spec.strand_count = 200;
    spec.points = 64;
    spec.seed = 5;
    const double m = mean_residual(generate_hairstyle(spec));
    EXPECT_GT(m, prev) << "rho=" << rho;
    prev = m;
  }
}

TEST(Synth, DeterministicPerSeed) {
  auto spec = StyleFamily::defaults(Family::Wavy);
  spec.strand_count = 300;
  spec.seed = 11;
  EXPECT_EQ(encode_hair(generate_hairstyle(spec)), encode_hair(generate_hairstyle(spec)));
  auto other = spec;
  other.seed = 12;
  EXPECT_NE(encode_hair(generate_hairstyle(spec)), encode_hair(generate_hairstyle(other)));
}

TEST(Synth, StrandsAreValid) {
  for (Family f : {Family::Straight, Family::Wavy, Family::Curly}) {
    auto spec = StyleFamily::defaults(f);
    spec.strand_count = 300;
    spec.points = 48;
    const Hairstyle h = generate_hairstyle(spec);
    ASSERT_EQ(h.strands.size(), 300u);
    for (const auto& s : h.strands) {
      EXPECT_NO_THROW(validate_strand(s, h.scalp, 48));
      EXPECT_LT((s.root() - uv_to_position(s.root_uv, h.scalp)).norm(), 1e-12);
    }
  }
}

TEST(Synth, RegionProfileIsRespected) {
  auto spec = StyleFamily::defaults(Family::Straight);
  spec.region_density.fill(0.0);
  spec.region_density[static_cast<std::size_t>(Region::Crown)] = 1.0;
  spec.strand_count = 500;
  const auto part = RegionPartition::default_partition();
  for (const auto& s : generate_hairstyle(spec).strands) EXPECT_EQ(assign_region(s.root_uv, part), Region::Crown);
}

TEST(Synth, FamiliesAreSeparable) {
  std::vector<Strand> all;
  std::vector<int> label;
  for (Family f : {Family::Straight, Family::Wavy, Family::Curly}) {
    auto spec = StyleFamily::defaults(f);
    spec.strand_count = 300;
    spec.points = 64;
    spec.seed = 21 + static_cast<int>(f);
    for (auto& s : generate_hairstyle(spec).strands) {
      all.push_back(std::move(s));
      label.push_back(static_cast<int>(f));
    }
  }
  const auto c = kmeans(descriptor_matrix(all, kDefaultFeatureCoefficients), 3, 1);
  std::map<int, std::array<int, 3>> votes;
  for (std::size_t i = 0; i < all.size(); ++i) ++votes[c.assignments[i]][static_cast<std::size_t>(label[i])];
  int majority = 0;
  for (const auto& [cluster, v] : votes) majority += *std::max_element(v.begin(), v.end());
  EXPECT_GE(majority / static_cast<double>(all.size()), 0.9);
}

TEST(Synth, Validation) {
  auto bad = StyleFamily::defaults(Family::Curly);
  bad.helix_radius = 0.0;
  EXPECT_EQ(error_code([&] { generate_hairstyle(bad); }), Errc::invalid_argument);
  bad = StyleFamily::defaults(Family::Straight);
  bad.strand_count = 0;
  EXPECT_EQ(error_code([&] { generate_hairstyle(bad); }), Errc::invalid_argument);
  bad = StyleFamily::defaults(Family::Wavy);
  bad.length_max = 0.01;
  EXPECT_EQ(error_code([&] { generate_hairstyle(bad); }), Errc::invalid_argument);
  bad = StyleFamily::defaults(Family::Straight);
  bad.region_density.fill(0.0);
  EXPECT_EQ(error_code([&] { generate_hairstyle(bad); }), Errc::invalid_argument);
}

TEST(Synth, ManifestNamesFamilyAndSeed) {
  auto spec = StyleFamily::defaults(Family::Wavy);
  spec.seed = 77;
  const auto m = family_manifest(spec);
  EXPECT_NE(m.find("family = wavy"), std::string::npos);
  EXPECT_NE(m.find("seed = 77"), std::string::npos);
  EXPECT_EQ(family_from_name("curly"), Family::Curly);
  EXPECT_FALSE(family_from_name("bun"));
}
