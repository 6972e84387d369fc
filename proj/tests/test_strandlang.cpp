#include "corpus.hpp"
#include "support.hpp"

using namespace hairlang;
using namespace hairlang::testing;

namespace {

const Vocabulary& test_vocab() { return small_vocab(); }

std::optional<ParseErrc> parse_code(std::span<const std::uint32_t> ids, std::optional<Mode> mode = std::nullopt) {
  try {
    parse(ids, test_vocab(), mode);
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), Errc::parse);
    return e.parse_code();
  }
  return std::nullopt;
}

using Fixture = SequenceFixture;
Fixture make_fixture() { return make_sequence_fixture(); }

}  // namespace

TEST(Vocab, Sizes) {
  EXPECT_EQ(Vocabulary(VocabConfig{}).size(), 22u + 256 + 1024 + 4 * 8192 + 4 * 2048 + 512);
  EXPECT_EQ(Vocabulary(VocabConfig{}).size(), 42774u);
  EXPECT_EQ(test_vocab().size(), 1702u);
  EXPECT_EQ(Vocabulary::kSpecials, 22u);
}

TEST(Vocab, CategoriesAndInverse) {
  const auto& v = test_vocab();
  EXPECT_EQ(v.category(Vocabulary::kBos), Category::Bos);
  EXPECT_EQ(v.category(v.uv(0)), Category::UV);
  EXPECT_EQ(v.category(v.uv(0) - 1), Category::Separator);
  EXPECT_EQ(v.category(v.size()), Category::Invalid);
  EXPECT_EQ(v.category(kConditionSlotId), Category::ConditionSlot);
  for (std::uint32_t id = 0; id < v.size(); ++id) {
    const auto t = v.info(id);
    switch (t.category) {
      case Category::RegionStart: ASSERT_EQ(v.region_start(Region(t.region)), id); break;
      case Category::RegionEnd: ASSERT_EQ(v.region_end(Region(t.region)), id); break;
      case Category::Separator: ASSERT_EQ(v.separator(t.mode), id); break;
      case Category::UV: ASSERT_EQ(v.uv(t.local), id); break;
      case Category::Anchor: ASSERT_EQ(v.anchor(t.local), id); break;
      case Category::Coarse: ASSERT_EQ(v.coarse(t.head, static_cast<std::uint32_t>(t.local)), id); break;
      case Category::Style: ASSERT_EQ(v.style(t.head, static_cast<std::uint32_t>(t.local)), id); break;
      case Category::Density: ASSERT_EQ(v.density(static_cast<std::uint32_t>(t.local)), id); break;
      case Category::Invalid:
      case Category::ConditionSlot: FAIL() << id;
      default: ASSERT_LT(id, Vocabulary::kSpecials);
    }
  }
  EXPECT_EQ(error_code([&] { v.coarse(0, 64); }), Errc::invalid_argument);
  EXPECT_NE(Vocabulary({64, 32, 16}).hash(), Vocabulary({64, 32, 8}).hash());
}

TEST(Serialize, EmptySkeleton) {
  const auto& v = test_vocab();
  std::vector<std::uint32_t> density(kDensityTokens, 0);
  const auto seq = serialize({}, density, Mode::Layout, v);
  std::vector<std::uint32_t> expected{Vocabulary::kBos, kConditionSlotId, kConditionSlotId, Vocabulary::kDen};
  for (int i = 0; i < kDensityTokens; ++i) expected.push_back(v.density(0));
  for (Region r : kRegionOrder) {
    expected.push_back(v.region_start(r));
    expected.push_back(kConditionSlotId);
    expected.push_back(v.region_end(r));
  }
  expected.push_back(Vocabulary::kEos);
  EXPECT_EQ(seq.ids, expected);
  EXPECT_EQ(seq.condition_slots.size(), 2u + kRegionCount);
  EXPECT_EQ(parse(seq.ids, v, Mode::Layout).strand_count(), 0u);
}

TEST(Serialize, SingleFrontStrandLayout) {
  const auto& v = test_vocab();
  StrandTokens s;
  s.uv = quantize_uv({0.06, 0.7});
  s.region = Region::Front;
  s.alpha = anchor_of(s.uv);
  std::vector<std::uint32_t> density(kDensityTokens, 3);
  const auto seq = serialize(std::span(&s, 1), density, Mode::Layout, v);
  const std::size_t start = kFirstRegion;
  ASSERT_EQ(seq.ids[start], v.region_start(Region::Front));
  const std::vector<std::uint32_t> body(seq.ids.begin() + start + 2, seq.ids.begin() + start + 6);
  EXPECT_EQ(body, (std::vector<std::uint32_t>{v.separator(Mode::Layout), v.anchor(s.alpha), v.uv(s.uv.u), v.uv(s.uv.v)}));
  EXPECT_EQ(seq.ids[start + 6], v.region_end(Region::Front));
}

TEST(Serialize, CoarseCountingOracle) {
  std::mt19937_64 rng(1);
  const auto strands = random_tokens(rng, test_vocab(), 512);
  const auto seq = serialize(strands, random_density(rng, test_vocab()), Mode::Coarse, test_vocab());
  const std::size_t C = kGlobalSlots;
  std::size_t regions = 0;
  for (int m = 0; m < kRegionCount; ++m) regions += 2 + kRegionSlots;
  EXPECT_EQ(seq.ids.size(), 1 + C + 1 + 1024 + regions + 512 * 7 + 1);
}

TEST(Serialize, RejectsOutOfRangeTokens) {
  std::mt19937_64 rng(2);
  auto strands = random_tokens(rng, test_vocab(), 5);
  strands[3].coarse[2] = 64;
  const auto density = random_density(rng, test_vocab());
  try {
    serialize(strands, density, Mode::Coarse, test_vocab());
    FAIL();
  } catch (const SerializeError& e) {
    EXPECT_EQ(e.strand(), 3u);
  }
  EXPECT_EQ(error_code([&] { serialize(strands, std::span(density).first(5), Mode::Layout, test_vocab()); }),
            Errc::invalid_argument);
}

TEST(Parse, RoundTripRandomHairstyles) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> count(0, 120);
  for (int i = 0; i < 100; ++i) {
    const auto strands = random_tokens(rng, test_vocab(), count(rng));
    const auto density = random_density(rng, test_vocab());
    for (Mode m : {Mode::Layout, Mode::Coarse, Mode::Style}) {
      const auto seq = serialize(strands, density, m, test_vocab());
      const auto parsed = parse(seq.ids, test_vocab(), m);
      ASSERT_TRUE(parsed.same_structure(canonical_structure(strands, density, m)));
      ASSERT_EQ(parsed.strand_count(), strands.size());
      ASSERT_EQ(serialize_structure(parsed, test_vocab()).ids, seq.ids);
    }
  }
}

TEST(Parse, MutationCorpus) {
  const Fixture f = make_fixture();
  for (auto r : kRegionOrder) ASSERT_FALSE(parse(f.coarse.ids, test_vocab()).regions[static_cast<std::size_t>(r)].empty());
  const auto corpus = mutation_corpus(f);
  ASSERT_GE(corpus.size(), 20u);
  for (const auto& c : corpus) {
    const auto got = parse_code(c.ids, c.mode);
    ASSERT_TRUE(got.has_value()) << c.name;
    EXPECT_EQ(*got, c.expected) << c.name << ": " << parse_errc_message(*got);
  }
}

TEST(Parse, ErrorMessagesNameTheViolation) {
  const Fixture f = make_fixture();
  auto ids = f.coarse.ids;
  std::swap(ids[kFirstRegion], ids[find_id(ids, test_vocab().region_start(Region::Crown))]);
  try {
    parse(ids, test_vocab());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("region order violation"), std::string::npos);
    EXPECT_EQ(e.position(), kFirstRegion);
  }
  auto h = f.coarse.ids;
  h[kFirstRegion + 2 + 4] = test_vocab().coarse(2, 0);
  try {
    parse(h, test_vocab());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("head-order violation"), std::string::npos);
  }
}

// Random edits must either be rejected with a parse error or re-serialize
// to exactly the mutated ids.
TEST(Parse, FuzzNeverCrashes) {
  const Fixture f = make_fixture();
  const auto& v = test_vocab();
  std::mt19937_64 rng(7);
  std::size_t accepted = 0;
  for (int i = 0; i < 100000; ++i) {
    const TokenSequence& base = i % 3 == 0 ? f.layout : i % 3 == 1 ? f.coarse : f.style;
    const auto ids = mutate(base.ids, 1 + i % 3, rng, v);
    try {
      const auto parsed = parse(ids, v);
      ++accepted;
      ASSERT_EQ(serialize_structure(parsed, v).ids, ids);
    } catch (const ParseError&) {
    } catch (const std::exception& e) {
      FAIL() << "unexpected exception: " << e.what();
    }
  }
  EXPECT_GT(accepted, 0u);
}

TEST(LossMask, CountingOracle) {
  std::mt19937_64 rng(8);
  const auto& v = test_vocab();
  for (int trial = 0; trial < 20; ++trial) {
    const auto strands = random_tokens(rng, v, 5 * trial);
    const auto density = random_density(rng, v);
    for (Mode m : {Mode::Layout, Mode::Coarse, Mode::Style}) {
      const auto seq = serialize(strands, density, m, v);
      const auto mask = build_loss_mask(seq, v);
      std::size_t reinjected = 0, never = 0;
      for (std::size_t t = 0; t < seq.ids.size(); ++t) {
        if (t == 0 || seq.ids[t] == kConditionSlotId) {
          ++never;
          EXPECT_FALSE(mask.contributes[t]);
          continue;
        }
        const bool after_sep = (t >= 1 && v.category(seq.ids[t - 1]) == Category::Separator) ||
                               (t >= 2 && v.category(seq.ids[t - 2]) == Category::Separator);
        if (m != Mode::Layout && after_sep && v.category(seq.ids[t]) == Category::UV) {
          ++reinjected;
          EXPECT_FALSE(mask.contributes[t]);
        } else {
          EXPECT_TRUE(mask.contributes[t]);
        }
      }
      const std::size_t excluded = seq.ids.size() - mask.n_valid() - never;
      EXPECT_EQ(excluded, m == Mode::Layout ? 0u : 2 * strands.size());
      EXPECT_EQ(reinjected, m == Mode::Layout ? 0u : 2 * strands.size());
    }
  }
}

TEST(LossMask, CategoryWeights) {
  const Fixture f = make_fixture();
  LossWeights w;
  w[Category::Anchor] = 2.5;
  const auto mask = build_loss_mask(f.layout, test_vocab(), w);
  for (std::size_t t = 0; t < f.layout.ids.size(); ++t)
    if (mask.contributes[t]) {
      EXPECT_EQ(mask.weight[t], test_vocab().category(f.layout.ids[t]) == Category::Anchor ? 2.5 : 1.0);
    }
}

TEST(TokenFile, RoundTripTruncationAndHash) {
  const Fixture f = make_fixture();
  const auto bytes = encode_token_file(f.style);
  const auto back = decode_token_file(bytes);
  EXPECT_EQ(back.ids, f.style.ids);
  EXPECT_EQ(back.mode, Mode::Style);
  std::vector<char> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 2));
  try {
    decode_token_file(cut);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unexpected end of sequence"), std::string::npos);
  }
  const auto dir = temp_dir("tokenfile");
  save_token_file(dir / "a.hts", f.layout, test_vocab());
  EXPECT_EQ(load_token_file(dir / "a.hts", test_vocab()).ids, f.layout.ids);
  EXPECT_EQ(error_code([&] { load_token_file(dir / "a.hts", Vocabulary({64, 32, 8})); }), Errc::hash_mismatch);
}

TEST(TokenizedFile, RoundTripAndHash) {
  const Fixture f = make_fixture();
  TokenizedHairstyle t{f.strands, f.density, {}};
  for (const auto& s : f.strands) t.pools.push_back({s, s});
  const auto back = decode_tokenized(encode_tokenized(t, test_vocab()), test_vocab());
  EXPECT_EQ(back.strands, t.strands);
  EXPECT_EQ(back.density, t.density);
  EXPECT_EQ(back.pools, t.pools);
  EXPECT_EQ(error_code([&] { decode_tokenized(encode_tokenized(t, test_vocab()), Vocabulary({64, 16, 16})); }),
            Errc::hash_mismatch);
  t.strands[0].alpha = (t.strands[0].alpha + 1) % kAnchorCount;
  EXPECT_EQ(error_code([&] { encode_tokenized(t, test_vocab()); }), Errc::invalid_argument);
}
