#pragma once

#include "hairlang/quantize.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>

namespace hairlang {

enum class Mode : std::uint8_t { Layout = 0, Coarse = 1, Style = 2 };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Layout: return "layout";
    case Mode::Coarse: return "coarse";
    case Mode::Style: return "style";
  }
  return "?";
}

inline std::optional<Mode> mode_from_name(std::string_view s) {
  for (Mode m : {Mode::Layout, Mode::Coarse, Mode::Style})
    if (s == mode_name(m)) return m;
  return std::nullopt;
}

enum class Category : std::uint8_t {
  Bos,
  Eos,
  DensityMarker,
  RegionStart,
  RegionEnd,
  Separator,
  UV,
  Anchor,
  Coarse,
  Style,
  Density,
  ConditionSlot,
  Invalid,
};

inline constexpr int kCategoryCount = 13;

inline const char* category_name(Category c) {
  static constexpr std::array<const char*, kCategoryCount> names = {
      "bos", "eos", "den", "region-start", "region-end", "separator", "uv",
      "anchor", "coarse", "style", "density", "condition-slot", "invalid"};
  return names[static_cast<std::size_t>(c)];
}

// Condition slots occupy sequence positions but carry no vocabulary id.
inline constexpr std::uint32_t kConditionSlotId = 0xFFFFFFFFu;

struct VocabConfig {
  int coarse_entries = 8192;
  int style_entries = 2048;
  int density_entries = 512;

  std::uint64_t hash() const {
    const std::string s = "hairlang-vocab-v1:" + std::to_string(coarse_entries) + ':' +
                          std::to_string(style_entries) + ':' + std::to_string(density_entries);
    return fnv1a(s);
  }
};

struct TokenInfo {
  Category category = Category::Invalid;
  int head = -1;     // coarse/style head, 0..3
  int local = -1;    // index inside the category (or head sub-range)
  int region = -1;   // region markers
  Mode mode = Mode::Layout;  // separators
};

// Contiguous layout: specials (BOS, EOS, <den>, 8 x {<R_m>, <R_m_end>},
// s1, s2, s3), UV values, anchors, coarse heads, style heads, density codes.
class Vocabulary {
 public:
  static constexpr std::uint32_t kBos = 0;
  static constexpr std::uint32_t kEos = 1;
  static constexpr std::uint32_t kDen = 2;
  static constexpr std::uint32_t kRegionBase = 3;
  static constexpr std::uint32_t kSeparatorBase = kRegionBase + 2 * kRegionCount;
  static constexpr std::uint32_t kSpecials = kSeparatorBase + 3;

  explicit Vocabulary(const VocabConfig& config) : config_(config) {
    if (config.coarse_entries < 2 || config.style_entries < 2 || config.density_entries < 2)
      throw Error(Errc::invalid_argument, "vocabulary codebook sizes must be >= 2");
    uv_ = kSpecials;
    anchor_ = uv_ + kUVGrid;
    coarse_ = anchor_ + kAnchorCount;
    style_ = coarse_ + kHeads * static_cast<std::uint32_t>(config.coarse_entries);
    density_ = style_ + kHeads * static_cast<std::uint32_t>(config.style_entries);
    size_ = density_ + static_cast<std::uint32_t>(config.density_entries);
  }

  const VocabConfig& config() const { return config_; }
  std::uint32_t size() const { return size_; }
  std::uint64_t hash() const { return config_.hash(); }

  std::uint32_t region_start(Region r) const { return kRegionBase + 2 * static_cast<std::uint32_t>(r); }
  std::uint32_t region_end(Region r) const { return region_start(r) + 1; }
  std::uint32_t separator(Mode m) const { return kSeparatorBase + static_cast<std::uint32_t>(m); }
  std::uint32_t uv(int value) const { return uv_ + checked(value, kUVGrid, "uv"); }
  std::uint32_t anchor(int value) const { return anchor_ + checked(value, kAnchorCount, "anchor"); }
  std::uint32_t coarse(int head, std::uint32_t code) const {
    return coarse_ + static_cast<std::uint32_t>(head) * static_cast<std::uint32_t>(config_.coarse_entries) +
           checked(static_cast<int>(code), config_.coarse_entries, "coarse code");
  }
  std::uint32_t style(int head, std::uint32_t code) const {
    return style_ + static_cast<std::uint32_t>(head) * static_cast<std::uint32_t>(config_.style_entries) +
           checked(static_cast<int>(code), config_.style_entries, "style code");
  }
  std::uint32_t density(std::uint32_t code) const {
    return density_ + checked(static_cast<int>(code), config_.density_entries, "density code");
  }

  // Half-open id range of a category (or of one head's sub-range).
  std::pair<std::uint32_t, std::uint32_t> range(Category c, int head = -1) const {
    switch (c) {
      case Category::Bos: return {kBos, kBos + 1};
      case Category::Eos: return {kEos, kEos + 1};
      case Category::DensityMarker: return {kDen, kDen + 1};
      case Category::Separator: return {kSeparatorBase, kSeparatorBase + 3};
      case Category::UV: return {uv_, anchor_};
      case Category::Anchor: return {anchor_, coarse_};
      case Category::Coarse:
        if (head < 0) return {coarse_, style_};
        return {coarse(head, 0), coarse(head, 0) + static_cast<std::uint32_t>(config_.coarse_entries)};
      case Category::Style:
        if (head < 0) return {style_, density_};
        return {style(head, 0), style(head, 0) + static_cast<std::uint32_t>(config_.style_entries)};
      case Category::Density: return {density_, size_};
      default: break;
    }
    throw Error(Errc::invalid_argument, std::string("no contiguous range for category ") + category_name(c));
  }

  TokenInfo info(std::uint32_t id) const {
    TokenInfo t;
    if (id == kConditionSlotId) {
      t.category = Category::ConditionSlot;
    } else if (id == kBos) {
      t.category = Category::Bos;
    } else if (id == kEos) {
      t.category = Category::Eos;
    } else if (id == kDen) {
      t.category = Category::DensityMarker;
    } else if (id < kSeparatorBase) {
      const std::uint32_t k = id - kRegionBase;
      t.category = k % 2 == 0 ? Category::RegionStart : Category::RegionEnd;
      t.region = static_cast<int>(k / 2);
    } else if (id < kSpecials) {
      t.category = Category::Separator;
      t.mode = static_cast<Mode>(id - kSeparatorBase);
    } else if (id < anchor_) {
      t.category = Category::UV;
      t.local = static_cast<int>(id - uv_);
    } else if (id < coarse_) {
      t.category = Category::Anchor;
      t.local = static_cast<int>(id - anchor_);
    } else if (id < style_) {
      t.category = Category::Coarse;
      t.head = static_cast<int>((id - coarse_) / static_cast<std::uint32_t>(config_.coarse_entries));
      t.local = static_cast<int>((id - coarse_) % static_cast<std::uint32_t>(config_.coarse_entries));
    } else if (id < density_) {
      t.category = Category::Style;
      t.head = static_cast<int>((id - style_) / static_cast<std::uint32_t>(config_.style_entries));
      t.local = static_cast<int>((id - style_) % static_cast<std::uint32_t>(config_.style_entries));
    } else if (id < size_) {
      t.category = Category::Density;
      t.local = static_cast<int>(id - density_);
    }
    return t;
  }

  Category category(std::uint32_t id) const { return info(id).category; }

  // "category offset size" lines.
  std::string manifest() const {
    std::ostringstream os;
    os << "specials 0 " << kSpecials << '\n'
       << "uv " << uv_ << ' ' << kUVGrid << '\n'
       << "anchor " << anchor_ << ' ' << kAnchorCount << '\n';
    for (int h = 0; h < kHeads; ++h) os << "coarse-head" << h + 1 << ' ' << coarse(h, 0) << ' ' << config_.coarse_entries << '\n';
    for (int h = 0; h < kHeads; ++h) os << "style-head" << h + 1 << ' ' << style(h, 0) << ' ' << config_.style_entries << '\n';
    os << "density " << density_ << ' ' << config_.density_entries << '\n' << "total " << size_ << '\n';
    return os.str();
  }

 private:
  static std::uint32_t checked(int value, int limit, const char* what) {
    if (value < 0 || value >= limit)
      throw Error(Errc::invalid_argument, std::string(what) + " " + std::to_string(value) + " out of range");
    return static_cast<std::uint32_t>(value);
  }

  VocabConfig config_;
  std::uint32_t uv_ = 0, anchor_ = 0, coarse_ = 0, style_ = 0, density_ = 0, size_ = 0;
};

inline Vocabulary build_vocabulary(const VocabConfig& config) { return Vocabulary(config); }

inline int anchor_of(const UVTokens& t) {
  constexpr int per = kUVGrid / kAnchorGrid;
  return (t.v / per) * kAnchorGrid + t.u / per;
}

// ---------------------------------------------------------------------------
// Sequences

enum class SlotKind : std::uint8_t { Image, GlobalText, RegionText };

struct ConditionSlot {
  std::size_t position = 0;
  SlotKind kind = SlotKind::Image;
  int region = -1;
};

struct TokenSequence {
  Mode mode = Mode::Layout;
  std::vector<std::uint32_t> ids;
  std::vector<ConditionSlot> condition_slots;
};

// Condition slots: image + global text after BOS, one region-text slot
// after each region start marker.
inline constexpr int kGlobalSlots = 2;
inline constexpr int kRegionSlots = 1;

struct Unit {
  int alpha = 0;        // layout only
  int u = 0;
  int v = 0;
  CodeTokens codes{};   // coarse or style codes, by mode
  friend bool operator==(const Unit&, const Unit&) = default;
};

struct ParsedSequence {
  Mode mode = Mode::Layout;
  std::vector<std::uint32_t> density;  // local density codes
  std::array<std::vector<Unit>, kRegionCount> regions;
  std::vector<ConditionSlot> condition_slots;

  std::size_t strand_count() const {
    std::size_t n = 0;
    for (const auto& r : regions) n += r.size();
    return n;
  }
  bool same_structure(const ParsedSequence& o) const {
    return mode == o.mode && density == o.density && regions == o.regions;
  }
};

inline bool unit_order(const Unit& a, const Unit& b) {
  return std::tie(a.v, a.u, a.alpha) < std::tie(b.v, b.u, b.alpha);
}

inline Unit make_unit(const StrandTokens& s, Mode mode) {
  Unit u;
  u.u = s.uv.u;
  u.v = s.uv.v;
  if (mode == Mode::Layout) u.alpha = s.alpha;
  if (mode == Mode::Coarse) u.codes = s.coarse;
  if (mode == Mode::Style) u.codes = s.style;
  return u;
}

// The canonical structure serialize() writes: units grouped per region and
// stably sorted by (v, u, alpha).
inline ParsedSequence canonical_structure(std::span<const StrandTokens> strands,
                                          std::span<const std::uint32_t> density, Mode mode) {
  ParsedSequence p;
  p.mode = mode;
  p.density.assign(density.begin(), density.end());
  std::array<std::vector<std::pair<Unit, int>>, kRegionCount> keyed;
  for (const auto& s : strands) {
    const auto r = static_cast<std::size_t>(s.region);
    if (r >= kRegionCount) throw Error(Errc::invalid_argument, "invalid region id");
    // Sort on layout key (v, u, alpha) regardless of mode.
    Unit key = make_unit(s, mode);
    keyed[r].emplace_back(key, s.alpha);
  }
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    std::stable_sort(keyed[r].begin(), keyed[r].end(), [](const auto& a, const auto& b) {
      return std::tie(a.first.v, a.first.u, a.second) < std::tie(b.first.v, b.first.u, b.second);
    });
    for (auto& [u, alpha] : keyed[r]) p.regions[r].push_back(u);
  }
  return p;
}

class SerializeError : public Error {
 public:
  SerializeError(std::size_t strand, const std::string& what)
      : Error(Errc::invalid_argument, "strand " + std::to_string(strand) + ": " + what), strand_(strand) {}
  std::size_t strand() const { return strand_; }

 private:
  std::size_t strand_;
};

inline TokenSequence serialize_structure(const ParsedSequence& p, const Vocabulary& vocab) {
  TokenSequence seq;
  seq.mode = p.mode;
  auto& ids = seq.ids;
  auto slot = [&](SlotKind kind, int region) {
    seq.condition_slots.push_back({ids.size(), kind, region});
    ids.push_back(kConditionSlotId);
  };
  ids.push_back(Vocabulary::kBos);
  slot(SlotKind::Image, -1);
  slot(SlotKind::GlobalText, -1);
  ids.push_back(Vocabulary::kDen);
  if (p.density.size() != static_cast<std::size_t>(kDensityTokens))
    throw Error(Errc::invalid_argument, "density must have exactly 1024 tokens");
  for (auto d : p.density) ids.push_back(vocab.density(d));
  for (Region r : kRegionOrder) {
    ids.push_back(vocab.region_start(r));
    slot(SlotKind::RegionText, static_cast<int>(r));
    for (const auto& u : p.regions[static_cast<std::size_t>(r)]) {
      ids.push_back(vocab.separator(p.mode));
      if (p.mode == Mode::Layout) ids.push_back(vocab.anchor(u.alpha));
      ids.push_back(vocab.uv(u.u));
      ids.push_back(vocab.uv(u.v));
      if (p.mode != Mode::Layout)
        for (int h = 0; h < kHeads; ++h)
          ids.push_back(p.mode == Mode::Coarse ? vocab.coarse(h, u.codes[static_cast<std::size_t>(h)])
                                               : vocab.style(h, u.codes[static_cast<std::size_t>(h)]));
    }
    ids.push_back(vocab.region_end(r));
  }
  ids.push_back(Vocabulary::kEos);
  return seq;
}

inline TokenSequence serialize(std::span<const StrandTokens> strands, std::span<const std::uint32_t> density,
                               Mode mode, const Vocabulary& vocab) {
  if (density.size() != static_cast<std::size_t>(kDensityTokens))
    throw Error(Errc::invalid_argument, "density must have exactly 1024 tokens");
  for (std::size_t i = 0; i < strands.size(); ++i) {
    const auto& s = strands[i];
    try {
      if (static_cast<int>(s.region) >= kRegionCount) throw Error(Errc::invalid_argument, "invalid region id");
      vocab.anchor(s.alpha);
      vocab.uv(s.uv.u);
      vocab.uv(s.uv.v);
      for (int h = 0; h < kHeads; ++h) {
        if (mode == Mode::Coarse) vocab.coarse(h, s.coarse[static_cast<std::size_t>(h)]);
        if (mode == Mode::Style) vocab.style(h, s.style[static_cast<std::size_t>(h)]);
      }
    } catch (const Error& e) {
      throw SerializeError(i, e.what());
    }
  }
  return serialize_structure(canonical_structure(strands, density, mode), vocab);
}

// ---------------------------------------------------------------------------
// Parsing

enum class ParseErrc {
  unexpected_end,
  missing_marker,
  region_order,
  density_length,
  category_violation,
  head_order,
  mode_mixing,
  trailing_garbage,
};

inline const char* parse_errc_message(ParseErrc c) {
  switch (c) {
    case ParseErrc::unexpected_end: return "unexpected end of sequence";
    case ParseErrc::missing_marker: return "missing or misplaced marker";
    case ParseErrc::region_order: return "region order violation";
    case ParseErrc::density_length: return "wrong density length";
    case ParseErrc::category_violation: return "category violation";
    case ParseErrc::head_order: return "head-order violation";
    case ParseErrc::mode_mixing: return "mode mixing";
    case ParseErrc::trailing_garbage: return "trailing garbage";
  }
  return "parse error";
}

class ParseError : public Error {
 public:
  ParseError(ParseErrc code, std::size_t position, const std::string& detail = {})
      : Error(Errc::parse, std::string(parse_errc_message(code)) + " at position " + std::to_string(position) +
                               (detail.empty() ? "" : " (" + detail + ")")),
        parse_code_(code),
        position_(position) {}
  ParseErrc parse_code() const { return parse_code_; }
  std::size_t position() const { return position_; }

 private:
  ParseErrc parse_code_;
  std::size_t position_;
};

namespace detail {

class SequenceParser {
 public:
  SequenceParser(std::span<const std::uint32_t> ids, const Vocabulary& vocab, std::optional<Mode> expected)
      : ids_(ids), vocab_(vocab), mode_(expected) {}

  ParsedSequence run() {
    expect_exact(Vocabulary::kBos, "BOS");
    for (int i = 0; i < kGlobalSlots; ++i) expect_slot(i == 0 ? SlotKind::Image : SlotKind::GlobalText, -1);
    expect_exact(Vocabulary::kDen, "<den>");
    while (pos_ < ids_.size() && vocab_.category(ids_[pos_]) == Category::Density) {
      out_.density.push_back(static_cast<std::uint32_t>(vocab_.info(ids_[pos_]).local));
      ++pos_;
    }
    if (pos_ >= ids_.size()) throw ParseError(ParseErrc::unexpected_end, pos_);
    if (out_.density.size() != static_cast<std::size_t>(kDensityTokens))
      throw ParseError(ParseErrc::density_length, pos_, std::to_string(out_.density.size()) + " density tokens");

    for (Region r : kRegionOrder) parse_region(r);

    const auto eos_at = pos_;
    const auto t = next();
    if (t.category == Category::RegionStart || t.category == Category::RegionEnd)
      throw ParseError(ParseErrc::region_order, eos_at, "region marker after the last region");
    if (t.category != Category::Eos) throw ParseError(ParseErrc::missing_marker, eos_at, "expected EOS");
    if (pos_ != ids_.size()) throw ParseError(ParseErrc::trailing_garbage, pos_);
    out_.mode = mode_.value_or(Mode::Layout);
    return std::move(out_);
  }

 private:
  TokenInfo next() {
    if (pos_ >= ids_.size()) throw ParseError(ParseErrc::unexpected_end, pos_);
    return vocab_.info(ids_[pos_++]);
  }

  void expect_exact(std::uint32_t id, const char* what) {
    const auto at = pos_;
    if (pos_ >= ids_.size()) throw ParseError(ParseErrc::unexpected_end, pos_);
    if (ids_[pos_++] != id) throw ParseError(ParseErrc::missing_marker, at, std::string("expected ") + what);
  }

  void expect_slot(SlotKind kind, int region) {
    const auto at = pos_;
    if (next().category != Category::ConditionSlot)
      throw ParseError(ParseErrc::missing_marker, at, "expected condition slot");
    out_.condition_slots.push_back({at, kind, region});
  }

  void parse_region(Region r) {
    const auto at = pos_;
    const auto start = next();
    if (start.category == Category::RegionStart) {
      if (start.region != static_cast<int>(r))
        throw ParseError(ParseErrc::region_order, at,
                         std::string("expected <") + region_name(r) + ">, found <" +
                             region_name(static_cast<Region>(start.region)) + ">");
    } else if (start.category == Category::RegionEnd) {
      throw ParseError(ParseErrc::region_order, at, "region end before region start");
    } else {
      throw ParseError(ParseErrc::missing_marker, at, std::string("expected <") + region_name(r) + ">");
    }
    expect_slot(SlotKind::RegionText, static_cast<int>(r));

    auto& units = out_.regions[static_cast<std::size_t>(r)];
    for (;;) {
      const auto unit_at = pos_;
      const auto t = next();
      if (t.category == Category::RegionEnd) {
        if (t.region != static_cast<int>(r))
          throw ParseError(ParseErrc::region_order, unit_at, "mismatched region end marker");
        return;
      }
      if (t.category == Category::RegionStart)
        throw ParseError(ParseErrc::missing_marker, unit_at,
                         std::string("missing <") + region_name(r) + "_end>");
      if (t.category != Category::Separator)
        throw ParseError(t.category == Category::Eos ? ParseErrc::missing_marker : ParseErrc::category_violation,
                         unit_at, std::string("expected separator, found ") + category_name(t.category));
      if (!mode_) mode_ = t.mode;
      if (t.mode != *mode_)
        throw ParseError(ParseErrc::mode_mixing, unit_at,
                         std::string(mode_name(t.mode)) + " unit in " + mode_name(*mode_) + " sequence");
      units.push_back(parse_unit());
    }
  }

  int payload(Category expected, int head = -1) {
    const auto at = pos_;
    const auto t = next();
    if (t.category == expected && (head < 0 || t.head == head)) return t.local;
    if (t.category == expected)
      throw ParseError(ParseErrc::head_order, at,
                       "head " + std::to_string(t.head + 1) + " id where head " + std::to_string(head + 1) +
                           " expected");
    if ((expected == Category::Coarse && t.category == Category::Style) ||
        (expected == Category::Style && t.category == Category::Coarse))
      throw ParseError(ParseErrc::mode_mixing, at,
                       std::string(category_name(t.category)) + " code in " + mode_name(*mode_) + " unit");
    throw ParseError(ParseErrc::category_violation, at,
                     std::string("expected ") + category_name(expected) + ", found " + category_name(t.category));
  }

  Unit parse_unit() {
    Unit u;
    if (*mode_ == Mode::Layout) u.alpha = payload(Category::Anchor);
    u.u = payload(Category::UV);
    u.v = payload(Category::UV);
    if (*mode_ != Mode::Layout) {
      const Category c = *mode_ == Mode::Coarse ? Category::Coarse : Category::Style;
      for (int h = 0; h < kHeads; ++h) u.codes[static_cast<std::size_t>(h)] = static_cast<std::uint32_t>(payload(c, h));
    }
    return u;
  }

  std::span<const std::uint32_t> ids_;
  const Vocabulary& vocab_;
  std::optional<Mode> mode_;
  std::size_t pos_ = 0;
  ParsedSequence out_;
};

}  // namespace detail

// Strict parse of a full sequence. The mode comes from the unit separators;
// `expected` pins it (and is required to name the mode of a sequence with no
// units).
inline ParsedSequence parse(std::span<const std::uint32_t> ids, const Vocabulary& vocab,
                            std::optional<Mode> expected = std::nullopt) {
  return detail::SequenceParser(ids, vocab, expected).run();
}

// ---------------------------------------------------------------------------
// Loss mask

struct LossWeights {
  std::array<double, kCategoryCount> by_category;
  LossWeights() { by_category.fill(1.0); }
  double operator[](Category c) const { return by_category[static_cast<std::size_t>(c)]; }
  double& operator[](Category c) { return by_category[static_cast<std::size_t>(c)]; }
};

struct LossMask {
  std::vector<bool> contributes;  // per sequence position, as a target
  std::vector<double> weight;
  std::size_t n_valid() const { return static_cast<std::size_t>(std::count(contributes.begin(), contributes.end(), true)); }
};

// BOS and condition slots never contribute. In coarse/style sequences the
// re-injected u, v of every unit are conditioning only.
inline LossMask build_loss_mask(const TokenSequence& seq, const Vocabulary& vocab, const LossWeights& weights = {}) {
  const ParsedSequence parsed = parse(seq.ids, vocab, seq.mode);
  LossMask m;
  m.contributes.assign(seq.ids.size(), true);
  m.weight.assign(seq.ids.size(), 1.0);
  m.contributes[0] = false;
  for (const auto& s : parsed.condition_slots) m.contributes[s.position] = false;
  const std::uint32_t sep = vocab.separator(seq.mode);
  for (std::size_t t = 0; t < seq.ids.size(); ++t) {
    if (seq.mode != Mode::Layout && seq.ids[t] == sep) {
      m.contributes[t + 1] = false;
      m.contributes[t + 2] = false;
    }
    if (m.contributes[t]) m.weight[t] = weights[vocab.category(seq.ids[t])];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Token files: "HTS1", mode u8, count u32, ids u32; plus a text manifest
// recording the vocabulary hash.

inline std::vector<char> encode_token_file(const TokenSequence& seq) {
  ByteWriter w;
  w.put_magic("HTS1");
  w.put(static_cast<std::uint8_t>(seq.mode));
  w.put(static_cast<std::uint32_t>(seq.ids.size()));
  for (auto id : seq.ids) w.put(id);
  return w.bytes();
}

inline TokenSequence decode_token_file(std::span<const char> bytes) {
  ByteReader r(bytes);
  r.expect_magic("HTS1");
  TokenSequence seq;
  const auto mode = r.get<std::uint8_t>();
  if (mode > 2) throw Error(Errc::format, "unknown sequence mode");
  seq.mode = static_cast<Mode>(mode);
  const auto count = r.get<std::uint32_t>();
  if (r.remaining() < static_cast<std::size_t>(count) * 4)
    throw ParseError(ParseErrc::unexpected_end, r.remaining() / 4, "token file shorter than its header");
  seq.ids.resize(count);
  for (auto& id : seq.ids) id = r.get<std::uint32_t>();
  if (!r.at_end()) throw ParseError(ParseErrc::trailing_garbage, count, "bytes after the last token");
  return seq;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string token_manifest(const TokenSequence& seq, const Vocabulary& vocab) {
  std::ostringstream os;
  os << "vocab_hash = " << hash_hex(vocab.hash()) << '\n'
     << "mode = " << mode_name(seq.mode) << '\n'
     << "coarse_entries = " << vocab.config().coarse_entries << '\n'
     << "style_entries = " << vocab.config().style_entries << '\n'
     << "density_entries = " << vocab.config().density_entries << '\n'
     << "ids = " << seq.ids.size() << '\n';
  return os.str();
}

inline void check_manifest_hash(const std::string& manifest, const Vocabulary& vocab) {
  std::istringstream is(manifest);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("vocab_hash", 0) != 0) continue;
    const auto eq = line.find('=');
    std::string value = eq == std::string::npos ? "" : line.substr(eq + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    value.erase(value.find_last_not_of(" \t\r") + 1);
    if (value != hash_hex(vocab.hash()))
      throw Error(Errc::hash_mismatch, "vocabulary hash mismatch: file " + value + ", expected " + hash_hex(vocab.hash()));
    return;
  }
  throw Error(Errc::format, "token manifest has no vocab_hash");
}

inline std::filesystem::path manifest_path(const std::filesystem::path& token_file) {
  auto p = token_file;
  p += ".manifest";
  return p;
}

inline void save_token_file(const std::filesystem::path& path, const TokenSequence& seq, const Vocabulary& vocab) {
  write_file_atomic(path, encode_token_file(seq));
  write_text_atomic(manifest_path(path), token_manifest(seq, vocab));
}

inline TokenSequence load_token_file(const std::filesystem::path& path, const Vocabulary& vocab) {
  const auto manifest = read_file(manifest_path(path));
  check_manifest_hash(std::string(manifest.begin(), manifest.end()), vocab);
  return decode_token_file(read_file(path));
}

// ---------------------------------------------------------------------------
// Strand-token files: "HSTK", version, vocab hash, strands, 1024 density
// codes, then optional per-strand pools.

struct TokenizedHairstyle {
  std::vector<StrandTokens> strands;
  std::vector<std::uint32_t> density;
  std::vector<std::vector<StrandTokens>> pools;  // empty, or one per strand
};

inline void validate_tokens(const StrandTokens& s, const Vocabulary& vocab) {
  if (static_cast<int>(s.region) >= kRegionCount) throw Error(Errc::invalid_argument, "invalid region id");
  vocab.anchor(s.alpha);
  vocab.uv(s.uv.u);
  vocab.uv(s.uv.v);
  if (anchor_of(s.uv) != s.alpha) throw Error(Errc::invalid_argument, "anchor does not contain the root cell");
  for (int h = 0; h < kHeads; ++h) {
    vocab.coarse(h, s.coarse[static_cast<std::size_t>(h)]);
    vocab.style(h, s.style[static_cast<std::size_t>(h)]);
  }
}

inline void validate_tokenized(const TokenizedHairstyle& t, const Vocabulary& vocab) {
  if (t.density.size() != static_cast<std::size_t>(kDensityTokens))
    throw Error(Errc::invalid_argument, "density must have exactly 1024 tokens");
  for (auto d : t.density) vocab.density(d);
  for (const auto& s : t.strands) validate_tokens(s, vocab);
  if (!t.pools.empty() && t.pools.size() != t.strands.size())
    throw Error(Errc::invalid_argument, "one pool per strand required");
  for (const auto& pool : t.pools)
    for (const auto& s : pool) validate_tokens(s, vocab);
}

namespace detail {
inline void put_tokens(ByteWriter& w, const StrandTokens& s) {
  w.put(static_cast<std::uint32_t>(s.region));
  w.put(static_cast<std::uint32_t>(s.alpha));
  w.put(static_cast<std::uint32_t>(s.uv.u));
  w.put(static_cast<std::uint32_t>(s.uv.v));
  for (auto c : s.coarse) w.put(c);
  for (auto c : s.style) w.put(c);
}
inline StrandTokens get_tokens(ByteReader& r) {
  StrandTokens s;
  const auto region = r.get<std::uint32_t>();
  if (region >= static_cast<std::uint32_t>(kRegionCount)) throw Error(Errc::format, "invalid region id in token file");
  s.region = static_cast<Region>(region);
  s.alpha = static_cast<int>(r.get<std::uint32_t>());
  s.uv.u = static_cast<int>(r.get<std::uint32_t>());
  s.uv.v = static_cast<int>(r.get<std::uint32_t>());
  for (auto& c : s.coarse) c = r.get<std::uint32_t>();
  for (auto& c : s.style) c = r.get<std::uint32_t>();
  return s;
}
}  // namespace detail

inline std::vector<char> encode_tokenized(const TokenizedHairstyle& t, const Vocabulary& vocab) {
  validate_tokenized(t, vocab);
  ByteWriter w;
  w.put_magic("HSTK");
  w.put(static_cast<std::uint32_t>(1));
  w.put(vocab.hash());
  w.put(static_cast<std::uint32_t>(t.strands.size()));
  for (const auto& s : t.strands) detail::put_tokens(w, s);
  for (auto d : t.density) w.put(d);
  w.put(static_cast<std::uint32_t>(t.pools.size()));
  for (const auto& pool : t.pools) {
    w.put(static_cast<std::uint32_t>(pool.size()));
    for (const auto& s : pool) detail::put_tokens(w, s);
  }
  return w.bytes();
}

inline TokenizedHairstyle decode_tokenized(std::span<const char> bytes, const Vocabulary& vocab) {
  ByteReader r(bytes);
  r.expect_magic("HSTK");
  if (r.get<std::uint32_t>() != 1) throw Error(Errc::format, "unsupported strand-token file version");
  const auto hash = r.get<std::uint64_t>();
  if (hash != vocab.hash())
    throw Error(Errc::hash_mismatch, "vocabulary hash mismatch: file " + hash_hex(hash) + ", expected " + hash_hex(vocab.hash()));
  TokenizedHairstyle t;
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) t.strands.push_back(detail::get_tokens(r));
  t.density.resize(kDensityTokens);
  for (auto& d : t.density) d = r.get<std::uint32_t>();
  const auto pools = r.get<std::uint32_t>();
  t.pools.resize(pools);
  for (auto& pool : t.pools) {
    const auto m = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < m; ++i) pool.push_back(detail::get_tokens(r));
  }
  if (!r.at_end()) throw Error(Errc::format, "trailing bytes in strand-token file");
  validate_tokenized(t, vocab);
  return t;
}

}  // namespace hairlang
