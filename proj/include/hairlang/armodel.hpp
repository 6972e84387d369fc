#pragma once

#include "hairlang/transformer.hpp"

#include <sstream>

namespace hairlang {

// ---------------------------------------------------------------------------
// Training data

struct TrainingExample {
  std::vector<StrandTokens> strands;
  std::vector<std::uint32_t> density;
  std::vector<std::vector<StrandTokens>> pools;  // optional, one pool per strand
  ConditionSet conds;
};

struct TrainConfig {
  int steps = 1000;
  double lr = 5e-5;
  double min_lr = 1e-6;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 1.0;  // global norm; <= 0 disables
  std::array<double, 3> mode_probs{1.0 / 3, 1.0 / 3, 1.0 / 3};
  double p_img = 0.3;
  double p_txt = 0.3;
  double p_null = 0.1;
  LossWeights weights;
  std::uint64_t seed = 0;
};

inline Mode sample_mode(const std::array<double, 3>& probs, std::mt19937_64& rng) {
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw Error(Errc::invalid_argument, "mode probabilities must be non-negative");
    total += p;
  }
  if (total <= 0.0) throw Error(Errc::invalid_argument, "mode probabilities sum to zero");
  double x = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (int m = 0; m < 3; ++m) {
    if (x < probs[static_cast<std::size_t>(m)]) return static_cast<Mode>(m);
    x -= probs[static_cast<std::size_t>(m)];
  }
  for (int m = 2; m >= 0; --m)
    if (probs[static_cast<std::size_t>(m)] > 0.0) return static_cast<Mode>(m);
  return Mode::Layout;
}

// Null everything with p_null; otherwise drop image and text independently.
inline ConditionSet drop_conditions(const ConditionSet& c, const TrainConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ConditionSet out = c;
  const bool all = unit(rng) < cfg.p_null;
  const bool img = all || unit(rng) < cfg.p_img;
  const bool txt = all || unit(rng) < cfg.p_txt;
  if (img) out.image.reset();
  if (txt) {
    out.global_text.reset();
    for (auto& r : out.region_text) r.reset();
  }
  return out;
}

inline std::vector<StrandTokens> resample_pools(const TrainingExample& ex, std::mt19937_64& rng) {
  if (ex.pools.empty()) return ex.strands;
  if (ex.pools.size() != ex.strands.size()) throw Error(Errc::invalid_argument, "one pool per strand required");
  std::vector<StrandTokens> out = ex.strands;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& pool = ex.pools[i];
    if (pool.empty()) continue;
    out[i] = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint

struct Checkpoint {
  ModelConfig model;
  VocabConfig vocab;
  Params params;
  Params adam_m;
  Params adam_v;
  std::int64_t step = 0;
  std::string rng_state;
};

inline Checkpoint initial_checkpoint(const ModelConfig& model, const VocabConfig& vocab, std::uint64_t train_seed) {
  if (static_cast<std::uint32_t>(model.vocab_size) != Vocabulary(vocab).size())
    throw Error(Errc::invalid_argument, "model vocab_size does not match the vocabulary");
  Checkpoint c;
  c.model = model;
  c.vocab = vocab;
  c.params = init_params(model);
  c.adam_m = c.params.zeros_like();
  c.adam_v = c.params.zeros_like();
  std::ostringstream os;
  os << std::mt19937_64(train_seed);
  c.rng_state = os.str();
  return c;
}

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<char> encode_checkpoint(const Checkpoint& c) {
  ByteWriter w;
  w.put_magic("HCKP");
  w.put(kCheckpointVersion);
  const auto& m = c.model;
  for (int v : {m.d_model, m.layers, m.heads, m.context_len, m.vocab_size, m.cond_dim, m.mlp_ratio})
    w.put(static_cast<std::int32_t>(v));
  w.put(m.seed);
  for (int v : {c.vocab.coarse_entries, c.vocab.style_entries, c.vocab.density_entries}) w.put(static_cast<std::int32_t>(v));
  w.put(m.hash());
  w.put(c.vocab.hash());
  w.put(c.step);
  w.put_string(c.rng_state);
  for (const Params* p : {&c.params, &c.adam_m, &c.adam_v}) {
    w.put(static_cast<std::uint32_t>(0));
    p->visit([&](const std::string& name, const Matrix& t) {
      w.put_string(name);
      w.put(static_cast<std::uint32_t>(t.rows()));
      w.put(static_cast<std::uint32_t>(t.cols()));
      for (Eigen::Index i = 0; i < t.size(); ++i) w.put(t.data()[i]);
    });
  }
  return w.bytes();
}

inline Checkpoint decode_checkpoint(std::span<const char> bytes) {
  ByteReader r(bytes);
  r.expect_magic("HCKP");
  if (r.get<std::uint32_t>() != kCheckpointVersion) throw Error(Errc::format, "unsupported checkpoint version");
  Checkpoint c;
  auto& m = c.model;
  for (int* v : {&m.d_model, &m.layers, &m.heads, &m.context_len, &m.vocab_size, &m.cond_dim, &m.mlp_ratio})
    *v = r.get<std::int32_t>();
  m.seed = r.get<std::uint64_t>();
  for (int* v : {&c.vocab.coarse_entries, &c.vocab.style_entries, &c.vocab.density_entries}) *v = r.get<std::int32_t>();
  m.validate();
  if (r.get<std::uint64_t>() != m.hash()) throw Error(Errc::hash_mismatch, "checkpoint model config hash mismatch");
  if (r.get<std::uint64_t>() != c.vocab.hash()) throw Error(Errc::hash_mismatch, "checkpoint vocabulary hash mismatch");
  c.step = r.get<std::int64_t>();
  c.rng_state = r.get_string();
  // Shapes come from a fresh init of the stored config.
  ModelConfig shape_cfg = m;
  c.params = init_params(shape_cfg);
  for (Params* p : {&c.params, &c.adam_m, &c.adam_v}) {
    if (p != &c.params) *p = c.params.zeros_like();
    r.get<std::uint32_t>();
    p->visit([&](const std::string& name, Matrix& t) {
      if (r.get_string() != name) throw Error(Errc::format, "checkpoint tensor order mismatch at " + name);
      const auto rows = r.get<std::uint32_t>(), cols = r.get<std::uint32_t>();
      if (rows != t.rows() || cols != t.cols()) throw Error(Errc::format, "checkpoint tensor shape mismatch at " + name);
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = r.get<double>();
    });
  }
  if (!r.at_end()) throw Error(Errc::format, "trailing bytes in checkpoint");
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file_atomic(path, encode_checkpoint(c));
}
inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

inline void check_checkpoint_vocab(const Checkpoint& c, const Vocabulary& vocab) {
  if (c.vocab.hash() != vocab.hash() || static_cast<std::uint32_t>(c.model.vocab_size) != vocab.size())
    throw Error(Errc::hash_mismatch, "checkpoint vocabulary hash " + hash_hex(c.vocab.hash()) +
                                         " does not match " + hash_hex(vocab.hash()));
}

// ---------------------------------------------------------------------------
// Training

inline double cosine_lr(const TrainConfig& cfg, std::int64_t step) {
  if (cfg.steps <= 1) return cfg.lr;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(cfg.steps - 1));
  return cfg.min_lr + 0.5 * (cfg.lr - cfg.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

struct StepRecord {
  std::int64_t step = 0;
  Mode mode = Mode::Layout;
  double loss = 0.0;
  double lr = 0.0;
};

class Trainer {
 public:
  Trainer(std::vector<TrainingExample> dataset, const Vocabulary& vocab, TrainConfig config, Checkpoint start)
      : data_(std::move(dataset)), vocab_(vocab), cfg_(std::move(config)), ckpt_(std::move(start)) {
    if (data_.empty()) throw Error(Errc::invalid_argument, "empty training dataset");
    check_checkpoint_vocab(ckpt_, vocab_);
    std::istringstream is(ckpt_.rng_state);
    is >> rng_;
    if (!is) throw Error(Errc::format, "corrupt RNG state in checkpoint");
  }

  const Checkpoint& checkpoint() const {
    std::ostringstream os;
    os << rng_;
    ckpt_.rng_state = os.str();
    return ckpt_;
  }

  bool done() const { return ckpt_.step >= cfg_.steps; }

  // One optimizer step. Returns nullopt (and leaves the state untouched) if
  // the loss or gradients are not finite.
  std::optional<StepRecord> step() {
    const std::mt19937_64 rng_before = rng_;
    StepRecord rec;
    rec.step = ckpt_.step;
    const auto& ex = data_[std::uniform_int_distribution<std::size_t>(0, data_.size() - 1)(rng_)];
    rec.mode = sample_mode(cfg_.mode_probs, rng_);
    const auto strands = resample_pools(ex, rng_);
    const ConditionSet conds = drop_conditions(ex.conds, cfg_, rng_);
    const TokenSequence seq = serialize(strands, ex.density, rec.mode, vocab_);
    const LossMask mask = build_loss_mask(seq, vocab_, cfg_.weights);

    Params grads = ckpt_.params.zeros_like();
    rec.loss = loss_and_gradients(ckpt_.params, ckpt_.model, model_input(seq), conds, mask, grads);
    double sq = 0.0;
    grads.visit([&](const std::string&, const Matrix& g) { sq += g.squaredNorm(); });
    if (!std::isfinite(rec.loss) || !std::isfinite(sq)) {
      rng_ = rng_before;
      return std::nullopt;
    }
    const double clip = cfg_.grad_clip > 0.0 && std::sqrt(sq) > cfg_.grad_clip ? cfg_.grad_clip / std::sqrt(sq) : 1.0;
    rec.lr = cosine_lr(cfg_, ckpt_.step);
    apply_adamw(grads, clip, rec.lr);
    ++ckpt_.step;
    return rec;
  }

 private:
  void apply_adamw(const Params& grads, double clip, double lr) {
    const double t = static_cast<double>(ckpt_.step + 1);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t), bc2 = 1.0 - std::pow(cfg_.beta2, t);
    std::vector<const Matrix*> g;
    grads.visit([&](const std::string&, const Matrix& m) { g.push_back(&m); });
    std::vector<Matrix*> m1, m2;
    ckpt_.adam_m.visit([&](const std::string&, Matrix& m) { m1.push_back(&m); });
    ckpt_.adam_v.visit([&](const std::string&, Matrix& m) { m2.push_back(&m); });
    std::size_t i = 0;
    ckpt_.params.visit([&](const std::string& name, Matrix& p) {
      const Matrix gi = *g[i] * clip;
      *m1[i] = cfg_.beta1 * *m1[i] + (1.0 - cfg_.beta1) * gi;
      *m2[i] = cfg_.beta2 * *m2[i] + (1.0 - cfg_.beta2) * gi.cwiseAbs2();
      if (lr != 0.0) {
        if (is_decayed(name)) p *= 1.0 - lr * cfg_.weight_decay;
        p.array() -= lr * (m1[i]->array() / bc1) / ((m2[i]->array() / bc2).sqrt() + cfg_.eps);
      }
      ++i;
    });
  }

  std::vector<TrainingExample> data_;
  const Vocabulary& vocab_;
  TrainConfig cfg_;
  mutable Checkpoint ckpt_;
  std::mt19937_64 rng_;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> history;
  bool diverged = false;
};

// Runs until config.steps total steps. Resumes from `start` when given.
inline TrainResult train(std::vector<TrainingExample> dataset, const Vocabulary& vocab, const ModelConfig& model,
                         const TrainConfig& config, std::optional<Checkpoint> start = std::nullopt,
                         const std::function<void(const StepRecord&)>& on_step = {}) {
  Checkpoint init = start ? std::move(*start) : initial_checkpoint(model, vocab.config(), config.seed);
  Trainer trainer(std::move(dataset), vocab, config, std::move(init));
  TrainResult result;
  while (!trainer.done()) {
    auto rec = trainer.step();
    if (!rec) {
      result.diverged = true;
      break;
    }
    if (on_step) on_step(*rec);
    result.history.push_back(*rec);
  }
  result.checkpoint = trainer.checkpoint();
  return result;
}

// ---------------------------------------------------------------------------
// Sampling

struct DecodeConfig {
  double temperature = 1.0;
  int top_k = 0;
  std::uint64_t seed = 0;
  int max_units_per_region = 256;
};

namespace detail {

using IdRanges = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

inline std::uint32_t sample_constrained(const RowVector& logits, const IdRanges& allowed, const DecodeConfig& cfg,
                                        std::mt19937_64& rng) {
  std::vector<std::pair<double, std::uint32_t>> cand;
  for (auto [lo, hi] : allowed)
    for (std::uint32_t id = lo; id < hi; ++id) cand.emplace_back(logits[id], id);
  if (cand.empty()) throw Error(Errc::invalid_argument, "no admissible token");
  if (cfg.temperature <= 1e-8) {
    auto best = cand.front();
    for (const auto& c : cand)
      if (c.first > best.first) best = c;
    return best.second;
  }
  if (cfg.top_k > 0 && static_cast<std::size_t>(cfg.top_k) < cand.size()) {
    std::partial_sort(cand.begin(), cand.begin() + cfg.top_k, cand.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    cand.resize(static_cast<std::size_t>(cfg.top_k));
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& c : cand) mx = std::max(mx, c.first);
  std::vector<double> w(cand.size());
  double total = 0.0;
  for (std::size_t i = 0; i < cand.size(); ++i) total += (w[i] = std::exp((cand[i].first - mx) / cfg.temperature));
  double x = std::uniform_real_distribution<double>(0.0, total)(rng);
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (x < w[i]) return cand[i].second;
    x -= w[i];
  }
  return cand.back().second;
}

// UV tokens whose cell centers fall in [lo, hi).
inline std::pair<int, int> token_span(double lo, double hi) {
  int a = kUVGrid, b = 0;
  for (int t = 0; t < kUVGrid; ++t) {
    const double c = (t + 0.5) / kUVGrid;
    if (c >= lo && c < hi) {
      a = std::min(a, t);
      b = std::max(b, t + 1);
    }
  }
  return {a, std::max(a, b)};
}

struct RegionGrammar {
  std::pair<int, int> u, v;  // admissible token spans
  std::vector<int> anchors;
};

inline RegionGrammar region_grammar(const UVRect& rect) {
  RegionGrammar g;
  g.u = token_span(rect.u0, rect.u1);
  g.v = token_span(rect.v0, rect.v1);
  constexpr int per = kUVGrid / kAnchorGrid;
  for (int row = 0; row < kAnchorGrid; ++row)
    for (int col = 0; col < kAnchorGrid; ++col) {
      const bool du = std::max(g.u.first, col * per) < std::min(g.u.second, (col + 1) * per);
      const bool dv = std::max(g.v.first, row * per) < std::min(g.v.second, (row + 1) * per);
      if (du && dv) g.anchors.push_back(row * kAnchorGrid + col);
    }
  return g;
}

inline std::size_t fixed_sequence_length() {
  return 1 + kGlobalSlots + 1 + kDensityTokens + kRegionCount * (2 + kRegionSlots) + 1;
}

}  // namespace detail

struct PhasedSample {
  std::vector<std::uint32_t> density;
  std::vector<StrandTokens> strands;  // canonical order after the geometry phases
  TokenSequence layout, coarse, style;
};

namespace detail {

// Geometry phase: fixed (u, v) prefixes, sampled head codes.
inline TokenSequence sample_geometry(PhasedSample& s, Mode mode, const ConditionSet& conds, const Checkpoint& ckpt,
                                     const Vocabulary& vocab, const DecodeConfig& cfg, std::mt19937_64& rng) {
  std::stable_sort(s.strands.begin(), s.strands.end(), [](const StrandTokens& a, const StrandTokens& b) {
    return std::tie(a.region, a.uv.v, a.uv.u, a.alpha) < std::tie(b.region, b.uv.v, b.uv.u, b.alpha);
  });
  const ParsedSequence structure = canonical_structure(s.strands, s.density, mode);
  const TokenSequence prefix = serialize_structure(structure, vocab);
  IncrementalDecoder dec(ckpt.params, ckpt.model, conds);
  TokenSequence out;
  out.mode = mode;
  out.condition_slots = prefix.condition_slots;
  const Category cat = mode == Mode::Coarse ? Category::Coarse : Category::Style;
  std::size_t slot_i = 0;
  RowVector logits;
  std::vector<CodeTokens> codes;
  for (std::size_t t = 0; t < prefix.ids.size();) {
    const auto id = prefix.ids[t];
    if (id == kConditionSlotId) {
      const auto& sl = prefix.condition_slots[slot_i++];
      logits = dec.push_slot(sl.kind, sl.region);
      out.ids.push_back(id);
      ++t;
      continue;
    }
    logits = dec.push_token(id);
    out.ids.push_back(id);
    ++t;
    if (id != vocab.separator(mode)) continue;
    // Separator, then u and v are copied; head codes are sampled.
    for (int k = 0; k < 2; ++k) {
      logits = dec.push_token(prefix.ids[t]);
      out.ids.push_back(prefix.ids[t++]);
    }
    CodeTokens c{};
    for (int h = 0; h < kHeads; ++h) {
      const auto next = sample_constrained(logits, {vocab.range(cat, h)}, cfg, rng);
      c[static_cast<std::size_t>(h)] = static_cast<std::uint32_t>(vocab.info(next).local);
      out.ids.push_back(next);
      logits = dec.push_token(next);
      ++t;
    }
    codes.push_back(c);
  }
  for (std::size_t i = 0; i < s.strands.size(); ++i) {
    if (mode == Mode::Coarse) s.strands[i].coarse = codes[i];
    else s.strands[i].style = codes[i];
  }
  return out;
}

}  // namespace detail

// Density, then layout, then coarse and style geometry for the sampled
// roots. Every emitted sequence parses.
inline PhasedSample sample_phased(const ConditionSet& conds, const Checkpoint& ckpt, const Vocabulary& vocab,
                                  const DecodeConfig& cfg,
                                  const RegionPartition& partition = RegionPartition::default_partition()) {
  check_checkpoint_vocab(ckpt, vocab);
  const std::size_t fixed = detail::fixed_sequence_length();
  if (static_cast<std::size_t>(ckpt.model.context_len) < fixed)
    throw Error(Errc::invalid_argument, "context too short for a density phase");
  const std::size_t unit_budget = (static_cast<std::size_t>(ckpt.model.context_len) - fixed) / (3 + kHeads);

  std::mt19937_64 rng(cfg.seed);
  PhasedSample s;
  IncrementalDecoder dec(ckpt.params, ckpt.model, conds);
  auto& seq = s.layout;
  seq.mode = Mode::Layout;
  RowVector logits;
  auto push = [&](std::uint32_t id) {
    seq.ids.push_back(id);
    logits = dec.push_token(id);
  };
  auto push_slot = [&](SlotKind kind, int region) {
    seq.condition_slots.push_back({seq.ids.size(), kind, region});
    seq.ids.push_back(kConditionSlotId);
    logits = dec.push_slot(kind, region);
  };

  push(Vocabulary::kBos);
  push_slot(SlotKind::Image, -1);
  push_slot(SlotKind::GlobalText, -1);
  push(Vocabulary::kDen);
  const detail::IdRanges density_range{vocab.range(Category::Density)};
  for (int i = 0; i < kDensityTokens; ++i) {
    const auto id = detail::sample_constrained(logits, density_range, cfg, rng);
    s.density.push_back(static_cast<std::uint32_t>(vocab.info(id).local));
    push(id);
  }

  const std::uint32_t s1 = vocab.separator(Mode::Layout);
  const auto [uv_lo, uv_hi] = vocab.range(Category::UV);
  const auto anchor_lo = vocab.range(Category::Anchor).first;
  for (Region r : kRegionOrder) {
    push(vocab.region_start(r));
    push_slot(SlotKind::RegionText, static_cast<int>(r));
    const auto g = detail::region_grammar(partition.rect(r));
    const std::uint32_t end = vocab.region_end(r);
    int count = 0;
    for (;;) {
      const bool can_continue = !g.anchors.empty() && count < cfg.max_units_per_region && s.strands.size() < unit_budget;
      const std::uint32_t choice =
          can_continue ? detail::sample_constrained(logits, {{s1, s1 + 1}, {end, end + 1}}, cfg, rng) : end;
      push(choice);
      if (choice == end) break;
      detail::IdRanges anchors;
      for (int a : g.anchors) anchors.emplace_back(anchor_lo + static_cast<std::uint32_t>(a), anchor_lo + static_cast<std::uint32_t>(a) + 1);
      const auto a_id = detail::sample_constrained(logits, anchors, cfg, rng);
      push(a_id);
      const int alpha = vocab.info(a_id).local;
      constexpr int per = kUVGrid / kAnchorGrid;
      const int cu = alpha % kAnchorGrid, cv = alpha / kAnchorGrid;
      const int u_lo = std::max(g.u.first, cu * per), u_hi = std::min(g.u.second, (cu + 1) * per);
      const int v_lo = std::max(g.v.first, cv * per), v_hi = std::min(g.v.second, (cv + 1) * per);
      const auto u_id = detail::sample_constrained(
          logits, {{uv_lo + static_cast<std::uint32_t>(u_lo), uv_lo + static_cast<std::uint32_t>(u_hi)}}, cfg, rng);
      push(u_id);
      const auto v_id = detail::sample_constrained(
          logits, {{uv_lo + static_cast<std::uint32_t>(v_lo), uv_lo + static_cast<std::uint32_t>(v_hi)}}, cfg, rng);
      push(v_id);
      (void)uv_hi;
      StrandTokens st;
      st.region = r;
      st.alpha = alpha;
      st.uv = {vocab.info(u_id).local, vocab.info(v_id).local};
      s.strands.push_back(st);
      ++count;
    }
  }
  push(Vocabulary::kEos);

  s.coarse = detail::sample_geometry(s, Mode::Coarse, conds, ckpt, vocab, cfg, rng);
  s.style = detail::sample_geometry(s, Mode::Style, conds, ckpt, vocab, cfg, rng);
  return s;
}

// Re-draws only the style phase; layout and coarse are left untouched.
inline void resample_style(PhasedSample& s, const ConditionSet& conds, const Checkpoint& ckpt, const Vocabulary& vocab,
                           const DecodeConfig& cfg) {
  check_checkpoint_vocab(ckpt, vocab);
  std::mt19937_64 rng(cfg.seed);
  s.style = detail::sample_geometry(s, Mode::Style, conds, ckpt, vocab, cfg, rng);
}

// ---------------------------------------------------------------------------
// Gradient check

struct MicroBatch {
  ModelInput input;
  ConditionSet conds;
  LossMask mask;
};

// Random ids with one image slot (conditioned) and one text slot (null).
inline MicroBatch random_micro_batch(const ModelConfig& cfg, int length, std::uint64_t seed) {
  if (length < 4) throw Error(Errc::invalid_argument, "micro batch too short");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> tok(0, static_cast<std::uint32_t>(cfg.vocab_size - 1));
  std::normal_distribution<double> normal;
  MicroBatch b;
  for (int t = 0; t < length; ++t) b.input.ids.push_back(tok(rng));
  b.input.ids[1] = kConditionSlotId;
  b.input.ids[2] = kConditionSlotId;
  b.input.slots = {{1, SlotKind::Image, -1}, {2, SlotKind::GlobalText, -1}};
  b.conds.image = Eigen::VectorXd::NullaryExpr(cfg.cond_dim, [&] { return normal(rng); });
  b.mask.contributes.assign(static_cast<std::size_t>(length), true);
  b.mask.weight.assign(static_cast<std::size_t>(length), 1.0);
  b.mask.contributes[0] = b.mask.contributes[1] = b.mask.contributes[2] = false;
  std::uniform_real_distribution<double> w(0.5, 2.0);
  for (std::size_t t = 3; t < b.mask.weight.size(); ++t) b.mask.weight[t] = w(rng);
  return b;
}

inline double batch_loss(const Params& p, const ModelConfig& cfg, const MicroBatch& b) {
  return sequence_loss(forward(p, cfg, b.input, b.conds), b.input, b.mask);
}

inline Params batch_gradients(const Params& p, const ModelConfig& cfg, const MicroBatch& b) {
  Params g = p.zeros_like();
  loss_and_gradients(p, cfg, b.input, b.conds, b.mask, g);
  return g;
}

// Central differences on randomly chosen entries (tensor first, then entry).
inline double gradient_check(const Params& params, const ModelConfig& cfg, const MicroBatch& batch,
                             int samples = 200, std::uint64_t seed = 0, double h = 1e-4) {
  const Params analytic = batch_gradients(params, cfg, batch);
  Params p = params;
  std::vector<Matrix*> tensors;
  std::vector<const Matrix*> grads;
  p.visit([&](const std::string&, Matrix& m) { tensors.push_back(&m); });
  analytic.visit([&](const std::string&, const Matrix& m) { grads.push_back(&m); });
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const auto ti = std::uniform_int_distribution<std::size_t>(0, tensors.size() - 1)(rng);
    Matrix& m = *tensors[ti];
    const auto ei = std::uniform_int_distribution<Eigen::Index>(0, m.size() - 1)(rng);
    const double orig = m.data()[ei];
    m.data()[ei] = orig + h;
    const double lp = batch_loss(p, cfg, batch);
    m.data()[ei] = orig - h;
    const double lm = batch_loss(p, cfg, batch);
    m.data()[ei] = orig;
    const double numeric = (lp - lm) / (2.0 * h);
    const double a = grads[ti]->data()[ei];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace hairlang
