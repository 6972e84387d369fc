#pragma once

#include "hairlang/strandlang.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

namespace hairlang {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;

struct ModelConfig {
  int d_model = 128;
  int layers = 4;
  int heads = 4;
  int context_len = 8192;
  int vocab_size = 0;
  int cond_dim = 64;
  int mlp_ratio = 4;
  std::uint64_t seed = 0;

  int head_dim() const { return d_model / heads; }
  int hidden() const { return d_model * mlp_ratio; }

  void validate() const {
    if (d_model < 1 || layers < 1 || heads < 1 || d_model % heads != 0)
      throw Error(Errc::invalid_argument, "d_model must be a positive multiple of heads");
    if (vocab_size < 2 || context_len < 2 || cond_dim < 1 || mlp_ratio < 1)
      throw Error(Errc::invalid_argument, "invalid model dimensions");
  }

  std::uint64_t hash() const {
    const std::string s = "hairlang-model-v1:" + std::to_string(d_model) + ':' + std::to_string(layers) + ':' +
                          std::to_string(heads) + ':' + std::to_string(context_len) + ':' +
                          std::to_string(vocab_size) + ':' + std::to_string(cond_dim) + ':' + std::to_string(mlp_ratio);
    return fnv1a(s);
  }
};

// Opaque condition vectors; nullopt selects the learned null embedding.
struct ConditionSet {
  std::optional<Eigen::VectorXd> image;
  std::optional<Eigen::VectorXd> global_text;
  std::array<std::optional<Eigen::VectorXd>, kRegionCount> region_text;
};

struct LayerParams {
  Matrix ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix ln2_g, ln2_b, w1, b1, w2, b2;
};

struct Params {
  Matrix tok_emb, pos_emb;
  Matrix img_proj, img_bias, txt_proj, txt_bias;
  Matrix null_img, null_txt, null_region;
  std::vector<LayerParams> layers;
  Matrix lnf_g, lnf_b, w_out, b_out;

  template <typename Self, typename F>
  static void visit_impl(Self& self, F&& f) {
    f("tok_emb", self.tok_emb);
    f("pos_emb", self.pos_emb);
    f("img_proj", self.img_proj);
    f("img_bias", self.img_bias);
    f("txt_proj", self.txt_proj);
    f("txt_bias", self.txt_bias);
    f("null_img", self.null_img);
    f("null_txt", self.null_txt);
    f("null_region", self.null_region);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      auto& L = self.layers[l];
      const std::string p = "layer" + std::to_string(l) + ".";
      f(p + "ln1_g", L.ln1_g);
      f(p + "ln1_b", L.ln1_b);
      f(p + "wq", L.wq);
      f(p + "bq", L.bq);
      f(p + "wk", L.wk);
      f(p + "bk", L.bk);
      f(p + "wv", L.wv);
      f(p + "bv", L.bv);
      f(p + "wo", L.wo);
      f(p + "bo", L.bo);
      f(p + "ln2_g", L.ln2_g);
      f(p + "ln2_b", L.ln2_b);
      f(p + "w1", L.w1);
      f(p + "b1", L.b1);
      f(p + "w2", L.w2);
      f(p + "b2", L.b2);
    }
    f("lnf_g", self.lnf_g);
    f("lnf_b", self.lnf_b);
    f("w_out", self.w_out);
    f("b_out", self.b_out);
  }
  template <typename F>
  void visit(F&& f) { visit_impl(*this, std::forward<F>(f)); }
  template <typename F>
  void visit(F&& f) const { visit_impl(*this, std::forward<F>(f)); }

  // Same shapes, all zero.
  Params zeros_like() const {
    Params z = *this;
    z.visit([](const std::string&, Matrix& m) { m.setZero(); });
    return z;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }
};

// Decay applies to projection matrices and embeddings, not to norms/biases.
inline bool is_decayed(const std::string& name) {
  auto ends = [&](std::string_view s) { return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0; };
  return !(ends("_g") || ends("_b") || ends("bias") || ends("bq") || ends("bk") || ends("bv") || ends("bo") ||
           ends("b1") || ends("b2") || ends("b_out"));
}

inline Params init_params(const ModelConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  const int d = cfg.d_model, f = cfg.hidden();
  auto randn = [&](int r, int c, double scale = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * normal(rng);
    return m;
  };
  const double resid_scale = 1.0 / std::sqrt(2.0 * cfg.layers);
  Params p;
  // Embeddings at unit scale; weights at 0.02.
  p.tok_emb = randn(cfg.vocab_size, d, 50.0);
  p.pos_emb = randn(cfg.context_len, d, 50.0);
  p.img_proj = randn(cfg.cond_dim, d);
  p.img_bias = Matrix::Zero(1, d);
  p.txt_proj = randn(cfg.cond_dim, d);
  p.txt_bias = Matrix::Zero(1, d);
  p.null_img = randn(1, d, 50.0);
  p.null_txt = randn(1, d, 50.0);
  p.null_region = randn(1, d, 50.0);
  for (int l = 0; l < cfg.layers; ++l) {
    LayerParams L;
    L.ln1_g = Matrix::Ones(1, d);
    L.ln1_b = Matrix::Zero(1, d);
    L.wq = randn(d, d);
    L.bq = Matrix::Zero(1, d);
    L.wk = randn(d, d);
    L.bk = Matrix::Zero(1, d);
    L.wv = randn(d, d);
    L.bv = Matrix::Zero(1, d);
    L.wo = randn(d, d, resid_scale);
    L.bo = Matrix::Zero(1, d);
    L.ln2_g = Matrix::Ones(1, d);
    L.ln2_b = Matrix::Zero(1, d);
    L.w1 = randn(d, f);
    L.b1 = Matrix::Zero(1, f);
    L.w2 = randn(f, d, resid_scale);
    L.b2 = Matrix::Zero(1, d);
    p.layers.push_back(std::move(L));
  }
  p.lnf_g = Matrix::Ones(1, d);
  p.lnf_b = Matrix::Zero(1, d);
  p.w_out = randn(d, cfg.vocab_size);
  p.b_out = Matrix::Zero(1, cfg.vocab_size);
  return p;
}

// ---------------------------------------------------------------------------
// Model input

// One row per position: either a vocabulary id or a condition slot.
struct ModelInput {
  std::vector<std::uint32_t> ids;
  std::vector<ConditionSlot> slots;
};

inline ModelInput model_input(const TokenSequence& seq) { return {seq.ids, seq.condition_slots}; }

namespace detail {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

struct SlotSource {
  enum Kind { Token, ImageVec, TextVec, NullImage, NullText, NullRegion } kind = Token;
  const Eigen::VectorXd* vec = nullptr;
};

inline std::vector<SlotSource> resolve_sources(const ModelInput& in, const ConditionSet& conds, int cond_dim) {
  std::vector<SlotSource> src(in.ids.size());
  auto check = [cond_dim](const Eigen::VectorXd& v) {
    if (v.size() != cond_dim) throw Error(Errc::invalid_argument, "condition vector has wrong dimension");
    if (!v.allFinite()) throw Error(Errc::invalid_argument, "non-finite condition vector");
  };
  for (const auto& s : in.slots) {
    if (s.position >= in.ids.size() || in.ids[s.position] != kConditionSlotId)
      throw Error(Errc::invalid_argument, "condition slot does not match a slot position");
    auto& out = src[s.position];
    const std::optional<Eigen::VectorXd>* v = nullptr;
    switch (s.kind) {
      case SlotKind::Image: v = &conds.image; break;
      case SlotKind::GlobalText: v = &conds.global_text; break;
      case SlotKind::RegionText: v = &conds.region_text.at(static_cast<std::size_t>(s.region)); break;
    }
    if (v->has_value()) {
      check(**v);
      out.kind = s.kind == SlotKind::Image ? SlotSource::ImageVec : SlotSource::TextVec;
      out.vec = &**v;
    } else {
      out.kind = s.kind == SlotKind::Image ? SlotSource::NullImage
                 : s.kind == SlotKind::GlobalText ? SlotSource::NullText
                                                  : SlotSource::NullRegion;
    }
  }
  for (std::size_t t = 0; t < in.ids.size(); ++t)
    if (in.ids[t] == kConditionSlotId && src[t].kind == SlotSource::Token)
      throw Error(Errc::invalid_argument, "slot position without slot description");
  return src;
}

inline RowVector input_row(const Params& p, std::uint32_t id, const SlotSource& s, std::size_t t) {
  RowVector x;
  switch (s.kind) {
    case SlotSource::Token:
      if (id >= static_cast<std::uint32_t>(p.tok_emb.rows())) throw Error(Errc::invalid_argument, "token id out of model vocabulary");
      x = p.tok_emb.row(id);
      break;
    case SlotSource::ImageVec: x = s.vec->transpose() * p.img_proj + p.img_bias; break;
    case SlotSource::TextVec: x = s.vec->transpose() * p.txt_proj + p.txt_bias; break;
    case SlotSource::NullImage: x = p.null_img; break;
    case SlotSource::NullText: x = p.null_txt; break;
    case SlotSource::NullRegion: x = p.null_region; break;
  }
  return x + p.pos_emb.row(static_cast<Eigen::Index>(t));
}

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd rstd;
};

inline Matrix layer_norm(const Matrix& x, const Matrix& g, const Matrix& b, LayerNormCache* cache) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Matrix xhat(n, d);
  Eigen::VectorXd rstd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    rstd[i] = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mu) * rstd[i];
  }
  Matrix y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

inline Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& c, const Matrix& g, Matrix& dg, Matrix& db) {
  dg += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * g.row(0).array();
  const double d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double m1 = dxhat.row(i).sum() / d;
    const double m2 = dxhat.row(i).dot(c.xhat.row(i)) / d;
    dx.row(i) = c.rstd[i] * (dxhat.row(i).array() - m1 - c.xhat.row(i).array() * m2);
  }
  return dx;
}

inline double gelu(double a) { return 0.5 * a * (1.0 + std::tanh(kGeluC * (a + 0.044715 * a * a * a))); }

inline double gelu_grad(double a) {
  const double u = kGeluC * (a + 0.044715 * a * a * a);
  const double th = std::tanh(u);
  return 0.5 * (1.0 + th) + 0.5 * a * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * 0.044715 * a * a);
}

struct LayerCache {
  Matrix x_in;
  LayerNormCache ln1, ln2;
  Matrix h1, q, k, v;
  std::vector<RowMatrix> probs;  // per head, T x T; only the lower triangle is meaningful
  Matrix attn_concat, x_mid, h2, pre_act, act;
};

}  // namespace detail

struct ForwardCache {
  std::vector<detail::SlotSource> sources;
  std::vector<detail::LayerCache> layers;
  detail::LayerNormCache lnf;
  Matrix final_hidden;
};

// Full-sequence forward: logits for every position (T x V).
inline Matrix forward(const Params& p, const ModelConfig& cfg, const ModelInput& in, const ConditionSet& conds,
                      ForwardCache* cache = nullptr) {
  const auto T = static_cast<Eigen::Index>(in.ids.size());
  if (T == 0) throw Error(Errc::invalid_argument, "empty sequence");
  if (T > cfg.context_len)
    throw Error(Errc::invalid_argument, "sequence length " + std::to_string(T) + " exceeds context " +
                                            std::to_string(cfg.context_len));
  auto sources = detail::resolve_sources(in, conds, cfg.cond_dim);
  const int d = cfg.d_model, H = cfg.heads, dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix x(T, d);
  for (Eigen::Index t = 0; t < T; ++t)
    x.row(t) = detail::input_row(p, in.ids[static_cast<std::size_t>(t)], sources[static_cast<std::size_t>(t)],
                                 static_cast<std::size_t>(t));

  if (cache) cache->layers.resize(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& L = p.layers[l];
    detail::LayerCache local;
    detail::LayerCache& c = cache ? cache->layers[l] : local;
    if (cache) c.x_in = x;
    c.h1 = detail::layer_norm(x, L.ln1_g, L.ln1_b, &c.ln1);
    c.q = (c.h1 * L.wq).rowwise() + L.bq.row(0);
    c.k = (c.h1 * L.wk).rowwise() + L.bk.row(0);
    c.v = (c.h1 * L.wv).rowwise() + L.bv.row(0);
    c.attn_concat.resize(T, d);
    c.probs.resize(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
      // upper triangle is unused
      RowMatrix s(T, T);
      s.noalias() = c.q.middleCols(h * dh, dh) * (c.k.middleCols(h * dh, dh).transpose() * scale);
      for (Eigen::Index i = 0; i < T; ++i) {
        auto live = s.row(i).head(i + 1).array();
        live = (live - live.maxCoeff()).exp();
        live /= live.sum();
      }
      c.attn_concat.middleCols(h * dh, dh).noalias() = s.triangularView<Eigen::Lower>() * c.v.middleCols(h * dh, dh);
      c.probs[static_cast<std::size_t>(h)] = std::move(s);
    }
    x += (c.attn_concat * L.wo).rowwise() + L.bo.row(0);
    if (cache) c.x_mid = x;
    c.h2 = detail::layer_norm(x, L.ln2_g, L.ln2_b, &c.ln2);
    c.pre_act = (c.h2 * L.w1).rowwise() + L.b1.row(0);
    c.act = c.pre_act.unaryExpr([](double a) { return detail::gelu(a); });
    x += (c.act * L.w2).rowwise() + L.b2.row(0);
  }
  detail::LayerNormCache lnf;
  Matrix hf = detail::layer_norm(x, p.lnf_g, p.lnf_b, &lnf);
  Matrix logits = (hf * p.w_out).rowwise() + p.b_out.row(0);
  if (cache) {
    cache->sources = std::move(sources);
    cache->lnf = std::move(lnf);
    cache->final_hidden = std::move(hf);
  }
  return logits;
}

// Weighted masked next-token NLL: position t-1 predicts ids[t] wherever
// mask.contributes[t]. Normalized by the number of contributing positions.
// If `dlogits` is given it receives dLoss/dlogits.
inline double sequence_loss(const Matrix& logits, const ModelInput& in, const LossMask& mask, Matrix* dlogits = nullptr) {
  const Eigen::Index T = logits.rows();
  if (mask.contributes.size() != static_cast<std::size_t>(T) || in.ids.size() != static_cast<std::size_t>(T))
    throw Error(Errc::invalid_argument, "loss mask and logits disagree in length");
  const std::size_t n_valid = mask.n_valid();
  if (n_valid == 0) throw Error(Errc::invalid_argument, "no supervised positions");
  const RowMatrix rows = logits;
  RowMatrix drows;
  if (dlogits) drows.setZero(logits.rows(), logits.cols());
  double loss = 0.0;
  for (Eigen::Index t = 1; t < T; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    if (!mask.contributes[ts]) continue;
    const std::uint32_t target = in.ids[ts];
    if (target >= static_cast<std::uint32_t>(logits.cols())) throw Error(Errc::invalid_argument, "target id out of range");
    const auto row = rows.row(t - 1);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    const double w = mask.weight[ts];
    loss -= w * (row[target] - lse);
    if (dlogits) {
      auto drow = drows.row(t - 1);
      drow = (row.array() - lse).exp().matrix() * (w / static_cast<double>(n_valid));
      drow[target] -= w / static_cast<double>(n_valid);
    }
  }
  if (dlogits) *dlogits = drows;
  return loss / static_cast<double>(n_valid);
}

// Accumulates parameter gradients of the loss whose logits gradient is
// `dlogits` into `grads`.
inline void backward(const Params& p, const ModelConfig& cfg, const ModelInput& in, const ForwardCache& cache,
                     const Matrix& dlogits, Params& grads) {
  const Eigen::Index T = dlogits.rows();
  const int H = cfg.heads, dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  grads.w_out += cache.final_hidden.transpose() * dlogits;
  grads.b_out += dlogits.colwise().sum();
  Matrix dx = detail::layer_norm_backward(dlogits * p.w_out.transpose(), cache.lnf, p.lnf_g, grads.lnf_g, grads.lnf_b);

  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const auto& L = p.layers[li];
    auto& G = grads.layers[li];
    const auto& c = cache.layers[li];

    // MLP branch
    G.w2 += c.act.transpose() * dx;
    G.b2 += dx.colwise().sum();
    Matrix dact = dx * L.w2.transpose();
    Matrix dpre = dact.array() * c.pre_act.unaryExpr([](double a) { return detail::gelu_grad(a); }).array();
    G.w1 += c.h2.transpose() * dpre;
    G.b1 += dpre.colwise().sum();
    dx += detail::layer_norm_backward(dpre * L.w1.transpose(), c.ln2, L.ln2_g, G.ln2_g, G.ln2_b);

    // Attention branch
    G.wo += c.attn_concat.transpose() * dx;
    G.bo += dx.colwise().sum();
    const Matrix dconcat = dx * L.wo.transpose();
    Matrix dq(T, cfg.d_model), dk(T, cfg.d_model), dv(T, cfg.d_model);
    for (int h = 0; h < H; ++h) {
      const RowMatrix& P = c.probs[static_cast<std::size_t>(h)];
      const auto dO = dconcat.middleCols(h * dh, dh);
      dv.middleCols(h * dh, dh).noalias() = P.transpose().triangularView<Eigen::Upper>() * dO;
      RowMatrix dS(T, T);
      dS.noalias() = dO * c.v.middleCols(h * dh, dh).transpose();
      for (Eigen::Index i = 0; i < T; ++i) {
        auto row = dS.row(i).head(i + 1).array();
        const auto p = P.row(i).head(i + 1).array();
        const double rowdot = (row * p).sum();
        row = p * (row - rowdot) * scale;
      }
      dq.middleCols(h * dh, dh).noalias() = dS.triangularView<Eigen::Lower>() * c.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() = dS.transpose().triangularView<Eigen::Upper>() * c.q.middleCols(h * dh, dh);
    }
    G.wq += c.h1.transpose() * dq;
    G.bq += dq.colwise().sum();
    G.wk += c.h1.transpose() * dk;
    G.bk += dk.colwise().sum();
    G.wv += c.h1.transpose() * dv;
    G.bv += dv.colwise().sum();
    const Matrix dh1 = dq * L.wq.transpose() + dk * L.wk.transpose() + dv * L.wv.transpose();
    dx += detail::layer_norm_backward(dh1, c.ln1, L.ln1_g, G.ln1_g, G.ln1_b);
  }

  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& s = cache.sources[static_cast<std::size_t>(t)];
    const auto row = dx.row(t);
    grads.pos_emb.row(t) += row;
    switch (s.kind) {
      case detail::SlotSource::Token: grads.tok_emb.row(in.ids[static_cast<std::size_t>(t)]) += row; break;
      case detail::SlotSource::ImageVec:
        grads.img_proj += *s.vec * row;
        grads.img_bias += row;
        break;
      case detail::SlotSource::TextVec:
        grads.txt_proj += *s.vec * row;
        grads.txt_bias += row;
        break;
      case detail::SlotSource::NullImage: grads.null_img += row; break;
      case detail::SlotSource::NullText: grads.null_txt += row; break;
      case detail::SlotSource::NullRegion: grads.null_region += row; break;
    }
  }
}

// Loss and gradients for one sequence.
inline double loss_and_gradients(const Params& p, const ModelConfig& cfg, const ModelInput& in,
                                 const ConditionSet& conds, const LossMask& mask, Params& grads) {
  ForwardCache cache;
  const Matrix logits = forward(p, cfg, in, conds, &cache);
  Matrix dlogits;
  const double loss = sequence_loss(logits, in, mask, &dlogits);
  backward(p, cfg, in, cache, dlogits, grads);
  return loss;
}

// ---------------------------------------------------------------------------
// Incremental decoding with a key/value cache.

class IncrementalDecoder {
 public:
  IncrementalDecoder(const Params& p, const ModelConfig& cfg, const ConditionSet& conds)
      : p_(p), cfg_(cfg), conds_(conds) {
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      keys_.emplace_back(cfg.context_len, cfg.d_model);
      values_.emplace_back(cfg.context_len, cfg.d_model);
    }
  }

  std::size_t length() const { return length_; }

  // Feeds one vocabulary id and returns the next-token logits.
  RowVector push_token(std::uint32_t id) { return push(id, {}); }

  // Feeds a condition slot and returns the next-token logits.
  RowVector push_slot(SlotKind kind, int region) {
    ConditionSlot s{length_, kind, region};
    return push(kConditionSlotId, s);
  }

 private:
  RowVector push(std::uint32_t id, std::optional<ConditionSlot> slot) {
    if (static_cast<int>(length_) >= cfg_.context_len) throw Error(Errc::invalid_argument, "context length exceeded");
    ModelInput single;
    single.ids = {id};
    detail::SlotSource src;
    if (slot) {
      ModelInput probe;
      probe.ids = {kConditionSlotId};
      ConditionSlot s = *slot;
      s.position = 0;
      probe.slots = {s};
      src = detail::resolve_sources(probe, conds_, cfg_.cond_dim)[0];
    }
    const int d = cfg_.d_model, H = cfg_.heads, dh = cfg_.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto n = static_cast<Eigen::Index>(length_);
    Matrix x = detail::input_row(p_, id, src, length_);
    for (std::size_t l = 0; l < p_.layers.size(); ++l) {
      const auto& L = p_.layers[l];
      const Matrix h1 = detail::layer_norm(x, L.ln1_g, L.ln1_b, nullptr);
      const RowVector q = h1 * L.wq + L.bq;
      keys_[l].row(n) = h1 * L.wk + L.bk;
      values_[l].row(n) = h1 * L.wv + L.bv;
      RowVector concat(d);
      for (int h = 0; h < H; ++h) {
        Eigen::VectorXd s = keys_[l].block(0, h * dh, n + 1, dh) * q.segment(h * dh, dh).transpose() * scale;
        s = (s.array() - s.maxCoeff()).exp();
        s /= s.sum();
        concat.segment(h * dh, dh) = s.transpose() * values_[l].block(0, h * dh, n + 1, dh);
      }
      x += concat * L.wo + L.bo;
      const Matrix h2 = detail::layer_norm(x, L.ln2_g, L.ln2_b, nullptr);
      const Matrix act = (h2 * L.w1 + L.b1).unaryExpr([](double a) { return detail::gelu(a); });
      x += act * L.w2 + L.b2;
    }
    const Matrix hf = detail::layer_norm(x, p_.lnf_g, p_.lnf_b, nullptr);
    ++length_;
    return hf * p_.w_out + p_.b_out;
  }

  const Params& p_;
  const ModelConfig& cfg_;
  const ConditionSet& conds_;
  std::vector<Matrix> keys_, values_;
  std::size_t length_ = 0;
};

}  // namespace hairlang
