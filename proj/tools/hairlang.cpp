#include "hairlang/hairlang.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

using namespace hairlang;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kOther = 1, kUsage = 2, kMissingFile = 3, kHashMismatch = 4, kInvalid = 5 };

struct Globals {
  std::string profile = "paper";
  std::string config;
  std::uint64_t seed = 0;

  Profile load() const {
    Profile p = profile_by_name(profile);
    if (!config.empty()) {
      const auto text = read_file(config);
      apply_config(p, std::string(text.begin(), text.end()));
    }
    return p;
  }
};

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw Error(Errc::io, "missing file: " + path);
}

std::string path_with(const std::string& base, const std::string& suffix) { return base + suffix; }

Vocabulary vocab_of(const Profile& p) { return Vocabulary(p.vocab); }

ScalpManifold scalp_of(const Profile& p) {
  ScalpManifold s;
  s.radius = p.scalp_radius;
  return s;
}

Codebook load_codebook(const std::string& path, ComponentKind kind) {
  require_file(path);
  Codebook cb = decode_codebook(read_file(path));
  if (cb.kind != kind)
    throw Error(Errc::invalid_argument, path + ": expected a " + (kind == ComponentKind::Coarse ? "coarse" : "style") +
                                            " codebook");
  return cb;
}

DensityCodebook load_density_codebook(const std::string& path) {
  require_file(path);
  return decode_density_codebook(read_file(path));
}

Hairstyle load_hair_checked(const std::string& path) {
  require_file(path);
  return load_hair(path);
}

TokenizedHairstyle load_tokens(const std::string& path, const Vocabulary& vocab) {
  require_file(path);
  return decode_tokenized(read_file(path), vocab);
}

// Condition file lines: "<id> image|text|region.<Name> v1 ... v_cond_dim".
ConditionSet load_conditions(const std::string& path, const std::string& id, int cond_dim) {
  ConditionSet c;
  if (path.empty()) return c;
  require_file(path);
  const auto bytes = read_file(path);
  std::istringstream is(std::string(bytes.begin(), bytes.end()));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string key, kind;
    if (!(ls >> key) || key[0] == '#') continue;
    if (!(ls >> kind)) throw Error(Errc::parse, path + ":" + std::to_string(lineno) + ": missing slot kind");
    Eigen::VectorXd v(cond_dim);
    for (int i = 0; i < cond_dim; ++i)
      if (!(ls >> v[i])) throw Error(Errc::parse, path + ":" + std::to_string(lineno) + ": expected " + std::to_string(cond_dim) + " values");
    if (key != id) continue;
    if (kind == "image") c.image = v;
    else if (kind == "text") c.global_text = v;
    else if (kind.rfind("region.", 0) == 0) {
      const auto r = region_from_name(kind.substr(7));
      if (!r) throw Error(Errc::parse, path + ":" + std::to_string(lineno) + ": unknown region " + kind);
      c.region_text[static_cast<std::size_t>(*r)] = v;
    } else {
      throw Error(Errc::parse, path + ":" + std::to_string(lineno) + ": unknown slot kind " + kind);
    }
  }
  return c;
}

std::vector<Decomposition> decompose_all(const Hairstyle& h, int k_geo) {
  std::vector<Decomposition> out;
  out.reserve(h.strands.size());
  for (const auto& s : h.strands) out.push_back(decompose(s, k_geo));
  return out;
}

// ---------------------------------------------------------------------------

int cmd_synth(const Globals& g, const std::string& family, int strands, const std::string& out,
              std::map<std::string, double>& overrides) {
  const Profile p = g.load();
  const auto f = family_from_name(family);
  if (!f) throw Error(Errc::invalid_argument, "unknown family: " + family);
  StyleFamily spec = StyleFamily::defaults(*f);
  spec.strand_count = strands;
  spec.points = p.strand_points;
  spec.seed = g.seed;
  spec.scalp = scalp_of(p);
  for (const auto& [k, v] : overrides) {
    if (k == "droop") spec.droop = v;
    else if (k == "wave-amplitude") spec.wave_amplitude = v;
    else if (k == "wave-frequency") spec.wave_frequency = v;
    else if (k == "helix-radius") spec.helix_radius = v;
    else if (k == "helix-pitch") spec.helix_pitch = v;
    else if (k == "length-min") spec.length_min = v;
    else if (k == "length-max") spec.length_max = v;
  }
  const Hairstyle h = generate_hairstyle(spec, p.partition);
  save_hair(out, h);
  write_text_atomic(path_with(out, ".manifest"), family_manifest(spec));
  std::cout << "wrote " << out << " (" << h.strands.size() << " strands)\n";
  return kOk;
}

int cmd_guides(const Globals& g, const std::string& in, const std::string& out_dir) {
  const Profile p = g.load();
  const Hairstyle h = load_hair_checked(in);
  GuideConfig cfg;
  cfg.k_feat = p.k_feat;
  cfg.n_guide = p.n_guide;
  cfg.seed = g.seed;
  const GuideSet gs = extract_guides(h, cfg, p.partition);
  const auto pools = sample_cluster_strands(gs, h, p.pool_samples, g.seed + 1);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_hair(dir / "guides.hair", Hairstyle{gs.guides, gs.scalp});
  save_hair(dir / "pools.hair", Hairstyle{pools, gs.scalp});
  write_file_atomic(dir / "density.raw", encode_density_raster(gs.density));
  write_text_atomic(dir / "guides.manifest",
                    "# pool_samples " + std::to_string(p.pool_samples) + "\n" + guide_manifest(gs));
  std::cout << "wrote " << gs.size() << " guides to " << out_dir << "\n";
  return kOk;
}

int cmd_decompose(const Globals& g, const std::string& in, const std::string& out) {
  const Profile p = g.load();
  const Hairstyle h = load_hair_checked(in);
  write_file_atomic(out, encode_decompositions(decompose_all(h, p.k_geo)));
  std::cout << "wrote " << out << " (" << h.strands.size() << " decompositions)\n";
  return kOk;
}

int cmd_train_codebook(const Globals& g, const std::string& kind, const std::vector<std::string>& inputs,
                       const std::string& out) {
  const Profile p = g.load();
  if (inputs.empty()) throw Error(Errc::invalid_argument, "no inputs");
  if (kind == "density") {
    std::vector<DensityMap> maps;
    for (const auto& in : inputs) {
      require_file(in);
      maps.push_back(decode_density_raster(read_file(in)));
    }
    const auto cb = train_density_codebook(maps, p.vocab.density_entries, g.seed, p.density_iterations);
    write_file_atomic(out, encode_density_codebook(cb));
    std::cout << "wrote " << out << " (patch mse " << density_patch_mse(maps.front(), cb) << ")\n";
    return kOk;
  }
  const bool coarse = kind == "coarse";
  if (!coarse && kind != "style") throw Error(Errc::invalid_argument, "kind must be coarse, style or density");
  std::vector<StrandFeature> features;
  for (const auto& in : inputs) {
    const Hairstyle h = load_hair_checked(in);
    for (const auto& d : decompose_all(h, p.k_geo))
      features.push_back(coarse ? strand_to_feature(d.backbone) : strand_to_feature(d.residual));
  }
  PQTrainConfig cfg = p.pq;
  cfg.seed = g.seed;
  const auto cb = train_pq_codebook(features, coarse ? p.vocab.coarse_entries : p.vocab.style_entries,
                                    coarse ? ComponentKind::Coarse : ComponentKind::Style, p.strand_points, cfg);
  write_file_atomic(out, encode_codebook(cb));
  std::cout << "wrote " << out << " (utilization " << codebook_utilization(features, cb) << ", error "
            << quantization_error(features, cb) << ")\n";
  return kOk;
}

int cmd_tokenize(const Globals& g, const std::string& guides, const std::string& density, const std::string& pools,
                 const std::string& ccb_path, const std::string& scb_path, const std::string& dcb_path,
                 const std::string& out) {
  const Profile p = g.load();
  const Vocabulary vocab = vocab_of(p);
  const Codebook ccb = load_codebook(ccb_path, ComponentKind::Coarse);
  const Codebook scb = load_codebook(scb_path, ComponentKind::Style);
  if (ccb.entries != p.vocab.coarse_entries || scb.entries != p.vocab.style_entries)
    throw Error(Errc::hash_mismatch, "codebook sizes do not match the profile vocabulary");
  const DensityCodebook dcb = load_density_codebook(dcb_path);
  if (dcb.entries() != p.vocab.density_entries)
    throw Error(Errc::hash_mismatch, "density codebook size does not match the profile vocabulary");
  const Hairstyle h = load_hair_checked(guides);
  require_file(density);
  TokenizedHairstyle t;
  for (const auto& s : h.strands) t.strands.push_back(tokenize_strand(s, p.k_geo, ccb, scb, p.partition));
  t.density = encode_density(decode_density_raster(read_file(density)), dcb);
  if (!pools.empty()) {
    const Hairstyle ph = load_hair_checked(pools);
    if (h.strands.empty() || ph.strands.size() % h.strands.size() != 0)
      throw Error(Errc::invalid_argument, "pool file size is not a multiple of the guide count");
    const std::size_t per = ph.strands.size() / h.strands.size();
    t.pools.resize(h.strands.size());
    for (std::size_t i = 0; i < ph.strands.size(); ++i)
      t.pools[i / per].push_back(tokenize_strand(ph.strands[i], p.k_geo, ccb, scb, p.partition));
  }
  write_file_atomic(out, encode_tokenized(t, vocab));
  std::cout << "wrote " << out << " (" << t.strands.size() << " strands, " << 2 * kHeads * t.strands.size()
            << " geometry tokens)\n";
  return kOk;
}

int cmd_detokenize(const Globals& g, const std::string& tokens, const std::string& ccb_path,
                   const std::string& scb_path, const std::string& dcb_path, const std::string& density_out,
                   const std::string& out) {
  const Profile p = g.load();
  const Vocabulary vocab = vocab_of(p);
  const TokenizedHairstyle t = load_tokens(tokens, vocab);
  const Codebook ccb = load_codebook(ccb_path, ComponentKind::Coarse);
  const Codebook scb = load_codebook(scb_path, ComponentKind::Style);
  Hairstyle h;
  h.scalp = scalp_of(p);
  for (const auto& s : t.strands) h.strands.push_back(detokenize_strand(s, ccb, scb, h.scalp));
  if (!density_out.empty()) {
    if (dcb_path.empty()) throw Error(Errc::invalid_argument, "--density-out needs --density-codebook");
    write_file_atomic(density_out, encode_density_raster(decode_density(t.density, load_density_codebook(dcb_path))));
  }
  save_hair(out, h);
  std::cout << "wrote " << out << " (" << h.strands.size() << " strands)\n";
  return kOk;
}

int cmd_serialize(const Globals& g, const std::string& tokens, const std::string& mode_name_arg,
                  const std::string& out_prefix) {
  const Profile p = g.load();
  const Vocabulary vocab = vocab_of(p);
  const TokenizedHairstyle t = load_tokens(tokens, vocab);
  std::vector<Mode> modes;
  if (mode_name_arg == "all") {
    modes = {Mode::Layout, Mode::Coarse, Mode::Style};
  } else {
    const auto m = mode_from_name(mode_name_arg);
    if (!m) throw Error(Errc::invalid_argument, "unknown mode: " + mode_name_arg);
    modes = {*m};
  }
  for (Mode m : modes) {
    const TokenSequence seq = serialize(t.strands, t.density, m, vocab);
    const std::string path = out_prefix + "." + mode_name(m) + ".hts";
    save_token_file(path, seq, vocab);
    std::cout << "wrote " << path << " (" << seq.ids.size() << " positions)\n";
  }
  return kOk;
}

int cmd_parse(const Globals& g, const std::string& in) {
  const Profile p = g.load();
  const Vocabulary vocab = vocab_of(p);
  require_file(in);
  require_file(manifest_path(in).string());
  const TokenSequence seq = load_token_file(in, vocab);
  const ParsedSequence parsed = parse(seq.ids, vocab, seq.mode);
  std::cout << "ok mode=" << mode_name(parsed.mode) << " strands=" << parsed.strand_count()
            << " positions=" << seq.ids.size() << "\n";
  return kOk;
}

int cmd_train(const Globals& g, const std::vector<std::string>& tokens, const std::string& conds_path,
              const std::string& resume, const std::string& out, int steps, const std::string& modes,
              int log_every) {
  Profile p = g.load();
  if (steps > 0) p.train.steps = steps;
  if (!modes.empty()) {
    std::istringstream ms(modes);
    char comma;
    if (!(ms >> p.train.mode_probs[0] >> comma >> p.train.mode_probs[1] >> comma >> p.train.mode_probs[2]))
      throw Error(Errc::invalid_argument, "--modes expects three comma-separated probabilities");
  }
  p.train.seed = g.seed;
  const Vocabulary vocab = vocab_of(p);
  ModelConfig model = p.model_config();
  model.seed = p.model.seed ^ g.seed;
  std::vector<TrainingExample> data;
  for (const auto& path : tokens) {
    TokenizedHairstyle t = load_tokens(path, vocab);
    TrainingExample ex;
    ex.strands = std::move(t.strands);
    ex.density = std::move(t.density);
    ex.pools = std::move(t.pools);
    ex.conds = load_conditions(conds_path, fs::path(path).stem().string(), model.cond_dim);
    data.push_back(std::move(ex));
  }
  std::optional<Checkpoint> start;
  if (!resume.empty()) {
    require_file(resume);
    start = load_checkpoint(resume);
    if (start->model.hash() != model.hash())
      throw Error(Errc::hash_mismatch, "checkpoint model config does not match the profile");
    check_checkpoint_vocab(*start, vocab);
  }
  const auto result = train(std::move(data), vocab, model, p.train, std::move(start), [&](const StepRecord& r) {
    if (log_every > 0 && (r.step % log_every == 0 || r.step + 1 == p.train.steps))
      std::cout << "step " << r.step << " mode " << mode_name(r.mode) << " loss " << r.loss << " lr " << r.lr << "\n";
  });
  save_checkpoint(out, result.checkpoint);
  if (result.diverged)
    throw Error(Errc::diverged, "non-finite loss at step " + std::to_string(result.checkpoint.step) +
                                    "; saved last finite checkpoint to " + out);
  std::cout << "wrote " << out << " (step " << result.checkpoint.step << ")\n";
  return kOk;
}

int cmd_sample(const Globals& g, const std::string& ckpt_path, const std::string& conds_path, const std::string& cond_id,
               double temperature, int top_k, int max_units, const std::string& out_prefix) {
  const Profile p = g.load();
  const Vocabulary vocab = vocab_of(p);
  require_file(ckpt_path);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  check_checkpoint_vocab(ckpt, vocab);
  const ConditionSet conds = load_conditions(conds_path, cond_id, ckpt.model.cond_dim);
  DecodeConfig dc;
  dc.temperature = temperature;
  dc.top_k = top_k;
  dc.seed = g.seed;
  if (max_units > 0) dc.max_units_per_region = max_units;
  const PhasedSample s = sample_phased(conds, ckpt, vocab, dc, p.partition);
  for (const auto* seq : {&s.layout, &s.coarse, &s.style}) {
    parse(seq->ids, vocab, seq->mode);
    save_token_file(out_prefix + "." + mode_name(seq->mode) + ".hts", *seq, vocab);
  }
  TokenizedHairstyle t;
  t.strands = s.strands;
  t.density = s.density;
  write_file_atomic(out_prefix + ".stk", encode_tokenized(t, vocab));
  std::cout << "wrote " << out_prefix << ".{layout,coarse,style}.hts and " << out_prefix << ".stk (" << s.strands.size()
            << " strands)\n";
  return kOk;
}

int cmd_export_obj(const Globals& g, const std::string& in, const std::string& density, int dense,
                   const std::string& out) {
  const Profile p = g.load();
  const Hairstyle h = load_hair_checked(in);
  std::vector<Strand> strands = h.strands;
  if (dense > 0) {
    if (density.empty()) throw Error(Errc::invalid_argument, "--dense needs --density");
    require_file(density);
    strands = interpolate_dense(h.strands, h.scalp, decode_density_raster(read_file(density)), dense, g.seed);
  }
  write_text_atomic(out, export_obj(strands));
  std::cout << "wrote " << out << " (" << strands.size() << " polylines)\n";
  (void)p;
  return kOk;
}

// Loads any pipeline file by its magic and checks it.
int cmd_inspect(const Globals& g, const std::string& in) {
  const Profile p = g.load();
  const Vocabulary vocab = vocab_of(p);
  require_file(in);
  const auto bytes = read_file(in);
  const std::string magic = bytes.size() >= 4 ? std::string(bytes.begin(), bytes.begin() + 4) : "";
  if (magic == "HAIR") {
    const Hairstyle h = decode_hair(bytes);
    for (const auto& s : h.strands) validate_strand(s, h.scalp, h.strands.front().size());
    std::cout << "ok hair strands=" << h.strands.size() << "\n";
  } else if (magic == "HDEC") {
    std::cout << "ok decompositions=" << decode_decompositions(bytes).size() << "\n";
  } else if (magic == "HPQ1") {
    const Codebook cb = decode_codebook(bytes);
    std::cout << "ok codebook entries=" << cb.entries << "\n";
  } else if (magic == "HDQ1") {
    std::cout << "ok density-codebook entries=" << decode_density_codebook(bytes).entries() << "\n";
  } else if (magic == "HSTK") {
    std::cout << "ok strand-tokens strands=" << decode_tokenized(bytes, vocab).strands.size() << "\n";
  } else if (magic == "HTS1") {
    return cmd_parse(g, in);
  } else if (magic == "HCKP") {
    const Checkpoint c = decode_checkpoint(bytes);
    check_checkpoint_vocab(c, vocab);
    std::cout << "ok checkpoint step=" << c.step << " parameters=" << c.params.parameter_count() << "\n";
  } else if (fs::path(in).extension() == ".obj") {
    std::cout << "ok obj polylines=" << parse_obj_polylines(std::string(bytes.begin(), bytes.end())).size() << "\n";
  } else if (fs::path(in).extension() == ".raw") {
    const DensityMap m = decode_density_raster(bytes);
    std::cout << "ok density resolution=" << m.resolution << "\n";
  } else {
    throw Error(Errc::format, "unrecognized file: " + in);
  }
  return kOk;
}

int exit_code(Errc c) {
  switch (c) {
    case Errc::io: return kMissingFile;
    case Errc::hash_mismatch: return kHashMismatch;
    case Errc::parse:
    case Errc::format:
    case Errc::invalid_argument:
    case Errc::degenerate: return kInvalid;
    default: return kOther;
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"hairlang: strand tokenization and autoregressive hair generation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--profile", g.profile, "Constant profile: paper or test")->check(CLI::IsMember({"paper", "test"}));
  app.add_option("--config", g.config, "key = value overrides");
  app.add_option("--seed", g.seed, "Random seed");

  std::function<int()> run;
  std::string in, out, out_dir, kind, mode = "all", density, pools, ccb, scb, dcb, density_out, conds, cond_id,
                                   resume, modes, family = "straight";
  std::vector<std::string> inputs;
  int strands = 2000, steps = 0, top_k = 0, dense = 0, log_every = 100, max_units = 0;
  double temperature = 1.0;
  std::map<std::string, double> overrides;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic hairstyle");
  synth->add_option("--family", family)->check(CLI::IsMember({"straight", "wavy", "curly"}));
  synth->add_option("--strands", strands)->check(CLI::PositiveNumber);
  synth->add_option("--out", out)->required();
  for (const char* k : {"droop", "wave-amplitude", "wave-frequency", "helix-radius", "helix-pitch", "length-min", "length-max"})
    synth->add_option_function<double>(std::string("--") + k, [&overrides, k](double v) { overrides[k] = v; });
  synth->callback([&] { run = [&] { return cmd_synth(g, family, strands, out, overrides); }; });

  auto* guides = app.add_subcommand("guides", "Cluster strands and pick guides");
  guides->add_option("--in", in)->required();
  guides->add_option("--out-dir", out_dir)->required();
  guides->callback([&] { run = [&] { return cmd_guides(g, in, out_dir); }; });

  auto* dec = app.add_subcommand("decompose", "Coarse/style decomposition of every strand");
  dec->add_option("--in", in)->required();
  dec->add_option("--out", out)->required();
  dec->callback([&] { run = [&] { return cmd_decompose(g, in, out); }; });

  auto* tcb = app.add_subcommand("train-codebook", "Train a coarse, style or density codebook");
  tcb->add_option("--kind", kind)->required()->check(CLI::IsMember({"coarse", "style", "density"}));
  tcb->add_option("--in", inputs)->required();
  tcb->add_option("--out", out)->required();
  tcb->callback([&] { run = [&] { return cmd_train_codebook(g, kind, inputs, out); }; });

  auto* tok = app.add_subcommand("tokenize", "Strands and density to tokens");
  tok->add_option("--in", in)->required();
  tok->add_option("--density", density)->required();
  tok->add_option("--pools", pools);
  tok->add_option("--coarse-codebook", ccb)->required();
  tok->add_option("--style-codebook", scb)->required();
  tok->add_option("--density-codebook", dcb)->required();
  tok->add_option("--out", out)->required();
  tok->callback([&] { run = [&] { return cmd_tokenize(g, in, density, pools, ccb, scb, dcb, out); }; });

  auto* detok = app.add_subcommand("detokenize", "Tokens back to strands");
  detok->add_option("--in", in)->required();
  detok->add_option("--coarse-codebook", ccb)->required();
  detok->add_option("--style-codebook", scb)->required();
  detok->add_option("--density-codebook", dcb);
  detok->add_option("--density-out", density_out);
  detok->add_option("--out", out)->required();
  detok->callback([&] { run = [&] { return cmd_detokenize(g, in, ccb, scb, dcb, density_out, out); }; });

  auto* ser = app.add_subcommand("serialize", "Write token sequences");
  ser->add_option("--in", in)->required();
  ser->add_option("--mode", mode)->check(CLI::IsMember({"layout", "coarse", "style", "all"}));
  ser->add_option("--out-prefix", out)->required();
  ser->callback([&] { run = [&] { return cmd_serialize(g, in, mode, out); }; });

  auto* prs = app.add_subcommand("parse", "Validate a token sequence file");
  prs->add_option("--in", in)->required();
  prs->callback([&] { run = [&] { return cmd_parse(g, in); }; });

  auto* trn = app.add_subcommand("train", "Train the autoregressive model");
  trn->add_option("--in", inputs)->required();
  trn->add_option("--conditions", conds);
  trn->add_option("--resume", resume);
  trn->add_option("--steps", steps);
  trn->add_option("--modes", modes, "layout,coarse,style probabilities");
  trn->add_option("--log-every", log_every);
  trn->add_option("--out", out)->required();
  trn->callback([&] { run = [&] { return cmd_train(g, inputs, conds, resume, out, steps, modes, log_every); }; });

  auto* smp = app.add_subcommand("sample", "Phased sampling from a checkpoint");
  smp->add_option("--checkpoint", in)->required();
  smp->add_option("--conditions", conds);
  smp->add_option("--condition-id", cond_id);
  smp->add_option("--temperature", temperature);
  smp->add_option("--top-k", top_k);
  smp->add_option("--max-units", max_units);
  smp->add_option("--out-prefix", out)->required();
  smp->callback([&] { run = [&] { return cmd_sample(g, in, conds, cond_id, temperature, top_k, max_units, out); }; });

  auto* obj = app.add_subcommand("export-obj", "Export strands as OBJ polylines");
  obj->add_option("--in", in)->required();
  obj->add_option("--density", density);
  obj->add_option("--dense", dense);
  obj->add_option("--out", out)->required();
  obj->callback([&] { run = [&] { return cmd_export_obj(g, in, density, dense, out); }; });

  auto* ins = app.add_subcommand("inspect", "Load and validate any pipeline file");
  ins->add_option("--in", in)->required();
  ins->callback([&] { run = [&] { return cmd_inspect(g, in); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return kUsage;
  }
  try {
    return run();
  } catch (const Error& e) {
    std::cerr << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return kOther;
  }
}
