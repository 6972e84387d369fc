#pragma once

#include "hairlang/armodel.hpp"
#include "hairlang/guides.hpp"

#include <sstream>

namespace hairlang {

// Every pipeline constant, by named profile.
struct Profile {
  std::string name;
  int strand_points = kDefaultStrandPoints;
  int k_feat = kDefaultFeatureCoefficients;
  int k_geo = 4;
  int n_guide = kDefaultGuideCount;
  int pool_samples = kDefaultPoolSamples;
  double scalp_radius = kDefaultScalpRadius;
  RegionPartition partition = RegionPartition::default_partition();
  VocabConfig vocab;
  PQTrainConfig pq;
  int density_iterations = 50;
  ModelConfig model;  // vocab_size is filled from `vocab`
  TrainConfig train;

  ModelConfig model_config() const {
    ModelConfig m = model;
    m.vocab_size = static_cast<int>(Vocabulary(vocab).size());
    return m;
  }
};

inline Profile paper_profile() {
  Profile p;
  p.name = "paper";
  p.vocab = {8192, 2048, 512};
  p.model = {};
  p.train.lr = 5e-5;
  p.train.min_lr = 1e-6;
  return p;
}

inline Profile test_profile() {
  Profile p;
  p.name = "test";
  p.strand_points = 32;
  p.n_guide = 64;
  p.vocab = {64, 32, 16};
  p.pq.iterations = 30;
  p.density_iterations = 20;
  p.model.d_model = 32;
  p.model.layers = 2;
  p.model.heads = 2;
  p.model.context_len = 2048;
  p.model.cond_dim = 16;
  p.train.steps = 2000;
  p.train.lr = 3e-4;
  p.train.min_lr = 1e-6;
  return p;
}

inline Profile profile_by_name(std::string_view name) {
  if (name == "paper") return paper_profile();
  if (name == "test") return test_profile();
  throw Error(Errc::invalid_argument, "unknown profile: " + std::string(name));
}

// "key = value" lines; '#' starts a comment. Unknown keys are errors.
inline void apply_config(Profile& p, const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t\r"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw Error(Errc::parse, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::istringstream vs(trim(line.substr(eq + 1)));
    auto fail = [&] { throw Error(Errc::parse, "config line " + std::to_string(lineno) + ": bad value for " + key); };
    auto get_int = [&](int& out) { if (!(vs >> out)) fail(); };
    auto get_real = [&](double& out) { if (!(vs >> out)) fail(); };
    auto get_u64 = [&](std::uint64_t& out) { if (!(vs >> out)) fail(); };

    if (key == "L") get_int(p.strand_points);
    else if (key == "k_feat") get_int(p.k_feat);
    else if (key == "k_geo") get_int(p.k_geo);
    else if (key == "n_guide") get_int(p.n_guide);
    else if (key == "pool_samples") get_int(p.pool_samples);
    else if (key == "scalp_radius") get_real(p.scalp_radius);
    else if (key == "coarse_entries") get_int(p.vocab.coarse_entries);
    else if (key == "style_entries") get_int(p.vocab.style_entries);
    else if (key == "density_entries") get_int(p.vocab.density_entries);
    else if (key == "pq_iterations") get_int(p.pq.iterations);
    else if (key == "density_iterations") get_int(p.density_iterations);
    else if (key == "d_model") get_int(p.model.d_model);
    else if (key == "layers") get_int(p.model.layers);
    else if (key == "heads") get_int(p.model.heads);
    else if (key == "context_len") get_int(p.model.context_len);
    else if (key == "cond_dim") get_int(p.model.cond_dim);
    else if (key == "model_seed") get_u64(p.model.seed);
    else if (key == "steps") get_int(p.train.steps);
    else if (key == "lr") get_real(p.train.lr);
    else if (key == "min_lr") get_real(p.train.min_lr);
    else if (key == "weight_decay") get_real(p.train.weight_decay);
    else if (key == "grad_clip") get_real(p.train.grad_clip);
    else if (key == "p_img") get_real(p.train.p_img);
    else if (key == "p_txt") get_real(p.train.p_txt);
    else if (key == "p_null") get_real(p.train.p_null);
    else if (key == "mode_probs") {
      for (auto& x : p.train.mode_probs) get_real(x);
    } else if (key.rfind("region.", 0) == 0) {
      const auto r = region_from_name(key.substr(7));
      if (!r) throw Error(Errc::parse, "config line " + std::to_string(lineno) + ": unknown region " + key.substr(7));
      UVRect& rect = p.partition.rect(*r);
      get_real(rect.u0);
      get_real(rect.v0);
      get_real(rect.u1);
      get_real(rect.v1);
    } else {
      throw Error(Errc::parse, "config line " + std::to_string(lineno) + ": unknown key " + key);
    }
    std::string extra;
    if (vs >> extra) fail();
  }
  validate_partition(p.partition);
}

}  // namespace hairlang
