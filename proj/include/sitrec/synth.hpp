#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sitrec/dataset.hpp"

namespace sitrec {

// Synthetic benchmark generator. Features are noisy sums of latent verb and
// noun prototypes (nouns shared across roles and verbs), so compositional
// potentials have genuine structure to exploit; role-noun frequencies follow
// a power law so a rare subset always exists.
struct SynthConfig {
  int n_verbs = 10;
  int roles_per_frame = 2;
  int n_nouns = 50;
  int p = 64;
  int cands_per_role = 12;     // per (verb, role), excluding the null noun
  double exponent = 1.5;       // power-law exponent over within-pool noun rank
  double noise = 0.25;         // feature noise scale relative to unit prototypes
  double p_null = 0.1;         // probability a role is annotated null
  int annotators = 1;          // annotations per example
  double annotator_null = 0.1; // chance an extra annotator drops a role to null
  int train_size = 2000;
  int dev_size = 500;

  void validate() const;
};

struct SynthProtos {
  int p = 0;
  double noise = 0.0;
  Eigen::MatrixXd verb_protos;  // p x |V|
  Eigen::MatrixXd noun_protos;  // p x |N| (col 0, the null noun, is zero)
  Eigen::VectorXd popularity;   // |N|, unnormalized sampling weights
};

struct SynthData {
  Lexicon lexicon;
  std::vector<Example> train;
  std::vector<Example> dev;
  SynthProtos protos;
};

// Deterministic in (cfg, seed). Throws ConfigError on infeasible configs.
SynthData synth_generate(const SynthConfig& cfg, std::uint64_t seed);

void save_protos(const std::filesystem::path& path, const SynthProtos& protos);
SynthProtos load_protos(const std::filesystem::path& path);

}  // namespace sitrec
