#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "acvg/actor.hpp"
#include "acvg/dataset.hpp"
#include "acvg/generator.hpp"
#include "acvg/losses.hpp"

namespace acvg {

// Run configuration. Every field can be set from a flat `key = value` config
// file whose keys are exactly these field names; unknown keys are rejected.
struct PhaseConfig {
  int n_g = 2000;
  int n_a = 1000;
  int n_dual = 1000;
  double lr = 1e-4;
  int batch_size = 4;
  int n_past = 5;
  int t_train = 10;
  int clip_len = 50;
  int clip_gap = 10;
  int lambda1 = 1;
  int lambda2 = 1;
  int lambda_a = 2;
  double mu = 1e-4;
  double grad_clip = 5.0;
  std::uint64_t seed = 0;

  int gen_width1 = 16, gen_width2 = 32, gen_width3 = 64;
  int gen_lstm_hidden = 64;
  int actor_hidden = 2;
  int actor_dense_hidden = 32;
  int actor_chi_width1 = 16, actor_chi_width2 = 8;
  int actor_chi_stages = 2;
  double actor_dropout = 0.0;
  bool actor_center = false;
  int disc_width1 = 16, disc_width2 = 32, disc_width3 = 64, disc_width4 = 64;

  void validate() const;
  // Canonical "key=value" lines; used for the run banner and fingerprint.
  std::string summary() const;
  std::uint64_t fingerprint() const;
  LossWeights loss_weights(int beta, int gamma) const;
};

void apply_config_entry(PhaseConfig& cfg, const std::string& key, const std::string& value);
PhaseConfig parse_config_file(const std::string& path);

struct Models {
  std::unique_ptr<Generator<float>> generator;
  std::unique_ptr<Actor<float>> actor;
  std::unique_ptr<Discriminator<float>> discriminator;
};

// Builds all three networks from the run config and the dataset geometry.
Models build_models(const PhaseConfig& cfg, int frame_h, int frame_w, int frame_channels,
                    int action_dim);

// ---------------------------------------------------------------------------
// Checkpoints: one file holding the named parameters of all three networks,
// their optimizer moments, the global step and a config fingerprint.
// ---------------------------------------------------------------------------

struct Checkpoint {
  std::uint32_t version = 1;
  std::map<std::string, Tensor<float>> params;
  std::map<std::string, Tensor<float>> moments;
  std::uint64_t global_step = 0;
  std::uint64_t config_fingerprint = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint snapshot_models(const Models& models, std::uint64_t global_step,
                           std::uint64_t fingerprint);
void restore_models(Models& models, const Checkpoint& ckpt);

struct LossRow {
  long step = 0;
  std::string phase;
  double recon_image = 0.0, recon_flow = 0.0, adv = 0.0, action = 0.0, total = 0.0;
};

void write_loss_log(const std::string& path, const std::vector<LossRow>& rows);
std::vector<LossRow> read_loss_log(const std::string& path);

// ---------------------------------------------------------------------------
// Three-phase trainer. Phase 1 trains the generator (with the discriminator)
// under a constant-action rollout; phase 2 trains the actor against the
// frozen generator; phase 3 trains generator and actor jointly with the
// delayed in-the-loop actor.
// ---------------------------------------------------------------------------

class Trainer {
 public:
  Trainer(const PhaseConfig& cfg, const DataSet& data);

  std::vector<LossRow> run_generator_phase(int iterations);
  std::vector<LossRow> run_actor_phase(int iterations);
  std::vector<LossRow> run_dual_phase(int iterations);
  // All three in sequence (n_g, n_a, n_dual); phase_ckpt, when non-empty, is
  // called with ("generator"|"actor"|"dual") after each phase completes.
  std::vector<LossRow> run_full(const std::function<void(const std::string&)>& phase_ckpt = {});

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

  Models& models() { return models_; }
  const PhaseConfig& config() const { return cfg_; }
  long global_step() const { return global_step_; }

 private:
  ClipBatch sample_batch(Rng& rng) const;
  LossRow generator_step();
  LossRow actor_step();
  LossRow dual_step();
  void check_finite(double total) const;
  void note_clip(bool fired, const char* which);

  PhaseConfig cfg_;
  std::vector<SequenceRecord> clips_;
  Models models_;
  Rng data_rng_;
  long global_step_ = 0;
  bool clip_was_active_ = false;
};

}  // namespace acvg
