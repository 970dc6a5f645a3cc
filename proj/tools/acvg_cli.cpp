#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "acvg/dataset.hpp"
#include "acvg/evaluation.hpp"
#include "acvg/gradcheck.hpp"
#include "acvg/training.hpp"

namespace {

void banner(const std::string& line) { std::cout << "[acvg] " << line << "\n"; }

void banner_config(const acvg::PhaseConfig& cfg) {
  std::istringstream is(cfg.summary());
  std::string line;
  while (std::getline(is, line)) banner(line);
}

// Test sequences when a manifest provides them, otherwise everything.
const std::vector<acvg::SequenceRecord>& eval_split(const acvg::DataSet& ds) {
  if (!ds.test.empty()) return ds.test;
  std::cerr << "[acvg] note: dataset has no test split; evaluating on all sequences\n";
  return ds.train;
}

acvg::Models models_for_data(const acvg::PhaseConfig& cfg, const acvg::DataSet& ds) {
  const acvg::SequenceRecord& first = ds.train.empty() ? ds.test.front() : ds.train.front();
  return acvg::build_models(cfg, first.height, first.width, first.channels, first.action_dims);
}

int run_gen_data(const std::string& out, int sequences, int length, int height, int width,
                 std::uint64_t seed, double dt, const std::string& mode,
                 const std::string& ingest_dir) {
  if (!ingest_dir.empty()) {
    banner("command=gen-data ingest=" + ingest_dir + " out=" + out);
    std::vector<acvg::SequenceRecord> seqs = acvg::ingest_external(ingest_dir);
    int test = static_cast<int>(seqs.size()) / 5;
    if (seqs.size() >= 2 && test == 0) test = 1;
    acvg::save_dataset(out, seqs, static_cast<int>(seqs.size()) - test);
    banner("ingested sequences=" + std::to_string(seqs.size()));
    return 0;
  }
  if (length < 2) throw acvg::ConfigError("--length must be >= 2");
  acvg::WorldConfig wc;
  wc.frame_h = height;
  wc.frame_w = width;
  wc.dt = dt;
  wc.camera = mode;
  int test = sequences / 5;
  if (sequences >= 2 && test == 0) test = 1;
  const int train = sequences - test;
  banner("command=gen-data out=" + out + " sequences=" + std::to_string(sequences) +
         " length=" + std::to_string(length) + " frame=" + std::to_string(height) + "x" +
         std::to_string(width) + " dt=" + std::to_string(dt) + " mode=" + mode +
         " seed=" + std::to_string(seed));
  banner("split train=" + std::to_string(train) + " test=" + std::to_string(test));
  std::vector<acvg::SequenceRecord> seqs;
  acvg::Rng root(seed);
  for (int i = 0; i < sequences; ++i)
    seqs.push_back(acvg::simulate_sequence(wc, root.split(static_cast<std::uint64_t>(i) + 1).next_u64(), length));
  acvg::save_dataset(out, seqs, train);
  banner("wrote " + std::to_string(sequences) + " sequences to " + out);
  return 0;
}

int run_train(const std::string& data, const std::string& config, const std::string& phase,
              const std::string& ckpt_in, const std::string& ckpt_out, std::string log_out,
              std::uint64_t seed_override, bool seed_set) {
  acvg::PhaseConfig cfg = config.empty() ? acvg::PhaseConfig{} : acvg::parse_config_file(config);
  if (seed_set) cfg.seed = seed_override;
  cfg.validate();
  if ((phase == "actor" || phase == "dual") && ckpt_in.empty())
    throw acvg::CheckpointError("--phase " + phase + " requires --ckpt-in with pre-trained weights");
  if (log_out.empty()) log_out = ckpt_out + ".loss.csv";

  banner("command=train phase=" + phase + " data=" + data + " ckpt_out=" + ckpt_out);
  banner_config(cfg);

  acvg::DataSet ds = acvg::load_dataset(data);
  acvg::Trainer trainer(cfg, ds);
  if (!ckpt_in.empty()) trainer.restore(acvg::load_checkpoint(ckpt_in));

  std::vector<acvg::LossRow> rows;
  if (phase == "generator") {
    rows = trainer.run_generator_phase(cfg.n_g);
  } else if (phase == "actor") {
    rows = trainer.run_actor_phase(cfg.n_a);
  } else if (phase == "dual") {
    rows = trainer.run_dual_phase(cfg.n_dual);
  } else if (phase == "full") {
    rows = trainer.run_full([&](const std::string& done) {
      if (done == "dual") return;  // the final checkpoint below covers it
      acvg::save_checkpoint(ckpt_out + ".phase_" + done, trainer.checkpoint());
      banner("checkpoint after " + done + " phase: " + ckpt_out + ".phase_" + done);
    });
  } else {
    throw acvg::ConfigError("unknown phase '" + phase + "'");
  }
  acvg::save_checkpoint(ckpt_out, trainer.checkpoint());
  acvg::write_loss_log(log_out, rows);
  banner("checkpoint=" + ckpt_out + " loss_log=" + log_out +
         " steps=" + std::to_string(trainer.global_step()));
  return 0;
}

int run_eval(const std::string& data, const std::string& config, const std::string& ckpt, int past,
             int future, const std::string& action_mode, const std::string& metrics_out,
             std::uint64_t seed, double noise_sigma, int dt_factor, const std::string& dump_dir) {
  acvg::PhaseConfig cfg = config.empty() ? acvg::PhaseConfig{} : acvg::parse_config_file(config);
  banner("command=eval data=" + data + " ckpt=" + ckpt + " past=" + std::to_string(past) +
         " future=" + std::to_string(future) + " action_mode=" + action_mode +
         " noise_sigma=" + std::to_string(noise_sigma) + " dt_factor=" + std::to_string(dt_factor) +
         " seed=" + std::to_string(seed));
  banner_config(cfg);

  acvg::DataSet ds = acvg::load_dataset(data);
  acvg::Models models = models_for_data(cfg, ds);
  acvg::restore_models(models, acvg::load_checkpoint(ckpt));

  acvg::EvalConfig ec;
  ec.n_past = past;
  ec.t_eval = future;
  ec.mode = acvg::parse_action_mode(action_mode);
  ec.noise_sigma = noise_sigma;
  ec.dt_factor = dt_factor;
  ec.clip_len = cfg.clip_len;
  ec.clip_gap = cfg.clip_gap;
  ec.seed = seed;
  ec.dump_dir = dump_dir;
  auto rows = acvg::evaluate(models, eval_split(ds), ec);
  acvg::write_metrics_csv(metrics_out, rows);
  banner("metrics=" + metrics_out + " rows=" + std::to_string(rows.size()));
  return 0;
}

int run_ablate(const std::string& data, const std::string& config, const std::string& ckpt_acvg,
               const std::string& ckpt_fa, const std::string& modes_csv, int seeds, int past,
               int future, double noise_sigma, std::uint64_t seed, const std::string& out) {
  acvg::PhaseConfig cfg = config.empty() ? acvg::PhaseConfig{} : acvg::parse_config_file(config);
  acvg::AblationConfig ac;
  ac.modes.clear();
  std::istringstream ms(modes_csv);
  std::string mode;
  while (std::getline(ms, mode, ','))
    if (!mode.empty()) ac.modes.push_back(mode);
  ac.seeds = seeds;
  ac.n_past = past;
  ac.t_eval = future;
  ac.noise_sigma = noise_sigma;
  ac.clip_len = cfg.clip_len;
  ac.clip_gap = cfg.clip_gap;
  ac.seed = seed;

  banner("command=ablate data=" + data + " ckpt_acvg=" + ckpt_acvg + " ckpt_fa=" + ckpt_fa +
         " modes=" + modes_csv + " seeds=" + std::to_string(seeds) + " past=" +
         std::to_string(past) + " future=" + std::to_string(future) + " dt2_future=" +
         std::to_string(ac.t_eval_dt2) + " noise_sigma=" + std::to_string(noise_sigma) +
         " seed=" + std::to_string(seed));
  banner_config(cfg);

  acvg::DataSet ds = acvg::load_dataset(data);
  acvg::Models acvg_models = models_for_data(cfg, ds);
  acvg::restore_models(acvg_models, acvg::load_checkpoint(ckpt_acvg));
  acvg::Models fa_models = models_for_data(cfg, ds);
  acvg::restore_models(fa_models, acvg::load_checkpoint(ckpt_fa));

  auto report = acvg::run_ablation(acvg_models, fa_models, eval_split(ds), ac);
  acvg::write_ablation_report(out, report);
  banner("ablation report written to " + out);
  return 0;
}

int run_grad_check(const std::string& ops, std::uint64_t seed) {
  banner("command=grad-check ops=" + ops + " seed=" + std::to_string(seed) +
         " tolerance=" + std::to_string(acvg::kGradCheckTolerance));
  std::vector<acvg::GradCheckResult> results;
  if (ops == "all") {
    results = acvg::run_all_grad_checks(seed);
  } else {
    results.push_back(acvg::run_grad_check(ops, seed));
  }
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("%-22s max_rel_err=%.3e  %s\n", r.op.c_str(), r.max_rel_err,
                r.pass ? "PASS" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"action-conditioned video prediction laboratory"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate (or ingest) a frame+action dataset");
  std::string gd_out, gd_mode = "unicycle", gd_ingest;
  int gd_sequences = 25, gd_length = 50, gd_height = 32, gd_width = 32;
  std::uint64_t gd_seed = 0;
  double gd_dt = 0.1;
  gen->add_option("--out", gd_out, "output dataset directory")->required();
  gen->add_option("--sequences", gd_sequences, "number of sequences");
  gen->add_option("--length", gd_length, "frames per sequence");
  gen->add_option("--height", gd_height, "frame height");
  gen->add_option("--width", gd_width, "frame width");
  gen->add_option("--seed", gd_seed, "root seed");
  gen->add_option("--dt", gd_dt, "seconds per frame");
  gen->add_option("--mode", gd_mode, "camera model: unicycle|translate");
  gen->add_option("--ingest", gd_ingest, "convert a seq_*/frame_*.ppm directory instead");

  // train
  auto* train = app.add_subcommand("train", "run a training phase");
  std::string tr_data, tr_config, tr_phase, tr_ckpt_in, tr_ckpt_out, tr_log_out;
  std::uint64_t tr_seed = 0;
  train->add_option("--data", tr_data, "dataset directory")->required();
  train->add_option("--config", tr_config, "key = value config file");
  train->add_option("--phase", tr_phase, "generator|actor|dual|full")->required();
  train->add_option("--ckpt-in", tr_ckpt_in, "checkpoint to start from");
  train->add_option("--ckpt-out", tr_ckpt_out, "checkpoint to write")->required();
  train->add_option("--log-out", tr_log_out, "loss log CSV (default: <ckpt-out>.loss.csv)");
  auto* tr_seed_opt = train->add_option("--seed", tr_seed, "override the config seed");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_data, ev_config, ev_ckpt, ev_mode = "actor", ev_metrics, ev_dump;
  int ev_past = 5, ev_future = 20, ev_dt = 1;
  double ev_sigma = 0.0;
  std::uint64_t ev_seed = 0;
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--config", ev_config, "config file used for training");
  ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--past", ev_past, "conditioning frames");
  ev->add_option("--future", ev_future, "prediction horizon");
  ev->add_option("--action-mode", ev_mode, "actor|gt|fixed");
  ev->add_option("--metrics-out", ev_metrics, "metrics CSV path")->required();
  ev->add_option("--seed", ev_seed, "evaluation seed");
  ev->add_option("--noise-sigma", ev_sigma, "Gaussian action perturbation");
  ev->add_option("--dt-factor", ev_dt, "temporal subsampling factor");
  ev->add_option("--dump-frames", ev_dump, "directory for predicted-frame PPM dumps");

  // ablate
  auto* ab = app.add_subcommand("ablate", "run the ablation suite");
  std::string ab_data, ab_config, ab_acvg, ab_fa, ab_modes = "full,fixed,dt2,noise", ab_out;
  int ab_seeds = 3, ab_past = 5, ab_future = 20;
  double ab_sigma = 0.2;
  std::uint64_t ab_seed = 0;
  ab->add_option("--data", ab_data, "dataset directory")->required();
  ab->add_option("--config", ab_config, "config file used for training");
  ab->add_option("--ckpt-acvg", ab_acvg, "dual-trained checkpoint")->required();
  ab->add_option("--ckpt-fa", ab_fa, "generator-phase-only checkpoint")->required();
  ab->add_option("--modes", ab_modes, "comma list: full,fixed,dt2,noise");
  ab->add_option("--seeds", ab_seeds, "evaluation seeds");
  ab->add_option("--past", ab_past, "conditioning frames");
  ab->add_option("--future", ab_future, "prediction horizon (15 used for dt2)");
  ab->add_option("--noise-sigma", ab_sigma, "noise mode sigma");
  ab->add_option("--seed", ab_seed, "base evaluation seed");
  ab->add_option("--out", ab_out, "output directory")->required();

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "finite-difference verification of every kernel");
  std::string gc_ops = "all";
  std::uint64_t gc_seed = 0;
  gc->add_option("--ops", gc_ops, "all or one op name");
  gc->add_option("--seed", gc_seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(gen))
      return run_gen_data(gd_out, gd_sequences, gd_length, gd_height, gd_width, gd_seed, gd_dt,
                          gd_mode, gd_ingest);
    if (app.got_subcommand(train))
      return run_train(tr_data, tr_config, tr_phase, tr_ckpt_in, tr_ckpt_out, tr_log_out, tr_seed,
                       tr_seed_opt->count() > 0);
    if (app.got_subcommand(ev))
      return run_eval(ev_data, ev_config, ev_ckpt, ev_past, ev_future, ev_mode, ev_metrics,
                      ev_seed, ev_sigma, ev_dt, ev_dump);
    if (app.got_subcommand(ab))
      return run_ablate(ab_data, ab_config, ab_acvg, ab_fa, ab_modes, ab_seeds, ab_past,
                        ab_future, ab_sigma, ab_seed, ab_out);
    if (app.got_subcommand(gc)) return run_grad_check(gc_ops, gc_seed);
  } catch (const acvg::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const acvg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
