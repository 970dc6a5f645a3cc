#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acvg/dataset.hpp"
#include "acvg/training.hpp"

namespace acvg {

// 10*log10(1/MSE) for frames in [0,1]; capped at 99 dB (exact matches would
// otherwise diverge).
double psnr(const Tensor<float>& a, const Tensor<float>& b);
inline constexpr double kPsnrCap = 99.0;

// Windowed structural similarity: 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, dynamic range 1; averaged over window positions and
// channels. Frames are (C,H,W) or (1,C,H,W).
double ssim(const Tensor<float>& a, const Tensor<float>& b);

// Per-timestep Euclidean distance between normalized action sequences.
std::vector<double> action_l2_curve(const std::vector<std::vector<float>>& target,
                                    const std::vector<std::vector<float>>& predicted);

struct MetricRow {
  int t = 0;  // 1-based prediction step
  double psnr_mean = 0, psnr_std = 0;
  double ssim_mean = 0, ssim_std = 0;
  double l1_mean = 0, l1_std = 0;
  double action_l2_mean = 0, action_l2_std = 0;
};

enum class ActionMode { Actor, GroundTruth, Fixed };
ActionMode parse_action_mode(const std::string& name);

struct EvalConfig {
  int n_past = 5;
  int t_eval = 20;
  ActionMode mode = ActionMode::Actor;
  double noise_sigma = 0.0;  // Gaussian perturbation of served actions
  int dt_factor = 1;         // temporal subsampling of clips before windowing
  int clip_len = 50, clip_gap = 10;
  std::uint64_t seed = 0;
  std::string dump_dir;  // when set, predicted frames are written as PPM
};

// Evaluates every window of every test clip (windows tile each clip at stride
// n_past + t_eval) and aggregates per-timestep means and standard deviations.
std::vector<MetricRow> evaluate(const Models& models, const std::vector<SequenceRecord>& test,
                                const EvalConfig& cfg);

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(const std::string& path);

// ---------------------------------------------------------------------------
// Ablation harness: same windows and seeds across modes; the only varying
// factor is the action source or the sampling interval.
//   full  - dual-trained model, in-the-loop actor actions
//   fixed - generator-phase-only model, constant last observed action
//   dt2   - both models at twice the sampling interval, 15-step horizon
//   noise - both models with N(0, 0.2) perturbation of the served actions
// ---------------------------------------------------------------------------

struct AblationConfig {
  std::vector<std::string> modes{"full", "fixed", "dt2", "noise"};
  int seeds = 3;
  int n_past = 5;
  int t_eval = 20;
  int t_eval_dt2 = 15;
  double noise_sigma = 0.2;
  int clip_len = 50, clip_gap = 10;
  std::uint64_t seed = 0;
};

struct AblationEntry {
  std::string mode;
  std::string model;  // "acvg" | "fa"
  int seed = -1;      // -1 marks the across-seed average
  std::vector<MetricRow> rows;
};

struct AblationReport {
  std::vector<AblationEntry> per_seed;
  std::vector<AblationEntry> averaged;
};

AblationReport run_ablation(const Models& acvg_models, const Models& fa_models,
                            const std::vector<SequenceRecord>& test, const AblationConfig& cfg);

// Per-mode/model CSVs (seed-stamped plus the average) and summary.csv with
// horizon-averaged values, one row per (mode, model, metric).
void write_ablation_report(const std::string& out_dir, const AblationReport& report);

double horizon_mean(const std::vector<MetricRow>& rows, double MetricRow::*field, int t_lo,
                    int t_hi);

}  // namespace acvg
