#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "acvg/rng.hpp"
#include "acvg/tensor.hpp"

namespace acvg {

// Affine map between raw physical actions and the [-1, 1] range the networks
// consume. Defaults match a differential-drive platform: forward velocity in
// [0, 0.1] m/s and turn rate in [-1.8, 1.8] rad/s.
struct ActionNormalizer {
  std::vector<std::array<double, 2>> ranges{{0.0, 0.1}, {-1.8, 1.8}};

  int dims() const { return static_cast<int>(ranges.size()); }
  // Clamps out-of-range inputs (counted, not fatal).
  std::vector<float> normalize(const std::vector<float>& raw, int* clamped = nullptr) const;
  std::vector<float> denormalize(const std::vector<float>& norm) const;
};

// One recorded episode: frames are T x H x W x C channel-last in [0, 1],
// actions are raw physical units, one row per frame.
struct SequenceRecord {
  int length = 0, height = 0, width = 0, channels = 3;
  std::vector<float> frames;       // T*H*W*C
  std::vector<float> actions_raw;  // T*m
  int action_dims = 2;
  float dt = 0.1f;
  ActionNormalizer normalizer;

  const float* frame(int t) const { return frames.data() + static_cast<std::size_t>(t) * height * width * channels; }
  std::vector<float> action(int t) const;
};

struct WorldConfig {
  int texture_size = 96;       // toroidal world texture, pixels
  int frame_h = 32, frame_w = 32;
  int sprite_count = 5;
  double sprite_min_radius = 3.0, sprite_max_radius = 7.0;
  double sprite_speed = 8.0;   // px/s
  std::string camera = "unicycle";  // "unicycle" | "translate"
  double px_per_meter = 48.0;
  double v_min = 0.0, v_max = 0.1;        // m/s
  double w_min = -1.8, w_max = 1.8;       // rad/s
  double slew_v = 0.02, slew_w = 0.35;    // max per-step action change
  double waypoint_min_dist = 20.0, waypoint_max_dist = 40.0;  // px
  double waypoint_switch_dist = 6.0;      // px
  double gain_v = 0.8, gain_w = 2.5;      // controller gains
  double dt = 0.1;                        // seconds per frame
};

// Renders an egocentric window of a textured toroidal world with drifting
// sprites; the camera follows a smooth waypoint-seeking (v, w) policy.
SequenceRecord simulate_sequence(const WorldConfig& cfg, std::uint64_t seed, int length);

// First-order pixel flow: elementwise x_t - x_prev.
Tensor<float> compute_flow(const Tensor<float>& x_t, const Tensor<float>& x_prev);

// Contiguous clips of clip_len frames separated by gap frames; incomplete
// tails are dropped.
std::vector<SequenceRecord> make_clips(const SequenceRecord& seq, int clip_len = 50, int gap = 10);

// Keeps frames/actions at indices 0, factor, 2*factor, ... and stretches dt.
SequenceRecord subsample_dt(const SequenceRecord& clip, int factor);

// One training/evaluation window with n conditioning steps and horizon steps
// of targets, as batched NCHW tensors (time-major vectors, N = batch).
struct ClipBatch {
  int n = 0, horizon = 0;
  std::vector<Tensor<float>> past_frames;    // n entries, (N,C,H,W)
  std::vector<Tensor<float>> past_flows;     // n entries; first is exactly zero
  std::vector<Tensor<float>> past_actions;   // n entries, (N,m), normalized
  std::vector<Tensor<float>> future_frames;  // horizon entries
  std::vector<Tensor<float>> future_flows;
  std::vector<Tensor<float>> future_actions;
};

// Single window (batch of one) starting at `offset` within the clip.
ClipBatch build_clip_batch(const SequenceRecord& clip, int offset, int n, int horizon);
// Stacks equally-shaped windows into one batch.
ClipBatch stack_batches(const std::vector<ClipBatch>& windows);

// On-disk dataset layout: one directory per sequence holding frames.bin
// (binary, little-endian), actions.txt and meta.txt, plus manifest.txt at the
// root with train/test membership.
struct DataSet {
  std::vector<SequenceRecord> train;
  std::vector<SequenceRecord> test;
};

void save_sequence(const std::string& seq_dir, const SequenceRecord& seq);
SequenceRecord load_sequence(const std::string& seq_dir);
void save_dataset(const std::string& dir, const std::vector<SequenceRecord>& seqs, int train_count);
DataSet load_dataset(const std::string& dir);

// Reads seq_*/frame_%05d.ppm (binary P6) plus actions.txt; meta.txt optional.
std::vector<SequenceRecord> ingest_external(const std::string& dir);

// 8-bit binary PPM helpers for frame dumps and ingestion.
void write_ppm(const std::string& path, const float* hwc, int h, int w, int c);
std::vector<float> read_ppm(const std::string& path, int* h, int* w);

}  // namespace acvg
