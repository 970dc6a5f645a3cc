#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "acvg/dataset.hpp"
#include "test_util.hpp"

using namespace acvg;
using testutil::TempDir;

TEST_CASE("action normalization: midpoints, endpoints and round trip") {
  ActionNormalizer norm;
  CHECK(norm.normalize({0.05f, 0.0f})[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(norm.normalize({0.0f, 1.8f})[1] == doctest::Approx(1.0));
  CHECK(norm.normalize({0.1f, 0.0f})[0] == doctest::Approx(1.0));

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    std::vector<float> raw = {static_cast<float>(rng.uniform(0.0, 0.1)),
                              static_cast<float>(rng.uniform(-1.8, 1.8))};
    const auto back = norm.denormalize(norm.normalize(raw));
    CHECK(std::abs(back[0] - raw[0]) < 1e-6);
    CHECK(std::abs(back[1] - raw[1]) < 1e-6);
  }

  int clamped = 0;
  const auto v = norm.normalize({0.2f, 0.0f}, &clamped);
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(clamped == 1);
}

TEST_CASE("compute_flow: algebraic identities") {
  CHECK(compute_flow(Tensor<float>::from({1, 1, 1, 1}, {0.7f}),
                     Tensor<float>::from({1, 1, 1, 1}, {0.5f}))
            .item() == doctest::Approx(0.2f));
  Rng rng(5);
  Tensor<float> prev = testutil::rand_tensor<float>({1, 3, 4, 4}, rng, 0.0, 1.0);
  Tensor<float> cur = testutil::rand_tensor<float>({1, 3, 4, 4}, rng, 0.0, 1.0);
  CHECK(testutil::max_abs_diff(compute_flow(cur, cur), Tensor<float>::zeros(cur.shape())) == 0.0);
  Tensor<float> recon = add(prev, compute_flow(cur, prev));
  CHECK(testutil::max_abs_diff(recon, cur) < 1e-6);
  CHECK_THROWS_AS(compute_flow(cur, Tensor<float>::zeros({1, 3, 4, 5})), ShapeError);
}

namespace {
SequenceRecord tiny_record(int length, int h = 8, int w = 8) {
  WorldConfig cfg;
  cfg.frame_h = h;
  cfg.frame_w = w;
  cfg.texture_size = 32;
  cfg.sprite_count = 2;
  return simulate_sequence(cfg, 99, length);
}
}  // namespace

TEST_CASE("make_clips: spacing and completeness") {
  CHECK(make_clips(tiny_record(50), 50, 10).size() == 1);
  CHECK(make_clips(tiny_record(49), 50, 10).empty());
  auto clips = make_clips(tiny_record(110), 50, 10);
  REQUIRE(clips.size() == 2);
  // Second clip starts at offset 60 = clip_len + gap.
  const SequenceRecord full = tiny_record(110);
  const std::size_t fpp = static_cast<std::size_t>(8) * 8 * 3;
  for (std::size_t i = 0; i < fpp; ++i)
    CHECK(clips[1].frames[i] == full.frames[60 * fpp + i]);
  CHECK(clips[1].actions_raw[0] == full.actions_raw[60 * 2]);
}

TEST_CASE("subsample_dt keeps strided frames and stretches dt") {
  const SequenceRecord clip = tiny_record(30);
  const SequenceRecord half = subsample_dt(clip, 2);
  CHECK(half.length == 15);
  CHECK(half.dt == doctest::Approx(clip.dt * 2));
  const std::size_t fpp = static_cast<std::size_t>(8) * 8 * 3;
  for (int k = 0; k < 15; ++k) {
    for (std::size_t i = 0; i < fpp; ++i)
      CHECK(half.frames[k * fpp + i] == clip.frames[(2 * k) * fpp + i]);
    CHECK(half.actions_raw[static_cast<std::size_t>(k) * 2] ==
          clip.actions_raw[static_cast<std::size_t>(2 * k) * 2]);
  }
  CHECK(subsample_dt(clip, 1).frames == clip.frames);
  CHECK_THROWS_AS(subsample_dt(tiny_record(2), 2), DataError);
}

TEST_CASE("subsampled windows recompute flows over kept frames") {
  const SequenceRecord clip = tiny_record(30);
  const SequenceRecord half = subsample_dt(clip, 2);
  ClipBatch b = build_clip_batch(half, 0, 3, 4);
  // Flow at step k must equal kept_frame[k] - kept_frame[k-1], not a scaled
  // sum of the intermediate flows.
  for (int k = 1; k < 3; ++k) {
    Tensor<float> expect = sub(b.past_frames[static_cast<std::size_t>(k)],
                               b.past_frames[static_cast<std::size_t>(k - 1)]);
    CHECK(testutil::bitwise_equal(b.past_flows[static_cast<std::size_t>(k)], expect));
  }
}

TEST_CASE("build_clip_batch: window contract") {
  const SequenceRecord clip = tiny_record(20);
  ClipBatch b = build_clip_batch(clip, 2, 5, 10);
  CHECK(b.past_frames.size() == 5);
  CHECK(b.future_frames.size() == 10);
  // First conditioning flow is exactly zero.
  for (float v : b.past_flows[0].vec()) CHECK(v == 0.0f);
  // Every other flow is the frame difference.
  for (int k = 1; k < 5; ++k)
    CHECK(testutil::bitwise_equal(
        b.past_flows[static_cast<std::size_t>(k)],
        sub(b.past_frames[static_cast<std::size_t>(k)], b.past_frames[static_cast<std::size_t>(k - 1)])));
  CHECK(testutil::bitwise_equal(b.future_flows[0], sub(b.future_frames[0], b.past_frames[4])));
  // Normalized actions live in [-1, 1].
  for (const auto& a : b.past_actions)
    for (float v : a.vec()) CHECK(std::abs(v) <= 1.0f);

  CHECK_THROWS_AS(build_clip_batch(clip, 0, 1, 5), DataError);     // too little history
  CHECK_THROWS_AS(build_clip_batch(clip, 10, 5, 10), WindowError); // window past the end
}

TEST_CASE("simulate_sequence: static world and static camera give constant frames") {
  WorldConfig cfg;
  cfg.frame_h = 8;
  cfg.frame_w = 8;
  cfg.texture_size = 32;
  cfg.sprite_count = 2;
  cfg.sprite_speed = 0.0;
  cfg.waypoint_min_dist = 0.0;  // waypoint pinned to the start pose
  cfg.waypoint_max_dist = 0.0;
  SequenceRecord rec = simulate_sequence(cfg, 4, 10);
  for (int t = 0; t < 10; ++t) {
    CHECK(rec.actions_raw[static_cast<std::size_t>(t) * 2 + 0] == 0.0f);
    CHECK(rec.actions_raw[static_cast<std::size_t>(t) * 2 + 1] == 0.0f);
  }
  const std::size_t fpp = static_cast<std::size_t>(8) * 8 * 3;
  for (int t = 1; t < 10; ++t)
    for (std::size_t i = 0; i < fpp; ++i) CHECK(rec.frames[t * fpp + i] == rec.frames[i]);
}

TEST_CASE("simulate_sequence: identical config and seed reproduce bitwise") {
  WorldConfig cfg;
  cfg.frame_h = 8;
  cfg.frame_w = 8;
  cfg.texture_size = 32;
  SequenceRecord a = simulate_sequence(cfg, 123, 12);
  SequenceRecord b = simulate_sequence(cfg, 123, 12);
  CHECK(a.frames == b.frames);
  CHECK(a.actions_raw == b.actions_raw);
  SequenceRecord c = simulate_sequence(cfg, 124, 12);
  CHECK(a.frames != c.frames);
}

TEST_CASE("simulate_sequence: actions respect bounds and the slew limit") {
  WorldConfig cfg;
  cfg.frame_h = 8;
  cfg.frame_w = 8;
  cfg.texture_size = 48;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SequenceRecord rec = simulate_sequence(cfg, seed, 40);
    for (int t = 0; t < rec.length; ++t) {
      const float v = rec.actions_raw[static_cast<std::size_t>(t) * 2];
      const float w = rec.actions_raw[static_cast<std::size_t>(t) * 2 + 1];
      CHECK(v >= cfg.v_min);
      CHECK(v <= cfg.v_max);
      CHECK(w >= cfg.w_min);
      CHECK(w <= cfg.w_max);
      if (t > 0) {
        CHECK(std::abs(v - rec.actions_raw[static_cast<std::size_t>(t - 1) * 2]) <=
              cfg.slew_v + 1e-6);
        CHECK(std::abs(w - rec.actions_raw[static_cast<std::size_t>(t - 1) * 2 + 1]) <=
              cfg.slew_w + 1e-6);
      }
    }
  }
}

TEST_CASE("simulate_sequence: translate mode shifts frames by v*dt pixels") {
  WorldConfig cfg;
  cfg.camera = "translate";
  cfg.frame_h = 16;
  cfg.frame_w = 16;
  cfg.texture_size = 64;
  cfg.sprite_speed = 0.0;
  cfg.slew_v = 1.0;           // settle to the target speed immediately
  cfg.px_per_meter = 125.0;   // 0.8 * v_max * dt * scale = 1 px per frame
  cfg.dt = 0.1;
  SequenceRecord rec = simulate_sequence(cfg, 7, 10);
  const float v = rec.actions_raw[0];
  const double shift = v * cfg.dt * cfg.px_per_meter;
  CHECK(shift == doctest::Approx(1.0).epsilon(1e-6));
  // frame t+1 at column c equals frame t at column c+1 (camera moved +x).
  const int H = 16, W = 16, C = 3;
  double max_diff = 0.0;
  for (int t = 4; t < 9; ++t) {
    const float* cur = rec.frame(t);
    const float* next = rec.frame(t + 1);
    for (int r = 0; r < H; ++r)
      for (int c = 0; c + 1 < W; ++c)
        for (int ch = 0; ch < C; ++ch)
          max_diff = std::max(max_diff,
                              std::abs(static_cast<double>(next[(r * W + c) * C + ch]) -
                                       cur[(r * W + c + 1) * C + ch]));
  }
  CHECK(max_diff < 0.05);
}

TEST_CASE("dataset save/load round trip is bitwise") {
  TempDir dir("dataset");
  WorldConfig wc;
  wc.frame_h = 8;
  wc.frame_w = 8;
  wc.texture_size = 32;
  std::vector<SequenceRecord> seqs = {tiny_record(12), simulate_sequence(wc, 555, 12)};
  save_dataset(dir.str(), seqs, 1);
  DataSet ds = load_dataset(dir.str());
  REQUIRE(ds.train.size() == 1);
  REQUIRE(ds.test.size() == 1);
  CHECK(ds.train[0].frames == seqs[0].frames);
  CHECK(ds.train[0].actions_raw == seqs[0].actions_raw);
  CHECK(ds.test[0].frames == seqs[1].frames);
  CHECK(ds.train[0].dt == seqs[0].dt);
  CHECK(ds.train[0].normalizer.ranges == seqs[0].normalizer.ranges);
}

TEST_CASE("corrupt dataset files fail cleanly") {
  TempDir dir("corrupt");
  save_sequence(dir.sub("seq_00000"), tiny_record(8));

  SUBCASE("truncated frames.bin") {
    auto bytes = testutil::read_bytes(dir.sub("seq_00000") + "/frames.bin");
    std::ofstream os(dir.sub("seq_00000") + "/frames.bin", std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    os.close();
    CHECK_THROWS_AS(load_sequence(dir.sub("seq_00000")), FormatError);
  }
  SUBCASE("short action file names the expected count") {
    std::ofstream os(dir.sub("seq_00000") + "/actions.txt");
    os << "0.01 0.1\n";
    os.close();
    try {
      load_sequence(dir.sub("seq_00000"));
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("expected 8") != std::string::npos);
      CHECK(std::string(e.what()).find("actions.txt") != std::string::npos);
    }
  }
}

TEST_CASE("PPM round trip and external ingestion") {
  TempDir dir("ppm");
  const SequenceRecord rec = tiny_record(6);
  const std::string seq_dir = dir.sub("seq_ext");
  std::filesystem::create_directories(seq_dir);
  for (int t = 0; t < rec.length; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05d.ppm", t);
    write_ppm(seq_dir + "/" + name, rec.frame(t), rec.height, rec.width, 3);
  }
  {
    std::ofstream os(seq_dir + "/actions.txt");
    for (int t = 0; t < rec.length; ++t)
      os << rec.actions_raw[static_cast<std::size_t>(t) * 2] << " "
         << rec.actions_raw[static_cast<std::size_t>(t) * 2 + 1] << "\n";
  }
  auto seqs = ingest_external(dir.str());
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].length == rec.length);
  double max_err = 0.0;
  for (std::size_t i = 0; i < rec.frames.size(); ++i)
    max_err = std::max(max_err, std::abs(static_cast<double>(seqs[0].frames[i]) - rec.frames[i]));
  CHECK(max_err <= 1.0 / 255.0 + 1e-6);  // 8-bit quantization only

  // Missing action line count is a hard error naming the file.
  std::ofstream os(seq_dir + "/actions.txt");
  os << "0 0\n";
  os.close();
  CHECK_THROWS_AS(ingest_external(dir.str()), DataError);
}
