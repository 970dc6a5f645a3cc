#include "acvg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace acvg {

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

std::vector<float> ActionNormalizer::normalize(const std::vector<float>& raw, int* clamped) const {
  if (raw.size() != ranges.size())
    throw ShapeError("normalize_action: expected " + std::to_string(ranges.size()) +
                     " dims, got " + std::to_string(raw.size()));
  std::vector<float> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double lo = ranges[i][0], hi = ranges[i][1];
    double v = raw[i];
    if (v < lo || v > hi) {
      v = std::min(std::max(v, lo), hi);
      if (clamped) ++*clamped;
    }
    out[i] = static_cast<float>(2.0 * (v - lo) / (hi - lo) - 1.0);
  }
  return out;
}

std::vector<float> ActionNormalizer::denormalize(const std::vector<float>& norm) const {
  if (norm.size() != ranges.size())
    throw ShapeError("denormalize_action: expected " + std::to_string(ranges.size()) +
                     " dims, got " + std::to_string(norm.size()));
  std::vector<float> out(norm.size());
  for (std::size_t i = 0; i < norm.size(); ++i) {
    const double lo = ranges[i][0], hi = ranges[i][1];
    out[i] = static_cast<float>(lo + (static_cast<double>(norm[i]) + 1.0) * 0.5 * (hi - lo));
  }
  return out;
}

std::vector<float> SequenceRecord::action(int t) const {
  std::vector<float> a(static_cast<std::size_t>(action_dims));
  std::copy_n(actions_raw.data() + static_cast<std::size_t>(t) * action_dims, action_dims,
              a.data());
  return a;
}

// ---------------------------------------------------------------------------
// World simulation
// ---------------------------------------------------------------------------

namespace {

struct Sprite {
  double x, y, vx, vy, radius;
  float color[3];
  bool disk;
};

// Value noise on a toroidal grid, bilinearly interpolated.
struct NoiseGrid {
  int cells;
  std::vector<float> values;  // cells*cells*3

  float sample(double u, double v, int ch) const {
    const double gu = u * cells, gv = v * cells;
    int i0 = static_cast<int>(std::floor(gu)) % cells;
    int j0 = static_cast<int>(std::floor(gv)) % cells;
    if (i0 < 0) i0 += cells;
    if (j0 < 0) j0 += cells;
    const int i1 = (i0 + 1) % cells, j1 = (j0 + 1) % cells;
    const double fu = gu - std::floor(gu), fv = gv - std::floor(gv);
    auto at = [&](int i, int j) { return values[(static_cast<std::size_t>(j) * cells + i) * 3 + ch]; };
    const double a = at(i0, j0) * (1 - fu) + at(i1, j0) * fu;
    const double b = at(i0, j1) * (1 - fu) + at(i1, j1) * fu;
    return static_cast<float>(a * (1 - fv) + b * fv);
  }
};

NoiseGrid make_noise(int cells, Rng& rng) {
  NoiseGrid g;
  g.cells = cells;
  g.values.resize(static_cast<std::size_t>(cells) * cells * 3);
  for (auto& v : g.values) v = static_cast<float>(rng.uniform());
  return g;
}

double wrap_delta(double d, double extent) {
  d = std::fmod(d, extent);
  if (d > extent * 0.5) d -= extent;
  if (d < -extent * 0.5) d += extent;
  return d;
}

struct World {
  const WorldConfig* cfg;
  NoiseGrid coarse, fine;
  std::vector<Sprite> sprites;

  void render(double px, double py, double theta, float* frame_hwc) const {
    const int H = cfg->frame_h, W = cfg->frame_w;
    const double tex = cfg->texture_size;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cx = (W - 1) * 0.5, cy = (H - 1) * 0.5;
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        const double ox = c - cx, oy = r - cy;
        const double wx = px + ct * ox - st * oy;
        const double wy = py + st * ox + ct * oy;
        const double u = wx / tex, v = wy / tex;
        float rgb[3];
        for (int ch = 0; ch < 3; ++ch) {
          const float n = 0.65f * coarse.sample(u, v, ch) + 0.35f * fine.sample(u * 3.0, v * 3.0, ch);
          rgb[ch] = 0.08f + 0.84f * n;
        }
        for (const Sprite& s : sprites) {
          const double dx = wrap_delta(wx - s.x, tex);
          const double dy = wrap_delta(wy - s.y, tex);
          const double dist = s.disk ? std::sqrt(dx * dx + dy * dy)
                                     : std::max(std::abs(dx), std::abs(dy));
          const double alpha = std::min(1.0, std::max(0.0, s.radius + 0.5 - dist));
          if (alpha > 0.0)
            for (int ch = 0; ch < 3; ++ch)
              rgb[ch] = static_cast<float>(alpha * s.color[ch] + (1.0 - alpha) * rgb[ch]);
        }
        float* out = frame_hwc + (static_cast<std::size_t>(r) * W + c) * 3;
        for (int ch = 0; ch < 3; ++ch) out[ch] = std::min(1.0f, std::max(0.0f, rgb[ch]));
      }
    }
  }
};

}  // namespace

SequenceRecord simulate_sequence(const WorldConfig& cfg, std::uint64_t seed, int length) {
  if (length < 2) throw DataError("simulate_sequence: length must be >= 2, got " + std::to_string(length));
  if (cfg.frame_h < 2 || cfg.frame_w < 2 || cfg.texture_size < 4)
    throw DataError("simulate_sequence: invalid world extents");
  if (cfg.camera != "unicycle" && cfg.camera != "translate")
    throw ConfigError("simulate_sequence: unknown camera mode '" + cfg.camera + "'");

  Rng root(seed);
  Rng tex_rng = root.split(1);
  Rng sprite_rng = root.split(2);
  Rng policy_rng = root.split(3);

  World world;
  world.cfg = &cfg;
  world.coarse = make_noise(8, tex_rng);
  world.fine = make_noise(24, tex_rng);
  for (int i = 0; i < cfg.sprite_count; ++i) {
    Sprite s;
    s.x = sprite_rng.uniform(0, cfg.texture_size);
    s.y = sprite_rng.uniform(0, cfg.texture_size);
    const double ang = sprite_rng.uniform(0, 6.283185307179586);
    const double speed = cfg.sprite_speed * sprite_rng.uniform(0.3, 1.0);
    s.vx = speed * std::cos(ang);
    s.vy = speed * std::sin(ang);
    s.radius = sprite_rng.uniform(cfg.sprite_min_radius, cfg.sprite_max_radius);
    for (int ch = 0; ch < 3; ++ch) s.color[ch] = static_cast<float>(sprite_rng.uniform());
    s.disk = (i % 2) == 0;
    world.sprites.push_back(s);
  }

  const bool translate = cfg.camera == "translate";
  double px = cfg.texture_size * 0.5, py = cfg.texture_size * 0.5;
  double theta = translate ? 0.0 : policy_rng.uniform(0, 6.283185307179586);

  auto sample_waypoint = [&](double from_x, double from_y) {
    const double d = policy_rng.uniform(cfg.waypoint_min_dist, cfg.waypoint_max_dist);
    const double a = policy_rng.uniform(0, 6.283185307179586);
    double wx = std::fmod(from_x + d * std::cos(a), static_cast<double>(cfg.texture_size));
    double wy = std::fmod(from_y + d * std::sin(a), static_cast<double>(cfg.texture_size));
    if (wx < 0) wx += cfg.texture_size;
    if (wy < 0) wy += cfg.texture_size;
    return std::array<double, 2>{wx, wy};
  };
  auto waypoint = sample_waypoint(px, py);

  SequenceRecord rec;
  rec.length = length;
  rec.height = cfg.frame_h;
  rec.width = cfg.frame_w;
  rec.channels = 3;
  rec.dt = static_cast<float>(cfg.dt);
  rec.action_dims = 2;
  rec.normalizer.ranges = {{cfg.v_min, cfg.v_max}, {cfg.w_min, cfg.w_max}};
  rec.frames.resize(static_cast<std::size_t>(length) * cfg.frame_h * cfg.frame_w * 3);
  rec.actions_raw.resize(static_cast<std::size_t>(length) * 2);

  double prev_v = 0.0, prev_w = 0.0;
  for (int t = 0; t < length; ++t) {
    world.render(px, py, theta, rec.frames.data() + static_cast<std::size_t>(t) * cfg.frame_h * cfg.frame_w * 3);

    double v_des, w_des;
    if (translate) {
      v_des = std::min(cfg.v_max * 0.8, cfg.v_max);
      w_des = 0.0;
    } else {
      const double dx = wrap_delta(waypoint[0] - px, cfg.texture_size);
      const double dy = wrap_delta(waypoint[1] - py, cfg.texture_size);
      const double dist = std::sqrt(dx * dx + dy * dy);
      if (dist < cfg.waypoint_switch_dist) waypoint = sample_waypoint(px, py);
      // Heading error in the camera frame drives the turn rate.
      const double fx = std::cos(theta) * dx + std::sin(theta) * dy;
      const double fy = -std::sin(theta) * dx + std::cos(theta) * dy;
      const double phi = (fx == 0.0 && fy == 0.0) ? 0.0 : std::atan2(fy, fx);
      w_des = std::min(cfg.w_max, std::max(cfg.w_min, cfg.gain_w * phi));
      const double dist_m = dist / cfg.px_per_meter;
      v_des = std::min(cfg.v_max, std::max(cfg.v_min, cfg.gain_v * dist_m * std::max(0.0, std::cos(phi))));
    }
    const double v = prev_v + std::min(cfg.slew_v, std::max(-cfg.slew_v, v_des - prev_v));
    const double w = prev_w + std::min(cfg.slew_w, std::max(-cfg.slew_w, w_des - prev_w));
    // Stored as float32; nudge so the stored value still satisfies the double
    // bounds (a bare cast of e.g. 0.1 rounds upward out of range).
    auto store_clamped = [](double value, double lo, double hi) {
      float f = static_cast<float>(value);
      while (static_cast<double>(f) > hi) f = std::nextafter(f, -1e9f);
      while (static_cast<double>(f) < lo) f = std::nextafter(f, 1e9f);
      return f;
    };
    rec.actions_raw[static_cast<std::size_t>(t) * 2 + 0] = store_clamped(v, cfg.v_min, cfg.v_max);
    rec.actions_raw[static_cast<std::size_t>(t) * 2 + 1] = store_clamped(w, cfg.w_min, cfg.w_max);
    prev_v = v;
    prev_w = w;

    theta += w * cfg.dt;
    const double step_px = v * cfg.dt * cfg.px_per_meter;
    px += step_px * std::cos(theta);
    py += step_px * std::sin(theta);
    px = std::fmod(px, static_cast<double>(cfg.texture_size));
    py = std::fmod(py, static_cast<double>(cfg.texture_size));
    if (px < 0) px += cfg.texture_size;
    if (py < 0) py += cfg.texture_size;

    for (Sprite& s : world.sprites) {
      s.x = std::fmod(s.x + s.vx * cfg.dt, static_cast<double>(cfg.texture_size));
      s.y = std::fmod(s.y + s.vy * cfg.dt, static_cast<double>(cfg.texture_size));
      if (s.x < 0) s.x += cfg.texture_size;
      if (s.y < 0) s.y += cfg.texture_size;
    }
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Flow / clips / windows
// ---------------------------------------------------------------------------

Tensor<float> compute_flow(const Tensor<float>& x_t, const Tensor<float>& x_prev) {
  if (x_t.shape() != x_prev.shape())
    throw ShapeError("compute_flow: shapes " + shape_str(x_t.shape()) + " and " +
                     shape_str(x_prev.shape()) + " differ");
  return sub(x_t, x_prev);
}

std::vector<SequenceRecord> make_clips(const SequenceRecord& seq, int clip_len, int gap) {
  std::vector<SequenceRecord> clips;
  const int stride = clip_len + gap;
  for (int start = 0; start + clip_len <= seq.length; start += stride) {
    SequenceRecord c;
    c.length = clip_len;
    c.height = seq.height;
    c.width = seq.width;
    c.channels = seq.channels;
    c.dt = seq.dt;
    c.action_dims = seq.action_dims;
    c.normalizer = seq.normalizer;
    const std::size_t fpp = static_cast<std::size_t>(seq.height) * seq.width * seq.channels;
    c.frames.assign(seq.frames.begin() + start * fpp, seq.frames.begin() + (start + clip_len) * fpp);
    c.actions_raw.assign(seq.actions_raw.begin() + static_cast<std::size_t>(start) * seq.action_dims,
                         seq.actions_raw.begin() + static_cast<std::size_t>(start + clip_len) * seq.action_dims);
    clips.push_back(std::move(c));
  }
  return clips;
}

SequenceRecord subsample_dt(const SequenceRecord& clip, int factor) {
  if (factor < 1) throw DataError("subsample_dt: factor must be >= 1");
  if (factor == 1) return clip;
  const int kept = (clip.length + factor - 1) / factor;
  if (kept < 2) throw DataError("subsample_dt: fewer than 2 frames would remain");
  SequenceRecord out;
  out.length = kept;
  out.height = clip.height;
  out.width = clip.width;
  out.channels = clip.channels;
  out.dt = clip.dt * static_cast<float>(factor);
  out.action_dims = clip.action_dims;
  out.normalizer = clip.normalizer;
  const std::size_t fpp = static_cast<std::size_t>(clip.height) * clip.width * clip.channels;
  out.frames.resize(static_cast<std::size_t>(kept) * fpp);
  out.actions_raw.resize(static_cast<std::size_t>(kept) * clip.action_dims);
  for (int k = 0; k < kept; ++k) {
    const int src = k * factor;
    std::copy_n(clip.frames.data() + src * fpp, fpp, out.frames.data() + k * fpp);
    std::copy_n(clip.actions_raw.data() + static_cast<std::size_t>(src) * clip.action_dims,
                clip.action_dims, out.actions_raw.data() + static_cast<std::size_t>(k) * clip.action_dims);
  }
  return out;
}

namespace {
// HWC frame slice -> (1,C,H,W) tensor.
Tensor<float> frame_tensor(const SequenceRecord& seq, int t) {
  const int H = seq.height, W = seq.width, C = seq.channels;
  Tensor<float> out = Tensor<float>::zeros({1, C, H, W});
  const float* src = seq.frame(t);
  float* dst = out.data();
  for (int c = 0; c < C; ++c)
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w)
        dst[(static_cast<std::size_t>(c) * H + h) * W + w] =
            src[(static_cast<std::size_t>(h) * W + w) * C + c];
  return out;
}

Tensor<float> action_tensor(const SequenceRecord& seq, int t) {
  std::vector<float> norm = seq.normalizer.normalize(seq.action(t));
  const int dims = static_cast<int>(norm.size());
  return Tensor<float>::from({1, dims}, std::move(norm));
}
}  // namespace

ClipBatch build_clip_batch(const SequenceRecord& clip, int offset, int n, int horizon) {
  if (n < 2) throw DataError("build_clip_batch: need at least 2 past observations, got " + std::to_string(n));
  if (horizon < 1) throw DataError("build_clip_batch: horizon must be >= 1");
  if (offset < 0 || offset + n + horizon > clip.length)
    throw WindowError("build_clip_batch: window [" + std::to_string(offset) + "," +
                      std::to_string(offset + n + horizon) + ") exceeds clip length " +
                      std::to_string(clip.length));
  ClipBatch b;
  b.n = n;
  b.horizon = horizon;
  Tensor<float> prev;
  for (int k = 0; k < n; ++k) {
    Tensor<float> f = frame_tensor(clip, offset + k);
    // The window starts from an assumed static state: the first flow is zero.
    b.past_flows.push_back(k == 0 ? Tensor<float>::zeros(f.shape()) : compute_flow(f, prev));
    b.past_frames.push_back(f);
    b.past_actions.push_back(action_tensor(clip, offset + k));
    prev = f;
  }
  for (int k = 0; k < horizon; ++k) {
    Tensor<float> f = frame_tensor(clip, offset + n + k);
    b.future_flows.push_back(compute_flow(f, prev));
    b.future_frames.push_back(f);
    b.future_actions.push_back(action_tensor(clip, offset + n + k));
    prev = f;
  }
  return b;
}

namespace {
Tensor<float> stack0(const std::vector<ClipBatch>& ws, const std::vector<Tensor<float>> ClipBatch::*field,
                     std::size_t idx) {
  const Tensor<float>& first = (ws[0].*field)[idx];
  Shape s = first.shape();
  s[0] = static_cast<int>(ws.size());
  Tensor<float> out = Tensor<float>::zeros(s);
  const std::size_t per = first.numel();
  for (std::size_t i = 0; i < ws.size(); ++i)
    std::copy_n((ws[i].*field)[idx].data(), per, out.data() + i * per);
  return out;
}
}  // namespace

ClipBatch stack_batches(const std::vector<ClipBatch>& windows) {
  if (windows.empty()) throw DataError("stack_batches: no windows");
  ClipBatch out;
  out.n = windows[0].n;
  out.horizon = windows[0].horizon;
  for (std::size_t k = 0; k < windows[0].past_frames.size(); ++k) {
    out.past_frames.push_back(stack0(windows, &ClipBatch::past_frames, k));
    out.past_flows.push_back(stack0(windows, &ClipBatch::past_flows, k));
    out.past_actions.push_back(stack0(windows, &ClipBatch::past_actions, k));
  }
  for (std::size_t k = 0; k < windows[0].future_frames.size(); ++k) {
    out.future_frames.push_back(stack0(windows, &ClipBatch::future_frames, k));
    out.future_flows.push_back(stack0(windows, &ClipBatch::future_flows, k));
    out.future_actions.push_back(stack0(windows, &ClipBatch::future_actions, k));
  }
  return out;
}

// ---------------------------------------------------------------------------
// On-disk formats
// ---------------------------------------------------------------------------

namespace {
constexpr char kFramesMagic[4] = {'A', 'C', 'V', 'D'};
constexpr std::uint32_t kFramesVersion = 1;

void write_u32(std::ofstream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}
std::uint32_t read_u32(std::ifstream& is, const std::string& what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw FormatError("truncated file while reading " + what);
  return v;
}

std::string fmt_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}
}  // namespace

void save_sequence(const std::string& seq_dir, const SequenceRecord& seq) {
  fs::create_directories(seq_dir);
  {
    std::ofstream os(seq_dir + "/frames.bin", std::ios::binary);
    if (!os) throw DataError("cannot write " + seq_dir + "/frames.bin");
    os.write(kFramesMagic, 4);
    write_u32(os, kFramesVersion);
    write_u32(os, static_cast<std::uint32_t>(seq.length));
    write_u32(os, static_cast<std::uint32_t>(seq.height));
    write_u32(os, static_cast<std::uint32_t>(seq.width));
    write_u32(os, static_cast<std::uint32_t>(seq.channels));
    os.write(reinterpret_cast<const char*>(seq.frames.data()),
             static_cast<std::streamsize>(seq.frames.size() * sizeof(float)));
  }
  {
    std::ofstream os(seq_dir + "/actions.txt");
    for (int t = 0; t < seq.length; ++t) {
      for (int j = 0; j < seq.action_dims; ++j)
        os << (j ? " " : "") << fmt_float(seq.actions_raw[static_cast<std::size_t>(t) * seq.action_dims + j]);
      os << "\n";
    }
  }
  {
    std::ofstream os(seq_dir + "/meta.txt");
    os << "dt=" << fmt_float(seq.dt) << "\n";
    os << "ranges=";
    for (std::size_t i = 0; i < seq.normalizer.ranges.size(); ++i)
      os << (i ? ";" : "") << fmt_float(seq.normalizer.ranges[i][0]) << ","
         << fmt_float(seq.normalizer.ranges[i][1]);
    os << "\n";
  }
}

namespace {
std::vector<float> read_action_file(const std::string& path, int expected_lines, int dims) {
  std::ifstream is(path);
  if (!is) throw DataError("missing action file " + path + " (expected " +
                           std::to_string(expected_lines) + " lines)");
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(expected_lines) * dims);
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    for (int j = 0; j < dims; ++j) {
      float v;
      if (!(ls >> v))
        throw DataError("action file " + path + " line " + std::to_string(lines + 1) +
                        " has fewer than " + std::to_string(dims) + " values");
      out.push_back(v);
    }
    ++lines;
  }
  if (lines != expected_lines)
    throw DataError("action file " + path + " has " + std::to_string(lines) +
                    " lines, expected " + std::to_string(expected_lines));
  return out;
}

void parse_meta(const std::string& path, SequenceRecord& rec) {
  std::ifstream is(path);
  if (!is) return;  // defaults stand
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "dt") {
      rec.dt = std::stof(val);
    } else if (key == "ranges") {
      std::vector<std::array<double, 2>> ranges;
      std::istringstream rs(val);
      std::string part;
      while (std::getline(rs, part, ';')) {
        const auto comma = part.find(',');
        if (comma == std::string::npos) throw FormatError("bad ranges entry in " + path);
        ranges.push_back({std::stod(part.substr(0, comma)), std::stod(part.substr(comma + 1))});
      }
      if (!ranges.empty()) rec.normalizer.ranges = ranges;
    }
  }
}
}  // namespace

SequenceRecord load_sequence(const std::string& seq_dir) {
  SequenceRecord rec;
  const std::string frames_path = seq_dir + "/frames.bin";
  std::ifstream is(frames_path, std::ios::binary);
  if (!is) throw DataError("missing " + frames_path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kFramesMagic, 4) != 0)
    throw FormatError("bad magic in " + frames_path);
  const std::uint32_t version = read_u32(is, frames_path);
  if (version != kFramesVersion)
    throw FormatError("unsupported version " + std::to_string(version) + " in " + frames_path);
  rec.length = static_cast<int>(read_u32(is, frames_path));
  rec.height = static_cast<int>(read_u32(is, frames_path));
  rec.width = static_cast<int>(read_u32(is, frames_path));
  rec.channels = static_cast<int>(read_u32(is, frames_path));
  if (rec.length < 2 || rec.height < 1 || rec.width < 1 || rec.channels < 1)
    throw FormatError("implausible header in " + frames_path);
  rec.frames.resize(static_cast<std::size_t>(rec.length) * rec.height * rec.width * rec.channels);
  if (!is.read(reinterpret_cast<char*>(rec.frames.data()),
               static_cast<std::streamsize>(rec.frames.size() * sizeof(float))))
    throw FormatError("truncated frame data in " + frames_path);
  parse_meta(seq_dir + "/meta.txt", rec);
  rec.action_dims = rec.normalizer.dims();
  rec.actions_raw = read_action_file(seq_dir + "/actions.txt", rec.length, rec.action_dims);
  return rec;
}

namespace {
std::string seq_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seq_%05d", index);
  return buf;
}
}  // namespace

void save_dataset(const std::string& dir, const std::vector<SequenceRecord>& seqs, int train_count) {
  fs::create_directories(dir);
  std::ofstream manifest(dir + "/manifest.txt");
  if (!manifest) throw DataError("cannot write manifest in " + dir);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const std::string name = seq_dir_name(static_cast<int>(i));
    save_sequence(dir + "/" + name, seqs[i]);
    manifest << (static_cast<int>(i) < train_count ? "train " : "test ") << name << "\n";
  }
}

DataSet load_dataset(const std::string& dir) {
  DataSet ds;
  std::ifstream manifest(dir + "/manifest.txt");
  if (manifest) {
    std::string split, name;
    while (manifest >> split >> name) {
      SequenceRecord rec = load_sequence(dir + "/" + name);
      if (split == "train")
        ds.train.push_back(std::move(rec));
      else if (split == "test")
        ds.test.push_back(std::move(rec));
      else
        throw FormatError("unknown split '" + split + "' in " + dir + "/manifest.txt");
    }
  } else {
    // No manifest: every seq_* directory is a training sequence.
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && e.path().filename().string().rfind("seq_", 0) == 0)
        names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    for (const auto& n : names) ds.train.push_back(load_sequence(dir + "/" + n));
  }
  if (ds.train.empty() && ds.test.empty()) throw DataError("no sequences found in " + dir);
  return ds;
}

// ---------------------------------------------------------------------------
// PPM
// ---------------------------------------------------------------------------

void write_ppm(const std::string& path, const float* hwc, int h, int w, int c) {
  if (c != 3) throw DataError("write_ppm: only 3-channel frames supported");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  os << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
  for (int r = 0; r < h; ++r) {
    for (int i = 0; i < w * 3; ++i) {
      float v = hwc[static_cast<std::size_t>(r) * w * 3 + i];
      v = std::min(1.0f, std::max(0.0f, v));
      row[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

std::vector<float> read_ppm(const std::string& path, int* h, int* w) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("missing " + path);
  std::string magic;
  is >> magic;
  if (magic != "P6") throw FormatError("not a binary PPM: " + path);
  auto next_token = [&]() {
    std::string tok;
    while (is >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      return tok;
    }
    throw FormatError("truncated PPM header: " + path);
  };
  const int W = std::stoi(next_token());
  const int H = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (maxval != 255) throw FormatError("unsupported PPM maxval in " + path);
  is.get();  // single whitespace after maxval
  std::vector<unsigned char> raw(static_cast<std::size_t>(W) * H * 3);
  if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw FormatError("truncated PPM data: " + path);
  std::vector<float> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<float>(raw[i]) / 255.0f;
  *h = H;
  *w = W;
  return out;
}

std::vector<SequenceRecord> ingest_external(const std::string& dir) {
  std::vector<std::string> seq_dirs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && e.path().filename().string().rfind("seq_", 0) == 0)
      seq_dirs.push_back(e.path().string());
  std::sort(seq_dirs.begin(), seq_dirs.end());
  if (seq_dirs.empty()) throw DataError("no seq_* directories in " + dir);

  std::vector<SequenceRecord> out;
  for (const auto& sd : seq_dirs) {
    std::vector<std::string> frame_files;
    for (const auto& e : fs::directory_iterator(sd)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("frame_", 0) == 0 && name.size() > 4 &&
          name.substr(name.size() - 4) == ".ppm")
        frame_files.push_back(e.path().string());
    }
    std::sort(frame_files.begin(), frame_files.end());
    if (frame_files.size() < 2) throw DataError("sequence " + sd + " has fewer than 2 frames");

    SequenceRecord rec;
    parse_meta(sd + "/meta.txt", rec);
    rec.action_dims = rec.normalizer.dims();
    rec.length = static_cast<int>(frame_files.size());
    for (std::size_t i = 0; i < frame_files.size(); ++i) {
      int h = 0, w = 0;
      std::vector<float> px = read_ppm(frame_files[i], &h, &w);
      if (i == 0) {
        rec.height = h;
        rec.width = w;
        rec.channels = 3;
        rec.frames.reserve(px.size() * frame_files.size());
      } else if (h != rec.height || w != rec.width) {
        throw DataError("frame size mismatch in " + sd);
      }
      rec.frames.insert(rec.frames.end(), px.begin(), px.end());
    }
    rec.actions_raw = read_action_file(sd + "/actions.txt", rec.length, rec.action_dims);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace acvg
