#include "acvg/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

namespace acvg {

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

void PhaseConfig::validate() const {
  if (n_g < 0 || n_a < 0 || n_dual < 0) throw ConfigError("iteration counts must be >= 0");
  if (lr <= 0.0) throw ConfigError("lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (n_past < 2) throw ConfigError("n_past must be >= 2");
  if (t_train < 1) throw ConfigError("t_train must be >= 1");
  if (clip_len < n_past + t_train)
    throw ConfigError("clip_len must cover n_past + t_train frames");
  if (clip_gap < 0) throw ConfigError("clip_gap must be >= 0");
  loss_weights(1, 1).validate();
  if (grad_clip <= 0.0) throw ConfigError("grad_clip must be positive");
}

LossWeights PhaseConfig::loss_weights(int beta, int gamma) const {
  LossWeights w;
  w.lambda1 = lambda1;
  w.lambda2 = lambda2;
  w.lambda_a = lambda_a;
  w.mu = mu;
  w.beta = beta;
  w.gamma = gamma;
  return w;
}

namespace {
std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

std::string PhaseConfig::summary() const {
  std::ostringstream os;
  os << "n_g=" << n_g << "\n"
     << "n_a=" << n_a << "\n"
     << "n_dual=" << n_dual << "\n"
     << "lr=" << fmt_double(lr) << "\n"
     << "batch_size=" << batch_size << "\n"
     << "n_past=" << n_past << "\n"
     << "t_train=" << t_train << "\n"
     << "clip_len=" << clip_len << "\n"
     << "clip_gap=" << clip_gap << "\n"
     << "lambda1=" << lambda1 << "\n"
     << "lambda2=" << lambda2 << "\n"
     << "lambda_a=" << lambda_a << "\n"
     << "mu=" << fmt_double(mu) << "\n"
     << "grad_clip=" << fmt_double(grad_clip) << "\n"
     << "seed=" << seed << "\n"
     << "gen_width1=" << gen_width1 << "\n"
     << "gen_width2=" << gen_width2 << "\n"
     << "gen_width3=" << gen_width3 << "\n"
     << "gen_lstm_hidden=" << gen_lstm_hidden << "\n"
     << "actor_hidden=" << actor_hidden << "\n"
     << "actor_dense_hidden=" << actor_dense_hidden << "\n"
     << "actor_chi_width1=" << actor_chi_width1 << "\n"
     << "actor_chi_width2=" << actor_chi_width2 << "\n"
     << "actor_chi_stages=" << actor_chi_stages << "\n"
     << "actor_dropout=" << fmt_double(actor_dropout) << "\n"
     << "actor_center=" << (actor_center ? 1 : 0) << "\n"
     << "disc_width1=" << disc_width1 << "\n"
     << "disc_width2=" << disc_width2 << "\n"
     << "disc_width3=" << disc_width3 << "\n"
     << "disc_width4=" << disc_width4 << "\n";
  return os.str();
}

std::uint64_t PhaseConfig::fingerprint() const {
  const std::string s = summary();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

void apply_config_entry(PhaseConfig& cfg, const std::string& key, const std::string& value) {
  auto as_int = [&] { return std::stoi(value); };
  auto as_double = [&] { return std::stod(value); };
  if (key == "n_g") cfg.n_g = as_int();
  else if (key == "n_a") cfg.n_a = as_int();
  else if (key == "n_dual") cfg.n_dual = as_int();
  else if (key == "lr") cfg.lr = as_double();
  else if (key == "batch_size") cfg.batch_size = as_int();
  else if (key == "n_past") cfg.n_past = as_int();
  else if (key == "t_train") cfg.t_train = as_int();
  else if (key == "clip_len") cfg.clip_len = as_int();
  else if (key == "clip_gap") cfg.clip_gap = as_int();
  else if (key == "lambda1") cfg.lambda1 = as_int();
  else if (key == "lambda2") cfg.lambda2 = as_int();
  else if (key == "lambda_a") cfg.lambda_a = as_int();
  else if (key == "mu") cfg.mu = as_double();
  else if (key == "grad_clip") cfg.grad_clip = as_double();
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
  else if (key == "gen_width1") cfg.gen_width1 = as_int();
  else if (key == "gen_width2") cfg.gen_width2 = as_int();
  else if (key == "gen_width3") cfg.gen_width3 = as_int();
  else if (key == "gen_lstm_hidden") cfg.gen_lstm_hidden = as_int();
  else if (key == "actor_hidden") cfg.actor_hidden = as_int();
  else if (key == "actor_dense_hidden") cfg.actor_dense_hidden = as_int();
  else if (key == "actor_chi_width1") cfg.actor_chi_width1 = as_int();
  else if (key == "actor_chi_width2") cfg.actor_chi_width2 = as_int();
  else if (key == "actor_chi_stages") cfg.actor_chi_stages = as_int();
  else if (key == "actor_dropout") cfg.actor_dropout = as_double();
  else if (key == "actor_center") cfg.actor_center = as_int() != 0;
  else if (key == "disc_width1") cfg.disc_width1 = as_int();
  else if (key == "disc_width2") cfg.disc_width2 = as_int();
  else if (key == "disc_width3") cfg.disc_width3 = as_int();
  else if (key == "disc_width4") cfg.disc_width4 = as_int();
  else throw ConfigError("unknown config key: " + key);
}

namespace {
std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}
}  // namespace

PhaseConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  PhaseConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    apply_config_entry(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

Models build_models(const PhaseConfig& cfg, int frame_h, int frame_w, int frame_channels,
                    int action_dim) {
  Models m;
  Rng root(cfg.seed);
  Rng gen_rng = root.split(101);
  Rng actor_rng = root.split(102);
  Rng disc_rng = root.split(103);

  GeneratorConfig gc;
  gc.frame_h = frame_h;
  gc.frame_w = frame_w;
  gc.frame_channels = frame_channels;
  gc.action_dim = action_dim;
  gc.enc_widths = {cfg.gen_width1, cfg.gen_width2, cfg.gen_width3};
  gc.lstm_hidden = cfg.gen_lstm_hidden;
  m.generator = std::make_unique<Generator<float>>(gc, gen_rng);

  ActorConfig ac;
  ac.action_dim = action_dim;
  ac.lstm_hidden = cfg.actor_hidden;
  ac.chi_channels = gc.latent_channels();
  ac.chi_h = gc.latent_h();
  ac.chi_w = gc.latent_w();
  ac.chi_stages = cfg.actor_chi_stages;
  ac.chi_widths = {cfg.actor_chi_width1, cfg.actor_chi_width2};
  ac.dense_hidden = cfg.actor_dense_hidden;
  ac.dropout = cfg.actor_dropout;
  ac.center_features = cfg.actor_center;
  m.actor = std::make_unique<Actor<float>>(ac, actor_rng);

  DiscriminatorConfig dc;
  dc.frame_channels = frame_channels;
  dc.frame_h = frame_h;
  dc.frame_w = frame_w;
  dc.sequence_len = cfg.n_past + cfg.t_train;
  dc.widths = {cfg.disc_width1, cfg.disc_width2, cfg.disc_width3, cfg.disc_width4};
  m.discriminator = std::make_unique<Discriminator<float>>(dc, disc_rng);
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {
constexpr char kCkptMagic[8] = {'A', 'C', 'V', 'G', 'C', 'K', 'P', 'T'};

void w_u16(std::ofstream& os, std::uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); }
void w_u32(std::ofstream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void w_u64(std::ofstream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

std::uint16_t r_u16(std::ifstream& is, const std::string& p) {
  std::uint16_t v;
  if (!is.read(reinterpret_cast<char*>(&v), 2)) throw FormatError("truncated checkpoint " + p);
  return v;
}
std::uint32_t r_u32(std::ifstream& is, const std::string& p) {
  std::uint32_t v;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw FormatError("truncated checkpoint " + p);
  return v;
}
std::uint64_t r_u64(std::ifstream& is, const std::string& p) {
  std::uint64_t v;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw FormatError("truncated checkpoint " + p);
  return v;
}

void write_table(std::ofstream& os, const std::map<std::string, Tensor<float>>& table) {
  w_u32(os, static_cast<std::uint32_t>(table.size()));
  for (const auto& [name, t] : table) {
    w_u16(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) w_u32(os, static_cast<std::uint32_t>(t.dim(d)));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
}

std::map<std::string, Tensor<float>> read_table(std::ifstream& is, const std::string& p) {
  std::map<std::string, Tensor<float>> table;
  const std::uint32_t count = r_u32(is, p);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r_u16(is, p);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw FormatError("truncated checkpoint " + p);
    const int rank = is.get();
    if (rank < 1 || rank > 5) throw FormatError("corrupt tensor rank in checkpoint " + p);
    Shape shape(static_cast<std::size_t>(rank));
    for (int d = 0; d < rank; ++d) shape[static_cast<std::size_t>(d)] = static_cast<int>(r_u32(is, p));
    Tensor<float> t = Tensor<float>::zeros(shape);
    if (!is.read(reinterpret_cast<char*>(t.data()),
                 static_cast<std::streamsize>(t.numel() * sizeof(float))))
      throw FormatError("truncated checkpoint " + p);
    table.emplace(std::move(name), std::move(t));
  }
  return table;
}
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path);
  os.write(kCkptMagic, 8);
  w_u32(os, ckpt.version);
  write_table(os, ckpt.params);
  write_table(os, ckpt.moments);
  w_u64(os, ckpt.global_step);
  w_u64(os, ckpt.config_fingerprint);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("missing checkpoint " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw FormatError("bad checkpoint magic in " + path);
  Checkpoint ckpt;
  ckpt.version = r_u32(is, path);
  if (ckpt.version != 1)
    throw FormatError("unsupported checkpoint version " + std::to_string(ckpt.version));
  ckpt.params = read_table(is, path);
  ckpt.moments = read_table(is, path);
  ckpt.global_step = r_u64(is, path);
  ckpt.config_fingerprint = r_u64(is, path);
  return ckpt;
}

namespace {
const char* kPrefixes[3] = {"generator.", "actor.", "discriminator."};

template <typename Fn>
void for_each_store(const Models& m, Fn fn) {
  fn(kPrefixes[0], m.generator->params());
  fn(kPrefixes[1], m.actor->params());
  fn(kPrefixes[2], m.discriminator->params());
}
template <typename Fn>
void for_each_store(Models& m, Fn fn) {
  fn(kPrefixes[0], m.generator->params());
  fn(kPrefixes[1], m.actor->params());
  fn(kPrefixes[2], m.discriminator->params());
}
}  // namespace

Checkpoint snapshot_models(const Models& models, std::uint64_t global_step,
                           std::uint64_t fingerprint) {
  Checkpoint ckpt;
  ckpt.global_step = global_step;
  ckpt.config_fingerprint = fingerprint;
  for_each_store(models, [&](const char* prefix, const ParamStore<float>& ps) {
    for (const auto& [name, e] : ps.entries()) {
      const std::string full = std::string(prefix) + name;
      ckpt.params.emplace(full, e.value.detach());
      if (!e.m.empty()) {
        ckpt.moments.emplace(full + ".adam_m",
                             Tensor<float>::from(e.value.shape(), std::vector<float>(e.m)));
        ckpt.moments.emplace(full + ".adam_v",
                             Tensor<float>::from(e.value.shape(), std::vector<float>(e.v)));
        ckpt.moments.emplace(full + ".adam_t",
                             Tensor<float>::scalar(static_cast<float>(e.step)));
      }
    }
  });
  return ckpt;
}

void restore_models(Models& models, const Checkpoint& ckpt) {
  for_each_store(models, [&](const char* prefix, ParamStore<float>& ps) {
    for (auto& [name, e] : ps.entries()) {
      const std::string full = std::string(prefix) + name;
      auto it = ckpt.params.find(full);
      if (it == ckpt.params.end())
        throw CheckpointError("checkpoint is missing parameter " + full);
      if (it->second.shape() != e.value.shape())
        throw CheckpointError("checkpoint shape mismatch for " + full + ": " +
                              shape_str(it->second.shape()) + " vs " +
                              shape_str(e.value.shape()));
      e.value.vec() = it->second.vec();
      auto mit = ckpt.moments.find(full + ".adam_m");
      if (mit != ckpt.moments.end()) {
        e.m = mit->second.vec();
        e.v = ckpt.moments.at(full + ".adam_v").vec();
        e.step = static_cast<std::int64_t>(ckpt.moments.at(full + ".adam_t").item());
      } else {
        e.m.clear();
        e.v.clear();
        e.step = 0;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Loss log
// ---------------------------------------------------------------------------

void write_loss_log(const std::string& path, const std::vector<LossRow>& rows) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write loss log " + path);
  os << "step,phase,recon_image,recon_flow,adv,action,total\n";
  for (const auto& r : rows)
    os << r.step << "," << r.phase << "," << fmt_double(r.recon_image) << ","
       << fmt_double(r.recon_flow) << "," << fmt_double(r.adv) << "," << fmt_double(r.action)
       << "," << fmt_double(r.total) << "\n";
}

std::vector<LossRow> read_loss_log(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read loss log " + path);
  std::string line;
  std::getline(is, line);  // header
  std::vector<LossRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    LossRow r;
    std::istringstream ls(line);
    std::string field;
    std::getline(ls, field, ',');
    r.step = std::stol(field);
    std::getline(ls, r.phase, ',');
    std::getline(ls, field, ',');
    r.recon_image = std::stod(field);
    std::getline(ls, field, ',');
    r.recon_flow = std::stod(field);
    std::getline(ls, field, ',');
    r.adv = std::stod(field);
    std::getline(ls, field, ',');
    r.action = std::stod(field);
    std::getline(ls, field, ',');
    r.total = std::stod(field);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(const PhaseConfig& cfg, const DataSet& data)
    : cfg_(cfg), data_rng_(Rng(cfg.seed).split(201)) {
  cfg_.validate();
  for (const auto& seq : data.train) {
    auto clips = make_clips(seq, cfg_.clip_len, cfg_.clip_gap);
    for (auto& c : clips) clips_.push_back(std::move(c));
  }
  if (clips_.empty())
    throw DataError("no training clips: dataset sequences are shorter than clip_len=" +
                    std::to_string(cfg_.clip_len));
  const auto& first = clips_.front();
  models_ = build_models(cfg_, first.height, first.width, first.channels, first.action_dims);
}

ClipBatch Trainer::sample_batch(Rng& rng) const {
  const int max_offset = cfg_.clip_len - (cfg_.n_past + cfg_.t_train);
  std::vector<ClipBatch> windows;
  for (int b = 0; b < cfg_.batch_size; ++b) {
    Rng er = rng.split(static_cast<std::uint64_t>(b));
    const int clip = er.uniform_int(static_cast<int>(clips_.size()));
    const int offset = er.uniform_int(max_offset + 1);
    windows.push_back(build_clip_batch(clips_[static_cast<std::size_t>(clip)], offset,
                                       cfg_.n_past, cfg_.t_train));
  }
  return stack_batches(windows);
}

void Trainer::check_finite(double total) const {
  if (!std::isfinite(total))
    throw NumericError("non-finite loss at step " + std::to_string(global_step_ + 1));
}

void Trainer::note_clip(bool fired, const char* which) {
  if (fired && !clip_was_active_)
    std::cerr << "[acvg] gradient clip engaged (" << which << ", step " << (global_step_ + 1)
              << ")\n";
  clip_was_active_ = fired;
}

namespace {
std::vector<Tensor<float>> detach_all(const std::vector<Tensor<float>>& xs) {
  std::vector<Tensor<float>> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(x.detach());
  return out;
}

std::vector<Tensor<float>> concat_seqs(const std::vector<Tensor<float>>& a,
                                       const std::vector<Tensor<float>>& b) {
  std::vector<Tensor<float>> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}
}  // namespace

LossRow Trainer::generator_step() {
  Rng step_rng = data_rng_.split(static_cast<std::uint64_t>(global_step_));
  ClipBatch batch = sample_batch(step_rng);
  auto& gen = *models_.generator;
  auto& disc = *models_.discriminator;

  GeneratorState<float> st = gen.warmup(batch.past_frames, batch.past_flows, batch.past_actions);
  FixedActionProvider<float> provider(batch.past_actions.back());
  RolloutResult<float> rr =
      gen.rollout(st, batch.past_frames.back(), batch.past_flows.back(), provider, cfg_.t_train);

  // Discriminator update first, on detached predictions.
  Tensor<float> d_real = disc.discriminate(concat_seqs(batch.past_frames, batch.future_frames));
  Tensor<float> d_fake_det = disc.discriminate(concat_seqs(batch.past_frames, detach_all(rr.frames)));
  Tensor<float> l_dis = discriminator_loss(d_real, d_fake_det);
  check_finite(l_dis.item());
  backward(l_dis);
  disc.params().clip_grad_norm(cfg_.grad_clip);
  adam_step(disc.params(), cfg_.lr);

  // Generator update against the refreshed discriminator.
  Tensor<float> d_fake = disc.discriminate(concat_seqs(batch.past_frames, rr.frames));
  Tensor<float> l_ri = recon_image_loss(batch.future_frames, rr.frames, cfg_.lambda1, cfg_.lambda2);
  Tensor<float> l_rf = recon_flow_loss(batch.future_flows, rr.flows, cfg_.lambda1, cfg_.lambda2);
  Tensor<float> l_adv = adversarial_gen_loss(d_fake);
  TotalLossParts parts{l_ri, l_rf, l_adv, Tensor<float>()};
  Tensor<float> total = total_loss(parts, cfg_.loss_weights(1, 0));
  check_finite(total.item());
  backward(total);
  note_clip(models_.generator->params().clip_grad_norm(cfg_.grad_clip), "generator");
  adam_step(gen.params(), cfg_.lr);
  disc.params().zero_grads();  // gradients from the generator pass are discarded

  ++global_step_;
  return {global_step_, "generator", l_ri.item(), l_rf.item(), l_adv.item(), 0.0, total.item()};
}

LossRow Trainer::actor_step() {
  Rng step_rng = data_rng_.split(static_cast<std::uint64_t>(global_step_));
  ClipBatch batch = sample_batch(step_rng);
  auto& gen = *models_.generator;
  auto& actor = *models_.actor;

  GeneratorState<float> st = gen.warmup(batch.past_frames, batch.past_flows, batch.past_actions);
  ActorActionProvider<float> provider(actor, batch.past_actions);
  gen.rollout(st, batch.past_frames.back(), batch.past_flows.back(), provider, cfg_.t_train);

  Tensor<float> l_act = action_loss(batch.future_actions, provider.predicted());
  Tensor<float> total = total_loss(TotalLossParts{{}, {}, {}, l_act}, cfg_.loss_weights(0, 1));
  check_finite(total.item());
  backward(total);
  note_clip(actor.params().clip_grad_norm(cfg_.grad_clip), "actor");
  adam_step(actor.params(), cfg_.lr);
  // The generator stays frozen: gradients that reached it are dropped.
  gen.params().zero_grads();

  ++global_step_;
  return {global_step_, "actor", 0.0, 0.0, 0.0, l_act.item(), total.item()};
}

LossRow Trainer::dual_step() {
  Rng step_rng = data_rng_.split(static_cast<std::uint64_t>(global_step_));
  ClipBatch batch = sample_batch(step_rng);
  auto& gen = *models_.generator;
  auto& actor = *models_.actor;
  auto& disc = *models_.discriminator;

  GeneratorState<float> st = gen.warmup(batch.past_frames, batch.past_flows, batch.past_actions);
  ActorActionProvider<float> provider(actor, batch.past_actions);
  RolloutResult<float> rr =
      gen.rollout(st, batch.past_frames.back(), batch.past_flows.back(), provider, cfg_.t_train);

  Tensor<float> d_real = disc.discriminate(concat_seqs(batch.past_frames, batch.future_frames));
  Tensor<float> d_fake_det = disc.discriminate(concat_seqs(batch.past_frames, detach_all(rr.frames)));
  Tensor<float> l_dis = discriminator_loss(d_real, d_fake_det);
  check_finite(l_dis.item());
  backward(l_dis);
  disc.params().clip_grad_norm(cfg_.grad_clip);
  adam_step(disc.params(), cfg_.lr);

  Tensor<float> d_fake = disc.discriminate(concat_seqs(batch.past_frames, rr.frames));
  Tensor<float> l_ri = recon_image_loss(batch.future_frames, rr.frames, cfg_.lambda1, cfg_.lambda2);
  Tensor<float> l_rf = recon_flow_loss(batch.future_flows, rr.flows, cfg_.lambda1, cfg_.lambda2);
  Tensor<float> l_adv = adversarial_gen_loss(d_fake);
  Tensor<float> l_act = action_loss(batch.future_actions, provider.predicted());
  Tensor<float> total =
      total_loss(TotalLossParts{l_ri, l_rf, l_adv, l_act}, cfg_.loss_weights(1, 1));
  check_finite(total.item());
  backward(total);
  note_clip(gen.params().clip_grad_norm(cfg_.grad_clip), "dual");
  actor.params().clip_grad_norm(cfg_.grad_clip);
  adam_step(gen.params(), cfg_.lr);
  adam_step(actor.params(), cfg_.lr);
  disc.params().zero_grads();

  ++global_step_;
  return {global_step_, "dual", l_ri.item(), l_rf.item(), l_adv.item(), l_act.item(), total.item()};
}

std::vector<LossRow> Trainer::run_generator_phase(int iterations) {
  std::vector<LossRow> rows;
  rows.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) rows.push_back(generator_step());
  return rows;
}

std::vector<LossRow> Trainer::run_actor_phase(int iterations) {
  std::vector<LossRow> rows;
  rows.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) rows.push_back(actor_step());
  return rows;
}

std::vector<LossRow> Trainer::run_dual_phase(int iterations) {
  std::vector<LossRow> rows;
  rows.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) rows.push_back(dual_step());
  return rows;
}

std::vector<LossRow> Trainer::run_full(const std::function<void(const std::string&)>& phase_ckpt) {
  std::vector<LossRow> rows = run_generator_phase(cfg_.n_g);
  if (phase_ckpt) phase_ckpt("generator");
  auto a = run_actor_phase(cfg_.n_a);
  rows.insert(rows.end(), a.begin(), a.end());
  if (phase_ckpt) phase_ckpt("actor");
  auto d = run_dual_phase(cfg_.n_dual);
  rows.insert(rows.end(), d.begin(), d.end());
  if (phase_ckpt) phase_ckpt("dual");
  return rows;
}

Checkpoint Trainer::checkpoint() const {
  return snapshot_models(models_, static_cast<std::uint64_t>(global_step_), cfg_.fingerprint());
}

void Trainer::restore(const Checkpoint& ckpt) {
  restore_models(models_, ckpt);
  global_step_ = static_cast<long>(ckpt.global_step);
}

}  // namespace acvg
