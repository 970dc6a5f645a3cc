#include "acvg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace acvg {

double psnr(const Tensor<float>& a, const Tensor<float>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("psnr: shapes " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double mse = 0.0;
  const float* pa = a.data();
  const float* pb = b.data();
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.numel());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

const std::vector<double>& ssim_weights() {
  static const std::vector<double> w = [] {
    std::vector<double> g(kSsimWindow);
    double total = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
      const double d = i - (kSsimWindow - 1) / 2.0;
      g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
      total += g[static_cast<std::size_t>(i)];
    }
    for (auto& v : g) v /= total;
    return g;
  }();
  return w;
}

// Separable Gaussian-weighted local sums over valid window positions.
void local_weighted(const std::vector<double>& img, int h, int w, std::vector<double>& out) {
  const auto& g = ssim_weights();
  const int wo = w - kSsimWindow + 1, ho = h - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * wo);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < wo; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += g[static_cast<std::size_t>(k)] * img[static_cast<std::size_t>(r) * w + c + k];
      tmp[static_cast<std::size_t>(r) * wo + c] = acc;
    }
  out.assign(static_cast<std::size_t>(ho) * wo, 0.0);
  for (int r = 0; r < ho; ++r)
    for (int c = 0; c < wo; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += g[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>(r + k) * wo + c];
      out[static_cast<std::size_t>(r) * wo + c] = acc;
    }
}

double ssim_channel(const float* x, const float* y, int h, int w) {
  std::vector<double> xv(static_cast<std::size_t>(h) * w), yv(xv.size()), xx(xv.size()),
      yy(xv.size()), xy(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    xv[i] = x[i];
    yv[i] = y[i];
    xx[i] = xv[i] * xv[i];
    yy[i] = yv[i] * yv[i];
    xy[i] = xv[i] * yv[i];
  }
  std::vector<double> mx, my, mxx, myy, mxy;
  local_weighted(xv, h, w, mx);
  local_weighted(yv, h, w, my);
  local_weighted(xx, h, w, mxx);
  local_weighted(yy, h, w, myy);
  local_weighted(xy, h, w, mxy);
  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;
  double acc = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = mxx[i] - mx[i] * mx[i];
    const double vy = myy[i] - my[i] * my[i];
    const double cov = mxy[i] - mx[i] * my[i];
    acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
           ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(mx.size());
}
}  // namespace

double ssim(const Tensor<float>& a, const Tensor<float>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("ssim: shapes " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Shape s = a.shape();
  int C, H, W;
  if (s.size() == 4 && s[0] == 1) {
    C = s[1];
    H = s[2];
    W = s[3];
  } else if (s.size() == 3) {
    C = s[0];
    H = s[1];
    W = s[2];
  } else {
    throw ShapeError("ssim: expected (C,H,W) or (1,C,H,W), got " + shape_str(s));
  }
  if (H < kSsimWindow || W < kSsimWindow)
    throw GeometryError("ssim: frame " + std::to_string(H) + "x" + std::to_string(W) +
                        " smaller than the 11x11 window");
  double acc = 0.0;
  for (int c = 0; c < C; ++c)
    acc += ssim_channel(a.data() + static_cast<std::size_t>(c) * H * W,
                        b.data() + static_cast<std::size_t>(c) * H * W, H, W);
  return acc / C;
}

std::vector<double> action_l2_curve(const std::vector<std::vector<float>>& target,
                                    const std::vector<std::vector<float>>& predicted) {
  if (target.size() != predicted.size())
    throw ShapeError("action_l2_curve: sequence lengths differ (" + std::to_string(target.size()) +
                     " vs " + std::to_string(predicted.size()) + ")");
  std::vector<double> out(target.size());
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (target[t].size() != predicted[t].size())
      throw ShapeError("action_l2_curve: dimension mismatch at step " + std::to_string(t));
    double acc = 0.0;
    for (std::size_t j = 0; j < target[t].size(); ++j) {
      const double d = static_cast<double>(target[t][j]) - predicted[t][j];
      acc += d * d;
    }
    out[t] = std::sqrt(acc);
  }
  return out;
}

ActionMode parse_action_mode(const std::string& name) {
  if (name == "actor") return ActionMode::Actor;
  if (name == "gt") return ActionMode::GroundTruth;
  if (name == "fixed") return ActionMode::Fixed;
  throw ConfigError("unknown action mode '" + name + "' (expected actor|gt|fixed)");
}

// ---------------------------------------------------------------------------
// Evaluation loop
// ---------------------------------------------------------------------------

namespace {

// Adds clamped Gaussian noise around any base provider (the in-the-loop actor
// handles its own noise so the perturbation also reaches its recurrence).
class NoisyProvider : public ActionProvider<float> {
 public:
  NoisyProvider(ActionProvider<float>& base, double sigma, Rng& rng)
      : base_(base), sigma_(sigma), rng_(rng) {}
  Tensor<float> action(int t) override {
    Tensor<float> a = base_.action(t);
    if (sigma_ <= 0.0) return a;
    Tensor<float> noisy = a.detach();
    for (auto& v : noisy.vec())
      v = std::min(1.0f, std::max(-1.0f, static_cast<float>(v + rng_.normal(0.0, sigma_))));
    return noisy;
  }
  void observe_chi(int t, const Tensor<float>& chi) override { base_.observe_chi(t, chi); }

 private:
  ActionProvider<float>& base_;
  double sigma_;
  Rng& rng_;
};

struct WindowStats {
  std::vector<double> psnr_v, ssim_v, l1_v, act_v;
};

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

double l1_distance(const Tensor<float>& a, const Tensor<float>& b) {
  double acc = 0.0;
  const float* pa = a.data();
  const float* pb = b.data();
  for (std::size_t i = 0; i < a.numel(); ++i) acc += std::abs(static_cast<double>(pa[i]) - pb[i]);
  return acc / static_cast<double>(a.numel());
}

std::vector<float> row_of(const Tensor<float>& t) {
  return std::vector<float>(t.vec());
}

}  // namespace

std::vector<MetricRow> evaluate(const Models& models, const std::vector<SequenceRecord>& test,
                                const EvalConfig& cfg) {
  if (test.empty()) throw DataError("evaluate: no test sequences");
  NoGradGuard ng;

  std::vector<ClipBatch> windows;
  for (const auto& seq : test) {
    for (auto& clip : make_clips(seq, cfg.clip_len, cfg.clip_gap)) {
      SequenceRecord c = cfg.dt_factor > 1 ? subsample_dt(clip, cfg.dt_factor) : clip;
      const int span = cfg.n_past + cfg.t_eval;
      for (int offset = 0; offset + span <= c.length; offset += span)
        windows.push_back(build_clip_batch(c, offset, cfg.n_past, cfg.t_eval));
    }
  }
  if (windows.empty())
    throw WindowError("evaluate: horizon " + std::to_string(cfg.t_eval) + " with " +
                      std::to_string(cfg.n_past) + " past frames exceeds clip capacity");

  if (!cfg.dump_dir.empty()) fs::create_directories(cfg.dump_dir);

  std::vector<WindowStats> per_t(static_cast<std::size_t>(cfg.t_eval));
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const ClipBatch& batch = windows[w];
    Rng noise_rng = Rng(cfg.seed).split(w + 1);

    GeneratorState<float> st =
        models.generator->warmup(batch.past_frames, batch.past_flows, batch.past_actions);

    std::unique_ptr<ActorActionProvider<float>> actor_prov;
    std::unique_ptr<ActionProvider<float>> base_prov;
    std::unique_ptr<NoisyProvider> noisy_prov;
    ActionProvider<float>* prov = nullptr;
    switch (cfg.mode) {
      case ActionMode::Actor:
        actor_prov = std::make_unique<ActorActionProvider<float>>(
            *models.actor, batch.past_actions, cfg.noise_sigma,
            cfg.noise_sigma > 0.0 ? &noise_rng : nullptr);
        prov = actor_prov.get();
        break;
      case ActionMode::Fixed:
        base_prov = std::make_unique<FixedActionProvider<float>>(batch.past_actions.back());
        break;
      case ActionMode::GroundTruth: {
        std::vector<Tensor<float>> replay;
        replay.push_back(batch.past_actions.back());
        for (int t = 0; t + 1 < cfg.t_eval; ++t)
          replay.push_back(batch.future_actions[static_cast<std::size_t>(t)]);
        base_prov = std::make_unique<ReplayActionProvider<float>>(std::move(replay));
        break;
      }
    }
    if (!prov) {
      if (cfg.noise_sigma > 0.0) {
        noisy_prov = std::make_unique<NoisyProvider>(*base_prov, cfg.noise_sigma, noise_rng);
        prov = noisy_prov.get();
      } else {
        prov = base_prov.get();
      }
    }

    RolloutResult<float> rr = models.generator->rollout(st, batch.past_frames.back(),
                                                        batch.past_flows.back(), *prov, cfg.t_eval);

    for (int t = 0; t < cfg.t_eval; ++t) {
      const Tensor<float>& target = batch.future_frames[static_cast<std::size_t>(t)];
      const Tensor<float>& pred = rr.frames[static_cast<std::size_t>(t)];
      WindowStats& s = per_t[static_cast<std::size_t>(t)];
      s.psnr_v.push_back(psnr(target, pred));
      s.ssim_v.push_back(ssim(target, pred));
      s.l1_v.push_back(l1_distance(target, pred));

      std::vector<float> predicted_action;
      switch (cfg.mode) {
        case ActionMode::Actor:
          predicted_action = row_of(actor_prov->predicted()[static_cast<std::size_t>(t)]);
          break;
        case ActionMode::Fixed:
          predicted_action = row_of(batch.past_actions.back());
          break;
        case ActionMode::GroundTruth:
          predicted_action = row_of(batch.future_actions[static_cast<std::size_t>(t)]);
          break;
      }
      const std::vector<float> target_action = row_of(batch.future_actions[static_cast<std::size_t>(t)]);
      s.act_v.push_back(action_l2_curve({target_action}, {predicted_action})[0]);

      if (!cfg.dump_dir.empty()) {
        const int C = pred.dim(1), H = pred.dim(2), W = pred.dim(3);
        std::vector<float> hwc(static_cast<std::size_t>(H) * W * C);
        for (int c = 0; c < C; ++c)
          for (int h = 0; h < H; ++h)
            for (int ww = 0; ww < W; ++ww)
              hwc[(static_cast<std::size_t>(h) * W + ww) * C + c] =
                  pred.data()[(static_cast<std::size_t>(c) * H + h) * W + ww];
        char name[64];
        std::snprintf(name, sizeof(name), "pred_w%03zu_t%02d.ppm", w, t + 1);
        write_ppm(cfg.dump_dir + "/" + name, hwc.data(), H, W, C);
      }
    }
  }

  std::vector<MetricRow> rows;
  for (int t = 0; t < cfg.t_eval; ++t) {
    const WindowStats& s = per_t[static_cast<std::size_t>(t)];
    MetricRow r;
    r.t = t + 1;
    r.psnr_mean = mean_of(s.psnr_v);
    r.psnr_std = std_of(s.psnr_v, r.psnr_mean);
    r.ssim_mean = mean_of(s.ssim_v);
    r.ssim_std = std_of(s.ssim_v, r.ssim_mean);
    r.l1_mean = mean_of(s.l1_v);
    r.l1_std = std_of(s.l1_v, r.l1_mean);
    r.action_l2_mean = mean_of(s.act_v);
    r.action_l2_std = std_of(s.act_v, r.action_l2_mean);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write metrics CSV " + path);
  os << "t,psnr_mean,psnr_std,ssim_mean,ssim_std,l1_mean,l1_std,action_l2_mean,action_l2_std\n";
  for (const auto& r : rows)
    os << r.t << "," << fmt(r.psnr_mean) << "," << fmt(r.psnr_std) << "," << fmt(r.ssim_mean)
       << "," << fmt(r.ssim_std) << "," << fmt(r.l1_mean) << "," << fmt(r.l1_std) << ","
       << fmt(r.action_l2_mean) << "," << fmt(r.action_l2_std) << "\n";
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read metrics CSV " + path);
  std::string line;
  std::getline(is, line);
  std::vector<MetricRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f;
    MetricRow r;
    std::getline(ls, f, ',');
    r.t = std::stoi(f);
    std::getline(ls, f, ',');
    r.psnr_mean = std::stod(f);
    std::getline(ls, f, ',');
    r.psnr_std = std::stod(f);
    std::getline(ls, f, ',');
    r.ssim_mean = std::stod(f);
    std::getline(ls, f, ',');
    r.ssim_std = std::stod(f);
    std::getline(ls, f, ',');
    r.l1_mean = std::stod(f);
    std::getline(ls, f, ',');
    r.l1_std = std::stod(f);
    std::getline(ls, f, ',');
    r.action_l2_mean = std::stod(f);
    std::getline(ls, f, ',');
    r.action_l2_std = std::stod(f);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

double horizon_mean(const std::vector<MetricRow>& rows, double MetricRow::*field, int t_lo,
                    int t_hi) {
  double acc = 0.0;
  int count = 0;
  for (const auto& r : rows)
    if (r.t >= t_lo && r.t <= t_hi) {
      acc += r.*field;
      ++count;
    }
  if (count == 0) throw ConfigError("horizon_mean: empty range");
  return acc / count;
}

namespace {
std::vector<MetricRow> average_rows(const std::vector<std::vector<MetricRow>>& sets) {
  std::vector<MetricRow> out = sets[0];
  for (std::size_t s = 1; s < sets.size(); ++s)
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i].psnr_mean += sets[s][i].psnr_mean;
      out[i].psnr_std += sets[s][i].psnr_std;
      out[i].ssim_mean += sets[s][i].ssim_mean;
      out[i].ssim_std += sets[s][i].ssim_std;
      out[i].l1_mean += sets[s][i].l1_mean;
      out[i].l1_std += sets[s][i].l1_std;
      out[i].action_l2_mean += sets[s][i].action_l2_mean;
      out[i].action_l2_std += sets[s][i].action_l2_std;
    }
  const double k = 1.0 / static_cast<double>(sets.size());
  for (auto& r : out) {
    r.psnr_mean *= k;
    r.psnr_std *= k;
    r.ssim_mean *= k;
    r.ssim_std *= k;
    r.l1_mean *= k;
    r.l1_std *= k;
    r.action_l2_mean *= k;
    r.action_l2_std *= k;
  }
  return out;
}
}  // namespace

AblationReport run_ablation(const Models& acvg_models, const Models& fa_models,
                            const std::vector<SequenceRecord>& test, const AblationConfig& cfg) {
  AblationReport report;
  struct Task {
    std::string mode, model;
    const Models* models;
    ActionMode action;
    double sigma;
    int dt_factor, horizon;
  };
  std::vector<Task> tasks;
  for (const auto& mode : cfg.modes) {
    if (mode == "full") {
      tasks.push_back({"full", "acvg", &acvg_models, ActionMode::Actor, 0.0, 1, cfg.t_eval});
    } else if (mode == "fixed") {
      tasks.push_back({"fixed", "fa", &fa_models, ActionMode::Fixed, 0.0, 1, cfg.t_eval});
    } else if (mode == "dt2") {
      tasks.push_back({"dt2", "acvg", &acvg_models, ActionMode::Actor, 0.0, 2, cfg.t_eval_dt2});
      tasks.push_back({"dt2", "fa", &fa_models, ActionMode::Fixed, 0.0, 2, cfg.t_eval_dt2});
    } else if (mode == "noise") {
      tasks.push_back({"noise", "acvg", &acvg_models, ActionMode::Actor, cfg.noise_sigma, 1, cfg.t_eval});
      tasks.push_back({"noise", "fa", &fa_models, ActionMode::Fixed, cfg.noise_sigma, 1, cfg.t_eval});
    } else {
      throw ConfigError("unknown ablation mode '" + mode + "'");
    }
  }

  for (const auto& task : tasks) {
    std::vector<std::vector<MetricRow>> seed_rows;
    for (int s = 0; s < cfg.seeds; ++s) {
      EvalConfig ec;
      ec.n_past = cfg.n_past;
      ec.t_eval = task.horizon;
      ec.mode = task.action;
      ec.noise_sigma = task.sigma;
      ec.dt_factor = task.dt_factor;
      ec.clip_len = cfg.clip_len;
      ec.clip_gap = cfg.clip_gap;
      ec.seed = Rng(cfg.seed).split(static_cast<std::uint64_t>(s) + 500).next_u64();
      auto rows = evaluate(*task.models, test, ec);
      report.per_seed.push_back({task.mode, task.model, s, rows});
      seed_rows.push_back(std::move(rows));
    }
    report.averaged.push_back({task.mode, task.model, -1, average_rows(seed_rows)});
  }
  return report;
}

void write_ablation_report(const std::string& out_dir, const AblationReport& report) {
  fs::create_directories(out_dir);
  for (const auto& e : report.per_seed)
    write_metrics_csv(out_dir + "/" + e.mode + "_" + e.model + "_seed" + std::to_string(e.seed) +
                          ".csv",
                      e.rows);
  for (const auto& e : report.averaged)
    write_metrics_csv(out_dir + "/" + e.mode + "_" + e.model + "_mean.csv", e.rows);

  std::ofstream os(out_dir + "/summary.csv");
  if (!os) throw DataError("cannot write ablation summary in " + out_dir);
  os << "mode,model,metric,value\n";
  for (const auto& e : report.averaged) {
    const int t_hi = static_cast<int>(e.rows.size());
    os << e.mode << "," << e.model << ",psnr," << fmt(horizon_mean(e.rows, &MetricRow::psnr_mean, 1, t_hi)) << "\n";
    os << e.mode << "," << e.model << ",ssim," << fmt(horizon_mean(e.rows, &MetricRow::ssim_mean, 1, t_hi)) << "\n";
    os << e.mode << "," << e.model << ",l1," << fmt(horizon_mean(e.rows, &MetricRow::l1_mean, 1, t_hi)) << "\n";
    os << e.mode << "," << e.model << ",action_l2," << fmt(horizon_mean(e.rows, &MetricRow::action_l2_mean, 1, t_hi)) << "\n";
  }
}

}  // namespace acvg
