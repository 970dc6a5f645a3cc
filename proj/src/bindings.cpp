#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "acvg/dataset.hpp"
#include "acvg/evaluation.hpp"
#include "acvg/gradcheck.hpp"
#include "acvg/training.hpp"

namespace py = pybind11;
using namespace acvg;

namespace {

PhaseConfig config_from_dict(const py::dict& overrides, const std::string& config_path) {
  PhaseConfig cfg = config_path.empty() ? PhaseConfig{} : parse_config_file(config_path);
  for (auto item : overrides)
    apply_config_entry(cfg, py::str(item.first).cast<std::string>(),
                       py::str(item.second).cast<std::string>());
  cfg.validate();
  return cfg;
}

Tensor<float> frame_from_numpy(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
  const auto info = arr.request();
  if (info.ndim == 2) {  // H x W grayscale -> 1-channel CHW
    const int h = static_cast<int>(info.shape[0]), w = static_cast<int>(info.shape[1]);
    std::vector<float> data(static_cast<std::size_t>(h) * w);
    std::copy_n(static_cast<const float*>(info.ptr), data.size(), data.data());
    return Tensor<float>::from({1, h, w}, std::move(data));
  }
  if (info.ndim != 3) throw ShapeError("expected an (H,W,C) or (H,W) frame array");
  const int h = static_cast<int>(info.shape[0]), w = static_cast<int>(info.shape[1]),
            c = static_cast<int>(info.shape[2]);
  const float* src = static_cast<const float*>(info.ptr);
  Tensor<float> t = Tensor<float>::zeros({c, h, w});
  for (int ch = 0; ch < c; ++ch)
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col)
        t.data()[(static_cast<std::size_t>(ch) * h + r) * w + col] =
            src[(static_cast<std::size_t>(r) * w + col) * c + ch];
  return t;
}

py::dict metric_row_dict(const MetricRow& r) {
  py::dict d;
  d["t"] = r.t;
  d["psnr_mean"] = r.psnr_mean;
  d["psnr_std"] = r.psnr_std;
  d["ssim_mean"] = r.ssim_mean;
  d["ssim_std"] = r.ssim_std;
  d["l1_mean"] = r.l1_mean;
  d["l1_std"] = r.l1_std;
  d["action_l2_mean"] = r.action_l2_mean;
  d["action_l2_std"] = r.action_l2_std;
  return d;
}

py::list loss_rows_list(const std::vector<LossRow>& rows) {
  py::list out;
  for (const auto& r : rows) {
    py::dict d;
    d["step"] = r.step;
    d["phase"] = r.phase;
    d["recon_image"] = r.recon_image;
    d["recon_flow"] = r.recon_flow;
    d["adv"] = r.adv;
    d["action"] = r.action;
    d["total"] = r.total;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_acvg, m) {
  m.doc() = "action-conditioned video prediction: dataset generation, training, evaluation";

  py::register_exception<Error>(m, "AcvgError");

  m.def(
      "generate_dataset",
      [](const std::string& out, int sequences, int length, int height, int width,
         std::uint64_t seed, double dt, const std::string& mode) {
        WorldConfig wc;
        wc.frame_h = height;
        wc.frame_w = width;
        wc.dt = dt;
        wc.camera = mode;
        int test = sequences / 5;
        if (sequences >= 2 && test == 0) test = 1;
        std::vector<SequenceRecord> seqs;
        Rng root(seed);
        for (int i = 0; i < sequences; ++i)
          seqs.push_back(
              simulate_sequence(wc, root.split(static_cast<std::uint64_t>(i) + 1).next_u64(), length));
        save_dataset(out, seqs, sequences - test);
      },
      py::arg("out"), py::arg("sequences") = 25, py::arg("length") = 50, py::arg("height") = 32,
      py::arg("width") = 32, py::arg("seed") = 0, py::arg("dt") = 0.1,
      py::arg("mode") = "unicycle");

  m.def(
      "simulate",
      [](std::uint64_t seed, int length, int height, int width, double dt,
         const std::string& mode) {
        WorldConfig wc;
        wc.frame_h = height;
        wc.frame_w = width;
        wc.dt = dt;
        wc.camera = mode;
        SequenceRecord rec = simulate_sequence(wc, seed, length);
        py::array_t<float> frames({rec.length, rec.height, rec.width, rec.channels});
        std::copy(rec.frames.begin(), rec.frames.end(), frames.mutable_data());
        py::array_t<float> actions({rec.length, rec.action_dims});
        std::copy(rec.actions_raw.begin(), rec.actions_raw.end(), actions.mutable_data());
        return py::make_tuple(frames, actions, rec.dt);
      },
      py::arg("seed") = 0, py::arg("length") = 50, py::arg("height") = 32, py::arg("width") = 32,
      py::arg("dt") = 0.1, py::arg("mode") = "unicycle");

  m.def(
      "train",
      [](const std::string& data, const std::string& ckpt_out, const std::string& phase,
         const py::dict& overrides, const std::string& config, const std::string& ckpt_in,
         const std::string& log_out) {
        PhaseConfig cfg = config_from_dict(overrides, config);
        DataSet ds = load_dataset(data);
        Trainer trainer(cfg, ds);
        if (!ckpt_in.empty()) trainer.restore(load_checkpoint(ckpt_in));
        std::vector<LossRow> rows;
        if (phase == "generator") rows = trainer.run_generator_phase(cfg.n_g);
        else if (phase == "actor") rows = trainer.run_actor_phase(cfg.n_a);
        else if (phase == "dual") rows = trainer.run_dual_phase(cfg.n_dual);
        else if (phase == "full")
          rows = trainer.run_full([&](const std::string& done) {
            if (done != "dual") save_checkpoint(ckpt_out + ".phase_" + done, trainer.checkpoint());
          });
        else throw ConfigError("unknown phase '" + phase + "'");
        save_checkpoint(ckpt_out, trainer.checkpoint());
        if (!log_out.empty()) write_loss_log(log_out, rows);
        return loss_rows_list(rows);
      },
      py::arg("data"), py::arg("ckpt_out"), py::arg("phase") = "full",
      py::arg("overrides") = py::dict(), py::arg("config") = "", py::arg("ckpt_in") = "",
      py::arg("log_out") = "");

  m.def(
      "evaluate",
      [](const std::string& data, const std::string& ckpt, const py::dict& overrides,
         const std::string& config, int past, int future, const std::string& action_mode,
         std::uint64_t seed, double noise_sigma, int dt_factor, const std::string& metrics_out) {
        PhaseConfig cfg = config_from_dict(overrides, config);
        DataSet ds = load_dataset(data);
        const auto& split = ds.test.empty() ? ds.train : ds.test;
        const SequenceRecord& first = split.front();
        Models models = build_models(cfg, first.height, first.width, first.channels,
                                     first.action_dims);
        restore_models(models, load_checkpoint(ckpt));
        EvalConfig ec;
        ec.n_past = past;
        ec.t_eval = future;
        ec.mode = parse_action_mode(action_mode);
        ec.noise_sigma = noise_sigma;
        ec.dt_factor = dt_factor;
        ec.clip_len = cfg.clip_len;
        ec.clip_gap = cfg.clip_gap;
        ec.seed = seed;
        auto rows = evaluate(models, split, ec);
        if (!metrics_out.empty()) write_metrics_csv(metrics_out, rows);
        py::list out;
        for (const auto& r : rows) out.append(metric_row_dict(r));
        return out;
      },
      py::arg("data"), py::arg("ckpt"), py::arg("overrides") = py::dict(), py::arg("config") = "",
      py::arg("past") = 5, py::arg("future") = 20, py::arg("action_mode") = "actor",
      py::arg("seed") = 0, py::arg("noise_sigma") = 0.0, py::arg("dt_factor") = 1,
      py::arg("metrics_out") = "");

  m.def(
      "psnr",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
        return psnr(frame_from_numpy(a), frame_from_numpy(b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "ssim",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
        return ssim(frame_from_numpy(a), frame_from_numpy(b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "grad_check",
      [](const std::string& ops, std::uint64_t seed) {
        py::dict out;
        if (ops == "all") {
          for (const auto& r : run_all_grad_checks(seed)) out[py::str(r.op)] = r.max_rel_err;
        } else {
          const auto r = run_grad_check(ops, seed);
          out[py::str(r.op)] = r.max_rel_err;
        }
        return out;
      },
      py::arg("ops") = "all", py::arg("seed") = 0);
}
