#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "acvg/training.hpp"
#include "test_util.hpp"

using testutil::CliResult;
using testutil::run_cli;
using testutil::TempDir;

namespace {

// Slim run configuration shared by the CLI round-trip tests.
void write_tiny_config(const std::string& path, int n_g = 2, int n_a = 2, int n_dual = 2) {
  std::ofstream os(path);
  os << "n_g = " << n_g << "\nn_a = " << n_a << "\nn_dual = " << n_dual << "\n"
     << "batch_size = 2\nn_past = 3\nt_train = 4\nclip_len = 16\nclip_gap = 4\n"
     << "gen_width1 = 4\ngen_width2 = 6\ngen_width3 = 8\ngen_lstm_hidden = 8\n"
     << "actor_hidden = 4\nactor_dense_hidden = 8\nactor_chi_width1 = 4\n"
     << "actor_chi_width2 = 4\nactor_chi_stages = 1\n"
     << "disc_width1 = 4\ndisc_width2 = 6\ndisc_width3 = 6\ndisc_width4 = 8\nseed = 5\n";
}

std::string gen_tiny_data(const TempDir& dir) {
  const std::string data = dir.sub("data");
  const CliResult r = run_cli("gen-data --out " + data +
                              " --sequences 3 --length 20 --height 16 --width 16 --seed 3");
  REQUIRE(r.exit_code == 0);
  return data;
}

bool dirs_bitwise_equal(const std::string& a, const std::string& b) {
  namespace fs = std::filesystem;
  std::vector<std::string> rel;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a).string());
  std::sort(rel.begin(), rel.end());
  for (const auto& r : rel) {
    if (!fs::exists(fs::path(b) / r)) return false;
    if (testutil::read_bytes((fs::path(a) / r).string()) !=
        testutil::read_bytes((fs::path(b) / r).string()))
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("cli gen-data: split ratio, determinism, invalid length") {
  TempDir dir("cli_gen");
  CliResult r = run_cli("gen-data --out " + dir.sub("d25") +
                        " --sequences 25 --length 2 --height 16 --width 16 --seed 1");
  CHECK(r.exit_code == 0);
  std::ifstream manifest(dir.sub("d25") + "/manifest.txt");
  int train = 0, test = 0;
  std::string split, name;
  while (manifest >> split >> name) (split == "train" ? train : test)++;
  CHECK(train == 20);
  CHECK(test == 5);

  CHECK(run_cli("gen-data --out " + dir.sub("a") +
                " --sequences 2 --length 8 --height 16 --width 16 --seed 9")
            .exit_code == 0);
  CHECK(run_cli("gen-data --out " + dir.sub("b") +
                " --sequences 2 --length 8 --height 16 --width 16 --seed 9")
            .exit_code == 0);
  CHECK(dirs_bitwise_equal(dir.sub("a"), dir.sub("b")));

  CHECK(run_cli("gen-data --out " + dir.sub("bad") + " --length 1").exit_code == 2);
}

TEST_CASE("cli train: prerequisites, full pipeline, reproducible logs") {
  TempDir dir("cli_train");
  const std::string data = gen_tiny_data(dir);
  write_tiny_config(dir.sub("run.cfg"));

  // actor phase without a starting checkpoint is a usage error
  CHECK(run_cli("train --data " + data + " --config " + dir.sub("run.cfg") +
                " --phase actor --ckpt-out " + dir.sub("x.ckpt"))
            .exit_code == 2);

  const std::string ckpt = dir.sub("model.ckpt");
  CliResult full = run_cli("train --data " + data + " --config " + dir.sub("run.cfg") +
                           " --phase full --ckpt-out " + ckpt);
  CHECK(full.exit_code == 0);
  CHECK(std::filesystem::exists(ckpt));
  CHECK(std::filesystem::exists(ckpt + ".phase_generator"));
  CHECK(std::filesystem::exists(ckpt + ".phase_actor"));
  CHECK(std::filesystem::exists(ckpt + ".loss.csv"));
  // Banner surfaces the resolved config.
  CHECK(full.output.find("clip_len=16") != std::string::npos);
  CHECK(full.output.find("lr=0.0001") != std::string::npos);

  const std::string ckpt2 = dir.sub("model2.ckpt");
  CHECK(run_cli("train --data " + data + " --config " + dir.sub("run.cfg") +
                " --phase full --ckpt-out " + ckpt2)
            .exit_code == 0);
  CHECK(testutil::read_bytes(ckpt + ".loss.csv") == testutil::read_bytes(ckpt2 + ".loss.csv"));
  CHECK(testutil::read_bytes(ckpt) == testutil::read_bytes(ckpt2));

  // unknown config key
  {
    std::ofstream os(dir.sub("bad.cfg"));
    os << "flux_capacitor = 1\n";
  }
  CHECK(run_cli("train --data " + data + " --config " + dir.sub("bad.cfg") +
                " --phase full --ckpt-out " + dir.sub("y.ckpt"))
            .exit_code == 2);
}

TEST_CASE("cli eval and ablate") {
  TempDir dir("cli_eval");
  const std::string data = gen_tiny_data(dir);
  write_tiny_config(dir.sub("run.cfg"));
  const std::string ckpt = dir.sub("model.ckpt");
  REQUIRE(run_cli("train --data " + data + " --config " + dir.sub("run.cfg") +
                  " --phase full --ckpt-out " + ckpt)
              .exit_code == 0);

  CliResult ev = run_cli("eval --data " + data + " --config " + dir.sub("run.cfg") + " --ckpt " +
                         ckpt + " --past 3 --future 5 --action-mode actor --metrics-out " +
                         dir.sub("m.csv"));
  CHECK(ev.exit_code == 0);
  {
    std::ifstream is(dir.sub("m.csv"));
    std::string line;
    int lines = 0;
    while (std::getline(is, line))
      if (!line.empty()) ++lines;
    CHECK(lines == 6);  // header + 5 rows
  }

  CHECK(run_cli("eval --data " + data + " --config " + dir.sub("run.cfg") + " --ckpt " + ckpt +
                " --past 3 --future 500 --action-mode gt --metrics-out " + dir.sub("m2.csv"))
            .exit_code == 2);

  CliResult ab = run_cli("ablate --data " + data + " --config " + dir.sub("run.cfg") +
                         " --ckpt-acvg " + ckpt + " --ckpt-fa " + ckpt +
                         ".phase_generator --modes full,fixed,noise --seeds 2 --past 3 --future 5"
                         " --out " + dir.sub("ablation"));
  CHECK(ab.exit_code == 0);
  CHECK(std::filesystem::exists(dir.sub("ablation") + "/summary.csv"));
  CHECK(std::filesystem::exists(dir.sub("ablation") + "/full_acvg_seed0.csv"));
  CHECK(std::filesystem::exists(dir.sub("ablation") + "/noise_fa_mean.csv"));

  CHECK(run_cli("ablate --data " + data + " --config " + dir.sub("run.cfg") + " --ckpt-acvg " +
                ckpt + " --ckpt-fa " + dir.sub("nope.ckpt") + " --out " + dir.sub("ablation2"))
            .exit_code == 2);
}

TEST_CASE("cli grad-check: pass, fixture failure, unknown op") {
  CliResult single = run_cli("grad-check --ops dense --seed 1");
  CHECK(single.exit_code == 0);
  CHECK(single.output.find("dense") != std::string::npos);
  CHECK(single.output.find("PASS") != std::string::npos);

  CliResult corrupt = run_cli("grad-check --ops _corrupt_fixture");
  CHECK(corrupt.exit_code == 1);
  CHECK(corrupt.output.find("_corrupt_fixture") != std::string::npos);
  CHECK(corrupt.output.find("FAIL") != std::string::npos);

  CHECK(run_cli("grad-check --ops no_such_op").exit_code == 2);
}

TEST_CASE("cli rejects unknown flags") {
  CHECK(run_cli("gen-data --out /tmp/x --warp 9").exit_code == 2);
  CHECK(run_cli("no-such-command").exit_code == 2);
}
