#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "acvg/rng.hpp"
#include "acvg/tensor.hpp"

namespace testutil {

// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("acvg_" + tag + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
  std::string sub(const std::string& name) const { return (path / name).string(); }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
};

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

inline CliResult run_cli(const std::string& args) {
  TempDir tmp("cli_out");
  const std::string out_file = tmp.sub("out.txt");
  const std::string cmd = std::string(ACVG_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
  const int rc = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream is(out_file);
  res.output.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
  return res;
}

inline std::vector<char> read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

template <typename T>
acvg::Tensor<T> rand_tensor(const acvg::Shape& s, acvg::Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  acvg::Tensor<T> t = acvg::Tensor<T>::zeros(s);
  for (auto& v : t.vec()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
double max_abs_diff(const acvg::Tensor<T>& a, const acvg::Tensor<T>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.vec()[i]) - static_cast<double>(b.vec()[i])));
  return m;
}

template <typename T>
bool bitwise_equal(const acvg::Tensor<T>& a, const acvg::Tensor<T>& b) {
  return a.shape() == b.shape() && a.vec() == b.vec();
}

}  // namespace testutil
