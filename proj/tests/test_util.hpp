// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ufp/audio.hpp"
#include "ufp/rng.hpp"

namespace ufp::testutil {

inline AudioBuffer noise(int64_t n, uint64_t seed, double amp = 0.3, int rate = 16000) {
  AudioBuffer x;
  x.sample_rate = rate;
  x.samples.resize(static_cast<size_t>(n));
  Rng rng(seed, "test-noise");
  for (double& v : x.samples) v = amp * (2.0 * rng.uniform() - 1.0);
  return x;
}

inline AudioBuffer tone(double freq, double seconds, int rate = 16000, double amp = 0.5,
                        double fade_s = 0.0) {
  AudioBuffer x;
  x.sample_rate = rate;
  int64_t n = static_cast<int64_t>(seconds * rate);
  x.samples.resize(static_cast<size_t>(n));
  double fade = fade_s * rate;
  for (int64_t t = 0; t < n; ++t) {
    double v = amp * std::sin(2.0 * 3.14159265358979323846 * freq * t / rate);
    if (fade > 0.0) {
      double edge = std::min({1.0, t / fade, (n - 1 - t) / fade});
      v *= std::max(0.0, edge);
    }
    x.samples[static_cast<size_t>(t)] = v;
  }
  return x;
}

inline double l2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size() && i < b.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

inline double rel_l2_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - (i < b.size() ? b[i] : 0.0);
    num += d * d;
    den += a[i] * a[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  size_t n = std::min(a.size(), b.size());
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double num = 0.0, da = 0.0, db = 0.0;
  for (size_t i = 0; i < n; ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(da * db);
}

// Unique scratch directory under the system temp dir, removed on
// destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ufpkit_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& name = "") const {
    return name.empty() ? path_.string() : (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace ufp::testutil
