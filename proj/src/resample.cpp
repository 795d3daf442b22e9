// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ufp/resample.hpp"

#include <cmath>
#include <numeric>
#include <vector>

#include "ufp/error.hpp"

namespace ufp {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kZeroCrossings = 32;  // sinc zero crossings inside the window

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

// Blackman window over [-1, 1].
double blackman(double u) {
  if (std::abs(u) > 1.0) return 0.0;
  return 0.42 + 0.5 * std::cos(kPi * u) + 0.08 * std::cos(2.0 * kPi * u);
}

}  // namespace

AudioBuffer resample(const AudioBuffer& buf, int target_rate) {
  if (target_rate <= 0) throw Error("resample: target rate must be positive");
  if (buf.empty()) throw Error("resample: empty input buffer");
  if (target_rate == buf.sample_rate) return buf;

  int64_t g = std::gcd(static_cast<int64_t>(buf.sample_rate), static_cast<int64_t>(target_rate));
  int64_t up = target_rate / g;
  int64_t down = buf.sample_rate / g;

  // Anti-alias cutoff as a fraction of the input Nyquist; the kernel support
  // widens with 1/cutoff so the transition band stays proportional.
  double cutoff = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  int half = static_cast<int>(std::ceil(kZeroCrossings / cutoff));

  // Output sample j sits at input time j*down/up; only `up` distinct
  // fractional phases exist, so taps are tabulated per phase. Each phase is
  // normalized to unit DC gain.
  int taps = 2 * half + 1;
  std::vector<std::vector<double>> phase_taps(static_cast<size_t>(up));
  for (int64_t p = 0; p < up; ++p) {
    double frac = static_cast<double>(p) / static_cast<double>(up);
    auto& k = phase_taps[static_cast<size_t>(p)];
    k.resize(taps);
    double sum = 0.0;
    for (int i = 0; i < taps; ++i) {
      // tap i multiplies x[base - half + i]; offset from the sample point
      double u = frac + half - i;
      double w = cutoff * sinc(cutoff * u) * blackman(u / half);
      k[i] = w;
      sum += w;
    }
    for (double& w : k) w /= sum;
  }

  int64_t in_len = buf.size();
  int64_t out_len = std::llround(static_cast<double>(in_len) * target_rate / buf.sample_rate);
  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.assign(static_cast<size_t>(out_len), 0.0);

  for (int64_t j = 0; j < out_len; ++j) {
    int64_t num = j * down;
    int64_t base = num / up;
    const auto& k = phase_taps[static_cast<size_t>(num % up)];
    double acc = 0.0;
    int64_t n0 = base - half;
    int i_lo = n0 < 0 ? static_cast<int>(-n0) : 0;
    int i_hi = std::min<int64_t>(taps, in_len - n0);
    for (int i = i_lo; i < i_hi; ++i) {
      acc += k[i] * buf.samples[static_cast<size_t>(n0 + i)];
    }
    out.samples[static_cast<size_t>(j)] = acc;
  }
  return out;
}

}  // namespace ufp
