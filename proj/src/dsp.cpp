// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ufp/dsp.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <unordered_map>

#include "ufp/error.hpp"

namespace ufp {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kOverlapEps = 1e-12;

// Plan creation is not thread-safe in FFTW; execution via the new-array
// interface is. Plans are cached per size with FFTW_UNALIGNED so any buffer
// works at execute time.
class FftPlans {
 public:
  static FftPlans& instance() {
    static FftPlans p;
    return p;
  }

  fftw_plan r2c(int n) { return get(r2c_, n, [](int size, double* re, fftw_complex* cx) {
                           return fftw_plan_dft_r2c_1d(size, re, cx, kFlags);
                         }); }

  fftw_plan c2r(int n) { return get(c2r_, n, [](int size, double* re, fftw_complex* cx) {
                           return fftw_plan_dft_c2r_1d(size, cx, re, kFlags);
                         }); }

  fftw_plan backward(int n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = bwd_.find(n);
    if (it != bwd_.end()) return it->second;
    fftw_complex* buf = fftw_alloc_complex(static_cast<size_t>(n));
    fftw_plan plan = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, kFlags);
    fftw_free(buf);
    bwd_[n] = plan;
    return plan;
  }

 private:
  static constexpr unsigned kFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;

  template <typename Maker>
  fftw_plan get(std::unordered_map<int, fftw_plan>& cache, int n, Maker make) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    double* re = fftw_alloc_real(static_cast<size_t>(n));
    fftw_complex* cx = fftw_alloc_complex(static_cast<size_t>(n) / 2 + 1);
    fftw_plan plan = make(n, re, cx);
    fftw_free(re);
    fftw_free(cx);
    cache[n] = plan;
    return plan;
  }

  std::mutex mu_;
  std::unordered_map<int, fftw_plan> r2c_, c2r_, bwd_;
};

void rfft(const double* in, int n, std::complex<double>* out) {
  fftw_execute_dft_r2c(FftPlans::instance().r2c(n), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

// Unnormalized inverse of the onesided spectrum; caller divides by n.
// The imaginary parts of DC and Nyquist are zeroed beforehand so the
// operator's Jacobian with respect to them is exactly zero.
void irfft_unscaled(std::complex<double>* halfspec, int n, double* out) {
  halfspec[0] = {halfspec[0].real(), 0.0};
  halfspec[n / 2] = {halfspec[n / 2].real(), 0.0};
  fftw_execute_dft_c2r(FftPlans::instance().c2r(n), reinterpret_cast<fftw_complex*>(halfspec),
                       out);
}

// Unnormalized full backward transform, in place.
void ifft_unscaled(std::complex<double>* buf, int n) {
  fftw_execute_dft(FftPlans::instance().backward(n), reinterpret_cast<fftw_complex*>(buf),
                   reinterpret_cast<fftw_complex*>(buf));
}

void validate_params(const StftParams& p) {
  if (p.n_fft < 4 || p.n_fft % 2 != 0) throw Error("stft: n_fft must be even and >= 4");
  if (p.hop <= 0) throw Error("stft: hop must be positive");
  if (p.n_fft % p.hop != 0) throw Error("stft: hop must divide n_fft");
}

}  // namespace

int stft_bins(const StftParams& p) { return p.n_fft / 2 + 1; }

int stft_frames(int64_t num_samples, const StftParams& p) {
  if (num_samples < p.n_fft) return 0;
  return 1 + static_cast<int>((num_samples - p.n_fft) / p.hop);
}

int64_t stft_cover(int frames, const StftParams& p) {
  if (frames <= 0) return 0;
  return static_cast<int64_t>(frames - 1) * p.hop + p.n_fft;
}

std::vector<double> make_window(const StftParams& p) {
  std::vector<double> w(static_cast<size_t>(p.n_fft), 1.0);
  if (p.window == Window::kHann) {
    for (int t = 0; t < p.n_fft; ++t) {
      w[static_cast<size_t>(t)] = 0.5 - 0.5 * std::cos(2.0 * kPi * t / p.n_fft);
    }
  }
  return w;
}

std::vector<double> window_overlap_sq(const StftParams& p, int frames) {
  std::vector<double> w = make_window(p);
  std::vector<double> acc(static_cast<size_t>(stft_cover(frames, p)), 0.0);
  for (int m = 0; m < frames; ++m) {
    int64_t off = static_cast<int64_t>(m) * p.hop;
    for (int t = 0; t < p.n_fft; ++t) {
      acc[static_cast<size_t>(off + t)] += w[static_cast<size_t>(t)] * w[static_cast<size_t>(t)];
    }
  }
  return acc;
}

Spectrogram stft(const AudioBuffer& x, const StftParams& p) {
  validate_params(p);
  int L = stft_frames(x.size(), p);
  if (L == 0) {
    throw Error("stft: input of " + std::to_string(x.size()) +
                " samples is shorter than one window (" + std::to_string(p.n_fft) + ")");
  }
  int B = stft_bins(p);
  std::vector<double> w = make_window(p);

  Spectrogram s;
  s.params = p;
  s.sample_rate = x.sample_rate;
  s.re = Mat(B, L);
  s.im = Mat(B, L);

  std::vector<double> frame(static_cast<size_t>(p.n_fft));
  std::vector<std::complex<double>> spec(static_cast<size_t>(B));
  for (int m = 0; m < L; ++m) {
    int64_t off = static_cast<int64_t>(m) * p.hop;
    for (int t = 0; t < p.n_fft; ++t) {
      frame[static_cast<size_t>(t)] = w[static_cast<size_t>(t)] * x.samples[static_cast<size_t>(off + t)];
    }
    rfft(frame.data(), p.n_fft, spec.data());
    for (int b = 0; b < B; ++b) {
      s.re(b, m) = spec[static_cast<size_t>(b)].real();
      s.im(b, m) = spec[static_cast<size_t>(b)].imag();
    }
  }
  return s;
}

AudioBuffer istft(const Spectrogram& s) {
  validate_params(s.params);
  const StftParams& p = s.params;
  int B = stft_bins(p);
  if (s.re.rows != B || !s.re.same_shape(s.im)) {
    throw Error("istft: spectrogram shape does not match its parameters");
  }
  int L = s.frames();
  if (L <= 0) throw Error("istft: empty spectrogram");

  std::vector<double> w = make_window(p);
  std::vector<double> wsum = window_overlap_sq(p, L);
  int64_t out_len = stft_cover(L, p);

  std::vector<double> acc(static_cast<size_t>(out_len), 0.0);
  std::vector<std::complex<double>> spec(static_cast<size_t>(B));
  std::vector<double> frame(static_cast<size_t>(p.n_fft));
  double inv_n = 1.0 / p.n_fft;
  for (int m = 0; m < L; ++m) {
    for (int b = 0; b < B; ++b) {
      spec[static_cast<size_t>(b)] = {s.re(b, m), s.im(b, m)};
    }
    irfft_unscaled(spec.data(), p.n_fft, frame.data());
    int64_t off = static_cast<int64_t>(m) * p.hop;
    for (int t = 0; t < p.n_fft; ++t) {
      acc[static_cast<size_t>(off + t)] +=
          w[static_cast<size_t>(t)] * frame[static_cast<size_t>(t)] * inv_n;
    }
  }
  for (size_t n = 0; n < acc.size(); ++n) {
    acc[n] = wsum[n] > kOverlapEps ? acc[n] / wsum[n] : 0.0;
  }
  return AudioBuffer(std::move(acc), s.sample_rate);
}

std::vector<double> stft_adjoint(const Spectrogram& grad, int64_t input_len) {
  validate_params(grad.params);
  const StftParams& p = grad.params;
  int B = stft_bins(p);
  if (grad.re.rows != B || !grad.re.same_shape(grad.im)) {
    throw Error("stft_adjoint: gradient shape does not match its parameters");
  }
  int L = grad.frames();
  if (stft_frames(input_len, p) != L) {
    throw Error("stft_adjoint: input length inconsistent with gradient frame count");
  }

  std::vector<double> w = make_window(p);
  std::vector<double> out(static_cast<size_t>(input_len), 0.0);
  std::vector<std::complex<double>> buf(static_cast<size_t>(p.n_fft));
  for (int m = 0; m < L; ++m) {
    for (int b = 0; b < B; ++b) {
      buf[static_cast<size_t>(b)] = {grad.re(b, m), grad.im(b, m)};
    }
    std::fill(buf.begin() + B, buf.end(), std::complex<double>{0.0, 0.0});
    ifft_unscaled(buf.data(), p.n_fft);
    int64_t off = static_cast<int64_t>(m) * p.hop;
    for (int t = 0; t < p.n_fft; ++t) {
      out[static_cast<size_t>(off + t)] +=
          w[static_cast<size_t>(t)] * buf[static_cast<size_t>(t)].real();
    }
  }
  return out;
}

Spectrogram istft_adjoint(const std::vector<double>& sample_grad, const StftParams& p,
                          int sample_rate) {
  validate_params(p);
  int64_t len = static_cast<int64_t>(sample_grad.size());
  if (len < p.n_fft || (len - p.n_fft) % p.hop != 0) {
    throw Error("istft_adjoint: gradient length is not a valid istft output length");
  }
  int L = 1 + static_cast<int>((len - p.n_fft) / p.hop);
  int B = stft_bins(p);

  std::vector<double> w = make_window(p);
  std::vector<double> wsum = window_overlap_sq(p, L);
  std::vector<double> v(sample_grad.size());
  for (size_t n = 0; n < v.size(); ++n) {
    v[n] = wsum[n] > kOverlapEps ? sample_grad[n] / wsum[n] : 0.0;
  }

  Spectrogram g;
  g.params = p;
  g.sample_rate = sample_rate;
  g.re = Mat(B, L);
  g.im = Mat(B, L);

  std::vector<double> frame(static_cast<size_t>(p.n_fft));
  std::vector<std::complex<double>> spec(static_cast<size_t>(B));
  double inv_n = 1.0 / p.n_fft;
  for (int m = 0; m < L; ++m) {
    int64_t off = static_cast<int64_t>(m) * p.hop;
    for (int t = 0; t < p.n_fft; ++t) {
      frame[static_cast<size_t>(t)] = w[static_cast<size_t>(t)] * v[static_cast<size_t>(off + t)];
    }
    rfft(frame.data(), p.n_fft, spec.data());
    for (int b = 0; b < B; ++b) {
      // Onesided weighting: interior bins appear twice in the full spectrum.
      double c = (b == 0 || b == p.n_fft / 2) ? 1.0 : 2.0;
      g.re(b, m) = c * inv_n * spec[static_cast<size_t>(b)].real();
      g.im(b, m) = (b == 0 || b == p.n_fft / 2) ? 0.0 : c * inv_n * spec[static_cast<size_t>(b)].imag();
    }
  }
  return g;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Mat mel_filterbank(const StftParams& p, int n_mels, int sample_rate) {
  validate_params(p);
  if (n_mels < 2) throw Error("mel_filterbank: n_mels must be >= 2");
  if (sample_rate <= 0) throw Error("mel_filterbank: sample rate must be positive");

  int B = stft_bins(p);
  double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[static_cast<size_t>(i)] = mel_to_hz(mel_max * i / (n_mels + 1));
  }

  Mat fb(n_mels, B);
  for (int m = 0; m < n_mels; ++m) {
    double lo = edges[static_cast<size_t>(m)];
    double peak = edges[static_cast<size_t>(m) + 1];
    double hi = edges[static_cast<size_t>(m) + 2];
    for (int b = 0; b < B; ++b) {
      double f = static_cast<double>(b) * sample_rate / p.n_fft;
      double val = 0.0;
      if (f > lo && f < peak) {
        val = (f - lo) / (peak - lo);
      } else if (f >= peak && f < hi) {
        val = (hi - f) / (hi - peak);
      }
      fb(m, b) = val;
    }
  }
  return fb;
}

}  // namespace ufp
