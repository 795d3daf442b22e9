// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <vector>

#include "ufp/audio.hpp"
#include "ufp/mat.hpp"

namespace ufp {

enum class Window {
  kHann,  // periodic Hann; the production window
  kRect,  // rectangular; test mode for analytic bin-energy checks
};

struct StftParams {
  int n_fft = 1024;
  int hop = 256;
  Window window = Window::kHann;

  bool operator==(const StftParams& o) const {
    return n_fft == o.n_fft && hop == o.hop && window == o.window;
  }
};

// Onesided bin count B = n_fft/2 + 1.
int stft_bins(const StftParams& p);

// Frames are interior-aligned with no padding: frame m covers samples
// [m*hop, m*hop + n_fft), so L = 1 + floor((T - n_fft)/hop). Returns 0 when
// the input is shorter than one window.
int stft_frames(int64_t num_samples, const StftParams& p);

// Samples covered by L frames: (L-1)*hop + n_fft.
int64_t stft_cover(int frames, const StftParams& p);

// Complex spectrogram stored as separate real/imaginary planes of shape
// B x L, together with the transform parameters that produced it.
struct Spectrogram {
  Mat re, im;
  StftParams params;
  int sample_rate = 16000;

  int bins() const { return re.rows; }
  int frames() const { return re.cols; }
};

std::vector<double> make_window(const StftParams& p);

// Sum of squared synthesis windows per output sample; the weighted
// overlap-add normalizer. Constant over the interior for Hann with
// hop | n_fft and n_fft/hop >= 4.
std::vector<double> window_overlap_sq(const StftParams& p, int frames);

Spectrogram stft(const AudioBuffer& x, const StftParams& p);

// Weighted overlap-add synthesis with the analysis window, normalized by
// window_overlap_sq. Reconstructs the interior of x exactly for
// spectrograms in the range of stft.
AudioBuffer istft(const Spectrogram& s);

// Vector-Jacobian product of stft: maps a spectrogram-shaped upstream
// gradient to a gradient over input samples of length input_len.
std::vector<double> stft_adjoint(const Spectrogram& grad, int64_t input_len);

// Vector-Jacobian product of istft: maps a sample-shaped upstream gradient
// (whose length must equal stft_cover(L, p) for some L) to a spectrogram
// gradient.
Spectrogram istft_adjoint(const std::vector<double>& sample_grad, const StftParams& p,
                          int sample_rate);

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular mel filterbank, n_mels x B, filters spanning [0, sample_rate/2]
// with peak gain 1 (unnormalized HTK triangles).
Mat mel_filterbank(const StftParams& p, int n_mels, int sample_rate);

}  // namespace ufp
