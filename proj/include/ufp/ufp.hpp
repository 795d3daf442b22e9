// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ufp/audio.hpp"
#include "ufp/dsp.hpp"
#include "ufp/mat.hpp"

namespace ufp {

// The learnable perturbation: real and imaginary planes of shape B x L_u,
// applied to spectrograms scaled by noise_level.
struct Ufp {
  Mat delta_re, delta_im;  // B x L_u
  double noise_level = 0.4;
  StftParams stft;
  int smoother_k = 5;  // odd averaging-kernel width, frames axis

  int bins() const { return delta_re.rows; }
  int frame_len() const { return delta_re.cols; }
};

// Fresh perturbation with i.i.d. standard-normal planes.
Ufp random_ufp(const StftParams& p, int frame_len, double noise_level, int smoother_k,
               uint64_t seed);

// Shortest input (in samples) the tiler accepts for this perturbation.
int64_t min_tile_samples(const Ufp& u);

constexpr int kRandomShift = -1;

// Optimization-time augmentation of the tiling: a random frame shift and a
// Bernoulli keep-mask over segments. Disabled in deployment.
struct TileAugment {
  bool enabled = false;
  double mask_ratio = 0.0;      // r: each segment dropped with probability r
  int shift = kRandomShift;     // fixed shift in frames, or kRandomShift
  uint64_t rng_seed = 0;
};

// What a tile() call actually did; required by tile_adjoint.
struct TileRealization {
  int shift = 0;
  std::vector<uint8_t> mask;  // one flag per segment
};

// Rows convolved along the frame axis with the length-k averaging kernel,
// zero padded by floor(k/2). Self-adjoint (symmetric kernel).
Mat smooth_rows(const Mat& m, int k);

// The smoothed complex perturbation (re, im), ready for tiling.
std::pair<Mat, Mat> freq_smoother(const Ufp& u);

// Applies the perturbation: S = stft(x); the smoothed delta, scaled by
// noise_level, is added to n = floor(L/L_u) non-overlapping segments
// (shifted and masked in train mode; segments pushed past frame L by the
// shift are skipped); returns istft of the result. Deterministic in deploy
// mode.
AudioBuffer tile(const AudioBuffer& x, const Ufp& u, const TileAugment& aug,
                 TileRealization* realized = nullptr);

struct UfpGrad {
  Mat re, im;
};

// Vector-Jacobian product of tile() with respect to the raw delta planes,
// at the recorded shift/mask realization.
UfpGrad tile_adjoint(const std::vector<double>& out_grad, const AudioBuffer& x, const Ufp& u,
                     const TileRealization& realized);

// Binary container, magic "UFP1": u32 B, L_u, n_fft, hop, smoother_k,
// f64 noise_level, then delta_re and delta_im row-major f64, little-endian.
// Round-trips bit-exactly.
void save_ufp(const Ufp& u, const std::string& path);
Ufp load_ufp(const std::string& path);

}  // namespace ufp
