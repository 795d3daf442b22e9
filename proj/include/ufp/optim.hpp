// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ufp/audio.hpp"
#include "ufp/encoder.hpp"
#include "ufp/rng.hpp"
#include "ufp/ufp.hpp"

namespace ufp {

struct TrainConfig {
  int iterations = 300;
  double lambda = 0.1;  // weight of the perception term
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double mask_ratio = 0.3;
  double aug_noise_std = 0.005;
  int aug_jitter_max = 256;  // samples, circular
  uint64_t seed = 1;
  std::vector<double> mask_thresholds;  // per-bin magnitude caps; empty = off
};

struct LossValue {
  double value = 0.0;
  std::vector<double> grad;
};

// Feature disruption loss: -||z - z_tilde||^2, gradient w.r.t. z_tilde.
// Negated so that minimizing the total objective pushes embeddings apart.
LossValue feature_loss(const Embedding& z, const Embedding& z_tilde);

// Perception loss: (1/T) ||x - x_tilde||^2 with x_tilde trimmed or
// zero-padded to len(x); gradient w.r.t. x_tilde (its own length).
LossValue perception_loss(const AudioBuffer& x, const AudioBuffer& x_tilde);

struct AugRealization {
  int shift = 0;  // circular, in samples
};

// Adds i.i.d. Gaussian noise and a uniform circular shift from
// [-jitter_max, jitter_max]. The realized shift makes the adjoint exact
// (inverse shift; identity for the noise).
AudioBuffer temporal_augmentation(const AudioBuffer& x, double noise_std, int jitter_max,
                                  Rng& rng, AugRealization* realized = nullptr);
std::vector<double> temporal_augmentation_adjoint(const std::vector<double>& grad,
                                                  const AugRealization& realized);

struct AdamState {
  std::vector<double> m, v;
  int64_t step = 0;
};

// Standard Adam with bias correction. Throws on non-finite gradients.
void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               double lr, double beta1, double beta2, double eps);

// Euclidean projection onto per-entry disks: any (re, im) pair whose
// magnitude exceeds caps[bin] is rescaled radially to the cap.
void project_mask_box(Ufp& u, const std::vector<double>& caps);

struct TrainReport {
  std::vector<double> total_loss;       // per iteration, mean over samples
  std::vector<double> feature_loss;     // per iteration
  std::vector<double> perception_loss;  // per iteration
  double train_evasion = -1.0;          // -1 = not computed
  double heldout_evasion = -1.0;
  double wall_seconds = 0.0;
  std::string diagnostic;  // non-empty when the run aborted early

  bool diverged() const { return !diagnostic.empty(); }
};

// Full optimization loop: seeded standard-normal init, full-batch gradient
// of mean[L_fea + lambda*L_per] per iteration, one Adam step, optional box
// projection. Gradients reduce in fixed sample order, so runs with equal
// seeds are bit-identical. On a non-finite loss the last finite state is
// returned with a diagnostic.
std::pair<Ufp, TrainReport> optimize_ufp(const std::vector<AudioBuffer>& train_set,
                                         const TrainConfig& cfg, const SpeakerEncoder& encoder,
                                         const StftParams& stft_params, int frame_len,
                                         double noise_level, int smoother_k = 5);

// Serializes the per-iteration curves: plain text (one line per iteration)
// and a structured JSON record.
void write_train_report_text(const TrainReport& r, const std::string& path);
void write_train_report_json(const TrainReport& r, const std::string& path);

}  // namespace ufp
