// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ufp/optim.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "ufp/error.hpp"
#include "ufp/threading.hpp"

namespace ufp {

LossValue feature_loss(const Embedding& z, const Embedding& z_tilde) {
  if (z.dim() != z_tilde.dim()) throw Error("feature_loss: embedding dimensions differ");
  LossValue out;
  out.grad.assign(static_cast<size_t>(z.dim()), 0.0);
  double dist2 = 0.0;
  for (int i = 0; i < z.dim(); ++i) {
    double d = z.values[static_cast<size_t>(i)] - z_tilde.values[static_cast<size_t>(i)];
    dist2 += d * d;
    // d(-||z - zt||^2)/d zt = 2 (z - zt)
    out.grad[static_cast<size_t>(i)] = 2.0 * d;
  }
  out.value = -dist2;
  return out;
}

LossValue perception_loss(const AudioBuffer& x, const AudioBuffer& x_tilde) {
  if (x.empty()) throw Error("perception_loss: empty reference");
  int64_t t = x.size();
  int64_t tt = x_tilde.size();
  LossValue out;
  out.grad.assign(static_cast<size_t>(tt), 0.0);
  double acc = 0.0;
  for (int64_t n = 0; n < t; ++n) {
    double xt = n < tt ? x_tilde.samples[static_cast<size_t>(n)] : 0.0;
    double d = x.samples[static_cast<size_t>(n)] - xt;
    acc += d * d;
    if (n < tt) out.grad[static_cast<size_t>(n)] = -2.0 * d / t;
  }
  // x_tilde samples beyond len(x) compare against zero padding
  for (int64_t n = t; n < tt; ++n) {
    double d = x_tilde.samples[static_cast<size_t>(n)];
    acc += d * d;
    out.grad[static_cast<size_t>(n)] = 2.0 * d / t;
  }
  out.value = acc / t;
  return out;
}

AudioBuffer temporal_augmentation(const AudioBuffer& x, double noise_std, int jitter_max,
                                  Rng& rng, AugRealization* realized) {
  if (x.empty()) throw Error("temporal_augmentation: empty buffer");
  int64_t t = x.size();
  int shift = jitter_max > 0 ? rng.uniform_int(-jitter_max, jitter_max) : 0;
  int64_t s = ((static_cast<int64_t>(shift) % t) + t) % t;

  AudioBuffer out;
  out.sample_rate = x.sample_rate;
  out.samples.resize(static_cast<size_t>(t));
  for (int64_t n = 0; n < t; ++n) {
    out.samples[static_cast<size_t>((n + s) % t)] = x.samples[static_cast<size_t>(n)];
  }
  if (noise_std > 0.0) {
    for (double& v : out.samples) v += noise_std * rng.gaussian();
  }
  if (realized != nullptr) realized->shift = static_cast<int>(s);
  return out;
}

std::vector<double> temporal_augmentation_adjoint(const std::vector<double>& grad,
                                                  const AugRealization& realized) {
  int64_t t = static_cast<int64_t>(grad.size());
  if (t == 0) return {};
  int64_t s = ((static_cast<int64_t>(realized.shift) % t) + t) % t;
  std::vector<double> out(grad.size());
  for (int64_t n = 0; n < t; ++n) {
    out[static_cast<size_t>(n)] = grad[static_cast<size_t>((n + s) % t)];
  }
  return out;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (params.size() != grad.size()) throw Error("adam: parameter/gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw Error("adam: state size mismatch");
  for (double g : grad) {
    if (!std::isfinite(g)) throw Error("adam: non-finite gradient");
  }
  ++state.step;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

void project_mask_box(Ufp& u, const std::vector<double>& caps) {
  if (static_cast<int>(caps.size()) != u.bins()) {
    throw Error("project_mask_box: need one cap per frequency bin");
  }
  for (double c : caps) {
    if (!(c > 0.0)) throw Error("project_mask_box: caps must be positive");
  }
  for (int b = 0; b < u.bins(); ++b) {
    double cap = caps[static_cast<size_t>(b)];
    for (int j = 0; j < u.frame_len(); ++j) {
      double re = u.delta_re(b, j);
      double im = u.delta_im(b, j);
      double mag = std::sqrt(re * re + im * im);
      if (mag > cap) {
        double scale = cap / mag;
        u.delta_re(b, j) = re * scale;
        u.delta_im(b, j) = im * scale;
      }
    }
  }
}

namespace {

struct SampleResult {
  double total = 0.0, fea = 0.0, per = 0.0;
  UfpGrad grad;
};

// One sample's contribution to the objective and its gradient at the
// current delta, with the augmentation realizations recorded so the chain
// is exact.
SampleResult sample_gradient(const AudioBuffer& x, const Embedding& z_clean, const Ufp& u,
                             const TrainConfig& cfg, const SpeakerEncoder& encoder, int iteration,
                             int sample_index) {
  TileAugment aug;
  aug.enabled = true;
  aug.mask_ratio = cfg.mask_ratio;
  aug.shift = kRandomShift;
  aug.rng_seed = sub_seed(cfg.seed, "tile", static_cast<uint64_t>(iteration),
                          static_cast<uint64_t>(sample_index));
  TileRealization realized;
  AudioBuffer x_tilde = tile(x, u, aug, &realized);

  // Perception compares the tiled output against the original; the temporal
  // augmentation only feeds the encoder path.
  LossValue per = perception_loss(x, x_tilde);

  Rng aug_rng(cfg.seed, "temporal-augment", static_cast<uint64_t>(iteration),
              static_cast<uint64_t>(sample_index));
  AugRealization aug_real;
  AudioBuffer x_aug =
      temporal_augmentation(x_tilde, cfg.aug_noise_std, cfg.aug_jitter_max, aug_rng, &aug_real);

  Embedding z_tilde = encoder.embed(x_aug);
  LossValue fea = feature_loss(z_clean, z_tilde);

  std::vector<double> g_aug = encoder.embed_adjoint(x_aug, fea.grad);
  std::vector<double> g_tilde = temporal_augmentation_adjoint(g_aug, aug_real);
  for (size_t n = 0; n < g_tilde.size(); ++n) g_tilde[n] += cfg.lambda * per.grad[n];

  SampleResult r;
  r.fea = fea.value;
  r.per = per.value;
  r.total = fea.value + cfg.lambda * per.value;
  r.grad = tile_adjoint(g_tilde, x, u, realized);
  return r;
}

}  // namespace

std::pair<Ufp, TrainReport> optimize_ufp(const std::vector<AudioBuffer>& train_set,
                                         const TrainConfig& cfg, const SpeakerEncoder& encoder,
                                         const StftParams& stft_params, int frame_len,
                                         double noise_level, int smoother_k) {
  if (train_set.empty()) throw Error("optimize_ufp: empty training set");
  if (cfg.iterations < 1) throw Error("optimize_ufp: iterations must be >= 1");
  if (cfg.lambda < 0.0) throw Error("optimize_ufp: lambda must be >= 0");
  if (cfg.mask_ratio < 0.0 || cfg.mask_ratio > 1.0) {
    throw Error("optimize_ufp: mask_ratio must lie in [0, 1]");
  }
  if (cfg.beta1 <= 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 <= 0.0 || cfg.beta2 >= 1.0) {
    throw Error("optimize_ufp: adam betas must lie in (0, 1)");
  }

  auto t0 = std::chrono::steady_clock::now();
  Ufp u = random_ufp(stft_params, frame_len, noise_level,
                     smoother_k, sub_seed(cfg.seed, "ufp-init"));
  if (!cfg.mask_thresholds.empty()) project_mask_box(u, cfg.mask_thresholds);

  int n = static_cast<int>(train_set.size());
  for (const AudioBuffer& x : train_set) {
    if (stft_frames(x.size(), stft_params) < frame_len) {
      throw Error("optimize_ufp: a training sample is shorter than frame_len frames");
    }
  }

  // Clean embeddings are constant across iterations.
  std::vector<Embedding> z_clean(static_cast<size_t>(n));
  parallel_for(n, [&](int i) { z_clean[static_cast<size_t>(i)] = encoder.embed(train_set[static_cast<size_t>(i)]); });

  size_t plane = u.delta_re.size();
  std::vector<double> params(2 * plane);
  auto pack = [&]() {
    std::copy(u.delta_re.data.begin(), u.delta_re.data.end(), params.begin());
    std::copy(u.delta_im.data.begin(), u.delta_im.data.end(),
              params.begin() + static_cast<std::ptrdiff_t>(plane));
  };
  auto unpack = [&]() {
    std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(plane),
              u.delta_re.data.begin());
    std::copy(params.begin() + static_cast<std::ptrdiff_t>(plane), params.end(),
              u.delta_im.data.begin());
  };

  TrainReport report;
  report.total_loss.reserve(static_cast<size_t>(cfg.iterations));
  AdamState adam;
  std::vector<SampleResult> slots(static_cast<size_t>(n));
  std::vector<double> grad(2 * plane);
  Ufp last_finite = u;

  for (int t = 0; t < cfg.iterations; ++t) {
    parallel_for(n, [&](int i) {
      slots[static_cast<size_t>(i)] =
          sample_gradient(train_set[static_cast<size_t>(i)], z_clean[static_cast<size_t>(i)], u,
                          cfg, encoder, t, i);
    });

    // Fixed-order reduction keeps runs bit-identical regardless of thread
    // scheduling.
    std::fill(grad.begin(), grad.end(), 0.0);
    double total = 0.0, fea = 0.0, per = 0.0;
    for (int i = 0; i < n; ++i) {
      const SampleResult& r = slots[static_cast<size_t>(i)];
      total += r.total;
      fea += r.fea;
      per += r.per;
      for (size_t j = 0; j < plane; ++j) {
        grad[j] += r.grad.re.data[j];
        grad[plane + j] += r.grad.im.data[j];
      }
    }
    total /= n;
    fea /= n;
    per /= n;
    for (double& g : grad) g /= n;

    bool finite = std::isfinite(total);
    for (size_t j = 0; finite && j < grad.size(); ++j) finite = std::isfinite(grad[j]);
    if (!finite) {
      report.diagnostic = "non-finite loss or gradient at iteration " + std::to_string(t + 1) +
                          "; returning the last finite state";
      u = last_finite;
      break;
    }
    last_finite = u;

    report.total_loss.push_back(total);
    report.feature_loss.push_back(fea);
    report.perception_loss.push_back(per);

    pack();
    adam_step(params, grad, adam, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
    unpack();
    if (!cfg.mask_thresholds.empty()) project_mask_box(u, cfg.mask_thresholds);
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(u), std::move(report)};
}

void write_train_report_text(const TrainReport& r, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("report: cannot open '" + path + "' for writing");
  f << "# iter total_loss feature_loss perception_loss\n";
  char line[128];
  for (size_t i = 0; i < r.total_loss.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu %.10g %.10g %.10g\n", i + 1, r.total_loss[i],
                  r.feature_loss[i], r.perception_loss[i]);
    f << line;
  }
  if (r.train_evasion >= 0.0) f << "train_evasion " << r.train_evasion << "\n";
  if (r.heldout_evasion >= 0.0) f << "heldout_evasion " << r.heldout_evasion << "\n";
  f << "wall_seconds " << r.wall_seconds << "\n";
  if (!r.diagnostic.empty()) f << "diagnostic " << r.diagnostic << "\n";
}

void write_train_report_json(const TrainReport& r, const std::string& path) {
  nlohmann::json j;
  j["total_loss"] = r.total_loss;
  j["feature_loss"] = r.feature_loss;
  j["perception_loss"] = r.perception_loss;
  j["wall_seconds"] = r.wall_seconds;
  if (r.train_evasion >= 0.0) j["train_evasion"] = r.train_evasion;
  if (r.heldout_evasion >= 0.0) j["heldout_evasion"] = r.heldout_evasion;
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("report: cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
}

}  // namespace ufp
