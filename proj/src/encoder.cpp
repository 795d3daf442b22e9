// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ufp/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "ufp/error.hpp"
#include "ufp/rng.hpp"

namespace ufp {

namespace {
constexpr double kLogEps = 1e-6;  // inside log(M + eps)
constexpr double kStdEps = 1e-8;  // under the square root of the std pooling

double l2_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}
}  // namespace

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) throw Error("cosine: embedding dimensions differ");
  double na = l2_norm(a.values);
  double nb = l2_norm(b.values);
  if (na == 0.0 || nb == 0.0) throw Error("cosine: similarity undefined for a zero vector");
  double dot = 0.0;
  for (int i = 0; i < a.dim(); ++i) dot += a.values[static_cast<size_t>(i)] * b.values[static_cast<size_t>(i)];
  return dot / (na * nb);
}

LogMelEncoder::LogMelEncoder(const EncoderConfig& cfg, int sample_rate)
    : cfg_(cfg), sample_rate_(sample_rate) {
  if (cfg.dim <= 0 || cfg.dim > 2 * cfg.n_mels) {
    throw Error("encoder: dim must lie in [1, 2*n_mels]");
  }
  mel_ = mel_filterbank(cfg.stft, cfg.n_mels, sample_rate);

  // Filters are narrow-band; keep the nonzero bin range per row so the
  // per-frame loops cost O(B) instead of O(n_mels * B).
  row_lo_.assign(static_cast<size_t>(cfg.n_mels), 0);
  row_hi_.assign(static_cast<size_t>(cfg.n_mels), 0);
  for (int i = 0; i < cfg.n_mels; ++i) {
    int lo = mel_.cols, hi = 0;
    for (int b = 0; b < mel_.cols; ++b) {
      if (mel_(i, b) != 0.0) {
        lo = std::min(lo, b);
        hi = std::max(hi, b + 1);
      }
    }
    row_lo_[static_cast<size_t>(i)] = std::min(lo, hi);
    row_hi_[static_cast<size_t>(i)] = hi;
  }

  // Fixed random orthonormal rows: Gaussian draws, then modified
  // Gram-Schmidt. Generated once per config and immutable afterwards.
  int d = cfg.dim;
  int w = 2 * cfg.n_mels;
  proj_ = Mat(d, w);
  Rng rng(cfg.projection_seed, "encoder-projection");
  for (double& v : proj_.data) v = rng.gaussian();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) {
      double dot = 0.0;
      for (int c = 0; c < w; ++c) dot += proj_(i, c) * proj_(j, c);
      for (int c = 0; c < w; ++c) proj_(i, c) -= dot * proj_(j, c);
    }
    double norm = 0.0;
    for (int c = 0; c < w; ++c) norm += proj_(i, c) * proj_(i, c);
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw Error("encoder: degenerate projection draw");
    for (int c = 0; c < w; ++c) proj_(i, c) /= norm;
  }
}

uint64_t LogMelEncoder::config_hash() const {
  uint64_t h = sub_seed(cfg_.projection_seed, "encoder-config", static_cast<uint64_t>(cfg_.n_mels),
                        static_cast<uint64_t>(cfg_.dim));
  h = sub_seed(h, "encoder-stft", static_cast<uint64_t>(cfg_.stft.n_fft),
               static_cast<uint64_t>(cfg_.stft.hop));
  return sub_seed(h, "encoder-rate", static_cast<uint64_t>(sample_rate_));
}

Embedding LogMelEncoder::embed(const AudioBuffer& x) const {
  if (x.sample_rate != sample_rate_) {
    throw Error("encoder: input is " + std::to_string(x.sample_rate) + " Hz, expected " +
                std::to_string(sample_rate_) + " Hz");
  }
  Spectrogram s = stft(x, cfg_.stft);
  int L = s.frames();
  int B = s.bins();
  int nm = cfg_.n_mels;

  // log mel energies
  Mat logmel(nm, L);
  std::vector<double> power(static_cast<size_t>(B));
  for (int m = 0; m < L; ++m) {
    for (int b = 0; b < B; ++b) {
      power[static_cast<size_t>(b)] = s.re(b, m) * s.re(b, m) + s.im(b, m) * s.im(b, m);
    }
    for (int i = 0; i < nm; ++i) {
      double acc = 0.0;
      for (int b = row_lo_[static_cast<size_t>(i)]; b < row_hi_[static_cast<size_t>(i)]; ++b) {
        acc += mel_(i, b) * power[static_cast<size_t>(b)];
      }
      logmel(i, m) = std::log(acc + kLogEps);
    }
  }

  // temporal mean and std per band
  std::vector<double> pooled(static_cast<size_t>(2 * nm));
  for (int i = 0; i < nm; ++i) {
    double mean = 0.0;
    for (int m = 0; m < L; ++m) mean += logmel(i, m);
    mean /= L;
    double var = 0.0;
    for (int m = 0; m < L; ++m) {
      double d = logmel(i, m) - mean;
      var += d * d;
    }
    var /= L;
    pooled[static_cast<size_t>(i)] = mean;
    pooled[static_cast<size_t>(nm + i)] = std::sqrt(var + kStdEps);
  }

  // fixed orthonormal projection, then l2 normalization
  Embedding e;
  e.values.assign(static_cast<size_t>(cfg_.dim), 0.0);
  for (int r = 0; r < cfg_.dim; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 2 * nm; ++c) acc += proj_(r, c) * pooled[static_cast<size_t>(c)];
    e.values[static_cast<size_t>(r)] = acc;
  }
  double norm = l2_norm(e.values);
  if (norm == 0.0) throw Error("encoder: zero embedding");
  for (double& v : e.values) v /= norm;
  return e;
}

std::vector<double> LogMelEncoder::embed_adjoint(const AudioBuffer& x,
                                                 const std::vector<double>& upstream) const {
  if (static_cast<int>(upstream.size()) != cfg_.dim) {
    throw Error("encoder: upstream gradient dimension mismatch");
  }
  if (x.sample_rate != sample_rate_) {
    throw Error("encoder: input is " + std::to_string(x.sample_rate) + " Hz, expected " +
                std::to_string(sample_rate_) + " Hz");
  }

  // Recompute the forward intermediates.
  Spectrogram s = stft(x, cfg_.stft);
  int L = s.frames();
  int B = s.bins();
  int nm = cfg_.n_mels;

  Mat melE(nm, L);  // M + eps (the log argument)
  Mat logmel(nm, L);
  std::vector<double> power(static_cast<size_t>(B));
  for (int m = 0; m < L; ++m) {
    for (int b = 0; b < B; ++b) {
      power[static_cast<size_t>(b)] = s.re(b, m) * s.re(b, m) + s.im(b, m) * s.im(b, m);
    }
    for (int i = 0; i < nm; ++i) {
      double acc = 0.0;
      for (int b = row_lo_[static_cast<size_t>(i)]; b < row_hi_[static_cast<size_t>(i)]; ++b) {
        acc += mel_(i, b) * power[static_cast<size_t>(b)];
      }
      melE(i, m) = acc + kLogEps;
      logmel(i, m) = std::log(melE(i, m));
    }
  }

  std::vector<double> mean(static_cast<size_t>(nm)), sd(static_cast<size_t>(nm));
  for (int i = 0; i < nm; ++i) {
    double mu = 0.0;
    for (int m = 0; m < L; ++m) mu += logmel(i, m);
    mu /= L;
    double var = 0.0;
    for (int m = 0; m < L; ++m) {
      double d = logmel(i, m) - mu;
      var += d * d;
    }
    var /= L;
    mean[static_cast<size_t>(i)] = mu;
    sd[static_cast<size_t>(i)] = std::sqrt(var + kStdEps);
  }

  std::vector<double> raw(static_cast<size_t>(cfg_.dim), 0.0);
  for (int r = 0; r < cfg_.dim; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 2 * nm; ++c) {
      double u = c < nm ? mean[static_cast<size_t>(c)] : sd[static_cast<size_t>(c - nm)];
      acc += proj_(r, c) * u;
    }
    raw[static_cast<size_t>(r)] = acc;
  }
  double norm = l2_norm(raw);
  if (norm == 0.0) throw Error("encoder: zero embedding");

  // normalization backward: (I - e e^T)/norm applied to upstream
  double dot = 0.0;
  for (int r = 0; r < cfg_.dim; ++r) dot += upstream[static_cast<size_t>(r)] * raw[static_cast<size_t>(r)] / norm;
  std::vector<double> g_raw(static_cast<size_t>(cfg_.dim));
  for (int r = 0; r < cfg_.dim; ++r) {
    g_raw[static_cast<size_t>(r)] = (upstream[static_cast<size_t>(r)] - dot * raw[static_cast<size_t>(r)] / norm) / norm;
  }

  // projection backward
  std::vector<double> g_pooled(static_cast<size_t>(2 * nm), 0.0);
  for (int c = 0; c < 2 * nm; ++c) {
    double acc = 0.0;
    for (int r = 0; r < cfg_.dim; ++r) acc += proj_(r, c) * g_raw[static_cast<size_t>(r)];
    g_pooled[static_cast<size_t>(c)] = acc;
  }

  // pooling backward into the log-mel plane
  Mat g_logmel(nm, L);
  for (int i = 0; i < nm; ++i) {
    double g_mu = g_pooled[static_cast<size_t>(i)];
    double g_sd = g_pooled[static_cast<size_t>(nm + i)];
    for (int m = 0; m < L; ++m) {
      g_logmel(i, m) =
          g_mu / L + g_sd * (logmel(i, m) - mean[static_cast<size_t>(i)]) / (L * sd[static_cast<size_t>(i)]);
    }
  }

  // log, mel matrix and |.|^2 backward into the spectrogram planes
  Spectrogram gs;
  gs.params = cfg_.stft;
  gs.sample_rate = x.sample_rate;
  gs.re = Mat(B, L);
  gs.im = Mat(B, L);
  std::vector<double> g_power(static_cast<size_t>(B));
  for (int m = 0; m < L; ++m) {
    std::fill(g_power.begin(), g_power.end(), 0.0);
    for (int i = 0; i < nm; ++i) {
      double coeff = g_logmel(i, m) / melE(i, m);
      for (int b = row_lo_[static_cast<size_t>(i)]; b < row_hi_[static_cast<size_t>(i)]; ++b) {
        g_power[static_cast<size_t>(b)] += mel_(i, b) * coeff;
      }
    }
    for (int b = 0; b < B; ++b) {
      gs.re(b, m) = 2.0 * s.re(b, m) * g_power[static_cast<size_t>(b)];
      gs.im(b, m) = 2.0 * s.im(b, m) * g_power[static_cast<size_t>(b)];
    }
  }

  return stft_adjoint(gs, x.size());
}

}  // namespace ufp
