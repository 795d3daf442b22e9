// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ufp/ufp.hpp"

#include <cstring>
#include <fstream>

#include "ufp/error.hpp"
#include "ufp/rng.hpp"

namespace ufp {

namespace {

void validate_ufp(const Ufp& u) {
  if (u.delta_re.rows <= 0 || u.delta_re.cols <= 0 || !u.delta_re.same_shape(u.delta_im)) {
    throw Error("ufp: delta planes must be non-empty and of equal shape");
  }
  if (u.delta_re.rows != stft_bins(u.stft)) {
    throw Error("ufp: delta bin count does not match the stft parameters");
  }
  if (u.noise_level < 0.0) throw Error("ufp: noise level must be >= 0");
  if (u.smoother_k < 1 || u.smoother_k % 2 == 0) throw Error("ufp: smoother width must be odd");
}

struct Placement {
  int shift = 0;
  std::vector<uint8_t> mask;
};

Placement make_placement(const Ufp& u, const TileAugment& aug, int segments) {
  Placement pl;
  pl.mask.assign(static_cast<size_t>(segments), 1);
  if (!aug.enabled) return pl;

  Rng rng(aug.rng_seed, "tile-augment");
  if (aug.shift == kRandomShift) {
    pl.shift = rng.uniform_int(0, u.frame_len());
  } else {
    if (aug.shift < 0 || aug.shift > u.frame_len()) {
      throw Error("tile: fixed shift must lie in [0, frame_len]");
    }
    pl.shift = aug.shift;
  }
  if (aug.mask_ratio < 0.0 || aug.mask_ratio > 1.0) {
    throw Error("tile: mask ratio must lie in [0, 1]");
  }
  for (int i = 0; i < segments; ++i) {
    pl.mask[static_cast<size_t>(i)] = rng.bernoulli(1.0 - aug.mask_ratio) ? 1 : 0;
  }
  return pl;
}

}  // namespace

Ufp random_ufp(const StftParams& p, int frame_len, double noise_level, int smoother_k,
               uint64_t seed) {
  if (frame_len <= 0) throw Error("ufp: frame_len must be positive");
  Ufp u;
  u.stft = p;
  u.noise_level = noise_level;
  u.smoother_k = smoother_k;
  int B = stft_bins(p);
  u.delta_re = Mat(B, frame_len);
  u.delta_im = Mat(B, frame_len);
  Rng rng(seed, "ufp-init");
  for (double& v : u.delta_re.data) v = rng.gaussian();
  for (double& v : u.delta_im.data) v = rng.gaussian();
  validate_ufp(u);
  return u;
}

int64_t min_tile_samples(const Ufp& u) { return stft_cover(u.frame_len(), u.stft); }

Mat smooth_rows(const Mat& m, int k) {
  if (k < 1 || k % 2 == 0) throw Error("smooth_rows: kernel width must be odd and >= 1");
  if (k == 1) return m;
  int h = k / 2;
  Mat out(m.rows, m.cols);
  double inv_k = 1.0 / k;
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      double acc = 0.0;
      int lo = std::max(0, c - h);
      int hi = std::min(m.cols - 1, c + h);
      for (int t = lo; t <= hi; ++t) acc += m(r, t);
      out(r, c) = acc * inv_k;
    }
  }
  return out;
}

std::pair<Mat, Mat> freq_smoother(const Ufp& u) {
  validate_ufp(u);
  return {smooth_rows(u.delta_re, u.smoother_k), smooth_rows(u.delta_im, u.smoother_k)};
}

AudioBuffer tile(const AudioBuffer& x, const Ufp& u, const TileAugment& aug,
                 TileRealization* realized) {
  validate_ufp(u);
  int frame_len = u.frame_len();
  int L = stft_frames(x.size(), u.stft);
  if (L < frame_len) {
    double min_s = static_cast<double>(min_tile_samples(u)) / x.sample_rate;
    throw Error("tile: input too short; need at least " + std::to_string(min_tile_samples(u)) +
                " samples (" + std::to_string(min_s) + " s) for frame_len " +
                std::to_string(frame_len));
  }

  Spectrogram s = stft(x, u.stft);
  auto [sm_re, sm_im] = freq_smoother(u);
  int segments = L / frame_len;
  Placement pl = make_placement(u, aug, segments);

  double eta = u.noise_level;
  int B = u.bins();
  for (int i = 0; i < segments; ++i) {
    if (!pl.mask[static_cast<size_t>(i)]) continue;
    int start = pl.shift + i * frame_len;
    if (start + frame_len > L) continue;  // pushed out of range by the shift
    for (int b = 0; b < B; ++b) {
      for (int j = 0; j < frame_len; ++j) {
        s.re(b, start + j) += eta * sm_re(b, j);
        s.im(b, start + j) += eta * sm_im(b, j);
      }
    }
  }

  if (realized != nullptr) {
    realized->shift = pl.shift;
    realized->mask = pl.mask;
  }
  return istft(s);
}

UfpGrad tile_adjoint(const std::vector<double>& out_grad, const AudioBuffer& x, const Ufp& u,
                     const TileRealization& realized) {
  validate_ufp(u);
  int frame_len = u.frame_len();
  int L = stft_frames(x.size(), u.stft);
  int segments = L / frame_len;
  if (static_cast<int>(realized.mask.size()) != segments || realized.shift < 0 ||
      realized.shift > frame_len) {
    throw Error("tile_adjoint: realization does not match the forward call");
  }
  if (static_cast<int64_t>(out_grad.size()) != stft_cover(L, u.stft)) {
    throw Error("tile_adjoint: gradient length does not match the tiler output");
  }

  Spectrogram sg = istft_adjoint(out_grad, u.stft, x.sample_rate);

  int B = u.bins();
  Mat acc_re(B, frame_len), acc_im(B, frame_len);
  double eta = u.noise_level;
  for (int i = 0; i < segments; ++i) {
    if (!realized.mask[static_cast<size_t>(i)]) continue;
    int start = realized.shift + i * frame_len;
    if (start + frame_len > L) continue;
    for (int b = 0; b < B; ++b) {
      for (int j = 0; j < frame_len; ++j) {
        acc_re(b, j) += eta * sg.re(b, start + j);
        acc_im(b, j) += eta * sg.im(b, start + j);
      }
    }
  }

  // The averaging kernel is symmetric, so the smoother is self-adjoint.
  return {smooth_rows(acc_re, u.smoother_k), smooth_rows(acc_im, u.smoother_k)};
}

namespace {

void put_u32(std::ofstream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

void put_f64(std::ofstream& f, double v) {
  uint64_t raw;
  std::memcpy(&raw, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((raw >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::ifstream& f) {
  unsigned char b[8];
  f.read(reinterpret_cast<char*>(b), 8);
  uint64_t raw = 0;
  for (int i = 0; i < 8; ++i) raw |= static_cast<uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &raw, 8);
  return v;
}

}  // namespace

void save_ufp(const Ufp& u, const std::string& path) {
  validate_ufp(u);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("ufp: cannot open '" + path + "' for writing");
  f.write("UFP1", 4);
  put_u32(f, static_cast<uint32_t>(u.bins()));
  put_u32(f, static_cast<uint32_t>(u.frame_len()));
  put_u32(f, static_cast<uint32_t>(u.stft.n_fft));
  put_u32(f, static_cast<uint32_t>(u.stft.hop));
  put_u32(f, static_cast<uint32_t>(u.smoother_k));
  put_f64(f, u.noise_level);
  for (double v : u.delta_re.data) put_f64(f, v);
  for (double v : u.delta_im.data) put_f64(f, v);
  if (!f) throw Error("ufp: write failed for '" + path + "'");
}

Ufp load_ufp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("ufp: cannot open '" + path + "'");
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "UFP1", 4) != 0) {
    throw Error("ufp: '" + path + "' is not a UFP1 file");
  }
  uint32_t bins = get_u32(f);
  uint32_t frame_len = get_u32(f);
  uint32_t n_fft = get_u32(f);
  uint32_t hop = get_u32(f);
  uint32_t smoother_k = get_u32(f);
  double eta = get_f64(f);
  if (!f) throw Error("ufp: truncated header in '" + path + "'");

  Ufp u;
  u.stft.n_fft = static_cast<int>(n_fft);
  u.stft.hop = static_cast<int>(hop);
  u.noise_level = eta;
  u.smoother_k = static_cast<int>(smoother_k);
  if (bins != static_cast<uint32_t>(stft_bins(u.stft))) {
    throw Error("ufp: bin count in '" + path + "' does not match n_fft");
  }
  u.delta_re = Mat(static_cast<int>(bins), static_cast<int>(frame_len));
  u.delta_im = Mat(static_cast<int>(bins), static_cast<int>(frame_len));
  for (double& v : u.delta_re.data) v = get_f64(f);
  for (double& v : u.delta_im.data) v = get_f64(f);
  if (!f) throw Error("ufp: truncated data in '" + path + "'");
  validate_ufp(u);
  return u;
}

}  // namespace ufp
