// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ufp/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "ufp/error.hpp"
#include "ufp/eval.hpp"
#include "ufp/resample.hpp"
#include "ufp/threading.hpp"
#include "ufp/wav.hpp"

namespace ufp {

AudioBuffer quantize_8bit(const AudioBuffer& x) {
  if (x.empty()) throw Error("quantize: empty buffer");
  AudioBuffer out = x;
  // Mid-rise with step 2/256; level indices clamped so outputs stay in
  // (-1, 1). Level centers map to themselves, hence idempotence.
  constexpr double kStep = 2.0 / 256.0;
  for (double& v : out.samples) {
    double idx = std::floor(v / kStep);
    idx = std::clamp(idx, -128.0, 127.0);
    v = (idx + 0.5) * kStep;
  }
  return out;
}

AudioBuffer resample_attack(const AudioBuffer& x) {
  if (x.sample_rate != 16000) throw Error("resample_attack: expects 16 kHz input");
  AudioBuffer y = resample(resample(x, 8000), 16000);
  y.samples.resize(static_cast<size_t>(x.size()), 0.0);  // trim/pad to input length
  return y;
}

AudioBuffer mel_roundtrip(const AudioBuffer& x, int n_mels, const StftParams& p) {
  return mel_roundtrip(x, mel_filterbank(p, n_mels, x.sample_rate), p);
}

namespace {

// Least-squares pseudo-inverse application via W^T (W W^T + ridge)^-1,
// with a Cholesky solve of the small n_mels x n_mels Gram matrix.
Mat mel_pinv(const Mat& w) {
  int n = w.rows;
  int b = w.cols;
  Mat gram(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < b; ++k) acc += w(i, k) * w(j, k);
      gram(i, j) = acc;
      gram(j, i) = acc;
    }
  }
  double trace = 0.0;
  for (int i = 0; i < n; ++i) trace += gram(i, i);
  double ridge = std::max(1e-12 * trace / n, 1e-30);
  for (int i = 0; i < n; ++i) gram(i, i) += ridge;

  // Cholesky factorization gram = L L^T.
  Mat chol(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double acc = gram(i, j);
      for (int k = 0; k < j; ++k) acc -= chol(i, k) * chol(j, k);
      if (i == j) {
        if (acc <= 0.0) throw Error("mel_roundtrip: filterbank Gram matrix not positive definite");
        chol(i, j) = std::sqrt(acc);
      } else {
        chol(i, j) = acc / chol(j, j);
      }
    }
  }

  // Columns of inv(gram) by forward/back substitution, then W^T inv(gram).
  Mat inv(n, n);
  std::vector<double> y(static_cast<size_t>(n));
  for (int c = 0; c < n; ++c) {
    for (int i = 0; i < n; ++i) {
      double acc = i == c ? 1.0 : 0.0;
      for (int k = 0; k < i; ++k) acc -= chol(i, k) * y[static_cast<size_t>(k)];
      y[static_cast<size_t>(i)] = acc / chol(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
      double acc = y[static_cast<size_t>(i)];
      for (int k = i + 1; k < n; ++k) acc -= chol(k, i) * inv(k, c);
      inv(i, c) = acc / chol(i, i);
    }
  }

  Mat pinv(b, n);
  for (int k = 0; k < b; ++k) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += w(i, k) * inv(i, j);
      pinv(k, j) = acc;
    }
  }
  return pinv;
}

}  // namespace

AudioBuffer mel_roundtrip(const AudioBuffer& x, const Mat& filterbank, const StftParams& p) {
  if (filterbank.cols != stft_bins(p)) {
    throw Error("mel_roundtrip: filterbank width does not match the stft bins");
  }
  Spectrogram s = stft(x, p);
  int B = s.bins();
  int L = s.frames();
  int n = filterbank.rows;
  Mat pinv = mel_pinv(filterbank);

  std::vector<double> power(static_cast<size_t>(B));
  std::vector<double> mel(static_cast<size_t>(n));
  for (int m = 0; m < L; ++m) {
    for (int b = 0; b < B; ++b) {
      power[static_cast<size_t>(b)] = s.re(b, m) * s.re(b, m) + s.im(b, m) * s.im(b, m);
    }
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int b = 0; b < B; ++b) acc += filterbank(i, b) * power[static_cast<size_t>(b)];
      mel[static_cast<size_t>(i)] = acc;
    }
    for (int b = 0; b < B; ++b) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += pinv(b, i) * mel[static_cast<size_t>(i)];
      double rebuilt = std::sqrt(std::max(acc, 0.0));
      double mag = std::sqrt(power[static_cast<size_t>(b)]);
      // keep the original phase, swap in the reconstructed magnitude
      double scale = mag > 1e-30 ? rebuilt / mag : 0.0;
      s.re(b, m) *= scale;
      s.im(b, m) *= scale;
    }
  }
  AudioBuffer y = istft(s);
  y.samples.resize(static_cast<size_t>(x.size()), 0.0);
  return y;
}

AudioBuffer wiener_denoise(const AudioBuffer& x, const StftParams& p) {
  Spectrogram s = stft(x, p);
  int B = s.bins();
  int L = s.frames();
  if (L < 10) throw Error("wiener: need at least 10 frames");

  // Noise PSD from the lowest-energy decile of frames.
  std::vector<double> energy(static_cast<size_t>(L), 0.0);
  for (int m = 0; m < L; ++m) {
    double acc = 0.0;
    for (int b = 0; b < B; ++b) {
      acc += s.re(b, m) * s.re(b, m) + s.im(b, m) * s.im(b, m);
    }
    energy[static_cast<size_t>(m)] = acc;
  }
  std::vector<int> order(static_cast<size_t>(L));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return energy[static_cast<size_t>(a)] < energy[static_cast<size_t>(b)]; });
  int quiet = std::max(1, L / 10);

  std::vector<double> noise_psd(static_cast<size_t>(B), 0.0);
  for (int q = 0; q < quiet; ++q) {
    int m = order[static_cast<size_t>(q)];
    for (int b = 0; b < B; ++b) {
      noise_psd[static_cast<size_t>(b)] += s.re(b, m) * s.re(b, m) + s.im(b, m) * s.im(b, m);
    }
  }
  for (double& v : noise_psd) v /= quiet;

  for (int m = 0; m < L; ++m) {
    for (int b = 0; b < B; ++b) {
      double psd = s.re(b, m) * s.re(b, m) + s.im(b, m) * s.im(b, m);
      double gain = psd > 0.0 ? std::max(0.0, 1.0 - noise_psd[static_cast<size_t>(b)] / psd) : 0.0;
      s.re(b, m) *= gain;
      s.im(b, m) *= gain;
    }
  }
  AudioBuffer y = istft(s);
  y.samples.resize(static_cast<size_t>(x.size()), 0.0);
  return y;
}

const char* attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNone: return "none";
    case AttackKind::kQuantize: return "quantize";
    case AttackKind::kResample: return "resample";
    case AttackKind::kMelRoundtrip: return "mel_roundtrip";
    case AttackKind::kDenoise: return "denoise";
  }
  throw Error("attack: unrecognized kind");
}

AudioBuffer apply_attack(const AudioBuffer& x, const AttackSpec& spec) {
  switch (spec.kind) {
    case AttackKind::kNone: return x;
    case AttackKind::kQuantize: return quantize_8bit(x);
    case AttackKind::kResample: return resample_attack(x);
    case AttackKind::kMelRoundtrip:
      if (spec.n_mels < 2) throw Error("attack: mel_roundtrip needs n_mels >= 2");
      return mel_roundtrip(x, spec.n_mels, spec.stft);
    case AttackKind::kDenoise: return wiener_denoise(x, spec.stft);
  }
  throw Error("attack: unrecognized kind");
}

std::string AttackTable::to_text() const {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "# attack suite: %d files, eta=%g, frame_len=%d\n", files,
                noise_level, frame_len);
  out << buf;
  std::snprintf(buf, sizeof(buf), "%-14s %10s %10s %10s\n", "attack", "evasion", "spr", "dpr");
  out << buf;
  auto cell = [](double v) {
    char c[32];
    if (v < 0.0) {
      std::snprintf(c, sizeof(c), "%10s", "n/a");
    } else {
      std::snprintf(c, sizeof(c), "%10.4f", v);
    }
    return std::string(c);
  };
  for (const AttackRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-14s %s %s %s\n", r.name.c_str(), cell(r.evasion).c_str(),
                  cell(r.spr).c_str(), cell(r.dpr).c_str());
    out << buf;
  }
  return out.str();
}

void write_attack_table_json(const AttackTable& t, const std::string& path) {
  nlohmann::json j;
  j["files"] = t.files;
  j["noise_level"] = t.noise_level;
  j["frame_len"] = t.frame_len;
  j["rows"] = nlohmann::json::array();
  for (const AttackRow& r : t.rows) {
    nlohmann::json row;
    row["attack"] = r.name;
    row["evasion"] = r.evasion < 0.0 ? nlohmann::json() : nlohmann::json(r.evasion);
    row["spr"] = r.spr < 0.0 ? nlohmann::json() : nlohmann::json(r.spr);
    row["dpr"] = r.dpr < 0.0 ? nlohmann::json() : nlohmann::json(r.dpr);
    j["rows"].push_back(row);
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("report: cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
}

AttackTable run_attack_suite(const std::vector<std::string>& original_files,
                             const std::vector<std::string>& protected_files,
                             const std::vector<std::string>& cloned_files, const Ufp& u,
                             double tau, const SpeakerEncoder& encoder) {
  if (original_files.size() != protected_files.size()) {
    throw Error("attack suite: originals and protected lists must be index-aligned");
  }
  if (!cloned_files.empty() && cloned_files.size() != protected_files.size()) {
    throw Error("attack suite: cloned list must be index-aligned with the protected list");
  }
  if (original_files.empty()) throw Error("attack suite: empty file lists");

  int n = static_cast<int>(original_files.size());
  std::vector<AudioBuffer> originals(static_cast<size_t>(n));
  std::vector<AudioBuffer> prot(static_cast<size_t>(n));
  std::vector<AudioBuffer> clones(cloned_files.empty() ? 0 : static_cast<size_t>(n));
  parallel_for(n, [&](int i) {
    originals[static_cast<size_t>(i)] = read_wav(original_files[static_cast<size_t>(i)]);
    prot[static_cast<size_t>(i)] = read_wav(protected_files[static_cast<size_t>(i)]);
    if (!cloned_files.empty()) clones[static_cast<size_t>(i)] = read_wav(cloned_files[static_cast<size_t>(i)]);
  });

  std::vector<Embedding> z_orig(static_cast<size_t>(n));
  std::vector<Embedding> z_clone(clones.size());
  parallel_for(n, [&](int i) {
    z_orig[static_cast<size_t>(i)] = encoder.embed(originals[static_cast<size_t>(i)]);
    if (!clones.empty()) z_clone[static_cast<size_t>(i)] = encoder.embed(clones[static_cast<size_t>(i)]);
  });

  const AttackKind kinds[] = {AttackKind::kNone, AttackKind::kQuantize, AttackKind::kResample,
                              AttackKind::kMelRoundtrip, AttackKind::kDenoise};

  AttackTable table;
  table.noise_level = u.noise_level;
  table.frame_len = u.frame_len();
  table.files = n;
  for (AttackKind kind : kinds) {
    AttackSpec spec;
    spec.kind = kind;
    spec.stft = u.stft;

    std::vector<uint8_t> evaded(static_cast<size_t>(n), 0);
    std::vector<uint8_t> spr_hit(static_cast<size_t>(n), 0);
    std::vector<uint8_t> dpr_hit(static_cast<size_t>(n), 0);
    parallel_for(n, [&](int i) {
      AudioBuffer attacked = apply_attack(prot[static_cast<size_t>(i)], spec);
      Embedding z_att = encoder.embed(attacked);
      evaded[static_cast<size_t>(i)] =
          cosine_similarity(z_orig[static_cast<size_t>(i)], z_att) < tau ? 1 : 0;
      if (!clones.empty()) {
        spr_hit[static_cast<size_t>(i)] =
            cosine_similarity(z_att, z_clone[static_cast<size_t>(i)]) < tau ? 1 : 0;
        dpr_hit[static_cast<size_t>(i)] =
            cosine_similarity(z_orig[static_cast<size_t>(i)], z_clone[static_cast<size_t>(i)]) < tau
                ? 1
                : 0;
      }
    });

    AttackRow row;
    row.name = attack_name(kind);
    int ev = 0, sp = 0, dp = 0;
    for (int i = 0; i < n; ++i) {
      ev += evaded[static_cast<size_t>(i)];
      sp += spr_hit[static_cast<size_t>(i)];
      dp += dpr_hit[static_cast<size_t>(i)];
    }
    row.evasion = static_cast<double>(ev) / n;
    if (!clones.empty()) {
      row.spr = static_cast<double>(sp) / n;
      row.dpr = static_cast<double>(dp) / n;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace ufp
