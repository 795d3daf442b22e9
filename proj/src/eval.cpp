// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ufp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ufp/error.hpp"
#include "ufp/resample.hpp"
#include "ufp/rng.hpp"
#include "ufp/threading.hpp"
#include "ufp/wav.hpp"

namespace ufp {

std::vector<Trial> read_trials(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("trials: cannot open '" + path + "'");
  std::filesystem::path base = std::filesystem::path(path).parent_path();

  std::vector<Trial> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    Trial t;
    if (!(ss >> t.path_a)) continue;  // blank line
    if (!(ss >> t.path_b >> t.label)) {
      throw Error("trials: malformed line " + std::to_string(lineno) + " in '" + path + "'");
    }
    if (t.label != 0 && t.label != 1) {
      throw Error("trials: label must be 0 or 1 at line " + std::to_string(lineno));
    }
    if (ss >> t.weight) {
      if (t.weight < 0.0) throw Error("trials: negative weight at line " + std::to_string(lineno));
    } else {
      t.weight = 1.0;
    }
    for (std::string* p : {&t.path_a, &t.path_b}) {
      std::filesystem::path fp(*p);
      if (fp.is_relative()) *p = (base / fp).string();
    }
    out.push_back(std::move(t));
  }
  return out;
}

void write_trials(const std::vector<Trial>& trials, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("trials: cannot open '" + path + "' for writing");
  for (const Trial& t : trials) {
    f << t.path_a << " " << t.path_b << " " << t.label;
    if (t.weight != 1.0) f << " " << t.weight;
    f << "\n";
  }
}

EerResult compute_eer_threshold(std::vector<ScoredTrial> trials) {
  double tot_pos = 0.0, tot_neg = 0.0;
  for (const ScoredTrial& t : trials) {
    if (t.label == 1) {
      tot_pos += t.weight;
    } else {
      tot_neg += t.weight;
    }
  }
  if (tot_pos <= 0.0 || tot_neg <= 0.0) {
    throw Error("eer: need both same-speaker and different-speaker trials");
  }

  std::sort(trials.begin(), trials.end(), [](const ScoredTrial& a, const ScoredTrial& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.label < b.label;
  });

  // Walking k trials up from the lowest score rejects them all; FNR/FPR come
  // out of the weighted cumulative sums. Lowest qualifying score wins ties.
  double cum_pos = 0.0, cum_neg = 0.0;
  double best = std::numeric_limits<double>::infinity();
  EerResult result;
  for (const ScoredTrial& t : trials) {
    if (t.label == 1) {
      cum_pos += t.weight;
    } else {
      cum_neg += t.weight;
    }
    double fnr = cum_pos / tot_pos;
    double fpr = 1.0 - cum_neg / tot_neg;
    double gap = std::abs(fnr - fpr);
    if (gap < best) {
      best = gap;
      result.threshold = t.score;
      result.eer = 0.5 * (fnr + fpr);
    }
  }
  return result;
}

Embedding EmbeddingCache::get(const std::string& path) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = map_.find(path);
    if (it != map_.end()) return it->second;
  }
  AudioBuffer x = read_wav(path);
  if (x.sample_rate != encoder_.sample_rate()) x = resample(x, encoder_.sample_rate());
  Embedding e = encoder_.embed(x);
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = map_.emplace(path, std::move(e));
  return it->second;
}

void EmbeddingCache::prefetch(const std::vector<std::string>& paths) {
  std::vector<std::string> missing;
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (const std::string& p : paths) {
      if (map_.find(p) == map_.end()) missing.push_back(p);
    }
  }
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  parallel_for(static_cast<int>(missing.size()), [&](int i) { get(missing[static_cast<size_t>(i)]); });
}

std::vector<ScoredTrial> score_trials(const std::vector<Trial>& trials, EmbeddingCache& cache) {
  std::vector<std::string> paths;
  paths.reserve(trials.size() * 2);
  for (const Trial& t : trials) {
    paths.push_back(t.path_a);
    paths.push_back(t.path_b);
  }
  cache.prefetch(paths);

  std::vector<ScoredTrial> out(trials.size());
  parallel_for(static_cast<int>(trials.size()), [&](int i) {
    const Trial& t = trials[static_cast<size_t>(i)];
    out[static_cast<size_t>(i)] = {cosine_similarity(cache.get(t.path_a), cache.get(t.path_b)),
                                   t.label, t.weight};
  });
  return out;
}

bool sv_decide(const AudioBuffer& x1, const AudioBuffer& x2, double tau,
               const SpeakerEncoder& encoder) {
  return cosine_similarity(encoder.embed(x1), encoder.embed(x2)) >= tau;
}

// Fraction of aligned pairs rejected by verification (sv_decide false).
double rejection_rate(const std::vector<std::string>& a, const std::vector<std::string>& b,
                      double tau, EmbeddingCache& cache, const char* what) {
  if (a.size() != b.size()) {
    throw Error(std::string(what) + ": file lists must be index-aligned (" +
                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw Error(std::string(what) + ": empty file lists");
  std::vector<std::string> all(a);
  all.insert(all.end(), b.begin(), b.end());
  cache.prefetch(all);

  int rejected = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double score = cosine_similarity(cache.get(a[i]), cache.get(b[i]));
    if (score < tau) ++rejected;
  }
  return static_cast<double>(rejected) / static_cast<double>(a.size());
}

double spr(const std::vector<std::string>& protected_files,
           const std::vector<std::string>& cloned_files, double tau, EmbeddingCache& cache) {
  return rejection_rate(protected_files, cloned_files, tau, cache, "spr");
}

double dpr(const std::vector<std::string>& original_files,
           const std::vector<std::string>& cloned_files, double tau, EmbeddingCache& cache) {
  return rejection_rate(original_files, cloned_files, tau, cache, "dpr");
}

double match_rate(const std::vector<std::string>& source_files,
                  const std::vector<std::string>& fake_files, double tau, EmbeddingCache& cache) {
  return 1.0 - rejection_rate(source_files, fake_files, tau, cache, "match_rate");
}

double evasion_rate(const std::vector<AudioBuffer>& originals, const Ufp& u, double tau,
                    const SpeakerEncoder& encoder) {
  if (originals.empty()) throw Error("evasion_rate: empty file list");
  int n = static_cast<int>(originals.size());
  std::vector<uint8_t> evaded(static_cast<size_t>(n), 0);
  parallel_for(n, [&](int i) {
    const AudioBuffer& x = originals[static_cast<size_t>(i)];
    AudioBuffer prot = tile(x, u, TileAugment{});
    evaded[static_cast<size_t>(i)] = sv_decide(x, prot, tau, encoder) ? 0 : 1;
  });
  int count = 0;
  for (uint8_t e : evaded) count += e;
  return static_cast<double>(count) / n;
}

double evasion_rate(const std::vector<std::string>& original_files, const Ufp& u, double tau,
                    const SpeakerEncoder& encoder) {
  std::vector<AudioBuffer> bufs(original_files.size());
  parallel_for(static_cast<int>(original_files.size()), [&](int i) {
    AudioBuffer x = read_wav(original_files[static_cast<size_t>(i)]);
    if (x.sample_rate != encoder.sample_rate()) x = resample(x, encoder.sample_rate());
    bufs[static_cast<size_t>(i)] = std::move(x);
  });
  return evasion_rate(bufs, u, tau, encoder);
}

std::vector<std::pair<double, double>> rtc_benchmark(const std::vector<double>& durations,
                                                     const Ufp& u) {
  constexpr int kReps = 5;
  constexpr int kRate = 16000;
  std::vector<std::pair<double, double>> out;
  for (double d : durations) {
    if (d <= 0.0) throw Error("rtc: durations must be positive");
    AudioBuffer x;
    x.sample_rate = kRate;
    int64_t n = static_cast<int64_t>(std::llround(d * kRate));
    // Requests below the tiler minimum are measured at the minimum and the
    // actual duration is reported back.
    n = std::max(n, min_tile_samples(u));
    d = static_cast<double>(n) / kRate;
    x.samples.resize(static_cast<size_t>(n));
    Rng rng(0x52c5u, "rtc-audio", static_cast<uint64_t>(n));
    for (double& v : x.samples) v = 0.3 * (rng.uniform() * 2.0 - 1.0);

    std::vector<double> times;
    times.reserve(kReps);
    for (int r = 0; r < kReps; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      AudioBuffer y = tile(x, u, TileAugment{});
      auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
      (void)y;
    }
    std::sort(times.begin(), times.end());
    double median = times[times.size() / 2];
    out.emplace_back(d, median / d);
  }
  return out;
}

double segmental_snr(const AudioBuffer& x, const AudioBuffer& x_tilde) {
  if (x.size() != x_tilde.size()) throw Error("segmental_snr: buffers must have equal length");
  if (x.empty()) throw Error("segmental_snr: empty buffers");
  int frame = std::max(1, static_cast<int>(std::lround(0.03 * x.sample_rate)));
  int64_t n_frames = x.size() / frame;

  double acc = 0.0;
  int64_t used = 0;
  for (int64_t f = 0; f < n_frames; ++f) {
    double sig = 0.0, err = 0.0;
    for (int t = 0; t < frame; ++t) {
      double xs = x.samples[static_cast<size_t>(f * frame + t)];
      double d = xs - x_tilde.samples[static_cast<size_t>(f * frame + t)];
      sig += xs * xs;
      err += d * d;
    }
    if (sig < 1e-10) continue;  // silent frame
    double snr = err == 0.0 ? 35.0 : 10.0 * std::log10(sig / err);
    snr = std::clamp(snr, -10.0, 35.0);
    acc += snr;
    ++used;
  }
  if (used == 0) throw Error("segmental_snr: undefined, all frames silent");
  return acc / static_cast<double>(used);
}

namespace {
std::string format_thousands(int64_t v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  int count = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (count > 0 && count % 3 == 0) out.push_back(',');
    out.push_back(*it);
    ++count;
  }
  if (v < 0) out.push_back('-');
  std::reverse(out.begin(), out.end());
  return out;
}
}  // namespace

ParamEfficiency param_efficiency_report(const StftParams& p, int frame_len, double audio_seconds,
                                        int sample_rate) {
  if (frame_len <= 0) throw Error("param_efficiency: frame_len must be positive");
  if (audio_seconds <= 0.0) throw Error("param_efficiency: audio_seconds must be positive");
  if (sample_rate <= 0) throw Error("param_efficiency: sample rate must be positive");

  ParamEfficiency r;
  int bins = stft_bins(p);
  r.p_freq = 2LL * bins * frame_len;
  r.p_time = static_cast<int64_t>(std::llround(audio_seconds * sample_rate));
  r.ratio = static_cast<double>(r.p_freq) / static_cast<double>(r.p_time);

  char buf[256];
  std::ostringstream text;
  text << "P_freq = 2*B*L_u = " << format_thousands(r.p_freq) << " (B=" << bins
       << ", L_u=" << frame_len << ")\n";
  text << "P_time = " << format_thousands(r.p_time) << " (" << audio_seconds << " s at "
       << sample_rate << " Hz)\n";
  std::snprintf(buf, sizeof(buf), "P_freq / P_time = %.4f\n", r.ratio);
  text << buf;
  r.text = text.str();
  return r;
}

namespace {
std::string rate_or_na(double v) {
  if (v < 0.0) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string value_or_na(double v, const char* fmt) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}
}  // namespace

std::string eval_report_table(const EvalReport& r) {
  std::ostringstream out;
  char buf[64];
  auto row = [&](const char* name, const std::string& value) {
    std::snprintf(buf, sizeof(buf), "%-14s %s\n", name, value.c_str());
    out << buf;
  };
  row("eer", rate_or_na(r.eer));
  std::snprintf(buf, sizeof(buf), "%.6f", r.threshold);
  row("threshold", buf);
  row("evasion_rate", rate_or_na(r.evasion_rate));
  row("spr", rate_or_na(r.spr));
  row("dpr", rate_or_na(r.dpr));
  row("match_rate", rate_or_na(r.match_rate));
  row("seg_snr_db", value_or_na(r.seg_snr_db, "%.2f"));
  row("rtc", value_or_na(r.rtc, "%.6f"));
  return out.str();
}

void write_eval_report_json(const EvalReport& r, const std::string& path) {
  nlohmann::json j;
  auto put_rate = [&](const char* key, double v) {
    if (v < 0.0) {
      j[key] = nullptr;
    } else {
      j[key] = v;
    }
  };
  auto put_value = [&](const char* key, double v) {
    if (std::isnan(v)) {
      j[key] = nullptr;
    } else {
      j[key] = v;
    }
  };
  put_rate("eer", r.eer);
  j["threshold"] = r.threshold;
  put_rate("evasion_rate", r.evasion_rate);
  put_rate("spr", r.spr);
  put_rate("dpr", r.dpr);
  put_rate("match_rate", r.match_rate);
  put_value("seg_snr_db", r.seg_snr_db);
  put_value("rtc", r.rtc);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("report: cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
}

}  // namespace ufp
