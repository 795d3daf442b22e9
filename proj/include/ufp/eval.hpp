// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <limits>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ufp/audio.hpp"
#include "ufp/encoder.hpp"
#include "ufp/ufp.hpp"

namespace ufp {

// One verification trial: a pair of audio paths with a same/different
// speaker label and an optional nonnegative weight.
struct Trial {
  std::string path_a, path_b;
  int label = 0;  // 1 same speaker, 0 different
  double weight = 1.0;
};

// Format: `path_a path_b label [weight]`, whitespace separated, '#'
// comments. Relative paths are resolved against the list's directory.
std::vector<Trial> read_trials(const std::string& path);
void write_trials(const std::vector<Trial>& trials, const std::string& path);

struct ScoredTrial {
  double score = 0.0;
  int label = 0;
  double weight = 1.0;
};

struct EerResult {
  double threshold = 0.0;  // tau
  double eer = 0.0;
};

// Sorts by score ascending, forms FNR/FPR from weighted cumulative sums,
// and returns the score minimizing |FNR - FPR| (lowest qualifying score on
// ties) with EER = (FNR + FPR)/2 there. Needs both classes present.
EerResult compute_eer_threshold(std::vector<ScoredTrial> trials);

// File-keyed embedding store shared across metrics; extraction over a path
// list runs in parallel, lookups are mutex-guarded.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(const SpeakerEncoder& encoder) : encoder_(encoder) {}

  const SpeakerEncoder& encoder() const { return encoder_; }
  Embedding get(const std::string& path);
  void prefetch(const std::vector<std::string>& paths);

 private:
  const SpeakerEncoder& encoder_;
  std::mutex mu_;
  std::unordered_map<std::string, Embedding> map_;
};

std::vector<ScoredTrial> score_trials(const std::vector<Trial>& trials, EmbeddingCache& cache);

// True iff the two samples verify as the same speaker at threshold tau.
bool sv_decide(const AudioBuffer& x1, const AudioBuffer& x2, double tau,
               const SpeakerEncoder& encoder);

// Fraction of index-aligned pairs rejected by verification; the building
// block behind spr/dpr and the file-based evasion readout.
double rejection_rate(const std::vector<std::string>& a, const std::vector<std::string>& b,
                      double tau, EmbeddingCache& cache, const char* what = "rejection_rate");

// Index-aligned pair metrics. spr: protected vs cloned; dpr: originals vs
// cloned; match_rate: fraction of fakes passing verification (the exact
// complement of dpr on the same aligned lists).
double spr(const std::vector<std::string>& protected_files,
           const std::vector<std::string>& cloned_files, double tau, EmbeddingCache& cache);
double dpr(const std::vector<std::string>& original_files,
           const std::vector<std::string>& cloned_files, double tau, EmbeddingCache& cache);
double match_rate(const std::vector<std::string>& source_files,
                  const std::vector<std::string>& fake_files, double tau, EmbeddingCache& cache);

// Self-contained protection metric: the fraction of files whose deploy-mode
// protected version no longer verifies against the original.
double evasion_rate(const std::vector<std::string>& original_files, const Ufp& u, double tau,
                    const SpeakerEncoder& encoder);
double evasion_rate(const std::vector<AudioBuffer>& originals, const Ufp& u, double tau,
                    const SpeakerEncoder& encoder);

// Median deploy-mode processing time over >= 5 runs divided by duration,
// for synthetic 16 kHz audio of each requested duration (seconds).
std::vector<std::pair<double, double>> rtc_benchmark(const std::vector<double>& durations,
                                                     const Ufp& u);

// Mean over 30 ms frames of 10*log10(frame energy / error energy), each
// frame clamped to [-10, 35] dB; silent frames skipped.
double segmental_snr(const AudioBuffer& x, const AudioBuffer& x_tilde);

struct ParamEfficiency {
  int64_t p_freq = 0;  // 2*B*L_u
  int64_t p_time = 0;  // seconds * sample_rate
  double ratio = 0.0;
  std::string text;
};
ParamEfficiency param_efficiency_report(const StftParams& p, int frame_len, double audio_seconds,
                                        int sample_rate = 16000);

// Full evaluation record; rates are -1 and dB/time values NaN when not
// applicable.
struct EvalReport {
  double eer = -1.0;
  double threshold = 0.0;
  double spr = -1.0;
  double dpr = -1.0;
  double match_rate = -1.0;
  double evasion_rate = -1.0;
  double seg_snr_db = std::numeric_limits<double>::quiet_NaN();
  double rtc = std::numeric_limits<double>::quiet_NaN();
};

std::string eval_report_table(const EvalReport& r);
void write_eval_report_json(const EvalReport& r, const std::string& path);

}  // namespace ufp
