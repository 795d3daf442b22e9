// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// ufp: train a universal frequential perturbation from a few utterances,
// apply it to arbitrary audio, and evaluate the protection.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ufp/attacks.hpp"
#include "ufp/config.hpp"
#include "ufp/error.hpp"
#include "ufp/eval.hpp"
#include "ufp/optim.hpp"
#include "ufp/resample.hpp"
#include "ufp/rng.hpp"
#include "ufp/synth.hpp"
#include "ufp/threading.hpp"
#include "ufp/ufp.hpp"
#include "ufp/wav.hpp"

namespace fs = std::filesystem;

namespace {

ufp::AudioBuffer load_audio(const std::string& path, int target_rate) {
  ufp::WavStats stats;
  ufp::AudioBuffer x = ufp::read_wav(path, &stats);
  if (stats.clipped > 0) {
    std::cerr << "ufp: warning: " << stats.clipped << " clipped samples in '" << path << "'\n";
  }
  if (x.sample_rate != target_rate) x = ufp::resample(x, target_rate);
  return x;
}

std::vector<std::string> list_wavs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ufp::Error("'" + dir + "' is not a directory");
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") {
      out.push_back(e.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ufp::Error("no .wav files in '" + dir + "'");
  return out;
}

// Pairs two directories by file name; every file must have a partner.
std::pair<std::vector<std::string>, std::vector<std::string>> aligned_wavs(
    const std::string& dir_a, const std::string& dir_b) {
  std::map<std::string, std::string> a, b;
  for (const std::string& p : list_wavs(dir_a)) a[fs::path(p).filename().string()] = p;
  for (const std::string& p : list_wavs(dir_b)) b[fs::path(p).filename().string()] = p;
  std::vector<std::string> unmatched;
  for (const auto& [name, path] : a) {
    if (b.find(name) == b.end()) unmatched.push_back(name + " (only in " + dir_a + ")");
  }
  for (const auto& [name, path] : b) {
    if (a.find(name) == a.end()) unmatched.push_back(name + " (only in " + dir_b + ")");
  }
  if (!unmatched.empty()) {
    std::string msg = "unmatched files between '" + dir_a + "' and '" + dir_b + "':";
    for (size_t i = 0; i < unmatched.size() && i < 10; ++i) msg += "\n  " + unmatched[i];
    if (unmatched.size() > 10) msg += "\n  ... " + std::to_string(unmatched.size() - 10) + " more";
    throw ufp::Error(msg);
  }
  std::pair<std::vector<std::string>, std::vector<std::string>> out;
  for (const auto& [name, path] : a) {
    out.first.push_back(path);
    out.second.push_back(b[name]);
  }
  return out;
}

struct TrainArgs {
  std::string corpus, out;
  int trials = 500;
} train_args;

struct ProtectArgs {
  std::string in, ufp_path, out;
} protect_args;

struct EvaluateArgs {
  std::string originals, protected_dir, cloned, trials, report;
} evaluate_args;

struct AttackArgs {
  std::string protected_dir, originals, ufp_path, cloned, trials, report;
  double tau = 2.0;  // > 1 means "not set"
} attack_args;

struct SynthArgs {
  std::string out;
  int speakers = 4;
  int utts = 30;
  double duration = 3.0;
  int trials = 500;
} synth_args;

int cmd_synth(const ufp::RunConfig& cfg) {
  ufp::CorpusSpec spec;
  spec.n_speakers = synth_args.speakers;
  spec.utts_per_speaker = synth_args.utts;
  spec.duration_s = synth_args.duration;
  spec.seed = cfg.seed;
  spec.sample_rate = cfg.sample_rate;
  auto entries = ufp::generate_synthetic_corpus(synth_args.out, spec);
  auto trials = ufp::make_trials(entries, synth_args.trials, ufp::sub_seed(cfg.seed, "synth-trials"));
  ufp::write_trials(trials, (fs::path(synth_args.out) / "trials.txt").string());
  std::cout << "synth: wrote " << entries.size() << " files for " << spec.n_speakers
            << " speakers to " << synth_args.out << " (manifest.txt, trials.txt)\n";
  return 0;
}

int cmd_train(const ufp::RunConfig& cfg) {
  std::cout << "resolved configuration:\n" << ufp::config_echo(cfg);

  // Corpus: manifest when present (enables evasion readouts), else any wavs.
  std::vector<std::string> files;
  std::vector<ufp::CorpusEntry> entries;
  fs::path manifest = fs::path(train_args.corpus) / "manifest.txt";
  if (fs::exists(manifest)) {
    entries = ufp::read_manifest(manifest.string());
    for (const auto& e : entries) {
      files.push_back((fs::path(train_args.corpus) / e.file).string());
    }
  } else {
    files = list_wavs(train_args.corpus);
  }
  if (files.size() < 2) {
    throw ufp::Error("corpus has " + std::to_string(files.size()) +
                     " usable file(s); need at least 2");
  }

  std::vector<ufp::AudioBuffer> audio(files.size());
  ufp::parallel_for(static_cast<int>(files.size()), [&](int i) {
    audio[static_cast<size_t>(i)] = load_audio(files[static_cast<size_t>(i)], cfg.sample_rate);
  });

  // Seeded shuffle, then split by the train ratio.
  std::vector<int> order(files.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  ufp::Rng shuffle_rng(cfg.seed, "train-split");
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(shuffle_rng.uniform_int(0, i))]);
  }
  int n_train = std::clamp(static_cast<int>(std::lround(cfg.train_ratio * order.size())), 1,
                           static_cast<int>(order.size()) - 1);
  std::vector<ufp::AudioBuffer> train_set, heldout_set;
  for (int i = 0; i < static_cast<int>(order.size()); ++i) {
    (i < n_train ? train_set : heldout_set).push_back(audio[static_cast<size_t>(order[static_cast<size_t>(i)])]);
  }
  std::cout << "training on " << train_set.size() << " files, holding out " << heldout_set.size()
            << "\n";

  ufp::LogMelEncoder encoder(cfg.encoder_config(), cfg.sample_rate);
  auto [u, report] = ufp::optimize_ufp(train_set, cfg.train_config(), encoder, cfg.stft,
                                       cfg.frame_len, cfg.noise_level, cfg.smoother_k);
  if (report.diverged()) {
    ufp::write_train_report_text(report, train_args.out + ".report.txt");
    throw ufp::Error("optimization diverged: " + report.diagnostic);
  }

  // Heldout/train evasion at a corpus-derived threshold, when speaker labels
  // exist.
  std::set<int> speakers;
  for (const auto& e : entries) speakers.insert(e.speaker);
  if (speakers.size() >= 2) {
    std::vector<ufp::Trial> trials;
    fs::path tfile = fs::path(train_args.corpus) / "trials.txt";
    if (fs::exists(tfile)) {
      trials = ufp::read_trials(tfile.string());
    } else {
      trials = ufp::make_trials(entries, train_args.trials, ufp::sub_seed(cfg.seed, "train-trials"));
      for (auto& t : trials) {
        t.path_a = (fs::path(train_args.corpus) / t.path_a).string();
        t.path_b = (fs::path(train_args.corpus) / t.path_b).string();
      }
    }
    ufp::EmbeddingCache cache(encoder);
    ufp::EerResult eer = ufp::compute_eer_threshold(ufp::score_trials(trials, cache));
    report.train_evasion = ufp::evasion_rate(train_set, u, eer.threshold, encoder);
    report.heldout_evasion = heldout_set.empty()
                                 ? -1.0
                                 : ufp::evasion_rate(heldout_set, u, eer.threshold, encoder);
    std::printf("threshold tau=%.6f (eer=%.4f)\n", eer.threshold, eer.eer);
    std::printf("train evasion rate:   %.4f\n", report.train_evasion);
    if (report.heldout_evasion >= 0.0) {
      std::printf("heldout evasion rate: %.4f\n", report.heldout_evasion);
    }
  } else {
    std::cout << "no speaker manifest; skipping evasion readout\n";
  }

  ufp::save_ufp(u, train_args.out);
  ufp::write_train_report_text(report, train_args.out + ".report.txt");
  ufp::write_train_report_json(report, train_args.out + ".report.json");
  std::printf("final loss %.6f after %zu iterations (%.1f s)\n",
              report.total_loss.empty() ? 0.0 : report.total_loss.back(),
              report.total_loss.size(), report.wall_seconds);
  std::cout << "wrote " << train_args.out << "\n";
  return 0;
}

int cmd_protect(const ufp::RunConfig& cfg, bool stft_flags_set) {
  ufp::Ufp u = ufp::load_ufp(protect_args.ufp_path);
  if (stft_flags_set && !(cfg.stft == u.stft)) {
    throw ufp::Error("requested stft (n_fft=" + std::to_string(cfg.stft.n_fft) + ", hop=" +
                     std::to_string(cfg.stft.hop) + ") is incompatible with '" +
                     protect_args.ufp_path + "' (n_fft=" + std::to_string(u.stft.n_fft) +
                     ", hop=" + std::to_string(u.stft.hop) + ")");
  }

  std::vector<std::pair<std::string, std::string>> jobs;  // in -> out
  if (fs::is_directory(protect_args.in)) {
    fs::create_directories(protect_args.out);
    for (const std::string& p : list_wavs(protect_args.in)) {
      jobs.emplace_back(p, (fs::path(protect_args.out) / fs::path(p).filename()).string());
    }
  } else {
    if (!fs::exists(protect_args.in)) throw ufp::Error("input '" + protect_args.in + "' not found");
    jobs.emplace_back(protect_args.in, protect_args.out);
  }

  for (const auto& [in_path, out_path] : jobs) {
    ufp::AudioBuffer x = load_audio(in_path, cfg.sample_rate);
    auto t0 = std::chrono::steady_clock::now();
    ufp::AudioBuffer y = ufp::tile(x, u, ufp::TileAugment{});
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ufp::write_wav(y, out_path);
    std::printf("%s  %.2f s audio  %.4f s processing  rtc %.5f\n",
                fs::path(in_path).filename().string().c_str(), x.duration(), secs,
                secs / x.duration());
  }
  return 0;
}

int cmd_evaluate(const ufp::RunConfig& cfg) {
  ufp::LogMelEncoder encoder(cfg.encoder_config(), cfg.sample_rate);
  ufp::EmbeddingCache cache(encoder);

  auto trials = ufp::read_trials(evaluate_args.trials);
  ufp::EerResult eer = ufp::compute_eer_threshold(ufp::score_trials(trials, cache));

  ufp::EvalReport report;
  report.eer = eer.eer;
  report.threshold = eer.threshold;

  auto [originals, protected_files] =
      aligned_wavs(evaluate_args.originals, evaluate_args.protected_dir);
  report.evasion_rate =
      ufp::rejection_rate(originals, protected_files, eer.threshold, cache, "evasion");

  if (!evaluate_args.cloned.empty()) {
    auto [prot2, clones] = aligned_wavs(evaluate_args.protected_dir, evaluate_args.cloned);
    report.spr = ufp::spr(prot2, clones, eer.threshold, cache);
    auto [orig2, clones2] = aligned_wavs(evaluate_args.originals, evaluate_args.cloned);
    report.dpr = ufp::dpr(orig2, clones2, eer.threshold, cache);
    report.match_rate = ufp::match_rate(orig2, clones2, eer.threshold, cache);
  }

  // Mean segmental SNR over aligned pairs, trimmed to the common length.
  double snr_acc = 0.0;
  for (size_t i = 0; i < originals.size(); ++i) {
    ufp::AudioBuffer a = load_audio(originals[i], cfg.sample_rate);
    ufp::AudioBuffer b = load_audio(protected_files[i], cfg.sample_rate);
    size_t n = std::min(a.samples.size(), b.samples.size());
    a.samples.resize(n);
    b.samples.resize(n);
    snr_acc += ufp::segmental_snr(a, b);
  }
  report.seg_snr_db = snr_acc / static_cast<double>(originals.size());

  std::cout << ufp::eval_report_table(report);
  if (!evaluate_args.report.empty()) {
    ufp::write_eval_report_json(report, evaluate_args.report + ".json");
    std::ofstream f(evaluate_args.report + ".txt", std::ios::trunc);
    f << ufp::eval_report_table(report);
    std::cout << "wrote " << evaluate_args.report << ".{txt,json}\n";
  }
  return 0;
}

int cmd_attack(const ufp::RunConfig& cfg) {
  ufp::Ufp u = ufp::load_ufp(attack_args.ufp_path);
  ufp::LogMelEncoder encoder(cfg.encoder_config(), cfg.sample_rate);

  double tau = attack_args.tau;
  if (tau > 1.0) {
    if (attack_args.trials.empty()) {
      throw ufp::Error("attack needs a threshold: pass --tau or --trials");
    }
    ufp::EmbeddingCache cache(encoder);
    tau = ufp::compute_eer_threshold(
              ufp::score_trials(ufp::read_trials(attack_args.trials), cache))
              .threshold;
    std::printf("threshold tau=%.6f from %s\n", tau, attack_args.trials.c_str());
  }

  auto [originals, protected_files] =
      aligned_wavs(attack_args.originals, attack_args.protected_dir);
  std::vector<std::string> clones;
  if (!attack_args.cloned.empty()) {
    auto [prot2, cl] = aligned_wavs(attack_args.protected_dir, attack_args.cloned);
    clones = cl;
  }

  ufp::AttackTable table =
      ufp::run_attack_suite(originals, protected_files, clones, u, tau, encoder);
  std::cout << table.to_text();
  if (!attack_args.report.empty()) {
    ufp::write_attack_table_json(table, attack_args.report + ".json");
    std::ofstream f(attack_args.report + ".txt", std::ios::trunc);
    f << table.to_text();
    std::cout << "wrote " << attack_args.report << ".{txt,json}\n";
  }
  return 0;
}

int cmd_bench(const ufp::RunConfig& cfg) {
  ufp::Ufp u = ufp::random_ufp(cfg.stft, cfg.frame_len, cfg.noise_level, cfg.smoother_k,
                               ufp::sub_seed(cfg.seed, "bench-ufp"));
  std::vector<double> durations = {1.0, 5.0, 10.0, 30.0, 60.0, 100.0};
  auto rows = ufp::rtc_benchmark(durations, u);
  std::printf("%10s %12s %10s\n", "seconds", "median (s)", "rtc");
  for (const auto& [d, rtc] : rows) {
    // durations below the tiler minimum are measured at the minimum
    std::printf("%10.2f %12.5f %10.6f\n", d, rtc * d, rtc);
  }
  auto eff = ufp::param_efficiency_report(cfg.stft, cfg.frame_len, 64.0, cfg.sample_rate);
  std::cout << eff.text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // --config is applied before flag parsing so that flags win.
  ufp::RunConfig cfg;
  try {
    for (int i = 1; i < argc; ++i) {
      std::string arg = argv[i];
      if (arg == "--config" && i + 1 < argc) {
        ufp::apply_config_file(cfg, argv[i + 1]);
      } else if (arg.rfind("--config=", 0) == 0) {
        ufp::apply_config_file(cfg, arg.substr(9));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "ufp: error: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"universal frequential perturbation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "configuration file (key = value lines with [sections])");
  app.add_option("--seed", cfg.seed, "top-level seed; every random stream derives from it");
  app.add_option("--threads", cfg.threads, "worker cap (0 = UFP_THREADS env or hardware)");
  app.add_option("--sample-rate", cfg.sample_rate, "canonical rate; inputs are resampled on load");
  auto* nfft_opt = app.add_option("--n-fft", cfg.stft.n_fft, "stft window size");
  auto* hop_opt = app.add_option("--hop", cfg.stft.hop, "stft hop size");
  app.add_option("--n-mels", cfg.n_mels, "encoder mel bands");
  app.add_option("--dim", cfg.encoder_dim, "encoder embedding dimension");
  app.add_option("--proj-seed", cfg.projection_seed, "encoder projection seed (0 = derive)");
  app.add_option("--frame-len", cfg.frame_len, "perturbation length L_u in frames");
  app.add_option("--eta", cfg.noise_level, "perturbation noise level");
  app.add_option("--smoother-k", cfg.smoother_k, "frequency smoother kernel width (odd)");
  app.add_option("--iters", cfg.train.iterations, "training iterations");
  app.add_option("--lambda", cfg.train.lambda, "perception loss weight");
  app.add_option("--lr", cfg.train.learning_rate, "adam learning rate");
  app.add_option("--beta1", cfg.train.beta1, "adam beta1");
  app.add_option("--beta2", cfg.train.beta2, "adam beta2");
  app.add_option("--adam-eps", cfg.train.adam_eps, "adam epsilon");
  app.add_option("--mask-ratio", cfg.train.mask_ratio, "train-time segment drop probability");
  app.add_option("--aug-noise-std", cfg.train.aug_noise_std, "train-time additive noise std");
  app.add_option("--aug-jitter-max", cfg.train.aug_jitter_max, "train-time circular jitter (samples)");
  app.add_option("--train-ratio", cfg.train_ratio, "fraction of the corpus used for training");
  app.add_option("--mask-cap", cfg.mask_cap, "uniform per-bin magnitude cap (0 = off)");

  CLI::App* synth = app.add_subcommand("synth", "generate a deterministic synthetic speaker corpus");
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--speakers", synth_args.speakers, "number of speakers");
  synth->add_option("--utts", synth_args.utts, "utterances per speaker");
  synth->add_option("--duration", synth_args.duration, "utterance length in seconds");
  synth->add_option("--trials", synth_args.trials, "verification trials to emit");

  CLI::App* train = app.add_subcommand("train", "optimize a perturbation from a corpus");
  train->add_option("--corpus", train_args.corpus, "corpus directory (manifest.txt used if present)")
      ->required();
  train->add_option("--out", train_args.out, "output UFP file")->required();
  train->add_option("--trials", train_args.trials, "trials for the threshold when none on disk");

  CLI::App* protect = app.add_subcommand("protect", "apply a trained perturbation to audio");
  protect->add_option("--in", protect_args.in, "input wav file or directory")->required();
  protect->add_option("--ufp", protect_args.ufp_path, "trained UFP file")->required();
  protect->add_option("--out", protect_args.out, "output wav file or directory")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "score protection metrics");
  evaluate->add_option("--originals", evaluate_args.originals, "original audio directory")->required();
  evaluate->add_option("--protected", evaluate_args.protected_dir, "protected audio directory")
      ->required();
  evaluate->add_option("--cloned", evaluate_args.cloned, "externally cloned audio directory");
  evaluate->add_option("--trials", evaluate_args.trials, "trial list for the threshold")->required();
  evaluate->add_option("--report", evaluate_args.report, "report path prefix (.txt/.json)");

  CLI::App* attack = app.add_subcommand("attack", "run the adaptive attack suite");
  attack->add_option("--protected", attack_args.protected_dir, "protected audio directory")
      ->required();
  attack->add_option("--originals", attack_args.originals, "original audio directory")->required();
  attack->add_option("--ufp", attack_args.ufp_path, "trained UFP file")->required();
  attack->add_option("--cloned", attack_args.cloned, "externally cloned audio directory");
  attack->add_option("--trials", attack_args.trials, "trial list to derive the threshold");
  attack->add_option("--tau", attack_args.tau, "explicit verification threshold");
  attack->add_option("--report", attack_args.report, "report path prefix (.txt/.json)");

  CLI::App* bench = app.add_subcommand("bench", "real-time coefficient and parameter report");

  for (CLI::App* sub : {synth, train, protect, evaluate, attack, bench}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ufp: error: " << e.what() << "\n";
    return 1;
  }

  try {
    ufp::validate_config(cfg);
    ufp::set_max_threads(cfg.threads);
    if (synth->parsed()) return cmd_synth(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (protect->parsed()) {
      return cmd_protect(cfg, nfft_opt->count() > 0 || hop_opt->count() > 0);
    }
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    if (attack->parsed()) return cmd_attack(cfg);
    if (bench->parsed()) return cmd_bench(cfg);
  } catch (const std::exception& e) {
    std::cerr << "ufp: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
