// Copyright 2026 The ufpkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ufp/config.hpp"

#include <fstream>
#include <sstream>

#include "ufp/error.hpp"
#include "ufp/rng.hpp"

namespace ufp {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    int64_t v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

}  // namespace

EncoderConfig RunConfig::encoder_config() const {
  EncoderConfig e;
  e.n_mels = n_mels;
  e.dim = encoder_dim;
  e.projection_seed = projection_seed != 0 ? projection_seed : sub_seed(seed, "encoder-projection");
  e.stft = stft;
  return e;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = sub_seed(seed, "train");
  if (mask_cap > 0.0) {
    t.mask_thresholds.assign(static_cast<size_t>(stft_bins(stft)), mask_cap);
  }
  return t;
}

void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "stft.n_fft") {
    cfg.stft.n_fft = static_cast<int>(parse_int(key, value));
  } else if (key == "stft.hop") {
    cfg.stft.hop = static_cast<int>(parse_int(key, value));
  } else if (key == "encoder.n_mels") {
    cfg.n_mels = static_cast<int>(parse_int(key, value));
  } else if (key == "encoder.dim") {
    cfg.encoder_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "encoder.projection_seed") {
    cfg.projection_seed = static_cast<uint64_t>(parse_int(key, value));
  } else if (key == "ufp.frame_len") {
    cfg.frame_len = static_cast<int>(parse_int(key, value));
  } else if (key == "ufp.noise_level") {
    cfg.noise_level = parse_real(key, value);
  } else if (key == "ufp.smoother_k") {
    cfg.smoother_k = static_cast<int>(parse_int(key, value));
  } else if (key == "train.iterations") {
    cfg.train.iterations = static_cast<int>(parse_int(key, value));
  } else if (key == "train.lambda") {
    cfg.train.lambda = parse_real(key, value);
  } else if (key == "train.learning_rate") {
    cfg.train.learning_rate = parse_real(key, value);
  } else if (key == "train.beta1") {
    cfg.train.beta1 = parse_real(key, value);
  } else if (key == "train.beta2") {
    cfg.train.beta2 = parse_real(key, value);
  } else if (key == "train.adam_eps") {
    cfg.train.adam_eps = parse_real(key, value);
  } else if (key == "train.mask_ratio") {
    cfg.train.mask_ratio = parse_real(key, value);
  } else if (key == "train.aug_noise_std") {
    cfg.train.aug_noise_std = parse_real(key, value);
  } else if (key == "train.aug_jitter_max") {
    cfg.train.aug_jitter_max = static_cast<int>(parse_int(key, value));
  } else if (key == "train.ratio") {
    cfg.train_ratio = parse_real(key, value);
  } else if (key == "train.mask_cap") {
    cfg.mask_cap = parse_real(key, value);
  } else if (key == "run.seed") {
    cfg.seed = static_cast<uint64_t>(parse_int(key, value));
  } else if (key == "run.sample_rate") {
    cfg.sample_rate = static_cast<int>(parse_int(key, value));
  } else if (key == "run.threads") {
    cfg.threads = static_cast<int>(parse_int(key, value));
  } else {
    throw Error("config: unknown key '" + key + "'");
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("config: cannot open '" + path + "'");
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error("config: malformed section header at line " + std::to_string(lineno) +
                    " in '" + path + "'");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("config: expected 'key = value' at line " + std::to_string(lineno) + " in '" +
                  path + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    apply_config_key(cfg, key, value);
  }
}

void validate_config(const RunConfig& cfg) {
  if (cfg.stft.n_fft < 4 || cfg.stft.n_fft % 2 != 0) {
    throw Error("config: stft.n_fft must be even and >= 4");
  }
  if (cfg.stft.hop <= 0 || cfg.stft.n_fft % cfg.stft.hop != 0) {
    throw Error("config: stft.hop must be positive and divide stft.n_fft");
  }
  if (cfg.n_mels < 2) throw Error("config: encoder.n_mels must be >= 2");
  if (cfg.encoder_dim < 1 || cfg.encoder_dim > 2 * cfg.n_mels) {
    throw Error("config: encoder.dim must lie in [1, 2*encoder.n_mels]");
  }
  if (cfg.frame_len < 1) throw Error("config: ufp.frame_len must be >= 1");
  if (cfg.noise_level < 0.0) throw Error("config: ufp.noise_level must be >= 0");
  if (cfg.smoother_k < 1 || cfg.smoother_k % 2 == 0) {
    throw Error("config: ufp.smoother_k must be odd and >= 1");
  }
  if (cfg.train.iterations < 1) throw Error("config: train.iterations must be >= 1");
  if (cfg.train.lambda < 0.0) throw Error("config: train.lambda must be >= 0");
  if (cfg.train.learning_rate <= 0.0) throw Error("config: train.learning_rate must be > 0");
  if (cfg.train.beta1 <= 0.0 || cfg.train.beta1 >= 1.0) {
    throw Error("config: train.beta1 must lie in (0, 1)");
  }
  if (cfg.train.beta2 <= 0.0 || cfg.train.beta2 >= 1.0) {
    throw Error("config: train.beta2 must lie in (0, 1)");
  }
  if (cfg.train.adam_eps <= 0.0) throw Error("config: train.adam_eps must be > 0");
  if (cfg.train.mask_ratio < 0.0 || cfg.train.mask_ratio > 1.0) {
    throw Error("config: train.mask_ratio must lie in [0, 1]");
  }
  if (cfg.train.aug_noise_std < 0.0) throw Error("config: train.aug_noise_std must be >= 0");
  if (cfg.train.aug_jitter_max < 0) throw Error("config: train.aug_jitter_max must be >= 0");
  if (cfg.train_ratio <= 0.0 || cfg.train_ratio >= 1.0) {
    throw Error("config: train.ratio must lie in (0, 1)");
  }
  if (cfg.mask_cap < 0.0) throw Error("config: train.mask_cap must be >= 0");
  if (cfg.sample_rate <= 0) throw Error("config: run.sample_rate must be positive");
  if (cfg.threads < 0) throw Error("config: run.threads must be >= 0");
}

std::string config_echo(const RunConfig& cfg) {
  std::ostringstream out;
  out << "stft.n_fft = " << cfg.stft.n_fft << "\n";
  out << "stft.hop = " << cfg.stft.hop << "\n";
  out << "encoder.n_mels = " << cfg.n_mels << "\n";
  out << "encoder.dim = " << cfg.encoder_dim << "\n";
  out << "encoder.projection_seed = " << cfg.encoder_config().projection_seed << "\n";
  out << "ufp.frame_len = " << cfg.frame_len << "\n";
  out << "ufp.noise_level = " << cfg.noise_level << "\n";
  out << "ufp.smoother_k = " << cfg.smoother_k << "\n";
  out << "train.iterations = " << cfg.train.iterations << "\n";
  out << "train.lambda = " << cfg.train.lambda << "\n";
  out << "train.learning_rate = " << cfg.train.learning_rate << "\n";
  out << "train.beta1 = " << cfg.train.beta1 << "\n";
  out << "train.beta2 = " << cfg.train.beta2 << "\n";
  out << "train.adam_eps = " << cfg.train.adam_eps << "\n";
  out << "train.mask_ratio = " << cfg.train.mask_ratio << "\n";
  out << "train.aug_noise_std = " << cfg.train.aug_noise_std << "\n";
  out << "train.aug_jitter_max = " << cfg.train.aug_jitter_max << "\n";
  out << "train.ratio = " << cfg.train_ratio << "\n";
  out << "train.mask_cap = " << cfg.mask_cap << "\n";
  out << "run.seed = " << cfg.seed << "\n";
  out << "run.sample_rate = " << cfg.sample_rate << "\n";
  out << "run.threads = " << cfg.threads << "\n";
  return out.str();
}

}  // namespace ufp
