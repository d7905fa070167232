#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ist {

enum class Mode { vaefs, one_stage, two_stage };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

// Run configuration. Defaults are the desk-scale values; paper_preset()
// switches to the published hyperparameters.
struct ModelConfig {
  Mode mode = Mode::one_stage;
  int latent_dim = 32;
  int codebook_size = 64;
  double gamma = 0.25;
  double kp = 0.01;
  double ki = 0.0001;
  double beta_min = 0.0;
  double beta_max = 1.0;
  double kl_target = 3.0;
  double kl_ema_decay = 0.99;
  // Multiplier on the per-entry mean squared reconstruction error.
  double rec_weight = 100.0;
  int T_refiner = 50;
  int T_bridge = 50;
  int steps = 20000;
  int batch = 16;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  int dataset_n = 2000;
  int ramp = 5000;
  bool use_controlvae = true;
  bool use_vq = true;
  bool use_bridge = true;
  bool ema_codebook = true;
  bool sample_style = false;
  int encoder_dim = 32;
  int content_dim = 16;
  int decoder_hidden = 128;
  int decoder_layers = 2;
  int refiner_hidden = 128;
  int refiner_layers = 2;
  // Residual scale for the refiner's skip connection; 0 disables it.
  double refiner_data_scale = 0.15;
  int cond_proj_dim = 32;
  int bridge_hidden = 128;
  int bridge_layers = 2;

  static ModelConfig paper_preset();

  // Throws ConfigError naming the first invalid key.
  void validate() const;
  // key=value lines in a fixed key order; doubles written round-trip exact.
  std::string to_text() const;
  // Applies one assignment; throws ConfigError for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  static const std::vector<std::string>& keys();
};

// Parses key=value text on top of `base`. Blank lines and lines starting
// with '#' are ignored. Errors carry the 1-based line number.
ModelConfig parse_config(std::string_view text, const ModelConfig& base = {});
ModelConfig load_config(const std::filesystem::path& path, const ModelConfig& base = {});

}  // namespace ist
