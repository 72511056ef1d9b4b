#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace evo {

enum class Mode { evo, cpo, constant_quantile, no_prioritization, no_offpolicy };

// Accepted names: evo, cpo-ablation, constant-quantile-ablation,
// no-prioritization-ablation, no-offpolicy-ablation. The short forms without
// "-ablation" are accepted as well.
Mode parse_mode(std::string_view name);
std::string mode_name(Mode mode);

struct TrainConfig {
  std::string name = "run";
  std::string output_dir = "runs";  // empty disables all file output
  std::string env_id = "hazard-grid";
  std::uint64_t seed = 0;
  Mode mode = Mode::evo;

  long long total_steps = 200000;
  long long epoch_batch_steps = 4000;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double delta = 0.01;
  double cost_limit = 25.0;

  int value_iters = 40;
  double value_lr = 1e-3;
  int value_minibatch = 128;
  int hidden = 64;
  double log_std_init = -0.6931471805599453;

  int cg_iters = 20;
  double cg_tol = 1e-8;
  double cg_damping = 0.1;
  int line_search_steps = 10;
  double line_search_shrink = 0.8;

  double nu_init = 0.01;
  double alpha_nu = 0.01;
  int min_peaks = 10;
  std::string tail_transform = "identity";

  int replay_capacity = 50000;
  double p_floor = 1e-3;
  double w_min = 0.1;
  double w_max = 10.0;
  std::string is_ratio_mode = "product";
  int k_age = 5;
  double offpolicy_fraction = 0.5;

  double shaping_weight = 1.0;
  int grid_size = 8;
  std::uint64_t layout_seed = 0;
  double slip_prob = 0.1;
  int max_episode_len = 0;

  int checkpoint_every = 10;

  // Throws InvalidInput for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  // Throws InvalidInput when a value is out of range.
  void validate() const;

  long long epochs() const { return epoch_batch_steps > 0 ? total_steps / epoch_batch_steps : 0; }

  // key=value lines in a fixed order, readable by parse_config.
  std::string to_text() const;
  static std::vector<std::string> keys();
};

TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

// "key=value"; applied after the file.
void apply_override(TrainConfig& config, std::string_view assignment);

// Shortest round-trip representation of a double.
std::string format_double(double value);

}  // namespace evo
