#include "evo/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "evo/error.hpp"
#include "evo/envs.hpp"
#include "evo/evt.hpp"
#include "evo/replay.hpp"

namespace evo {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw InvalidInput("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  return value;
}

struct Field {
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field number_field(T TrainConfig::*member, std::string_view key) {
  return {[member, key](TrainConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

Field string_field(std::string TrainConfig::*member) {
  return {[member](TrainConfig& c, std::string_view v) { c.*member = std::string(v); },
          [member](const TrainConfig& c) { return c.*member; }};
}

// Ordered so that to_text output is stable.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"name", string_field(&TrainConfig::name)},
      {"output_dir", string_field(&TrainConfig::output_dir)},
      {"env_id", string_field(&TrainConfig::env_id)},
      {"seed", number_field(&TrainConfig::seed, "seed")},
      {"mode",
       {[](TrainConfig& c, std::string_view v) { c.mode = parse_mode(v); },
        [](const TrainConfig& c) { return mode_name(c.mode); }}},
      {"total_steps", number_field(&TrainConfig::total_steps, "total_steps")},
      {"epoch_batch_steps", number_field(&TrainConfig::epoch_batch_steps, "epoch_batch_steps")},
      {"gamma", number_field(&TrainConfig::gamma, "gamma")},
      {"gae_lambda", number_field(&TrainConfig::gae_lambda, "gae_lambda")},
      {"delta", number_field(&TrainConfig::delta, "delta")},
      {"cost_limit", number_field(&TrainConfig::cost_limit, "cost_limit")},
      {"value_iters", number_field(&TrainConfig::value_iters, "value_iters")},
      {"value_lr", number_field(&TrainConfig::value_lr, "value_lr")},
      {"value_minibatch", number_field(&TrainConfig::value_minibatch, "value_minibatch")},
      {"hidden", number_field(&TrainConfig::hidden, "hidden")},
      {"log_std_init", number_field(&TrainConfig::log_std_init, "log_std_init")},
      {"cg_iters", number_field(&TrainConfig::cg_iters, "cg_iters")},
      {"cg_tol", number_field(&TrainConfig::cg_tol, "cg_tol")},
      {"cg_damping", number_field(&TrainConfig::cg_damping, "cg_damping")},
      {"line_search_steps", number_field(&TrainConfig::line_search_steps, "line_search_steps")},
      {"line_search_shrink", number_field(&TrainConfig::line_search_shrink, "line_search_shrink")},
      {"nu_init", number_field(&TrainConfig::nu_init, "nu_init")},
      {"alpha_nu", number_field(&TrainConfig::alpha_nu, "alpha_nu")},
      {"min_peaks", number_field(&TrainConfig::min_peaks, "min_peaks")},
      {"tail_transform", string_field(&TrainConfig::tail_transform)},
      {"replay_capacity", number_field(&TrainConfig::replay_capacity, "replay_capacity")},
      {"p_floor", number_field(&TrainConfig::p_floor, "p_floor")},
      {"w_min", number_field(&TrainConfig::w_min, "w_min")},
      {"w_max", number_field(&TrainConfig::w_max, "w_max")},
      {"is_ratio_mode", string_field(&TrainConfig::is_ratio_mode)},
      {"k_age", number_field(&TrainConfig::k_age, "k_age")},
      {"offpolicy_fraction", number_field(&TrainConfig::offpolicy_fraction, "offpolicy_fraction")},
      {"shaping_weight", number_field(&TrainConfig::shaping_weight, "shaping_weight")},
      {"grid_size", number_field(&TrainConfig::grid_size, "grid_size")},
      {"layout_seed", number_field(&TrainConfig::layout_seed, "layout_seed")},
      {"slip_prob", number_field(&TrainConfig::slip_prob, "slip_prob")},
      {"max_episode_len", number_field(&TrainConfig::max_episode_len, "max_episode_len")},
      {"checkpoint_every", number_field(&TrainConfig::checkpoint_every, "checkpoint_every")},
  };
  return table;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidInput("config: " + message);
}

}  // namespace

Mode parse_mode(std::string_view name) {
  static const std::map<std::string, Mode, std::less<>> names = {
      {"evo", Mode::evo},
      {"cpo", Mode::cpo},
      {"cpo-ablation", Mode::cpo},
      {"constant-quantile", Mode::constant_quantile},
      {"constant-quantile-ablation", Mode::constant_quantile},
      {"no-prioritization", Mode::no_prioritization},
      {"no-prioritization-ablation", Mode::no_prioritization},
      {"no-offpolicy", Mode::no_offpolicy},
      {"no-offpolicy-ablation", Mode::no_offpolicy},
  };
  const auto it = names.find(name);
  if (it == names.end()) throw InvalidInput("unknown mode '" + std::string(name) + "'");
  return it->second;
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::evo: return "evo";
    case Mode::cpo: return "cpo-ablation";
    case Mode::constant_quantile: return "constant-quantile-ablation";
    case Mode::no_prioritization: return "no-prioritization-ablation";
    case Mode::no_offpolicy: return "no-offpolicy-ablation";
  }
  return "evo";
}

std::string format_double(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc{} ? std::string(buf, end) : std::to_string(value);
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, value);
      return;
    }
  }
  throw InvalidInput("unknown config key '" + std::string(key) + "'");
}

std::vector<std::string> TrainConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.first);
  return out;
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  for (const auto& [name, field] : fields()) out << name << '=' << field.get(*this) << '\n';
  return out.str();
}

void TrainConfig::validate() const {
  require(!name.empty() && name.find('/') == std::string::npos, "name must be a non-empty plain file name");
  {
    const auto ids = envs::environment_ids();
    require(std::find(ids.begin(), ids.end(), env_id) != ids.end(), "unknown env_id '" + env_id + "'");
  }
  require(total_steps >= 0, "total_steps must be >= 0");
  require(epoch_batch_steps > 0, "epoch_batch_steps must be positive");
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
  require(delta > 0.0, "delta must be positive");
  require(cost_limit >= 0.0, "cost_limit must be >= 0");
  require(value_iters >= 1, "value_iters must be >= 1");
  require(value_lr > 0.0, "value_lr must be positive");
  require(value_minibatch >= 0, "value_minibatch must be >= 0");
  require(hidden >= 1, "hidden must be >= 1");
  require(std::isfinite(log_std_init), "log_std_init must be finite");
  require(cg_iters >= 1, "cg_iters must be >= 1");
  require(cg_tol > 0.0, "cg_tol must be positive");
  require(cg_damping > 0.0, "cg_damping must be positive");
  require(line_search_steps >= 1, "line_search_steps must be >= 1");
  require(line_search_shrink > 0.0 && line_search_shrink < 1.0, "line_search_shrink must lie in (0, 1)");
  require(nu_init >= 0.0 && nu_init < 1.0, "nu_init must lie in [0, 1)");
  require(alpha_nu > 0.0, "alpha_nu must be positive");
  require(min_peaks >= 2, "min_peaks must be >= 2");
  evt::parse_transform(tail_transform);
  require(replay_capacity >= 1, "replay_capacity must be >= 1");
  require(p_floor >= 0.0, "p_floor must be >= 0");
  require(w_min > 0.0 && w_min <= 1.0 && w_max >= 1.0, "clip bounds must satisfy 0 < w_min <= 1 <= w_max");
  replay::parse_ratio_mode(is_ratio_mode);
  require(k_age >= 0, "k_age must be >= 0");
  require(offpolicy_fraction >= 0.0, "offpolicy_fraction must be >= 0");
  require(grid_size >= 5, "grid_size must be >= 5");
  require(slip_prob >= 0.0 && slip_prob <= 1.0, "slip_prob must lie in [0, 1]");
  require(max_episode_len >= 0, "max_episode_len must be >= 0");
  require(checkpoint_every >= 1, "checkpoint_every must be >= 1");
}

TrainConfig parse_config(std::string_view text) {
  TrainConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw InvalidInput("config line " + std::to_string(line_no) + ": expected key=value");
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void apply_override(TrainConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw InvalidInput("override must look like key=value");
  config.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

}  // namespace evo
