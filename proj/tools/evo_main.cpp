#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "evo/bounds.hpp"
#include "evo/checkpoint.hpp"
#include "evo/config.hpp"
#include "evo/error.hpp"
#include "evo/evt.hpp"
#include "evo/report.hpp"
#include "evo/train.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<double> read_numbers(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw evo::InvalidInput("cannot open " + path.string());
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::size_t used = 0;
    const double v = std::stod(line.substr(first), &used);
    out.push_back(v);
  }
  return out;
}

void write_gpd(const evo::evt::GpdParams& g, const fs::path& path) {
  std::ofstream out(path);
  out << "xi=" << evo::format_double(g.xi) << "\nsigma=" << evo::format_double(g.sigma) << "\nn_peaks=" << g.n_peaks
      << "\nn_total=" << g.n_total << "\nthreshold=" << evo::format_double(g.threshold) << '\n';
}

evo::evt::GpdParams read_gpd(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw evo::InvalidInput("cannot open " + path.string());
  evo::evt::GpdParams g;
  bool seen[5] = {};
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    const std::string value = line.substr(eq + 1);
    if (key == "xi") g.xi = std::stod(value), seen[0] = true;
    else if (key == "sigma") g.sigma = std::stod(value), seen[1] = true;
    else if (key == "n_peaks") g.n_peaks = std::stoull(value), seen[2] = true;
    else if (key == "n_total") g.n_total = std::stoull(value), seen[3] = true;
    else if (key == "threshold") g.threshold = std::stod(value), seen[4] = true;
    else throw evo::InvalidInput("unknown GPD key '" + key + "'");
  }
  for (bool s : seen)
    if (!s) throw evo::InvalidInput(path.string() + ": needs xi, sigma, n_peaks, n_total, threshold");
  return g;
}

int run_train(const std::string& config_path, const std::vector<std::string>& overrides) {
  auto config = evo::load_config(config_path);
  for (const auto& o : overrides) evo::apply_override(config, o);
  config.validate();
  std::cout << "run " << config.name << ": " << config.epochs() << " epochs, mode " << evo::mode_name(config.mode)
            << ", env " << config.env_id << '\n';
  const auto result = evo::train(config);
  for (const auto& m : result.metrics) {
    std::printf("epoch %4lld  return %10.4f  J_C %9.4f  violations %6.3f  nu %8.5f  boundary %9.4f\n", m.epoch,
                m.mean_return, m.mean_cost, m.violation_rate, m.nu, m.risk_boundary);
  }
  if (!config.output_dir.empty()) std::cout << "wrote " << (fs::path(config.output_dir) / config.name).string() << '\n';
  return 0;
}

int run_eval(const std::string& ckpt_path, int episodes, std::uint64_t seed, const std::string& config_path) {
  const auto ckpt = evo::checkpoint::load(ckpt_path);
  if (ckpt.blocks.empty()) throw evo::InvalidInput("checkpoint has no policy block");
  evo::TrainConfig config;
  fs::path cfg = config_path;
  if (cfg.empty() && fs::exists(fs::path(ckpt_path).parent_path() / "config.txt"))
    cfg = fs::path(ckpt_path).parent_path() / "config.txt";
  if (!cfg.empty()) config = evo::load_config(cfg);
  evo::EvalOptions options;
  options.gamma = config.gamma;
  options.cost_limit = config.cost_limit;
  options.env = evo::env_options(config);
  const evo::policy::PolicyParams pi{ckpt.blocks[0].arch, ckpt.blocks[0].data};
  const auto r = evo::evaluate(pi, ckpt.env_id, episodes, seed, options);
  std::printf("env %s  epoch %llu  episodes %d\n", ckpt.env_id.c_str(), static_cast<unsigned long long>(ckpt.epoch),
              episodes);
  std::printf("mean_return %.10g\nmean_cost %.10g\nviolation_rate %.10g\n", r.mean_return, r.mean_cost,
              r.violation_rate);
  return 0;
}

int run_fit_gpd(const std::string& input, double threshold, double nu, int min_peaks, const std::string& out) {
  const auto samples = read_numbers(input);
  evo::evt::FitOptions options;
  options.min_peaks = static_cast<std::size_t>(min_peaks);
  const auto gpd = evo::evt::fit_tail(samples, threshold, options);
  const auto excesses = evo::evt::extract_peaks(samples, threshold);
  const double ks_gpd = evo::evt::ks_statistic(excesses, [&](double z) {
    return z >= gpd.support_end() ? 1.0 : evo::evt::gpd_cdf(gpd, z);
  });
  const auto gauss = evo::evt::fit_gaussian(excesses);
  const double ks_gauss = evo::evt::ks_statistic(excesses, [&](double z) { return gauss.cdf(z); });
  std::printf("xi %.10g\nsigma %.10g\nn_peaks %zu\nn_total %zu\nmu_hat %.10g\n", gpd.xi, gpd.sigma, gpd.n_peaks,
              gpd.n_total, gpd.mu_hat());
  std::printf("ks_gpd %.10g\nks_gauss %.10g (mean %.10g, std %.10g)\n", ks_gpd, ks_gauss, gauss.mean, gauss.std_dev);
  std::printf("risk_boundary %.10g (nu %.10g)\n", evo::evt::risk_boundary(gpd, nu), nu);
  if (!out.empty()) write_gpd(gpd, out);
  return 0;
}

int run_bounds(const std::string& gpd_path, double gamma, double delta, double jc, double limit, double eps_c,
               double adv_term, double nu) {
  const auto gpd = read_gpd(gpd_path);
  const double tv = evo::bounds::estimate_tv_term(gamma, eps_c, delta);
  const double nu0 = evo::bounds::compute_nu0(gpd, tv, gamma);
  const double j = evo::bounds::j_terms(gpd, jc, adv_term);
  const double e = gpd.xi / (gpd.sigma * (1.0 - gamma)) * tv;
  const double tail = 1.0 - gpd.mu_hat();
  std::printf("tv_term %.10g\nnu0 %.10g\n", tv, nu0);
  if (j > 0.0) std::printf("prob_bound %.10g\n", evo::bounds::violation_prob_bound(gpd, j, e));
  else std::printf("prob_bound undefined (J = %.10g <= 0)\n", j);
  std::printf("expectation_bound %.10g\nmargin %.10g\n", tail, nu0);
  const double boundary = evo::evt::risk_boundary(gpd, nu);
  std::printf("risk_boundary %.10g (nu %.10g)\nconstraint %.10g\n", boundary, nu, jc + (boundary - gpd.threshold) - limit);
  const double p = nu / tail;
  const double f_h = evo::evt::gpd_pdf(gpd, evo::evt::gpd_quantile(gpd, p));
  const auto var = evo::bounds::variance_pair(gpd.mu_hat(), nu, static_cast<long long>(gpd.n_total), f_h);
  std::printf("omega_evo %.10g\nomega_qr %.10g\n", var.omega_evo, var.omega_qr);
  return 0;
}

int run_report(const std::string& dir, double eps) {
  std::cout << evo::format_report(evo::summarize_runs(dir, eps));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extreme-value constrained policy optimization lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto* train = app.add_subcommand("train", "Train a policy from a config file");
  train->add_option("--config", config_path, "key=value config file")->required()->check(CLI::ExistingFile);
  train->add_option("--override", overrides, "key=value applied after the file");

  std::string ckpt_path, eval_config;
  int episodes = 10;
  std::uint64_t eval_seed = 12345;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with deterministic actions");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "number of episodes")->required()->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--config", eval_config, "config for environment options (default: config.txt beside the checkpoint)");

  std::string input, gpd_out;
  double mu_threshold = 0.0, fit_nu = 0.0;
  int min_peaks = 10;
  auto* fit = app.add_subcommand("fit-gpd", "Fit a generalized Pareto tail to newline-separated samples");
  fit->add_option("--input", input, "sample file")->required()->check(CLI::ExistingFile);
  fit->add_option("--mu-threshold", mu_threshold, "threshold q_mu")->required();
  fit->add_option("--nu", fit_nu, "exploitation range")->required();
  fit->add_option("--min-peaks", min_peaks, "minimum number of peaks");
  fit->add_option("--write-gpd", gpd_out, "write the fitted parameters to this file");

  std::string gpd_path;
  double gamma = 0.99, delta = 0.01, jc = 0.0, limit = 25.0, eps_c = 1.0, adv_term = 0.0, bounds_nu = 0.01;
  auto* bnd = app.add_subcommand("bounds", "Evaluate the theoretical bounds for a fitted tail");
  bnd->add_option("--gpd", gpd_path, "GPD parameter file (see fit-gpd --write-gpd)")->required()->check(CLI::ExistingFile);
  bnd->add_option("--gamma", gamma, "discount factor")->required();
  bnd->add_option("--delta", delta, "trust-region size")->required();
  bnd->add_option("--jc", jc, "expected cumulative cost J_C")->required();
  bnd->add_option("--limit", limit, "cost limit d")->required();
  bnd->add_option("--eps-c", eps_c, "max |cost advantage|");
  bnd->add_option("--adv-term", adv_term, "surrogate cost advantage term");
  bnd->add_option("--nu", bounds_nu, "exploitation range for the variance pair");

  std::string runs_dir;
  double eps_stability = 0.01;
  auto* report = app.add_subcommand("report", "Ratio table over a directory of runs");
  report->add_option("--runs", runs_dir, "directory holding run subdirectories")->required()->check(CLI::ExistingDirectory);
  report->add_option("--eps", eps_stability, "stability constant of the ratio");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return run_train(config_path, overrides);
    if (*eval) return run_eval(ckpt_path, episodes, eval_seed, eval_config);
    if (*fit) return run_fit_gpd(input, mu_threshold, fit_nu, min_peaks, gpd_out);
    if (*bnd) return run_bounds(gpd_path, gamma, delta, jc, limit, eps_c, adv_term, bounds_nu);
    if (*report) return run_report(runs_dir, eps_stability);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
