#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "evo/checkpoint.hpp"
#include "evo/config.hpp"
#include "evo/envs.hpp"
#include "evo/error.hpp"
#include "evo/train.hpp"

using namespace evo;
namespace fs = std::filesystem;

namespace {

TrainConfig small_config(Mode mode, const std::string& dir = "") {
  TrainConfig c;
  c.name = "t";
  c.output_dir = dir;
  c.mode = mode;
  c.seed = 3;
  c.epoch_batch_steps = 300;
  c.total_steps = 900;
  c.hidden = 8;
  c.value_iters = 3;
  c.checkpoint_every = 2;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("training writes reproducible run files") {
  const auto base = fs::temp_directory_path() / "evo_test_train";
  fs::remove_all(base);
  const auto a = small_config(Mode::evo, (base / "a").string());
  const auto b = small_config(Mode::evo, (base / "b").string());
  const auto ra = train(a);
  const auto rb = train(b);
  const auto run_a = base / "a" / "t";
  const auto run_b = base / "b" / "t";

  const auto metrics = slurp(run_a / "metrics.csv");
  CHECK(metrics == slurp(run_b / "metrics.csv"));
  CHECK(metrics.rfind(metrics_header() + "\n", 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 4);
  CHECK(parse_config(slurp(run_a / "config.txt")).to_text() == a.to_text());
  CHECK(fs::exists(run_a / "checkpoint_0002.bin"));
  CHECK(!fs::exists(run_a / "checkpoint_0003.bin"));

  const auto final_ckpt = checkpoint::load(run_a / "checkpoint_final.bin");
  CHECK(final_ckpt.epoch == 3);
  REQUIRE(final_ckpt.blocks.size() == 3);
  CHECK(final_ckpt.blocks[0].data == ra.policy.theta);
  CHECK(final_ckpt.blocks[1].data == ra.reward_value.theta);
  CHECK(final_ckpt.blocks[2].data == ra.cost_value.theta);
  CHECK(ra.policy.theta == rb.policy.theta);
  fs::remove_all(base);
}

TEST_CASE("row count follows the step budget") {
  auto c = small_config(Mode::cpo);
  c.total_steps = 299;
  CHECK(train(c).metrics.empty());
  c.total_steps = 650;
  const auto r = train(c);
  CHECK(r.metrics.size() == 2);
  CHECK(r.constraint_values.size() == 2);
}

TEST_CASE("constraint value uses the risk boundary") {
  for (auto mode : {Mode::evo, Mode::cpo}) {
    const auto c = small_config(mode);
    const auto r = train(c);
    REQUIRE(r.metrics.size() == r.constraint_values.size());
    for (std::size_t i = 0; i < r.metrics.size(); ++i) {
      const auto& m = r.metrics[i];
      CHECK(std::abs(r.constraint_values[i] - (m.risk_boundary - c.cost_limit)) < 1e-9);
      CHECK(m.risk_boundary >= m.mean_cost - 1e-12);
      if (mode == Mode::cpo) {
        CHECK(m.nu == 0.0);
        CHECK(std::abs(r.constraint_values[i] - (m.mean_cost - c.cost_limit)) < 1e-9);
      } else {
        CHECK(m.nu >= 0.0);
        CHECK(m.nu <= 1.0 - m.mu_hat);
      }
      CHECK(m.violation_rate >= 0.0);
      CHECK(m.violation_rate <= 1.0);
    }
  }
}

TEST_CASE("continuous-action training runs") {
  auto c = small_config(Mode::evo);
  c.env_id = "point-circle";
  const auto r = train(c);
  CHECK(r.metrics.size() == 3);
  for (const auto& m : r.metrics) CHECK(std::isfinite(m.mean_return));
}

TEST_CASE("invalid configs are refused") {
  auto c = small_config(Mode::evo);
  c.gamma = 1.5;
  CHECK_THROWS_AS(train(c), InvalidInput);
}

TEST_CASE("evaluation") {
  const auto c = small_config(Mode::evo);
  const auto r = train(c);
  EvalOptions o;
  o.env = env_options(c);
  const auto e1 = evaluate(r.policy, c.env_id, 1, 9, o);
  CHECK(e1.episode_costs.size() == 1);
  CHECK(e1.violation_rate == (e1.episode_costs[0] > o.cost_limit ? 1.0 : 0.0));
  const auto e5 = evaluate(r.policy, c.env_id, 5, 9, o);
  const auto again = evaluate(r.policy, c.env_id, 5, 9, o);
  CHECK(e5.mean_return == again.mean_return);
  CHECK(e5.episode_costs == again.episode_costs);
  CHECK_THROWS_AS(evaluate(r.policy, c.env_id, 0, 9, o), InvalidInput);
}
