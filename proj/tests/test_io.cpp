#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "evo/checkpoint.hpp"
#include "evo/config.hpp"
#include "evo/error.hpp"
#include "evo/policy.hpp"
#include "evo/report.hpp"
#include "support.hpp"

using namespace evo;
namespace fs = std::filesystem;

namespace {

checkpoint::Checkpoint sample_checkpoint(std::uint64_t seed) {
  checkpoint::Checkpoint c;
  c.env_id = "hazard-grid";
  c.epoch = 17;
  const policy::Architecture arch{policy::Head::categorical, 4, 4, 9};
  const auto pol = policy::init_policy(arch, seed);
  const auto val = policy::init_value(4, seed + 1, 9);
  c.blocks.push_back({pol.arch, seed, pol.theta});
  c.blocks.push_back({val.arch, seed + 1, val.theta});
  return c;
}

bool bit_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("evo_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("checkpoint roundtrip is bit-exact") {
  auto c = sample_checkpoint(5);
  // Awkward values survive as well.
  c.blocks[0].data[0] = -0.0;
  c.blocks[0].data[1] = std::numeric_limits<double>::denorm_min();
  c.blocks[0].data[2] = 0.1 + 0.2;
  const auto dir = scratch("ckpt");
  const auto path = dir / "a.bin";
  checkpoint::save(c, path);
  const auto back = checkpoint::load(path);
  CHECK(back.env_id == c.env_id);
  CHECK(back.epoch == c.epoch);
  REQUIRE(back.blocks.size() == c.blocks.size());
  for (std::size_t i = 0; i < c.blocks.size(); ++i) {
    CHECK(back.blocks[i].arch == c.blocks[i].arch);
    CHECK(back.blocks[i].seed == c.blocks[i].seed);
    CHECK(bit_equal(back.blocks[i].data, c.blocks[i].data));
  }
  CHECK(std::signbit(back.blocks[0].data[0]));
  CHECK(checkpoint::serialize(back) == checkpoint::serialize(c));
  fs::remove_all(dir);
}

TEST_CASE("checkpoint roundtrip over random parameters") {
  test::Gen gen(61);
  for (int trial = 0; trial < 30; ++trial) {
    auto c = sample_checkpoint(static_cast<std::uint64_t>(trial));
    for (auto& b : c.blocks)
      for (Eigen::Index i = 0; i < b.data.size(); ++i) b.data[i] = gen.normal() * std::pow(10.0, gen.integer(-300, 300));
    const auto back = checkpoint::deserialize(checkpoint::serialize(c));
    for (std::size_t i = 0; i < c.blocks.size(); ++i) CHECK(bit_equal(back.blocks[i].data, c.blocks[i].data));
  }
}

TEST_CASE("corrupted checkpoints are rejected") {
  const auto bytes = checkpoint::serialize(sample_checkpoint(3));
  for (std::size_t cut : {std::size_t{0}, std::size_t{4}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(checkpoint::deserialize(part), InvalidInput);
  }
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(checkpoint::deserialize(extra), InvalidInput);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(checkpoint::deserialize(magic), InvalidInput);

  auto mismatched = sample_checkpoint(3);
  mismatched.blocks[0].data.conservativeResize(3);
  CHECK_THROWS_AS(checkpoint::serialize(mismatched), InvalidInput);
  CHECK_THROWS_AS(checkpoint::load(fs::temp_directory_path() / "evo_no_such_file.bin"), InvalidInput);
}

TEST_CASE("config parsing") {
  const auto c = parse_config(
      "# leading comment\n"
      "\n"
      "  gamma = 0.95   # trailing\n"
      "seed=7\n"
      "mode=cpo-ablation\n"
      "name=abc\n");
  CHECK(c.gamma == 0.95);
  CHECK(c.seed == 7);
  CHECK(c.mode == Mode::cpo);
  CHECK(c.name == "abc");
  CHECK(c.delta == 0.01);
  CHECK(c.epochs() == 50);

  CHECK_THROWS_AS(parse_config("bogus_key=1\n"), InvalidInput);
  CHECK_THROWS_AS(parse_config("gamma\n"), InvalidInput);
  CHECK_THROWS_AS(parse_config("gamma=abc\n"), InvalidInput);
  CHECK_THROWS_AS(parse_config("seed=-1\n"), InvalidInput);
  CHECK_THROWS_AS(parse_config("hidden=1.5\n"), InvalidInput);
}

TEST_CASE("overrides apply after the file") {
  auto c = parse_config("gamma=0.9\n");
  apply_override(c, "gamma=0.5");
  apply_override(c, " seed = 3 ");
  CHECK(c.gamma == 0.5);
  CHECK(c.seed == 3);
  CHECK_THROWS_AS(apply_override(c, "gamma"), InvalidInput);
  CHECK_THROWS_AS(apply_override(c, "nope=1"), InvalidInput);
}

TEST_CASE("config text roundtrip") {
  test::Gen gen(62);
  for (int trial = 0; trial < 20; ++trial) {
    TrainConfig c;
    c.gamma = gen.uniform(0.5, 0.9999);
    c.delta = gen.uniform(1e-4, 0.1);
    c.alpha_nu = gen.uniform(1e-4, 1.0);
    c.seed = static_cast<std::uint64_t>(gen.integer(0, 1 << 30)) * 4096u;
    c.mode = trial % 2 == 0 ? Mode::no_prioritization : Mode::constant_quantile;
    c.name = "run" + std::to_string(trial);
    const auto back = parse_config(c.to_text());
    CHECK(back.to_text() == c.to_text());
    CHECK(back.gamma == c.gamma);
    CHECK(back.delta == c.delta);
    CHECK(back.alpha_nu == c.alpha_nu);
    CHECK(back.seed == c.seed);
    CHECK(back.mode == c.mode);
  }
  const auto text = TrainConfig{}.to_text();
  CHECK(TrainConfig::keys().size() == static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

TEST_CASE("config validation") {
  TrainConfig ok;
  CHECK_NOTHROW(ok.validate());
  const auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), InvalidInput);
  };
  bad([](TrainConfig& c) { c.name = ""; });
  bad([](TrainConfig& c) { c.name = "a/b"; });
  bad([](TrainConfig& c) { c.env_id = "nowhere"; });
  bad([](TrainConfig& c) { c.epoch_batch_steps = 0; });
  bad([](TrainConfig& c) { c.gamma = 1.0; });
  bad([](TrainConfig& c) { c.delta = 0.0; });
  bad([](TrainConfig& c) { c.min_peaks = 1; });
  bad([](TrainConfig& c) { c.grid_size = 4; });
  bad([](TrainConfig& c) { c.w_max = 0.5; });
  bad([](TrainConfig& c) { c.tail_transform = "cube"; });
  bad([](TrainConfig& c) { c.is_ratio_mode = "other"; });
  bad([](TrainConfig& c) { c.line_search_shrink = 1.0; });
}

TEST_CASE("mode names") {
  for (auto m : {Mode::evo, Mode::cpo, Mode::constant_quantile, Mode::no_prioritization, Mode::no_offpolicy})
    CHECK(parse_mode(mode_name(m)) == m);
  CHECK(parse_mode("cpo") == Mode::cpo);
  CHECK(parse_mode("no-offpolicy-ablation") == Mode::no_offpolicy);
  CHECK_THROWS_AS(parse_mode("trpo"), InvalidInput);
}

TEST_CASE("ratio metric") {
  CHECK(ratio_metric(1.0, 0.0, 1e-3) == doctest::Approx(1000.0).epsilon(1e-12));
  CHECK(ratio_metric(0.0, 0.4, 1e-3) == 0.0);
  CHECK(ratio_metric(1.0, 0.1, 2e-3) == doctest::Approx(9.80392).epsilon(1e-6));
  CHECK_THROWS_AS(ratio_metric(1.0, 0.1, 0.0), DomainError);
  CHECK_THROWS_AS(ratio_metric(1.0, 0.1, -1.0), DomainError);
}

TEST_CASE("run summaries") {
  const auto dir = scratch("report");
  const auto write = [&](const std::string& name, const std::string& body) {
    fs::create_directories(dir / name);
    std::ofstream(dir / name / "metrics.csv") << body;
  };
  write("b", "epoch,mean_return,violation_rate\n0,2.0,0.5\n1,4.0,0.5\n");
  write("a", "epoch,mean_return,violation_rate\n0,1.0,0.0\n");
  fs::create_directories(dir / "empty_dir");

  const auto rows = summarize_runs(dir, 1.0);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].name == "a");
  CHECK(rows[0].ratio == 1.0);
  CHECK(rows[1].epochs == 2);
  CHECK(rows[1].mean_return == 3.0);
  CHECK(rows[1].ratio == 2.0);
  CHECK(rows[1].normalized_ratio == 1.0);
  CHECK(rows[0].normalized_ratio == 0.5);
  CHECK(format_report(rows).find("b") != std::string::npos);

  write("c", "epoch,mean_return\n0,1.0\n");
  CHECK_THROWS_AS(summarize_runs(dir, 1.0), InvalidInput);
  CHECK_THROWS_AS(summarize_runs(dir / "missing", 1.0), InvalidInput);
  fs::remove_all(dir);
}
