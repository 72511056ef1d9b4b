#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evo/policy.hpp"

namespace evo::checkpoint {

// One flat parameter block: architecture id, dimensions, seed and data.
struct Block {
  policy::Architecture arch;
  std::uint64_t seed = 0;
  Eigen::VectorXd data;
};

// Policy, reward value and cost value networks of one training run.
struct Checkpoint {
  std::string env_id;
  std::uint64_t epoch = 0;
  std::vector<Block> blocks;
};

// Little-endian binary layout:
//   "EVOCKPT1" | u32 env id length | env id bytes | u64 epoch | u32 block count
//   per block: u32 head | u64 obs_dim | u64 out_dim | u64 hidden | u64 seed
//              | u64 count | count x f64
void save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

}  // namespace evo::checkpoint
