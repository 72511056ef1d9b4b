#include "evo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "evo/error.hpp"

namespace evo::checkpoint {

namespace {

constexpr char magic[8] = {'E', 'V', 'O', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void read(void* dst, std::size_t n) {
    need(n);
    if (n > 0) std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw InvalidInput("checkpoint truncated");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(magic), std::end(magic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.env_id.size()));
  out.insert(out.end(), ckpt.env_id.begin(), ckpt.env_id.end());
  put<std::uint64_t>(out, ckpt.epoch);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.blocks.size()));
  for (const auto& b : ckpt.blocks) {
    if (static_cast<std::size_t>(b.data.size()) != b.arch.parameter_count())
      throw InvalidInput("checkpoint block does not match its architecture");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(b.arch.head));
    put<std::uint64_t>(out, b.arch.obs_dim);
    put<std::uint64_t>(out, b.arch.out_dim);
    put<std::uint64_t>(out, b.arch.hidden);
    put<std::uint64_t>(out, b.seed);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(b.data.size()));
    const auto* p = reinterpret_cast<const std::uint8_t*>(b.data.data());
    out.insert(out.end(), p, p + sizeof(double) * static_cast<std::size_t>(b.data.size()));
  }
  return out;
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char head[8];
  r.read(head, sizeof head);
  if (std::memcmp(head, magic, sizeof magic) != 0) throw InvalidInput("not an evo checkpoint");
  Checkpoint ckpt;
  ckpt.env_id.resize(r.get<std::uint32_t>());
  r.read(ckpt.env_id.data(), ckpt.env_id.size());
  ckpt.epoch = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Block b;
    const auto head_id = r.get<std::uint32_t>();
    if (head_id > static_cast<std::uint32_t>(policy::Head::value)) throw InvalidInput("unknown architecture id");
    b.arch.head = static_cast<policy::Head>(head_id);
    b.arch.obs_dim = r.get<std::uint64_t>();
    b.arch.out_dim = r.get<std::uint64_t>();
    b.arch.hidden = r.get<std::uint64_t>();
    b.seed = r.get<std::uint64_t>();
    const auto n = r.get<std::uint64_t>();
    if (n != b.arch.parameter_count()) throw InvalidInput("checkpoint block size disagrees with its header");
    b.data.resize(static_cast<Eigen::Index>(n));
    r.read(b.data.data(), sizeof(double) * n);
    ckpt.blocks.push_back(std::move(b));
  }
  if (!r.done()) throw InvalidInput("trailing bytes in checkpoint");
  return ckpt;
}

void save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidInput("failed writing " + path.string());
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace evo::checkpoint
