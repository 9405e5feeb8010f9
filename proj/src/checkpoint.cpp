#include "stv/checkpoint.hpp"

#include <fstream>

#include "stv/binary_io.hpp"

namespace stv {

namespace {

void write_tensor(ByteWriter& w, const Tensor<float>& t) {
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (float v : t.data()) w.f32(v);
}

Tensor<float> read_tensor(ByteReader& r) {
  const std::uint32_t rank = r.u32();
  if (rank > 8) throw Error("corrupt", "tensor rank " + std::to_string(rank) + " in section '" + r.section() + "'");
  Shape shape(rank);
  std::size_t n = 1;
  for (auto& d : shape) {
    d = r.u32();
    n *= d;
    if (n > (1u << 28)) throw Error("corrupt", "tensor too large in section '" + r.section() + "'");
  }
  std::vector<float> data(n);
  for (auto& v : data) v = r.f32();
  return Tensor<float>(shape, std::move(data));
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  ByteWriter w(out);
  w.bytes("STVK");
  w.u16(kCheckpointVersion);
  w.string(format_config(ckpt.config));
  w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, t] : ckpt.params) {
    w.string(name);
    write_tensor(w, t);
  }
  w.u32(static_cast<std::uint32_t>(ckpt.optimizer.m.size()));
  for (const auto& [name, m] : ckpt.optimizer.m) {
    w.string(name);
    write_tensor(w, m);
    write_tensor(w, ckpt.optimizer.v.at(name));
  }
  w.u64(ckpt.optimizer.step);
  w.u32(ckpt.epoch);
  if (!out) throw Error("io", "failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  ByteReader r(in);
  Checkpoint ckpt;
  r.section("magic");
  if (r.bytes(4) != "STVK") throw Error("bad_magic", "not a checkpoint file (expected STVK)");
  r.section("version");
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) {
    throw Error("version_mismatch", "checkpoint version " + std::to_string(version) + ", expected " +
                                        std::to_string(kCheckpointVersion));
  }
  r.section("config");
  ckpt.config = parse_config(r.string());
  r.section("parameters");
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string(4096);
    auto t = read_tensor(r);
    if (!ckpt.params.emplace(name, std::move(t)).second) {
      throw Error("corrupt", "parameter '" + name + "' appears twice");
    }
  }
  r.section("moments");
  const std::uint32_t moments = r.u32();
  for (std::uint32_t i = 0; i < moments; ++i) {
    std::string name = r.string(4096);
    auto m = read_tensor(r);
    auto v = read_tensor(r);
    ckpt.optimizer.m.emplace(name, std::move(m));
    ckpt.optimizer.v.emplace(name, std::move(v));
  }
  r.section("optimizer step");
  ckpt.optimizer.step = r.u64();
  r.section("epoch");
  ckpt.epoch = r.u32();
  validate_params(ckpt.config.model, ckpt.params);
  for (const auto& [name, m] : ckpt.optimizer.m) {
    auto it = ckpt.params.find(name);
    if (it == ckpt.params.end() || it->second.shape() != m.shape() || ckpt.optimizer.v.at(name).shape() != m.shape()) {
      throw Error("config_mismatch", "moment estimates of '" + name + "' do not match the parameter table");
    }
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path);
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read " + path);
  return read_checkpoint(in);
}

}  // namespace stv
