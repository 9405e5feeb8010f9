#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "stv/config.hpp"

namespace stv {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  ParamMap<float> params;
  AdamState<float> optimizer;
  std::uint32_t epoch = 0;
};

/// "STVK", u16 version, then the sections config, parameters, moments,
/// optimizer step and epoch. Little-endian; tensors are f32.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Loads and checks the parameter table against the stored config.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace stv
