#pragma once

#include <string>

#include "hift/tensor.hpp"

namespace hift {

// Flat binary container for named parameters.
//   "HIFT" | version u32 | count u32
//   per parameter: name_len u16 | name bytes | rank u8 | extents u32[] | values f64[]
// All integers and doubles little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ParamRefs& params);

// Loads into an existing parameter set; names and shapes must match exactly.
void load_checkpoint(const std::string& path, const ParamRefs& params);

} // namespace hift
