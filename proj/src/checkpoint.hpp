#ifndef HFID_CHECKPOINT_HPP
#define HFID_CHECKPOINT_HPP

#include <string>

#include "network.hpp"

namespace hfid {

// Checkpoint file format (all integers little-endian):
//   magic "HFCK" | version u16 = 1 | entry count u32
//   per entry: name length u16, UTF-8 name, 4 x u32 dims, raw f32 values
// Entry names are "layer<i>.<tensor>" plus one "meta.rng_seed" entry whose
// 8 payload bytes carry the seed. Roundtrips are bit-exact.
void save_checkpoint(const NetworkParams& params, const std::string& path);

NetworkParams load_checkpoint(const std::string& path);

} // namespace hfid

#endif
