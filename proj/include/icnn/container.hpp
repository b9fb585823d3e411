#pragma once

#include <string>

#include "icnn/sliced_net.hpp"

namespace icnn {

// Model container: "ICNN" magic, u16 format version, u32 header length, a
// UTF-8 JSON header (architecture, plan, trained_up_to, block directory with
// byte offsets), then raw little-endian float32 payloads per block and head.
// Round-trips are bit-exact.

inline constexpr std::uint16_t kContainerVersion = 1;

void save_network(const SlicedNetwork& net, const std::string& path);
SlicedNetwork load_network(const std::string& path);

}  // namespace icnn
