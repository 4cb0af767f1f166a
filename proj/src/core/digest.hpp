#pragma once

#include <array>
#include <string>
#include <vector>

#include "common.hpp"

namespace mcrv {

using Digest = std::array<u8, 32>;

Digest sha256(const void* data, size_t len);
Digest sha256(const std::vector<u8>& v);

std::string digest_hex(const Digest& d);

} // namespace mcrv
