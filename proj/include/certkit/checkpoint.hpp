#pragma once

#include <string>

#include "certkit/layers.hpp"

namespace certkit {

// "LIPN" checkpoint format, bit-exact round trip.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace certkit
