#pragma once

#include <vector>

#include "tmon/imaging.hpp"

namespace tmon {

/// Six procedurally drawn telltales (warning, engine, brake, abs, autopilot,
/// seatbelt): saturated fills with a black outline and black inner symbol,
/// binary alpha, `size` x `size` pixels.
std::vector<TelltaleAsset> builtin_assets(int size = 48);

}  // namespace tmon
