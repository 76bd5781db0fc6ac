#pragma once

#include "tmon/imaging.hpp"

namespace tmon::detail {

/// Straight-alpha blend of fg onto dst at offset. With clip, pixels outside
/// dst are dropped; otherwise they raise BoundsError.
void blend_into(Image& dst, const Image& fg, double global_alpha, Point offset, bool clip);

}  // namespace tmon::detail
