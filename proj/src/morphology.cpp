#include "varireal/error.hpp"
#include "varireal/guidance.hpp"

#include <algorithm>

namespace varireal {

Mask binarize(const SoftMask& soft, float threshold) {
  Mask out(soft.width, soft.height);
  for (std::size_t i = 0; i < soft.values.size(); ++i) out.bits[i] = soft.values[i] >= threshold ? 1 : 0;
  return out;
}

namespace {

// out[i] = 1 iff any of in[i-r .. i+r] is set, along a strided line.
void dilate_line(const std::uint8_t* in, std::uint8_t* out, int n, std::ptrdiff_t stride, int r) {
  // Running count of set pixels inside the window.
  int count = 0;
  for (int i = 0; i < std::min(r, n); ++i) count += in[i * stride] != 0;
  for (int i = 0; i < n; ++i) {
    if (i + r < n) count += in[(i + r) * stride] != 0;
    if (i - r - 1 >= 0) count -= in[(i - r - 1) * stride] != 0;
    out[i * stride] = count > 0 ? 1 : 0;
  }
}

}  // namespace

Mask dilate_mask(const Mask& mask, int factor_px) {
  if (factor_px < 0) throw Error(Errc::invalid_argument, "dilation factor must be >= 0");
  if (factor_px == 0 || mask.bits.empty()) return mask;
  Mask rows(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    const std::size_t off = static_cast<std::size_t>(y) * mask.width;
    dilate_line(&mask.bits[off], &rows.bits[off], mask.width, 1, factor_px);
  }
  Mask out(mask.width, mask.height);
  for (int x = 0; x < mask.width; ++x) dilate_line(&rows.bits[x], &out.bits[x], mask.height, mask.width, factor_px);
  return out;
}

Mask invert_mask(const Mask& mask) {
  Mask out = mask;
  for (auto& b : out.bits) b = b ? 0 : 1;
  return out;
}

}  // namespace varireal
