#include "varireal/error.hpp"
#include "varireal/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace varireal {

namespace {

// tan(22.5 deg) in Q15.
constexpr int kShift = 15;
constexpr int kTan22 = 13573;

struct Gradients {
  std::vector<int> dx, dy, mag;
};

Gradients sobel(const Image& g) {
  const int w = g.width, h = g.height;
  Gradients out;
  out.dx.resize(g.pixel_count());
  out.dy.resize(g.pixel_count());
  out.mag.resize(g.pixel_count());
  auto px = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return static_cast<int>(g.data[static_cast<std::size_t>(y) * w + x]);
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int dx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const int dy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                     (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      out.dx[i] = dx;
      out.dy[i] = dy;
      out.mag[i] = std::abs(dx) + std::abs(dy);
    }
  }
  return out;
}

}  // namespace

CannyMap canny(const Image& gray, double low_thresh, double high_thresh) {
  if (gray.channels != 1) throw Error(Errc::invalid_argument, "canny expects a single-channel image");
  const int w = gray.width, h = gray.height;
  CannyMap out(w, h);
  if (gray.empty()) return out;
  if (low_thresh > high_thresh) std::swap(low_thresh, high_thresh);
  const int low = static_cast<int>(std::floor(low_thresh));
  const int high = static_cast<int>(std::floor(high_thresh));

  const Gradients grad = sobel(gray);
  auto mag = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0;
    return grad.mag[static_cast<std::size_t>(y) * w + x];
  };

  // 0: not an edge, 1: weak candidate, 2: edge.
  std::vector<std::uint8_t> label(gray.pixel_count(), 0);
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const int m = grad.mag[i];
      if (m <= low) continue;
      const int xs = grad.dx[i], ys = grad.dy[i];
      const long ax = std::abs(xs);
      const long ay = static_cast<long>(std::abs(ys)) << kShift;
      const long tg22x = ax * kTan22;
      bool keep;
      if (ay < tg22x) {
        keep = m > mag(x - 1, y) && m >= mag(x + 1, y);
      } else if (ay > tg22x + (ax << (kShift + 1))) {
        keep = m > mag(x, y - 1) && m >= mag(x, y + 1);
      } else {
        const int s = (xs ^ ys) < 0 ? -1 : 1;
        keep = m > mag(x - s, y - 1) && m > mag(x + s, y + 1);
      }
      if (!keep) continue;
      if (m > high) {
        label[i] = 2;
        stack.push_back(static_cast<int>(i));
      } else {
        label[i] = 1;
      }
    }
  }
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const int x = i % w, y = i / w;
    for (int ny = y - 1; ny <= y + 1; ++ny) {
      for (int nx = x - 1; nx <= x + 1; ++nx) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const int j = ny * w + nx;
        if (label[j] == 1) {
          label[j] = 2;
          stack.push_back(j);
        }
      }
    }
  }
  for (std::size_t i = 0; i < label.size(); ++i) out.bits[i] = label[i] == 2;
  return out;
}

CannyMap canny_from_foreground(const Image& image, const Mask& mask, double low_thresh, double high_thresh) {
  if (!same_size(image, mask)) throw Error(Errc::dimension_mismatch, "mask does not match image");
  CannyMap out(image.width, image.height);
  if (mask.none()) return out;
  Image gray = to_gray(image);
  for (std::size_t i = 0; i < gray.data.size(); ++i)
    if (!mask.bits[i]) gray.data[i] = 0;
  out = canny(gray, low_thresh, high_thresh);
  for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] &= mask.bits[i];
  return out;
}

}  // namespace varireal
