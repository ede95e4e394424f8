#include <doctest.h>

#include "test_support.hpp"
#include "varireal/error.hpp"
#include "varireal/mock_vision.hpp"

#include <opencv2/imgproc.hpp>

#include <vector>

using namespace varireal;

namespace {

// Brute-force Chebyshev-ball dilation.
Mask dilate_oracle(const Mask& m, int f) {
  Mask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      for (int dy = -f; dy <= f && !out.at(x, y); ++dy)
        for (int dx = -f; dx <= f; ++dx) {
          const int sx = x + dx, sy = y + dy;
          if (sx >= 0 && sy >= 0 && sx < m.width && sy < m.height && m.at(sx, sy)) {
            out.at(x, y) = 1;
            break;
          }
        }
  return out;
}

bool subset(const BinaryRaster& a, const BinaryRaster& b) {
  for (std::size_t i = 0; i < a.bits.size(); ++i)
    if (a.bits[i] && !b.bits[i]) return false;
  return true;
}

CannyMap canny_oracle(const Image& gray, double lo, double hi) {
  cv::Mat src(gray.height, gray.width, CV_8UC1, const_cast<std::uint8_t*>(gray.data.data()));
  cv::Mat edges;
  cv::Canny(src, edges, lo, hi, 3, false);
  CannyMap out(gray.width, gray.height);
  for (int y = 0; y < gray.height; ++y)
    for (int x = 0; x < gray.width; ++x) out.at(x, y) = edges.at<std::uint8_t>(y, x) ? 1 : 0;
  return out;
}

// Smooth-ish random image: random blobs over a gradient, so edges are not
// just noise.
Image structured_gray(std::mt19937& rng, int w, int h) {
  Image img(w, h, 1);
  std::uniform_int_distribution<int> d(0, 255);
  const int base = d(rng);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y, 0) = static_cast<std::uint8_t>((base + x * 3 + y) % 256);
  for (int k = 0; k < 4; ++k) {
    const Mask blob = vrtest::blob_mask(rng, w, h);
    const auto v = static_cast<std::uint8_t>(d(rng));
    for (std::size_t i = 0; i < blob.bits.size(); ++i)
      if (blob.bits[i]) img.data[i] = v;
  }
  std::uniform_int_distribution<int> noise(-6, 6);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(std::clamp(v + noise(rng), 0, 255));
  return img;
}

struct CountingDetector : DetectorBackend {
  std::vector<std::string>* log;
  std::optional<Bbox> box;
  std::optional<Bbox> detect(const Image&, const std::string&) override {
    log->push_back("detect");
    return box;
  }
};

struct CountingSegmenter : SegmenterBackend {
  std::vector<std::string>* log;
  float value;
  SoftMask segment(const Image& image, const Bbox& b) override {
    log->push_back("segment");
    return BoxSegmenter(value).segment(image, b);
  }
};

struct CountingMatting : MattingBackend {
  std::vector<std::string>* log;
  float value;
  SoftMask matte(const Image& image) override {
    log->push_back("matte");
    return SoftMask(image.width, image.height, value);
  }
};

}  // namespace

TEST_CASE("binarize is inclusive at the threshold") {
  CHECK(binarize(SoftMask(4, 3, 0.5f)).count() == 12);
  CHECK(binarize(SoftMask(4, 3, 0.49f)).none());
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(0, 1);
  SoftMask soft(17, 9);
  for (auto& v : soft.values) v = u(rng);
  const Mask m = binarize(soft, 0.5f);
  for (std::size_t i = 0; i < soft.values.size(); ++i) CHECK(m.bits[i] == (soft.values[i] >= 0.5f ? 1 : 0));
}

TEST_CASE("dilate_mask") {
  Mask dot(7, 7);
  dot.at(3, 3) = 1;
  const Mask d1 = dilate_mask(dot, 1);
  CHECK(d1.count() == 9);
  for (int y = 2; y <= 4; ++y)
    for (int x = 2; x <= 4; ++x) CHECK(d1.at(x, y) == 1);
  CHECK(dilate_mask(dot, 0) == dot);
  CHECK_THROWS_AS(dilate_mask(dot, -1), Error);

  std::mt19937 rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    std::uniform_int_distribution<int> side(1, 40);
    const Mask m = vrtest::random_mask(rng, side(rng), side(rng), 0.05);
    const int f = trial % 9;
    const Mask fast = dilate_mask(m, f);
    CHECK(fast == dilate_oracle(m, f));
    CHECK(subset(m, fast));
    CHECK(subset(fast, dilate_mask(m, f + 1 + trial % 3)));
  }
}

TEST_CASE("invert_mask") {
  CHECK(invert_mask(Mask(5, 5, 1)).none());
  Mask checker(6, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) checker.at(x, y) = (x + y) % 2;
  const Mask inv = invert_mask(checker);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) CHECK(inv.at(x, y) == 1 - (x + y) % 2);
  std::mt19937 rng(3);
  const Mask r = vrtest::random_mask(rng, 30, 20);
  CHECK(invert_mask(invert_mask(r)) == r);
}

TEST_CASE("canny matches the reference detector") {
  std::mt19937 rng(4);
  const std::vector<std::pair<double, double>> thresholds{{100, 200}, {50, 150}, {20.7, 60.2}, {200, 90}, {0, 0}};
  for (int trial = 0; trial < 40; ++trial) {
    std::uniform_int_distribution<int> side(1, 64);
    const Image img = trial % 4 == 0 ? vrtest::random_image(rng, side(rng), side(rng), 1)
                                     : structured_gray(rng, side(rng), side(rng));
    const auto [lo, hi] = thresholds[trial % thresholds.size()];
    CHECK(canny(img, lo, hi) == canny_oracle(img, lo, hi));
  }
}

TEST_CASE("canny_from_foreground") {
  std::mt19937 rng(5);
  const Image img = vrtest::random_image(rng, 40, 30);
  CHECK(canny_from_foreground(img, Mask(40, 30)).none());

  // Full-frame mask equals plain canny of the grayscale image.
  CHECK(canny_from_foreground(img, Mask(40, 30, 1), 80, 160) == canny_oracle(to_gray(img), 80, 160));

  // Solid foreground: edges only along the mask boundary.
  Image solid(40, 30, 3, 0);
  Mask square(40, 30);
  for (int y = 8; y < 22; ++y)
    for (int x = 10; x < 30; ++x) {
      square.at(x, y) = 1;
      for (int c = 0; c < 3; ++c) solid.at(x, y, c) = 180;
    }
  const CannyMap edges = canny_from_foreground(solid, square);
  CHECK_FALSE(edges.none());
  const Mask interior = invert_mask(dilate_mask(invert_mask(square), 2));
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x)
      if (edges.at(x, y)) {
        CHECK(square.at(x, y) == 1);
        CHECK(interior.at(x, y) == 0);
      }
  CHECK_THROWS_AS(canny_from_foreground(solid, Mask(3, 3)), Error);
}

TEST_CASE("canny edges stay inside the mask for random inputs") {
  std::mt19937 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const Image img = vrtest::random_image(rng, 32, 24);
    const Mask m = trial % 2 ? vrtest::random_mask(rng, 32, 24) : vrtest::blob_mask(rng, 32, 24);
    CHECK(subset(canny_from_foreground(img, m, 60, 120), m));
  }
}

TEST_CASE("foreground_mask: detector hit uses the segmenter") {
  std::vector<std::string> log;
  const Image img(20, 10);
  CountingDetector det;
  det.log = &log;
  det.box = Bbox{2, 3, 8, 7, 0.9};
  CountingSegmenter seg;
  seg.log = &log;
  seg.value = 0.9f;
  CountingMatting mat;
  mat.log = &log;
  mat.value = 0.7f;
  const auto res = foreground_mask(img, "cat", det, seg, mat);
  CHECK(res.source == MaskSource::segmenter);
  CHECK(log == std::vector<std::string>{"detect", "segment"});
  Mask expected(20, 10);
  for (int y = 3; y < 7; ++y)
    for (int x = 2; x < 8; ++x) expected.at(x, y) = 1;
  CHECK(res.mask == expected);
}

TEST_CASE("foreground_mask: fallback order") {
  const Image img(12, 12);
  auto run = [&](std::optional<Bbox> box, float seg_value, float mat_value, std::vector<std::string>& log) {
    CountingDetector det;
    det.log = &log;
    det.box = box;
    CountingSegmenter seg;
    seg.log = &log;
    seg.value = seg_value;
    CountingMatting mat;
    mat.log = &log;
    mat.value = mat_value;
    return foreground_mask(img, "dog", det, seg, mat);
  };
  {
    std::vector<std::string> log;
    const auto res = run(std::nullopt, 0.9f, 0.7f, log);
    CHECK(res.source == MaskSource::matting);
    CHECK(res.mask.count() == 144);
    CHECK(log == std::vector<std::string>{"detect", "matte"});
  }
  {
    std::vector<std::string> log;
    const auto res = run(Bbox{0, 0, 4, 4, 0.29}, 0.9f, 0.7f, log);
    CHECK(res.source == MaskSource::matting);
    CHECK(log == std::vector<std::string>{"detect", "matte"});
  }
  {
    std::vector<std::string> log;
    const auto res = run(Bbox{0, 0, 4, 4, 0.8}, 0.2f, 0.7f, log);
    CHECK(res.source == MaskSource::matting);
    CHECK(log == std::vector<std::string>{"detect", "segment", "matte"});
  }
  {
    std::vector<std::string> log;
    try {
      run(Bbox{0, 0, 4, 4, 0.8}, 0.0f, 0.0f, log);
      FAIL("expected empty_mask");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::empty_mask);
    }
  }
}

TEST_CASE("mock vision finds a plain-backdrop object") {
  Image img(30, 20, 3, 40);
  for (int y = 5; y < 15; ++y)
    for (int x = 8; x < 20; ++x) img.at(x, y, 0) = 220;
  BorderContrastDetector det;
  ContrastSegmenter seg;
  ContrastMatting mat;
  const auto box = det.detect(img, "x");
  REQUIRE(box);
  CHECK(box->x0 == 8);
  CHECK(box->x1 == 20);
  CHECK(box->confidence >= 0.3);
  const auto res = foreground_mask(img, "x", det, seg, mat);
  CHECK(res.mask.count() == 120);
  CHECK(binarize(mat.matte(img)).count() == 120);
}
