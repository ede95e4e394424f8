#include <doctest.h>

#include "test_support.hpp"
#include "varireal/guidance.hpp"
#include "varireal/prior_lab.hpp"

using namespace varireal;

namespace {

Image flat(int w, int h, Rgb rgb) {
  Image img(w, h, 3);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    img.data[i * 3] = rgb.r;
    img.data[i * 3 + 1] = rgb.g;
    img.data[i * 3 + 2] = rgb.b;
  }
  return img;
}

// Half-up rounding of (k*prior + (20-k)*real) / 20 in integers.
std::uint8_t blend_oracle(int prior, int real, int k) { return static_cast<std::uint8_t>((k * prior + (20 - k) * real + 10) / 20); }

bool in_dilation(const Mask& m, int x, int y, int f) {
  for (int dy = -f; dy <= f; ++dy)
    for (int dx = -f; dx <= f; ++dx) {
      const int sx = x + dx, sy = y + dy;
      if (sx >= 0 && sy >= 0 && sx < m.width && sy < m.height && m.at(sx, sy)) return true;
    }
  return false;
}

const ClassEntry kCar{4, "Audi R8", "cars"};

}  // namespace

TEST_CASE("colour bank lookups") {
  const auto bank = ColorBank::standard();
  CHECK(bank.size() >= 140);
  CHECK(bank.lookup("white") == Rgb{255, 255, 255});
  CHECK(bank.lookup("Dark Green") == bank.lookup("darkgreen"));
  CHECK(bank.lookup("neon-pink") == Rgb{255, 16, 240});
  CHECK_FALSE(bank.find("ultraviolet sparkle"));
  try {
    bank.lookup("ultraviolet sparkle");
    FAIL("expected unknown_color");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_color);
  }
  auto extra = ColorBank::parse("# custom\nracing green, 0, 66, 37\n");
  CHECK(extra.lookup("Racing Green") == Rgb{0, 66, 37});
  CHECK_THROWS_AS(ColorBank::parse("x, 1, 2\n"), Error);
  CHECK_THROWS_AS(ColorBank::parse("x, 1, 2, 300\n"), Error);
}

TEST_CASE("make_raw_prior") {
  const auto bank = ColorBank::standard();
  ProceduralDiffusion diffusion;
  auto white = vrtest::accepted_prompt("c", 4, AttributeCategory::color, Feasibility::feasible, "white");
  const auto p = make_raw_prior(white, kCar, diffusion, bank, 7, 20, 16, 9);
  CHECK(p.source == PriorSource::color_bank);
  CHECK(p.image == flat(16, 9, {255, 255, 255}));
  CHECK(diffusion.calls() == 0);

  auto neon = vrtest::accepted_prompt("n", 4, AttributeCategory::color, Feasibility::infeasible, "neon pink");
  CHECK(make_raw_prior(neon, kCar, diffusion, bank, 7, 20, 5, 5).image == flat(5, 5, bank.lookup("neon pink")));

  auto bogus = vrtest::accepted_prompt("b", 4, AttributeCategory::color, Feasibility::infeasible, "plaid");
  CHECK_THROWS_AS(make_raw_prior(bogus, kCar, diffusion, bank, 7, 20, 5, 5), Error);

  auto bg = vrtest::accepted_prompt("g", 4, AttributeCategory::background, Feasibility::feasible, "race track");
  const auto a = make_raw_prior(bg, kCar, diffusion, bank, 11, 20, 32, 24);
  const auto b = make_raw_prior(bg, kCar, diffusion, bank, 11, 20, 32, 24);
  CHECK(a.source == PriorSource::diffusion);
  CHECK(a.image == b.image);
  CHECK(a.image != make_raw_prior(bg, kCar, diffusion, bank, 12, 20, 32, 24).image);

  bg.status = PromptStatus::manual_rejected;
  CHECK_THROWS_AS(make_raw_prior(bg, kCar, diffusion, bank, 11, 20, 32, 24), Error);
}

TEST_CASE("make_raw_prior retries once with the next seed") {
  const auto bank = ColorBank::standard();
  auto tex = vrtest::accepted_prompt("t", 4, AttributeCategory::texture, Feasibility::infeasible, "bark");
  ProceduralDiffusion clean;
  ProceduralDiffusion flaky(1);
  const auto expected = make_raw_prior(tex, kCar, clean, bank, 31, 15, 12, 12);
  const auto recovered = make_raw_prior(tex, kCar, flaky, bank, 30, 15, 12, 12);
  CHECK(recovered.image == expected.image);
  CHECK(flaky.calls() == 2);
  ProceduralDiffusion broken(2);
  try {
    make_raw_prior(tex, kCar, broken, bank, 30, 15, 12, 12);
    FAIL("expected backend_failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::backend_failure);
  }
}

TEST_CASE("compose_background_real_prior") {
  std::mt19937 rng(8);
  const Image real = vrtest::random_image(rng, 24, 18);
  const Image prior = vrtest::random_image(rng, 24, 18);
  CHECK(compose_background_real_prior(real, Mask(24, 18), prior, 5) == prior);
  CHECK(compose_background_real_prior(real, Mask(24, 18, 1), prior, 0) == real);

  for (int trial = 0; trial < 50; ++trial) {
    const Mask m = trial % 2 ? vrtest::blob_mask(rng, 24, 18) : vrtest::random_mask(rng, 24, 18, 0.02);
    const int f = trial % 4;
    const Image out = compose_background_real_prior(real, m, prior, f);
    for (int y = 0; y < 18; ++y)
      for (int x = 0; x < 24; ++x)
        for (int c = 0; c < 3; ++c)
          CHECK(out.at(x, y, c) == (in_dilation(m, x, y, f) ? real.at(x, y, c) : prior.at(x, y, c)));
  }

  // Mismatched prior size is resampled first.
  const Image small = flat(6, 4, {1, 2, 3});
  const Image out = compose_background_real_prior(real, Mask(24, 18), small, 0);
  CHECK(out == flat(24, 18, {1, 2, 3}));
}

TEST_CASE("compose_foreground_real_prior") {
  std::mt19937 rng(9);
  const Image real = vrtest::random_image(rng, 20, 14);
  const Image prior = vrtest::random_image(rng, 20, 14);
  const Mask m = vrtest::blob_mask(rng, 20, 14);
  CHECK(compose_foreground_real_prior(real, m, prior, 0.0) == real);
  const Image one = compose_foreground_real_prior(real, m, prior, 1.0);
  for (std::size_t i = 0; i < m.bits.size(); ++i)
    for (int c = 0; c < 3; ++c) CHECK(one.data[i * 3 + c] == (m.bits[i] ? prior : real).data[i * 3 + c]);

  // Every alpha of the form k/20, including the 0.6 used for aircraft colour.
  for (int k = 0; k <= 20; ++k) {
    const Mask rm = vrtest::random_mask(rng, 20, 14, 0.5);
    const Image out = compose_foreground_real_prior(real, rm, prior, k / 20.0);
    for (std::size_t i = 0; i < rm.bits.size(); ++i)
      for (int c = 0; c < 3; ++c) {
        const auto p = prior.data[i * 3 + c], r = real.data[i * 3 + c];
        CHECK(out.data[i * 3 + c] == (rm.bits[i] ? blend_oracle(p, r, k) : r));
      }
  }
  CHECK(blend_channel(1, 0, 0.5) == 1);
  CHECK(blend_channel(3, 0, 0.5) == 2);
  CHECK_THROWS_AS(compose_foreground_real_prior(real, m, prior, 1.5), Error);
}

TEST_CASE("compose_foreground is affine in alpha up to rounding") {
  std::mt19937 rng(10);
  const Image real = vrtest::random_image(rng, 16, 16);
  const Image prior = vrtest::random_image(rng, 16, 16);
  const Mask m = vrtest::random_mask(rng, 16, 16, 0.6);
  for (double alpha : {0.0, 0.25, 0.5, 1.0}) {
    const Image out = compose_foreground_real_prior(real, m, prior, alpha);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      const double exact = real.data[i] + alpha * (prior.data[i] - real.data[i]);
      const bool inside = m.bits[i / 3];
      if (inside)
        CHECK(std::abs(out.data[i] - exact) <= 0.5);
      else
        CHECK(out.data[i] == real.data[i]);
    }
  }
}
