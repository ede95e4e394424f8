#pragma once

#include "varireal/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace varireal {

// Seeded permutation of items, truncated to count. The permutation ignores
// count, so a smaller subsample is always a prefix of a larger one.
template <typename T>
std::vector<T> nested_subsample(const std::vector<T>& items, std::size_t count, std::uint64_t seed);

std::vector<std::size_t> nested_order(std::size_t n, std::uint64_t seed);

struct ScalingPoint {
  int ratio = 0;
  std::size_t synthetic_count = 0;
  double accuracy = 0;
};

struct ScalingCurve {
  AttributeCategory category = AttributeCategory::background;
  Feasibility feasibility = Feasibility::feasible;
  std::vector<ScalingPoint> points;
};

// Receives the real images plus ratio * |real| synthetic ones and returns
// test accuracy. The caller keeps the iteration budget fixed.
using ScalingTrainFn = std::function<double(const TrainingSelection&)>;

// One curve per category x feasibility; categories empty means every category
// with accepted synthetic images. Throws insufficient_synthetic when a pool is
// smaller than max(ratios) * |real|.
std::vector<ScalingCurve> scaling_run(const Manifest& manifest, const std::vector<int>& ratios,
                                      const ScalingTrainFn& train_fn, std::uint64_t seed,
                                      std::vector<AttributeCategory> categories = {});

// Subsample used for one curve at one ratio; exposed for inspection.
TrainingSelection scaling_selection(const Manifest& manifest, AttributeCategory category, Feasibility feasibility,
                                    int ratio, std::uint64_t seed);

nlohmann::json to_json(const ScalingCurve& curve);
std::string scaling_svg(const std::vector<ScalingCurve>& curves, const std::string& title);
void write_scaling_svg(const std::vector<ScalingCurve>& curves, const std::string& title,
                       const std::filesystem::path& path);

template <typename T>
std::vector<T> nested_subsample(const std::vector<T>& items, std::size_t count, std::uint64_t seed) {
  std::vector<T> out;
  const auto order = nested_order(items.size(), seed);
  for (std::size_t i = 0; i < count && i < order.size(); ++i) out.push_back(items[order[i]]);
  return out;
}

}  // namespace varireal
