#include "varireal/scaling.hpp"

#include "varireal/error.hpp"
#include "varireal/hashing.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace varireal {

std::vector<std::size_t> nested_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the order is stable across standard libraries.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

namespace {

FeasibilityRegime regime_of(Feasibility f) {
  return f == Feasibility::feasible ? FeasibilityRegime::feasible : FeasibilityRegime::infeasible;
}

std::uint64_t curve_seed(std::uint64_t seed, AttributeCategory c, Feasibility f) {
  return mix64(seed ^ stable_hash({"scaling", to_string(c), to_string(f)}));
}

}  // namespace

TrainingSelection scaling_selection(const Manifest& manifest, AttributeCategory category, Feasibility feasibility,
                                    int ratio, std::uint64_t seed) {
  if (ratio < 1) throw Error(Errc::invalid_argument, "scaling ratio must be >= 1");
  TrainingSelection pool = select_training_records(manifest, regime_of(feasibility), category);
  const std::size_t need = static_cast<std::size_t>(ratio) * pool.real.size();
  if (pool.syn.size() < need)
    throw Error(Errc::insufficient_synthetic,
                std::string(to_string(category)) + "/" + std::string(to_string(feasibility)) + " has " +
                    std::to_string(pool.syn.size()) + " accepted synthetic images, ratio " + std::to_string(ratio) +
                    " needs " + std::to_string(need));
  // Sort first so the subsample does not depend on manifest order.
  std::sort(pool.syn.begin(), pool.syn.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
  pool.syn = nested_subsample(pool.syn, need, curve_seed(seed, category, feasibility));
  return pool;
}

std::vector<ScalingCurve> scaling_run(const Manifest& manifest, const std::vector<int>& ratios,
                                      const ScalingTrainFn& train_fn, std::uint64_t seed,
                                      std::vector<AttributeCategory> categories) {
  if (ratios.empty()) throw Error(Errc::invalid_argument, "no scaling ratios");
  if (categories.empty()) {
    std::set<AttributeCategory> present;
    for (const auto& img : manifest.images) {
      if (img.kind != ImageKind::synthetic || img.filter_status != FilterStatus::accepted || !img.prompt_id) continue;
      if (const auto* p = manifest.find_prompt(*img.prompt_id)) present.insert(p->category);
    }
    categories.assign(present.begin(), present.end());
  }
  if (categories.empty()) throw Error(Errc::insufficient_synthetic, "no accepted synthetic images");

  const int max_ratio = *std::max_element(ratios.begin(), ratios.end());
  std::vector<ScalingCurve> curves;
  for (const auto cat : categories) {
    for (const auto f : kAllFeasibilities) {
      // Fail before any training when the largest ratio cannot be served.
      scaling_selection(manifest, cat, f, max_ratio, seed);
      ScalingCurve curve{cat, f, {}};
      for (const int r : ratios) {
        const TrainingSelection sel = scaling_selection(manifest, cat, f, r, seed);
        const double acc = train_fn(sel);
        spdlog::info("scaling {}/{} ratio {}: {} synthetic, accuracy {:.2f}", to_string(cat), to_string(f), r,
                     sel.syn.size(), acc);
        curve.points.push_back({r, sel.syn.size(), acc});
      }
      curves.push_back(std::move(curve));
    }
  }
  return curves;
}

nlohmann::json to_json(const ScalingCurve& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : curve.points)
    points.push_back({{"ratio", p.ratio}, {"synthetic_count", p.synthetic_count}, {"accuracy", p.accuracy}});
  return {{"category", to_string(curve.category)}, {"feasibility", to_string(curve.feasibility)}, {"points", points}};
}

std::string scaling_svg(const std::vector<ScalingCurve>& curves, const std::string& title) {
  constexpr double W = 640, H = 400, L = 60, R = 180, T = 40, B = 50;
  int rmin = 1, rmax = 1;
  double amin = 100, amax = 0;
  bool any = false;
  for (const auto& c : curves)
    for (const auto& p : c.points) {
      if (!any) rmin = rmax = p.ratio;
      rmin = std::min(rmin, p.ratio);
      rmax = std::max(rmax, p.ratio);
      amin = std::min(amin, p.accuracy);
      amax = std::max(amax, p.accuracy);
      any = true;
    }
  if (!any) amin = 0, amax = 100;
  if (amax - amin < 1) amin -= 0.5, amax += 0.5;
  const auto sx = [&](double r) { return rmax == rmin ? (L + W - R) / 2 : L + (r - rmin) / (rmax - rmin) * (W - L - R); };
  const auto sy = [&](double a) { return H - B - (a - amin) / (amax - amin) * (H - T - B); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream o;
  o.precision(4);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << L << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int r = rmin; r <= rmax; ++r)
    o << "<text x=\"" << sx(r) << "\" y=\"" << H - B + 18 << "\" font-size=\"11\" text-anchor=\"middle\">" << r
      << ":1</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double a = amin + (amax - amin) * i / 4.0;
    o << "<text x=\"" << L - 6 << "\" y=\"" << sy(a) + 4 << "\" font-size=\"11\" text-anchor=\"end\">" << a
      << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" font-size=\"12\" text-anchor=\"middle\">"
    << "synthetic : real</text>\n";
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    const char* color = palette[k % 6];
    const char* dash = c.feasibility == Feasibility::feasible ? "" : " stroke-dasharray=\"6,3\"";
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"" << dash << " points=\"";
    for (const auto& p : c.points) o << sx(p.ratio) << "," << sy(p.accuracy) << " ";
    o << "\"/>\n";
    for (const auto& p : c.points)
      o << "<circle cx=\"" << sx(p.ratio) << "\" cy=\"" << sy(p.accuracy) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(k);
    o << "<text x=\"" << W - R + 12 << "\" y=\"" << ly + 4 << "\" font-size=\"11\" fill=\"" << color << "\">"
      << to_string(c.category) << " " << (c.feasibility == Feasibility::feasible ? "F" : "IF") << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_scaling_svg(const std::vector<ScalingCurve>& curves, const std::string& title,
                       const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << scaling_svg(curves, title);
  if (!out) throw Error(Errc::io_error, "write failed: " + path.string());
}

}  // namespace varireal
