#include "varireal/edit_config.hpp"

#include "varireal/error.hpp"

namespace varireal {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

template <typename T>
void read(const json& j, const char* key, std::optional<T>& out) {
  if (auto it = j.find(key); it != j.end()) {
    if (it->is_null())
      out.reset();
    else
      out = it->get<T>();
  }
}

void overlay(json& base, const json& layer) {
  if (!layer.is_object()) return;
  for (auto it = layer.begin(); it != layer.end(); ++it) base[it.key()] = it.value();
}

bool unit_interval(double v) { return v > 0.0 && v <= 1.0; }

}  // namespace

void validate(const EditConfig& cfg, AttributeCategory category) {
  auto fail = [](const std::string& what) { throw Error(Errc::config_error, "edit config: " + what); };
  if (!(cfg.inpaint_guidance_scale > 0)) fail("inpaint_guidance_scale must be > 0");
  if (!unit_interval(cfg.inpaint_strength)) fail("inpaint_strength must be in (0,1]");
  if (cfg.inpaint_steps < 1) fail("inpaint_steps must be >= 1");
  if (cfg.working_long_side < 8 || cfg.pad_multiple < 1) fail("bad working frame");
  if (cfg.control_guidance_scale && !(*cfg.control_guidance_scale > 0)) fail("control_guidance_scale must be > 0");
  if (cfg.ip_adapter_strength && !unit_interval(*cfg.ip_adapter_strength)) fail("ip_adapter_strength must be in (0,1]");
  if (cfg.prior_steps && *cfg.prior_steps < 1) fail("prior_steps must be >= 1");
  if (cfg.control_steps && *cfg.control_steps < 1) fail("control_steps must be >= 1");

  if (category == AttributeCategory::background) {
    if (!cfg.dilation_px || *cfg.dilation_px < 0) fail("background needs dilation_px >= 0");
    if (!cfg.prior_steps) fail("background needs prior_steps");
    return;
  }
  if (!cfg.alpha || !(*cfg.alpha >= 0.0 && *cfg.alpha <= 1.0)) fail("color/texture need alpha in [0,1]");
  if (!cfg.control_guidance_scale || !cfg.control_steps || !cfg.ip_adapter_strength)
    fail("color/texture need control_guidance_scale, control_steps and ip_adapter_strength");
  if (category == AttributeCategory::texture && !cfg.prior_steps) fail("texture needs prior_steps");
  if (cfg.stage2_conditions.empty()) fail("stage2_conditions is empty");
  for (const auto& c : cfg.stage2_conditions)
    if (c != "stage1" && c != "raw_prior" && c != "real_prior" && c != "real") fail("unknown condition '" + c + "'");
}

EditConfig edit_config_from_json(const json& j) {
  EditConfig c;
  try {
    read(j, "inpaint_guidance_scale", c.inpaint_guidance_scale);
    read(j, "control_guidance_scale", c.control_guidance_scale);
    read(j, "inpaint_strength", c.inpaint_strength);
    read(j, "ip_adapter_strength", c.ip_adapter_strength);
    read(j, "prior_steps", c.prior_steps);
    read(j, "inpaint_steps", c.inpaint_steps);
    read(j, "control_steps", c.control_steps);
    read(j, "dilation_px", c.dilation_px);
    read(j, "alpha", c.alpha);
    read(j, "stage2_conditions", c.stage2_conditions);
    read(j, "working_long_side", c.working_long_side);
    read(j, "pad_multiple", c.pad_multiple);
    read(j, "canny_low", c.canny_low);
    read(j, "canny_high", c.canny_high);
  } catch (const json::exception& e) {
    throw Error(Errc::config_error, std::string("edit config: ") + e.what());
  }
  return c;
}

json to_json(const EditConfig& c) {
  json j{{"inpaint_guidance_scale", c.inpaint_guidance_scale},
         {"inpaint_strength", c.inpaint_strength},
         {"inpaint_steps", c.inpaint_steps},
         {"stage2_conditions", c.stage2_conditions},
         {"working_long_side", c.working_long_side},
         {"pad_multiple", c.pad_multiple},
         {"canny_low", c.canny_low},
         {"canny_high", c.canny_high}};
  auto opt = [&](const char* k, const auto& v) { j[k] = v ? json(*v) : json(nullptr); };
  opt("control_guidance_scale", c.control_guidance_scale);
  opt("ip_adapter_strength", c.ip_adapter_strength);
  opt("prior_steps", c.prior_steps);
  opt("control_steps", c.control_steps);
  opt("dilation_px", c.dilation_px);
  opt("alpha", c.alpha);
  return j;
}

EditConfigTable::EditConfigTable(json layers) : layers_(std::move(layers)) {
  if (!layers_.is_object()) throw Error(Errc::config_error, "edit config must be a JSON object");
}

const json& EditConfigTable::builtin_json() {
  // Per-dataset generation settings. F/IF pairs where the two differ.
  static const json table = json::parse(R"({
    "defaults": {"working_long_side": 1024, "pad_multiple": 8, "canny_low": 100, "canny_high": 200,
                 "stage2_conditions": ["stage1", "raw_prior", "real_prior"]},
    "datasets": {
      "pets": {
        "background": {"defaults": {"inpaint_guidance_scale": 40, "inpaint_strength": 0.99, "prior_steps": 20,
                                    "inpaint_steps": 30, "dilation_px": 120}},
        "color": {"defaults": {"inpaint_guidance_scale": 12, "control_guidance_scale": 7.5, "inpaint_strength": 0.3,
                               "ip_adapter_strength": 0.7, "inpaint_steps": 20, "control_steps": 30, "alpha": 0.3}},
        "texture": {"defaults": {"inpaint_guidance_scale": 12, "control_guidance_scale": 7.5, "prior_steps": 15,
                                 "inpaint_steps": 20, "control_steps": 30},
                    "feasible": {"inpaint_strength": 0.3, "ip_adapter_strength": 0.2, "alpha": 0.5},
                    "infeasible": {"inpaint_strength": 0.3, "ip_adapter_strength": 0.5, "alpha": 0.4}}
      },
      "airc": {
        "background": {"defaults": {"inpaint_guidance_scale": 7.5, "inpaint_strength": 0.95, "prior_steps": 20,
                                    "inpaint_steps": 30, "dilation_px": 50}},
        "color": {"defaults": {"inpaint_guidance_scale": 12, "control_guidance_scale": 7.5, "inpaint_strength": 0.8,
                               "ip_adapter_strength": 0.4, "inpaint_steps": 20, "control_steps": 30, "alpha": 0.6}},
        "texture": {"defaults": {"inpaint_guidance_scale": 8, "control_guidance_scale": 7.5, "prior_steps": 15,
                                 "inpaint_steps": 20, "control_steps": 30},
                    "feasible": {"inpaint_strength": 0.65, "ip_adapter_strength": 0.65, "alpha": 0.5},
                    "infeasible": {"inpaint_strength": 0.3, "ip_adapter_strength": 0.4, "alpha": 0.65}}
      },
      "cars": {
        "background": {"defaults": {"inpaint_guidance_scale": 7.5, "inpaint_strength": 0.9, "prior_steps": 20,
                                    "inpaint_steps": 30, "dilation_px": 25}},
        "color": {"defaults": {"inpaint_guidance_scale": 30, "control_guidance_scale": 7.5, "inpaint_strength": 0.85,
                               "ip_adapter_strength": 0.4, "inpaint_steps": 20, "control_steps": 30, "alpha": 0.6}},
        "texture": {"defaults": {"inpaint_guidance_scale": 30, "control_guidance_scale": 7.5, "prior_steps": 15,
                                 "inpaint_steps": 20, "control_steps": 30},
                    "feasible": {"inpaint_strength": 0.65, "ip_adapter_strength": 0.65, "alpha": 0.65},
                    "infeasible": {"inpaint_strength": 0.3, "ip_adapter_strength": 0.4, "alpha": 0.65}}
      },
      "toy": {
        "defaults": {"working_long_side": 96, "canny_low": 40, "canny_high": 90},
        "background": {"defaults": {"inpaint_guidance_scale": 7.5, "inpaint_strength": 0.95, "prior_steps": 4,
                                    "inpaint_steps": 4, "dilation_px": 3}},
        "color": {"defaults": {"inpaint_guidance_scale": 12, "control_guidance_scale": 7.5, "inpaint_strength": 0.8,
                               "ip_adapter_strength": 0.4, "inpaint_steps": 4, "control_steps": 4, "alpha": 0.6}},
        "texture": {"defaults": {"inpaint_guidance_scale": 12, "control_guidance_scale": 7.5, "prior_steps": 4,
                                 "inpaint_steps": 4, "control_steps": 4, "inpaint_strength": 0.65,
                                 "ip_adapter_strength": 0.5, "alpha": 0.5}}
      }
    }
  })");
  return table;
}

EditConfigTable EditConfigTable::builtin() { return EditConfigTable(builtin_json()); }

EditConfig EditConfigTable::resolve(const std::string& dataset_id, AttributeCategory category,
                                    Feasibility feasibility) const {
  const auto datasets = layers_.find("datasets");
  if (datasets == layers_.end() || !datasets->contains(dataset_id))
    throw Error(Errc::config_error, "no edit config for dataset '" + dataset_id + "'");
  const json& ds = (*datasets)[dataset_id];
  const std::string cat{to_string(category)};
  if (!ds.contains(cat))
    throw Error(Errc::config_error, "no edit config for " + dataset_id + "/" + cat);
  const json& c = ds[cat];

  json merged = json::object();
  overlay(merged, layers_.value("defaults", json::object()));
  overlay(merged, ds.value("defaults", json::object()));
  overlay(merged, c.value("defaults", json::object()));
  overlay(merged, c.value(std::string(to_string(feasibility)), json::object()));
  EditConfig cfg = edit_config_from_json(merged);
  try {
    validate(cfg, category);
  } catch (const Error& e) {
    throw Error(Errc::config_error, dataset_id + "/" + cat + "/" + std::string(to_string(feasibility)) + ": " + e.what());
  }
  return cfg;
}

void EditConfigTable::check_complete(const std::string& dataset_id) const {
  for (auto cat : kAllCategories)
    for (auto f : kAllFeasibilities) resolve(dataset_id, cat, f);
}

std::vector<std::string> EditConfigTable::datasets() const {
  std::vector<std::string> out;
  if (auto it = layers_.find("datasets"); it != layers_.end())
    for (auto d = it->begin(); d != it->end(); ++d) out.push_back(d.key());
  return out;
}

}  // namespace varireal
