#include "aslrlab/timing_profile.hpp"

#include <fstream>

#include <json.hpp>

namespace aslrlab {

void TimingProfile::validate() const {
  auto positive = [&](Cycles v, const char* field) {
    if (v == 0) throw ConfigError("profile " + name + ": " + field + " must be positive");
  };
  positive(base_load, "base_load");
  positive(base_store, "base_store");
  positive(assist_load, "assist_load");
  positive(assist_store, "assist_store");
  positive(dirty_assist, "dirty_assist");
  positive(walk_per_level, "walk_per_level");
  positive(pt_extra, "pt_extra");
  positive(nonpresent_extra, "nonpresent_extra");
  if (noise_sigma < 0.0)
    throw ConfigError("profile " + name + ": noise_sigma must be non-negative");
  if (outlier_prob < 0.0 || outlier_prob >= 1.0)
    throw ConfigError("profile " + name + ": outlier_prob must be in [0,1)");
  // The assisted store path must undercut the assisted load path; the
  // icelake store-vs-load gap and every store-based separator rely on it.
  if (base_store + assist_store >= base_load + assist_load)
    throw ConfigError("profile " + name + ": assisted store must be faster than assisted load");
}

namespace {

TimingProfile make(const char* name, Cycles bl, Cycles bs, Cycles al, Cycles as,
                   Cycles da, Cycles wpl, Cycles pte, Cycles npe, bool amd) {
  TimingProfile p;
  p.name = name;
  p.base_load = bl;
  p.base_store = bs;
  p.assist_load = al;
  p.assist_store = as;
  p.dirty_assist = da;
  p.walk_per_level = wpl;
  p.pt_extra = pte;
  p.nonpresent_extra = npe;
  p.amd_mode = amd;
  return p;
}

std::map<std::string, TimingProfile> make_builtins() {
  std::map<std::string, TimingProfile> m;
  // Kernel-page load latencies these yield: alderlake 93, icelake 92
  // (store 76), coffeelake 147 TLB-hit / 381 cold, zen3 PD-band 160.
  m["alderlake"] = make("alderlake", 20, 20, 73, 57, 80, 5, 10, 9, false);
  m["icelake"] = make("icelake", 13, 13, 79, 63, 87, 5, 10, 9, false);
  m["coffeelake"] = make("coffeelake", 20, 20, 127, 110, 180, 117, 10, 20, false);
  m["zen3"] = make("zen3", 15, 15, 85, 70, 75, 30, 25, 60, true);
  for (auto& [k, v] : m) v.validate();
  return m;
}

}  // namespace

const std::map<std::string, TimingProfile>& builtin_profiles() {
  static const std::map<std::string, TimingProfile> m = make_builtins();
  return m;
}

TimingProfile profile_by_name(const std::string& name) {
  const auto& m = builtin_profiles();
  auto it = m.find(name);
  if (it == m.end()) throw ConfigError("unknown timing profile: " + name);
  return it->second;
}

std::map<std::string, TimingProfile> load_profiles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profiles file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad profiles JSON: " + std::string(e.what()));
  }
  if (!j.is_object() || !j.contains("profiles") || !j["profiles"].is_object())
    throw ConfigError("profiles file must be {\"profiles\": {...}}");

  std::map<std::string, TimingProfile> out;
  for (const auto& [pname, body] : j["profiles"].items()) {
    TimingProfile p;
    p.name = pname;
    for (const auto& [field, value] : body.items()) {
      if (field == "base_load") p.base_load = value.get<Cycles>();
      else if (field == "base_store") p.base_store = value.get<Cycles>();
      else if (field == "assist_load") p.assist_load = value.get<Cycles>();
      else if (field == "assist_store") p.assist_store = value.get<Cycles>();
      else if (field == "dirty_assist") p.dirty_assist = value.get<Cycles>();
      else if (field == "walk_per_level") p.walk_per_level = value.get<Cycles>();
      else if (field == "pt_extra") p.pt_extra = value.get<Cycles>();
      else if (field == "nonpresent_extra") p.nonpresent_extra = value.get<Cycles>();
      else if (field == "noise_sigma") p.noise_sigma = value.get<double>();
      else if (field == "outlier_prob") p.outlier_prob = value.get<double>();
      else if (field == "outlier_cost") p.outlier_cost = value.get<Cycles>();
      else if (field == "amd_mode") p.amd_mode = value.get<bool>();
      else throw ConfigError("profile " + pname + ": unknown field " + field);
    }
    p.validate();
    out[pname] = p;
  }
  return out;
}

}  // namespace aslrlab
