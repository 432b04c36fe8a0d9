#pragma once

#include <map>
#include <string>

#include "aslrlab/types.hpp"

namespace aslrlab {

// Cost table for one microarchitecture. Probe latency is assembled as
//   base op + microcode assists + page walk + noise
// and every campaign threshold in the lab derives from these numbers, so
// they are part of the observable contract (tests pin the sums).
struct TimingProfile {
  std::string name;

  Cycles base_load = 20;
  Cycles base_store = 20;

  // Masked ops take a microcode assist instead of faulting; the assist cost
  // dominates the signal. Loads assist on non-present and supervisor pages;
  // stores additionally assist on read-only pages.
  Cycles assist_load = 73;
  Cycles assist_store = 57;
  // First store to a clean writable page (dirty-bit set by microcode).
  Cycles dirty_assist = 80;

  // TLB-miss page walk: cost per level actually walked, plus a surcharge
  // when the walk terminates at a 4-KiB leaf, plus a surcharge when it
  // terminates on a non-present entry.
  Cycles walk_per_level = 5;
  Cycles pt_extra = 10;
  Cycles nonpresent_extra = 9;

  double noise_sigma = 3.0;
  double outlier_prob = 0.01;
  Cycles outlier_cost = 200;

  // AMD-style TLB policy: supervisor translations are not cached on user
  // access, so kernel probes always pay the full walk.
  bool amd_mode = false;

  void validate() const;
};

// Built-in profiles: alderlake (default), icelake, coffeelake, zen3.
TimingProfile profile_by_name(const std::string& name);
const std::map<std::string, TimingProfile>& builtin_profiles();

// Loads {"profiles": {name: {field: value, ...}}}; unknown fields rejected.
std::map<std::string, TimingProfile> load_profiles(const std::string& path);

}  // namespace aslrlab
