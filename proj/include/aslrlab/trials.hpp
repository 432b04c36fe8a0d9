#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "aslrlab/campaigns.hpp"
#include "aslrlab/types.hpp"

namespace aslrlab {

struct TrialResult {
  uint64_t trial = 0;
  uint64_t seed = 0;
  bool success = false;
  ScanStatus status = ScanStatus::NotFound;
  VirtAddr detected = 0;
  VirtAddr expected = 0;
  uint64_t probes = 0;
};

// Runs n independent trials; trial i gets seed mix(base_seed, i). Each
// trial must be self-contained (build its own space and sim), which makes
// the result independent of job count; results come back in trial order.
std::vector<TrialResult> run_trials(
    int n, uint64_t base_seed,
    const std::function<TrialResult(int trial, uint64_t seed)>& one_trial, int jobs = 0);

double success_rate(const std::vector<TrialResult>& results);

}  // namespace aslrlab
