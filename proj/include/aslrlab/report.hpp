#pragma once

#include <string>
#include <utility>
#include <vector>

#include "aslrlab/trials.hpp"
#include "aslrlab/types.hpp"

namespace aslrlab {

// Everything that goes into report.json. Field values must be functions of
// the run configuration alone so identical invocations produce
// byte-identical files (no timestamps, no wall-clock durations).
struct CampaignReport {
  std::string campaign;
  std::string scenario;
  std::string profile;
  std::string backend;
  uint64_t base_seed = 0;
  int trials = 0;
  double accuracy = 0.0;
  uint64_t total_probes = 0;
  std::vector<std::pair<std::string, std::string>> details;  // campaign-specific
  std::vector<TrialResult> per_trial;
};

std::string report_to_json(const CampaignReport& r);
void write_text_file(const std::string& path, const std::string& contents);

struct LatencySample {
  VirtAddr addr = 0;
  Cycles latency = 0;
  std::string label;
};
std::string samples_to_csv(const std::vector<LatencySample>& samples);

struct HistBin {
  Cycles lo = 0, hi = 0;
  uint64_t count = 0;
};
std::vector<HistBin> histogram(const std::vector<LatencySample>& samples, Cycles bin_width);
std::string hist_to_csv(const std::vector<HistBin>& bins);

}  // namespace aslrlab
