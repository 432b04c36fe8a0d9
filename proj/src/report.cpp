#include "aslrlab/report.hpp"

#include <fstream>

#include <json.hpp>

namespace aslrlab {

// ordered_json keeps insertion order, giving a stable byte layout.
std::string report_to_json(const CampaignReport& r) {
  nlohmann::ordered_json j;
  j["campaign"] = r.campaign;
  j["scenario"] = r.scenario;
  j["profile"] = r.profile;
  j["backend"] = r.backend;
  j["base_seed"] = r.base_seed;
  j["trials"] = r.trials;
  j["accuracy"] = r.accuracy;
  j["total_probes"] = r.total_probes;
  if (!r.details.empty()) {
    nlohmann::ordered_json d;
    for (const auto& [k, v] : r.details) d[k] = v;
    j["details"] = d;
  }
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& t : r.per_trial) {
    nlohmann::ordered_json tj;
    tj["trial"] = t.trial;
    tj["seed"] = t.seed;
    tj["success"] = t.success;
    tj["status"] = name(t.status);
    tj["detected"] = hex(t.detected);
    tj["expected"] = hex(t.expected);
    tj["probes"] = t.probes;
    arr.push_back(std::move(tj));
  }
  j["per_trial"] = std::move(arr);
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << contents;
  if (!out) throw ConfigError("write failed: " + path);
}

std::string samples_to_csv(const std::vector<LatencySample>& samples) {
  std::string out = "addr,latency,label\n";
  for (const auto& s : samples) {
    out += hex(s.addr);
    out += ',';
    out += std::to_string(s.latency);
    out += ',';
    out += s.label;
    out += '\n';
  }
  return out;
}

std::vector<HistBin> histogram(const std::vector<LatencySample>& samples, Cycles bin_width) {
  if (bin_width == 0) throw ConfigError("histogram bin width must be positive");
  std::vector<HistBin> bins;
  if (samples.empty()) return bins;
  Cycles max_lat = 0;
  for (const auto& s : samples) max_lat = std::max(max_lat, s.latency);
  bins.resize(static_cast<size_t>(max_lat / bin_width) + 1);
  for (size_t i = 0; i < bins.size(); i++) {
    bins[i].lo = static_cast<Cycles>(i) * bin_width;
    bins[i].hi = bins[i].lo + bin_width;
  }
  for (const auto& s : samples) bins[s.latency / bin_width].count++;
  return bins;
}

std::string hist_to_csv(const std::vector<HistBin>& bins) {
  std::string out = "lo,hi,count\n";
  for (const auto& b : bins) {
    out += std::to_string(b.lo);
    out += ',';
    out += std::to_string(b.hi);
    out += ',';
    out += std::to_string(b.count);
    out += '\n';
  }
  return out;
}

}  // namespace aslrlab
