#include "aslrlab/trials.hpp"

#include <thread>

#include "aslrlab/rng.hpp"

namespace aslrlab {

std::vector<TrialResult> run_trials(
    int n, uint64_t base_seed,
    const std::function<TrialResult(int trial, uint64_t seed)>& one_trial, int jobs) {
  if (n < 1) throw ConfigError("trial count must be positive");
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  jobs = std::min(jobs, n);

  std::vector<TrialResult> results(static_cast<size_t>(n));
  auto work = [&](int worker) {
    for (int i = worker; i < n; i += jobs) {
      results[static_cast<size_t>(i)] = one_trial(i, Rng::mix(base_seed, static_cast<uint64_t>(i)));
      results[static_cast<size_t>(i)].trial = static_cast<uint64_t>(i);
    }
  };
  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(jobs));
    for (int w = 0; w < jobs; w++) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }
  return results;
}

double success_rate(const std::vector<TrialResult>& results) {
  if (results.empty()) return 0.0;
  size_t ok = 0;
  for (const auto& r : results) ok += r.success ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

}  // namespace aslrlab
