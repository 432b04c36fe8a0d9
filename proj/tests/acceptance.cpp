// Acceptance gate: one PASS/FAIL line per criterion, exit 1 on any FAIL.
// Every scan is judged against the generator's ground truth; "noisy" runs
// use the profile's shipped noise parameters, "quiet" runs zero them.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "aslrlab/campaigns.hpp"
#include "aslrlab/catalogs.hpp"
#include "aslrlab/trials.hpp"

using namespace aslrlab;
using namespace aslrlab::layout;

namespace {

int g_failures = 0;

void report(int number, const char* label, bool ok, const std::string& detail) {
  std::printf("%s  %2d  %-38s %s\n", ok ? "PASS" : "FAIL", number, label, detail.c_str());
  std::fflush(stdout);
  if (!ok) g_failures++;
}

TimingProfile quiet(const char* name) {
  TimingProfile p = profile_by_name(name);
  p.noise_sigma = 0.0;
  p.outlier_prob = 0.0;
  return p;
}

struct Lab {
  AddressSpace space;
  MicroarchSim sim;
  SimProber prober;

  Lab(const ScenarioSpec& spec, const TimingProfile& profile)
      : space(build_address_space(spec)),
        sim(&space, profile, Rng::mix(spec.seed, 0xa51a5au)),
        prober(&sim) {}
};

ScenarioSpec spec_of(ScenarioKind kind, uint64_t seed) {
  ScenarioSpec s;
  s.kind = kind;
  s.seed = seed;
  return s;
}

// Runs trial_fn over seeds mix(base_seed, i) and returns the success rate.
double rate(int trials, uint64_t base_seed, const std::function<bool(uint64_t)>& trial_fn) {
  const auto results = run_trials(
      trials, base_seed,
      [&](int, uint64_t seed) {
        TrialResult t;
        t.seed = seed;
        t.success = trial_fn(seed);
        return t;
      },
      0);
  return success_rate(results);
}

char detail_buf[256];

const char* fmt(const char* f, ...) {
  va_list ap;
  va_start(ap, f);
  vsnprintf(detail_buf, sizeof detail_buf, f, ap);
  va_end(ap);
  return detail_buf;
}

// ---- criterion 1: kernel image base over the 512-slot text window ----

void criterion_base_scan() {
  const auto t0 = std::chrono::steady_clock::now();
  const double noisy = rate(10000, 101, [](uint64_t seed) {
    Lab lab(spec_of(ScenarioKind::LinuxDefault, seed), profile_by_name("alderlake"));
    const BaseScanResult r = scan_kernel_base(lab.prober);
    return r.status == ScanStatus::Ok && r.detected_base == *lab.space.truth().kernel_base;
  });
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const double exact = rate(200, 102, [](uint64_t seed) {
    Lab lab(spec_of(ScenarioKind::LinuxDefault, seed), quiet("alderlake"));
    const BaseScanResult r = scan_kernel_base(lab.prober);
    return r.status == ScanStatus::Ok && r.detected_base == *lab.space.truth().kernel_base;
  });

  report(1, "kernel base scan (10k noisy trials)",
         noisy >= 0.99 && exact == 1.0 && secs <= 60.0,
         fmt("noisy=%.2f%% quiet=%.2f%% in %.1fs", 100 * noisy, 100 * exact, secs));
}

// ---- criterion 2: module window labeling with size-twin candidates ----

bool modules_exact(const Lab& lab, const ModuleScanResult& r, std::atomic<bool>* alias_ok) {
  const auto& truth = lab.space.truth().module_placements;
  if (r.status != ScanStatus::Ok || r.modules.size() != truth.size()) return false;
  for (size_t i = 0; i < truth.size(); i++) {
    if (r.modules[i].base != truth[i].base || r.modules[i].size != truth[i].size)
      return false;
    const auto& cands = r.modules[i].candidates;
    if (std::find(cands.begin(), cands.end(), truth[i].name) == cands.end()) return false;
    if (truth[i].name == "autofs4" || truth[i].name == "x_tables") {
      const std::set<std::string> got(cands.begin(), cands.end());
      if (got != std::set<std::string>{"autofs4", "x_tables"}) *alias_ok = false;
    }
  }
  return true;
}

void criterion_module_scan() {
  const ModuleCatalog& catalog = default_module_catalog();
  const ScanConfig cfg{MeasurePolicy::median_of_k(11), 1000};

  std::atomic<bool> alias_ok{true};
  const double noisy = rate(1000, 201, [&](uint64_t seed) {
    Lab lab(spec_of(ScenarioKind::LinuxDefault, seed), profile_by_name("alderlake"));
    return modules_exact(lab, scan_modules(lab.prober, catalog, cfg), &alias_ok);
  });
  const double exact = rate(50, 202, [&](uint64_t seed) {
    Lab lab(spec_of(ScenarioKind::LinuxDefault, seed), quiet("alderlake"));
    return modules_exact(lab, scan_modules(lab.prober, catalog, cfg), &alias_ok);
  });

  report(2, "module labeling (1k noisy trials)",
         noisy >= 0.99 && exact == 1.0 && alias_ok,
         fmt("noisy=%.2f%% quiet=%.2f%% size-twins=%s", 100 * noisy, 100 * exact,
             alias_ok ? "exact" : "WRONG"));
}

// ---- criterion 3: amd walk-level attack ----

void criterion_amd_scan() {
  const double noisy = rate(10000, 301, [](uint64_t seed) {
    Lab lab(spec_of(ScenarioKind::AmdLinux, seed), profile_by_name("zen3"));
    const AmdScanResult r = scan_amd_kernel(lab.prober);
    return r.status == ScanStatus::Ok && r.detected_base == *lab.space.truth().kernel_base;
  });
  const double exact = rate(50, 302, [](uint64_t seed) {
    Lab lab(spec_of(ScenarioKind::AmdLinux, seed), quiet("zen3"));
    const AmdScanResult r = scan_amd_kernel(lab.prober);
    const VirtAddr base = *lab.space.truth().kernel_base;
    if (r.status != ScanStatus::Ok || r.detected_base != base) return false;
    if (r.pt_pages.size() != 5) return false;
    for (size_t i = 0; i < 5; i++)
      if (r.pt_pages[i] != base + kAmdPtPageOffsets[i]) return false;
    return true;
  });
  report(3, "amd kernel scan (10k noisy trials)", noisy >= 0.99 && exact == 1.0,
         fmt("noisy=%.2f%% quiet=%.2f%%", 100 * noisy, 100 * exact));
}

// ---- criterion 4: trampoline arithmetic with randomization off ----

void criterion_nokaslr_kpti() {
  bool ok = true;
  for (uint64_t seed = 1; seed <= 20 && ok; seed++) {
    ScenarioSpec spec = spec_of(ScenarioKind::LinuxNokaslr, seed);
    spec.kpti = true;
    Lab lab(spec, profile_by_name("alderlake"));
    const KptiScanResult r = scan_kpti(lab.prober, spec.trampoline_offset);
    ok = r.status == ScanStatus::Ok && r.trampoline_base == 0xffffffff81c00000ull &&
         r.detected_base == 0xffffffff81000000ull;
  }
  report(4, "kpti trampoline with kaslr disabled", ok,
         ok ? "base 0xffffffff81000000 via 0xffffffff81c00000" : "wrong addresses");
}

// ---- criterion 5: windows-style windows, with and without the stub ----

void criterion_windows() {
  const double win_noisy = rate(1000, 501, [](uint64_t seed) {
    Lab lab(spec_of(ScenarioKind::Windows, seed), profile_by_name("alderlake"));
    const WindowsScanResult r = scan_windows_kernel(lab.prober);
    return r.status == ScanStatus::Ok && r.detected_base == *lab.space.truth().kernel_base;
  });
  const double win_exact = rate(50, 502, [](uint64_t seed) {
    Lab lab(spec_of(ScenarioKind::Windows, seed), quiet("alderlake"));
    const WindowsScanResult r = scan_windows_kernel(lab.prober);
    return r.status == ScanStatus::Ok && r.detected_base == *lab.space.truth().kernel_base;
  });
  const double kvas_noisy = rate(1000, 503, [](uint64_t seed) {
    ScenarioSpec spec = spec_of(ScenarioKind::WindowsKvas, seed);
    Lab lab(spec, profile_by_name("alderlake"));
    const KvasScanResult r = scan_kvas(lab.prober, spec.kvas_offset);
    return r.status == ScanStatus::Ok && r.detected_base == *lab.space.truth().kernel_base;
  });
  const double kvas_exact = rate(50, 504, [](uint64_t seed) {
    ScenarioSpec spec = spec_of(ScenarioKind::WindowsKvas, seed);
    Lab lab(spec, quiet("alderlake"));
    const KvasScanResult r = scan_kvas(lab.prober, spec.kvas_offset);
    return r.status == ScanStatus::Ok && r.transition_base == *lab.space.truth().kvas_base &&
           r.detected_base == *lab.space.truth().kernel_base;
  });
  report(5, "windows image + transition stub scans",
         win_noisy >= 0.99 && win_exact == 1.0 && kvas_noisy >= 0.99 && kvas_exact == 1.0,
         fmt("image=%.2f%%/%.2f%% stub=%.2f%%/%.2f%%", 100 * win_noisy, 100 * win_exact,
             100 * kvas_noisy, 100 * kvas_exact));
}

// ---- criterion 6: userspace mapping recovery, page for page ----

void criterion_userspace() {
  const double exact = rate(25, 601, [](uint64_t seed) {
    ScenarioSpec spec = spec_of(ScenarioKind::Userspace, seed);
    Lab lab(spec, quiet("icelake"));
    const UserspaceScanResult r = scan_userspace(lab.prober, default_library_catalog(),
                                                 spec.userspace_window_bits);
    const GroundTruth& truth = lab.space.truth();

    if (r.status != ScanStatus::Ok) return false;
    if (r.libraries.size() != truth.library_placements.size()) return false;
    for (size_t i = 0; i < r.libraries.size(); i++) {
      if (r.libraries[i].name != truth.library_placements[i].name ||
          r.libraries[i].base != truth.library_placements[i].base)
        return false;
    }
    if (!r.code_base) return false;
    const Region* app = lab.space.find_region(*r.code_base);
    if (!app || app->label != "app-text") return false;

    std::vector<VirtAddr> hidden_truth;
    for (const auto& reg : lab.space.regions())
      if (reg.label == "hidden-anon")
        for (VirtAddr a = reg.base; a < reg.end(); a += kPage4K)
          hidden_truth.push_back(a);
    std::sort(hidden_truth.begin(), hidden_truth.end());
    if (r.hidden_pages != hidden_truth) return false;

    // Full per-page classification, execute bit folded into read-only.
    for (const auto& pc : r.pages) {
      const Region* reg = lab.space.find_region(pc.page);
      PermissionVerdict want;
      if (!reg)
        want = PermissionVerdict::Unmapped;
      else if (!reg->attrs.present)
        want = PermissionVerdict::NoAccess;
      else if (reg->attrs.writable)
        want = PermissionVerdict::ReadWrite;
      else
        want = PermissionVerdict::ReadNoWrite;
      if (pc.verdict != want) return false;
    }
    return true;
  });
  report(6, "userspace page classification (quiet)", exact == 1.0,
         fmt("exact=%.2f%%", 100 * exact));
}

// ---- criterion 7: the six primitive properties ----

void criterion_primitives() {
  std::string detail;
  bool ok = true;
  auto need = [&](bool cond, const char* what) {
    if (!cond && detail.empty()) detail = what;
    ok = ok && cond;
  };

  // P1: fault suppression under fuzzing, noise and all.
  {
    Lab lab(spec_of(ScenarioKind::LinuxDefault, 700), profile_by_name("alderlake"));
    Rng rng(7001);
    const VirtAddr kbase = *lab.space.truth().kernel_base;
    bool faulted = false;
    for (int i = 0; i < 1000000 && !faulted; i++) {
      VirtAddr addr;
      switch (rng.next_below(5)) {
        case 0: addr = kbase + rng.next_below(64) * kPage2M; break;
        case 1: addr = kLinuxTextBase + rng.next_below(kLinuxTextSlots) * kPage2M; break;
        case 2: addr = kLinuxModuleBase + rng.next_below(1u << 25); break;
        case 3: addr = kCalibArenaBase + rng.next_below(1u << 22); break;
        default: addr = rng.next_below(1ull << 47); break;
      }
      const MaskedOp op = rng.next_below(2) ? MaskedOp::Load : MaskedOp::Store;
      faulted = lab.sim.probe(op, addr, true).fault;
    }
    need(!faulted, "P1 zero-mask fault");
    // Complement: nonzero masks do fault where they must.
    need(lab.sim.probe(MaskedOp::Load, kbase, false).fault, "P1 complement");
  }

  // P2/P3/P4: walk timing separations on the quiet default profile.
  {
    Lab lab(spec_of(ScenarioKind::LinuxDefault, 701), quiet("alderlake"));
    const VirtAddr kbase = *lab.space.truth().kernel_base;

    lab.sim.probe(MaskedOp::Load, kbase, true);
    const Cycles hot = lab.sim.probe(MaskedOp::Load, kbase, true).latency;
    const Cycles miss = lab.sim.probe(MaskedOp::Load, kbase + kPage2M, true).latency;
    const Cycles unmapped = lab.sim.probe(MaskedOp::Load, kbase - kPage2M, true).latency;
    need(hot < unmapped, "P2 mapped !< unmapped");
    need(miss >= hot + lab.sim.profile().walk_per_level, "P4 hit/miss gap");

    lab.sim.flush_tlb();
    const Cycles at_pd =
        lab.sim.probe(MaskedOp::Load, kCalibArenaBase + 2 * kPage2M, true).latency;
    lab.sim.flush_tlb();
    const Cycles at_pdpt =
        lab.sim.probe(MaskedOp::Load, kCalibArenaBase + 0x40000000, true).latency;
    lab.sim.flush_tlb();
    const Cycles at_pml4 = lab.sim.probe(MaskedOp::Load, 0x600000000000, true).latency;
    lab.sim.flush_tlb();
    const Cycles at_pt =
        lab.sim.probe(MaskedOp::Load, kCalibArenaBase + 0x30000, true).latency;
    need(at_pd == 112 && at_pdpt == 117 && at_pml4 == 122, "P3 ladder values");
    need(at_pd < at_pdpt && at_pdpt < at_pml4, "P3 ordering");
    need(at_pt == at_pd + lab.sim.profile().pt_extra, "P3 pt surcharge");
  }

  // P5: permission cost ladder on attacker pages, quiet.
  {
    Lab lab(spec_of(ScenarioKind::LinuxDefault, 702), quiet("alderlake"));
    const VirtAddr rwd = lab.prober.calibration_page(PagePerms::RwDirty);
    const VirtAddr ro = lab.prober.calibration_page(PagePerms::Ro);
    const VirtAddr rx = lab.prober.calibration_page(PagePerms::Rx);
    const VirtAddr none = lab.prober.calibration_page(PagePerms::None);
    auto hot = [&](MaskedOp op, VirtAddr a) {
      lab.prober.probe(op, a, true);
      return lab.prober.probe(op, a, true).latency;
    };
    const Cycles load_ro = hot(MaskedOp::Load, ro);
    const Cycles load_rx = hot(MaskedOp::Load, rx);
    const Cycles load_rw = hot(MaskedOp::Load, rwd);
    const Cycles load_none = hot(MaskedOp::Load, none);
    need(load_ro == load_rx && load_rx == load_rw, "P5 readable loads differ");
    need(load_none > load_rw + 50, "P5 none load not clearly slower");

    const Cycles store_rwd = hot(MaskedOp::Store, rwd);
    const Cycles store_ro = hot(MaskedOp::Store, ro);
    const Cycles store_rx = hot(MaskedOp::Store, rx);
    const Cycles store_none = hot(MaskedOp::Store, none);
    need(store_rwd < store_ro, "P5 dirty store !< ro store");
    need(store_ro == store_rx, "P5 ro/rx stores differ");
    need(store_ro < store_none, "P5 ro store !< none store");
  }

  // P6: load/store assist separation on the mobile profile.
  {
    Lab lab(spec_of(ScenarioKind::LinuxDefault, 703), quiet("icelake"));
    const VirtAddr kbase = *lab.space.truth().kernel_base;
    lab.sim.probe(MaskedOp::Load, kbase, true);
    const Cycles load = lab.sim.probe(MaskedOp::Load, kbase, true).latency;
    const Cycles store = lab.sim.probe(MaskedOp::Store, kbase, true).latency;
    need(load > store, "P6 order");
    need(load - store >= 16 && load - store <= 18, "P6 delta range");
  }

  report(7, "probe primitive properties P1-P6", ok,
         ok ? std::string("fault suppression + 5 timing separations") : detail);
}

// ---- criterion 8: mitigation matrix ----

void criterion_mitigations() {
  auto cell = [](ScenarioKind kind, std::vector<Mitigation> mits, AttackKind attack,
                 uint64_t base_seed) {
    return rate(100, base_seed, [&](uint64_t seed) {
      ScenarioSpec spec = spec_of(kind, seed);
      spec.mitigations = mits;
      Lab lab(spec, profile_by_name("alderlake"));
      return evaluate_mitigation(lab.sim, attack).attack_succeeded;
    });
  };

  const double flare_pt = cell(ScenarioKind::LinuxFlare, {}, AttackKind::PageTable, 801);
  const double flare_tlb = cell(ScenarioKind::LinuxFlare, {}, AttackKind::Tlb, 802);
  const double part_tlb = cell(ScenarioKind::LinuxFlare, {Mitigation::TlbPartition},
                               AttackKind::Tlb, 803);
  const double nop_pt = cell(ScenarioKind::LinuxDefault, {Mitigation::MaskedOpNop},
                             AttackKind::PageTable, 804);

  const bool ok =
      flare_pt <= 0.55 && flare_tlb >= 0.99 && part_tlb <= 0.55 && nop_pt <= 0.55;
  report(8, "mitigation matrix (100 trials/cell)", ok,
         fmt("dummy-fill pt=%.0f%% tlb=%.0f%% +partition tlb=%.0f%% nop pt=%.0f%%",
             100 * flare_pt, 100 * flare_tlb, 100 * part_tlb, 100 * nop_pt));
}

// ---- criterion 9: behavioral monitoring ----

void criterion_monitor() {
  std::mutex mu;
  double worst_f1 = 1.0;
  const double okrate = rate(25, 901, [&](uint64_t seed) {
    Lab lab(spec_of(ScenarioKind::LinuxDefault, seed), profile_by_name("coffeelake"));
    std::vector<VirtAddr> watch;
    for (const auto& mp : lab.space.truth().module_placements) {
      for (VirtAddr a = mp.base; a < mp.base + mp.size && watch.size() < 10; a += kPage4K)
        watch.push_back(a);
      if (watch.size() >= 10) break;
    }
    const EventDriver driver(3, 2);
    const int ticks = 100;
    const BehaviorTrace trace = monitor_behavior(
        lab.prober, watch,
        [&](int tick) {
          if (driver.active(tick)) lab.sim.touch_kernel_pages(watch);
        },
        ticks);
    int tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < ticks; i++) {
      const bool want = driver.active(i);
      tp += (want && trace.active[i]);
      fp += (!want && trace.active[i]);
      fn += (want && !trace.active[i]);
    }
    const double f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    {
      std::lock_guard<std::mutex> lock(mu);
      worst_f1 = std::min(worst_f1, f1);
    }
    return f1 >= 0.95;
  });
  report(9, "victim activity monitor (25 trials)", okrate == 1.0,
         fmt("worst F1=%.4f", worst_f1));
}

// ---- criterion 10: arbitrary layouts, page for page ----

void criterion_custom_layouts() {
  const double exact = rate(1000, 1001, [](uint64_t seed) {
    Rng rng(Rng::mix(seed, 0xc057));
    ScenarioSpec spec;
    spec.kind = ScenarioKind::Custom;
    spec.seed = seed;

    // A handful of user and kernel regions on well-separated anchors so
    // validation never trips on overlap; presence, size class and perms
    // are drawn per region.
    const int user_regions = 3 + static_cast<int>(rng.next_below(5));
    for (int i = 0; i < user_regions; i++) {
      const VirtAddr anchor = 0x500000000000ull + static_cast<uint64_t>(i) * 0x10000000000ull;
      PageAttributes attrs;
      attrs.present = rng.next_below(4) != 0;  // quarter of them lie non-present
      attrs.user_accessible = true;
      attrs.writable = rng.next_below(2) != 0;
      attrs.executable = !attrs.writable && rng.next_below(2) != 0;
      attrs.dirty = attrs.writable;
      if (rng.next_below(4) == 0) {
        attrs.size_class = PageSize::k2M;
        spec.custom_regions.push_back(
            {anchor + rng.next_below(16) * kPage2M, kPage2M, attrs, "blob-2m"});
      } else {
        attrs.size_class = PageSize::k4K;
        spec.custom_regions.push_back({anchor + rng.next_below(1u << 20) * kPage4K,
                                       (1 + rng.next_below(16)) * kPage4K, attrs,
                                       "blob-4k"});
      }
    }
    const int kernel_regions = 1 + static_cast<int>(rng.next_below(3));
    for (int i = 0; i < kernel_regions; i++) {
      const VirtAddr anchor =
          0xffffc90000000000ull + static_cast<uint64_t>(i) * 0x10000000000ull;
      PageAttributes attrs;
      attrs.present = rng.next_below(4) != 0;
      attrs.user_accessible = false;
      attrs.writable = rng.next_below(2) != 0;
      attrs.size_class = PageSize::k4K;
      spec.custom_regions.push_back(
          {anchor + rng.next_below(1u << 20) * kPage4K, (1 + rng.next_below(8)) * kPage4K,
           attrs, "kblob"});
    }

    Lab lab(spec, quiet("alderlake"));
    const Threshold thr = calibrate_threshold(lab.prober);
    const MeasurePolicy policy = MeasurePolicy::second_of_two();

    // Probe every page of every region plus one page of flank either side.
    for (const auto& reg : spec.custom_regions) {
      for (VirtAddr a = reg.base - kPage4K; a <= reg.end(); a += kPage4K) {
        const Region* found = lab.space.find_region(a);
        const bool truth_mapped = found && found->attrs.present;
        const MappingVerdict v = page_table_attack(lab.prober, a, thr, policy);
        if ((v == MappingVerdict::Mapped) != truth_mapped) return false;
      }
    }
    return true;
  });
  report(10, "random layouts page-for-page (1k)", exact == 1.0,
         fmt("exact=%.2f%%", 100 * exact));
}

}  // namespace

int main(int argc, char** argv) {
  // Optional filter: run only the criteria whose numbers appear as args.
  std::set<int> only;
  for (int i = 1; i < argc; i++) only.insert(std::atoi(argv[i]));
  auto want = [&](int n) { return only.empty() || only.count(n) != 0; };

  if (want(1)) criterion_base_scan();
  if (want(2)) criterion_module_scan();
  if (want(3)) criterion_amd_scan();
  if (want(4)) criterion_nokaslr_kpti();
  if (want(5)) criterion_windows();
  if (want(6)) criterion_userspace();
  if (want(7)) criterion_primitives();
  if (want(8)) criterion_mitigations();
  if (want(9)) criterion_monitor();
  if (want(10)) criterion_custom_layouts();

  if (g_failures != 0) std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
