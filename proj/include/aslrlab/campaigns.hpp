#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aslrlab/address_space.hpp"
#include "aslrlab/primitives.hpp"

namespace aslrlab {

enum class ScanStatus { Ok, NotFound, Degraded };
const char* name(ScanStatus s);

struct ScanConfig {
  MeasurePolicy policy = MeasurePolicy::median_of_k(7);
  int calib_samples = 1000;
};

struct BaseScanResult {
  ScanStatus status = ScanStatus::NotFound;
  VirtAddr detected_base = 0;
  Cycles threshold = 0;
};

// Sweeps the 512 kernel-text slots at 2-MiB stride and reports the start
// of the first mapped run of length >= 2. A run that touches the last slot
// counts even when shorter (images placed near the top are truncated by
// the window edge). Single isolated mapped slots are ignored; that is what
// makes a bare trampoline page invisible to this scan.
BaseScanResult scan_kernel_base(Prober& p, const ScanConfig& cfg = {});

struct FoundModule {
  VirtAddr base = 0;
  uint64_t size = 0;
  std::vector<std::string> candidates;  // catalog names with matching size
};
struct ModuleScanResult {
  ScanStatus status = ScanStatus::NotFound;
  std::vector<FoundModule> modules;
};

// Sweeps the module window at 4-KiB stride, segments mapped runs (modules
// are separated by guard gaps) and labels each run with every catalog
// module of exactly that size.
ModuleScanResult scan_modules(Prober& p, const ModuleCatalog& catalog,
                              const ScanConfig& cfg = {MeasurePolicy::median_of_k(9), 1000});

struct AmdScanResult {
  ScanStatus status = ScanStatus::NotFound;
  VirtAddr detected_base = 0;
  std::vector<VirtAddr> pt_pages;  // 4-KiB-mapped pages inside the image extent
};

// AMD parts do not cache kernel translations on user access, so mapped
// kernel probes pay a full walk whose latency encodes the terminal level.
// Phase 1 finds the image extent at 2-MiB stride; phase 2 rescans it at
// 4-KiB stride and collects PT-terminal pages; the first one is the base.
// Refuses to run when the prober does not report AMD translation policy.
AmdScanResult scan_amd_kernel(Prober& p, const ScanConfig& cfg = {});

struct KptiScanResult {
  ScanStatus status = ScanStatus::NotFound;
  VirtAddr trampoline_base = 0;
  VirtAddr detected_base = 0;
};

// Finds the lowest mapped slot in the kernel-text window (the entry
// trampoline is the only page a KPTI kernel leaves visible) and subtracts
// the build-fixed trampoline offset.
KptiScanResult scan_kpti(Prober& p, uint64_t trampoline_offset, const ScanConfig& cfg = {});

struct WindowsScanResult {
  ScanStatus status = ScanStatus::NotFound;
  VirtAddr detected_base = 0;
};

// Two-pass sweep of the 262144-slot window: a cheap discard pass marks
// candidate slots, then candidate neighborhoods are re-measured and the
// first run of exactly the image length wins.
WindowsScanResult scan_windows_kernel(Prober& p, const ScanConfig& cfg = {});

struct KvasScanResult {
  ScanStatus status = ScanStatus::NotFound;
  VirtAddr transition_base = 0;
  VirtAddr detected_base = 0;
};

// Finds the three-page transition-stub island at 4-KiB granularity (the
// coarse pass uses a stride of 3 pages, which cannot step over a 3-page
// run) and subtracts the build-fixed stub offset.
KvasScanResult scan_kvas(Prober& p, uint64_t kvas_offset, const ScanConfig& cfg = {});

struct PageClass {
  VirtAddr page = 0;
  PermissionVerdict verdict = PermissionVerdict::Unmapped;
};
struct FoundLibrary {
  std::string name;
  VirtAddr base = 0;
};
struct UserspaceScanResult {
  ScanStatus status = ScanStatus::NotFound;
  std::optional<VirtAddr> code_base;
  std::vector<FoundLibrary> libraries;
  std::vector<VirtAddr> hidden_pages;  // mapped pages matching no known image
  std::vector<PageClass> pages;        // verdict for every probed page
};

// Maps the process's own randomization windows, matches mapped runs
// against the library catalog (executable-section size is the
// fingerprint), classifies permissions page by page, and reports mapped
// pages that belong to no known image.
UserspaceScanResult scan_userspace(Prober& p, const LibraryCatalog& catalog,
                                   int window_bits, const ScanConfig& cfg = {});

// TLB-hit side of the lab: locates the kernel image by which slots become
// warm when the victim runs, rather than by walk latency. victim_tick is
// invoked before each probe chunk and should trigger victim kernel
// activity; rounds is the per-slot vote count.
BaseScanResult tlb_locate_kernel(Prober& p, const std::function<void()>& victim_tick,
                                 int rounds = 21);

struct BehaviorTrace {
  std::vector<bool> active;  // one verdict per tick
  Cycles separator = 0;
};

// Watches a fixed set of pages: per tick, evicts, lets the victim run, and
// declares the tick active when the mean probe latency over the watch set
// is below the hit/miss separator.
BehaviorTrace monitor_behavior(Prober& p, std::span<const VirtAddr> watch_pages,
                               const std::function<void(int)>& victim_tick, int ticks);

// Square-wave activity schedule for behavior experiments.
class EventDriver {
 public:
  EventDriver(int period_on, int period_off) : on_(period_on), off_(period_off) {
    if (on_ <= 0 || off_ <= 0) throw ConfigError("EventDriver periods must be positive");
  }
  bool active(int tick) const { return tick % (on_ + off_) < on_; }

 private:
  int on_, off_;
};

enum class AttackKind { PageTable, Tlb };
const char* name(AttackKind k);
AttackKind attack_kind_from_name(const std::string& s);

struct MitigationEvalResult {
  bool attack_succeeded = false;
  ScanStatus status = ScanStatus::NotFound;
  VirtAddr detected_base = 0;
  VirtAddr true_base = 0;
};

// Runs one attack of the given kind against the scenario behind the sim
// and judges it against ground truth. The TLB attack gets a victim that
// executes kernel code (touching the real image) on demand.
MitigationEvalResult evaluate_mitigation(MicroarchSim& sim, AttackKind kind,
                                         const ScanConfig& cfg = {});

}  // namespace aslrlab
