#include "aslrlab/native_prober.hpp"

#include <cstdlib>
#include <cstring>
#include <vector>

#if defined(__x86_64__)
#include <immintrin.h>
#include <sched.h>
#include <sys/mman.h>
#include <unistd.h>

#include <cpuid.h>
#endif

namespace aslrlab {

#if defined(__x86_64__) && defined(__AVX2__)

namespace {

bool cpu_has_avx2() {
  unsigned a, b, c, d;
  if (!__get_cpuid_count(7, 0, &a, &b, &c, &d)) return false;
  return (b & (1u << 5)) != 0;
}

bool cpu_has_invariant_tsc() {
  unsigned a, b, c, d;
  if (!__get_cpuid(0x80000007u, &a, &b, &c, &d)) return false;
  return (d & (1u << 8)) != 0;
}

bool cpu_is_amd() {
  unsigned a = 0, b = 0, c = 0, d = 0;
  __get_cpuid(0, &a, &b, &c, &d);
  char vendor[13] = {};
  std::memcpy(vendor, &b, 4);
  std::memcpy(vendor + 4, &d, 4);
  std::memcpy(vendor + 8, &c, 4);
  return std::strcmp(vendor, "AuthenticAMD") == 0;
}

bool opted_in() {
  const char* v = std::getenv("ASLRLAB_NATIVE_OPT_IN");
  return v && std::strcmp(v, "1") == 0;
}

constexpr int kPoolPages = 16;
constexpr int kEvictPages = 2048;

class NativeProber final : public Prober {
 public:
  NativeProber() {
    rw_ = map_pages(kPoolPages, PROT_READ | PROT_WRITE);
    ro_ = map_pages(kPoolPages, PROT_READ);
    rx_ = map_pages(kPoolPages, PROT_READ | PROT_EXEC);
    none_ = map_pages(kPoolPages, PROT_NONE);
    evict_ = map_pages(kEvictPages, PROT_READ | PROT_WRITE);
    // Touch the eviction buffer so it is populated before first use.
    for (int i = 0; i < kEvictPages; i++)
      static_cast<volatile char*>(evict_)[static_cast<size_t>(i) * 4096] = 1;
    // Interleaved scheduling ruins timing; pin to one CPU, best effort.
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(0, &set);
    sched_setaffinity(0, sizeof(set), &set);
    // The first milliseconds after start run at a shifting core/TSC clock
    // ratio while turbo ramps, which reads as artificially low latencies
    // and can fake a mapped run at the front of a sweep. Spin the probe
    // path until the clock settles before anyone calibrates against it.
    auto* mem = reinterpret_cast<int*>(rw_);
    const uint64_t until = __rdtsc() + 50000000ull;
    while (__rdtsc() < until) {
      __m256i v = _mm256_maskload_epi32(mem, _mm256_setzero_si256());
      asm volatile("" : : "x"(v) : "memory");
    }
  }

  ~NativeProber() override {
    for (void* p : {rw_, ro_, rx_, none_, evict_}) {
      if (p) munmap(p, static_cast<size_t>(p == evict_ ? kEvictPages : kPoolPages) * 4096);
    }
  }

  ProbeSample probe(MaskedOp op, VirtAddr addr, bool mask_zero) override {
    if (!mask_zero && !owned(addr))
      throw CapabilityError("nonzero-mask native probes are limited to prober-owned pages");
    probes_++;
    auto* mem = reinterpret_cast<int*>(addr);
    const __m256i mask =
        mask_zero ? _mm256_setzero_si256() : _mm256_set1_epi32(-1);
    ProbeSample s;
    _mm_lfence();
    const uint64_t t0 = __rdtsc();
    if (op == MaskedOp::Load) {
      __m256i v = _mm256_maskload_epi32(mem, mask);
      asm volatile("" : : "x"(v) : "memory");
    } else {
      _mm256_maskstore_epi32(mem, mask, _mm256_set1_epi32(0x5a5a5a5a));
    }
    _mm_lfence();
    const uint64_t t1 = __rdtsc();
    s.latency = static_cast<Cycles>(t1 - t0);
    return s;
  }

  void evict_tlb() override {
    for (int i = 0; i < kEvictPages; i++) {
      volatile char v = static_cast<volatile char*>(evict_)[static_cast<size_t>(i) * 4096];
      (void)v;
    }
  }

  VirtAddr calibration_page(PagePerms perms) override {
    auto take = [&](void* pool, int& next) {
      const VirtAddr a =
          reinterpret_cast<VirtAddr>(pool) + static_cast<uint64_t>(next % kPoolPages) * 4096;
      next++;
      return a;
    };
    switch (perms) {
      case PagePerms::Rw: return take(rw_, rw_next_);
      case PagePerms::RwDirty: {
        const VirtAddr a = take(rw_, rw_next_);
        *reinterpret_cast<volatile char*>(a) = 1;
        return a;
      }
      case PagePerms::Ro: return take(ro_, ro_next_);
      case PagePerms::Rx: return take(rx_, rx_next_);
      case PagePerms::None: return take(none_, none_next_);
    }
    throw ConfigError("bad calibration page class");
  }

  uint64_t probes_issued() const override { return probes_; }

  ProfileHints hints() const override {
    ProfileHints h;
    h.profile_name = "native";
    h.amd_mode = cpu_is_amd();
    return h;
  }

  std::string backend_name() const override { return "native"; }

 private:
  static void* map_pages(int n, int prot) {
    void* p = mmap(nullptr, static_cast<size_t>(n) * 4096, prot,
                   MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
    if (p == MAP_FAILED) throw BackendError("mmap failed for native prober pool");
    return p;
  }

  bool owned(VirtAddr a) const {
    for (void* p : {rw_, ro_, rx_, none_, evict_}) {
      const auto base = reinterpret_cast<VirtAddr>(p);
      const uint64_t len =
          static_cast<uint64_t>(p == evict_ ? kEvictPages : kPoolPages) * 4096;
      if (a >= base && a < base + len) return true;
    }
    return false;
  }

  void* rw_ = nullptr;
  void* ro_ = nullptr;
  void* rx_ = nullptr;
  void* none_ = nullptr;
  void* evict_ = nullptr;
  int rw_next_ = 0, ro_next_ = 0, rx_next_ = 0, none_next_ = 0;
  uint64_t probes_ = 0;
};

}  // namespace

bool native_probe_available(std::string* reason) {
  auto fail = [&](const char* why) {
    if (reason) *reason = why;
    return false;
  };
  if (!cpu_has_avx2()) return fail("CPU does not report AVX2");
  if (!cpu_has_invariant_tsc()) return fail("CPU does not report an invariant TSC");
  if (!opted_in()) return fail("set ASLRLAB_NATIVE_OPT_IN=1 to enable native probing");
  if (reason) reason->clear();
  return true;
}

std::unique_ptr<Prober> make_native_prober() {
  std::string reason;
  if (!native_probe_available(&reason)) throw CapabilityError("native backend: " + reason);
  return std::make_unique<NativeProber>();
}

#else  // non-x86-64 (or AVX2 not enabled for this TU)

bool native_probe_available(std::string* reason) {
  if (reason) *reason = "native probing requires an x86-64 build";
  return false;
}

std::unique_ptr<Prober> make_native_prober() {
  throw CapabilityError("native backend: requires an x86-64 build");
}

#endif

}  // namespace aslrlab
