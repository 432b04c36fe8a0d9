#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace aslrlab {

using VirtAddr = uint64_t;
using Cycles = uint32_t;

// Error taxonomy. Everything user-correctable is a distinct type so the CLI
// can map it to an exit code without string matching.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class PageSize : uint8_t { k4K, k2M, k1G };

constexpr uint64_t bytes(PageSize s) {
  switch (s) {
    case PageSize::k4K: return 4096ull;
    case PageSize::k2M: return 2ull << 20;
    case PageSize::k1G: return 1ull << 30;
  }
  return 4096ull;
}

constexpr const char* name(PageSize s) {
  switch (s) {
    case PageSize::k4K: return "4K";
    case PageSize::k2M: return "2M";
    case PageSize::k1G: return "1G";
  }
  return "?";
}

// x86-64 canonical form: bits 63:47 must replicate bit 47.
constexpr bool is_canonical(VirtAddr a) {
  uint64_t upper = a >> 47;
  return upper == 0 || upper == 0x1ffff;
}

struct PageAttributes {
  bool present = false;     // false on a placed region models PROT_NONE: the
                            // mapping exists but the hardware P bit is clear
  bool user_accessible = false;
  bool writable = false;
  bool executable = false;
  bool dirty = false;
  PageSize size_class = PageSize::k4K;
};

struct Region {
  VirtAddr base = 0;
  uint64_t length = 0;  // bytes, multiple of bytes(attrs.size_class)
  PageAttributes attrs;
  std::string label;

  VirtAddr end() const { return base + length; }
  bool contains(VirtAddr a) const { return a >= base && a < end(); }
};

constexpr uint64_t kPage4K = 4096ull;
constexpr uint64_t kPage2M = 2ull << 20;

inline std::string hex(VirtAddr a) {
  char buf[20];
  snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(a));
  return buf;
}

}  // namespace aslrlab
