#pragma once

#include <memory>
#include <string>

#include "aslrlab/prober.hpp"

namespace aslrlab {

// True when real masked-op probing can run here: x86-64 build, AVX2 and an
// invariant TSC reported by CPUID, and ASLRLAB_NATIVE_OPT_IN=1 in the
// environment (measuring real translations is strictly opt-in). When
// false, *reason names the first missing requirement.
bool native_probe_available(std::string* reason = nullptr);

// Probes with real VMASKMOV instructions against the live address space.
// Only zero-mask probes may target memory the prober does not own; a
// nonzero mask outside its own pages would raise a real fault and is
// rejected with CapabilityError. Throws CapabilityError when unavailable.
std::unique_ptr<Prober> make_native_prober();

}  // namespace aslrlab
