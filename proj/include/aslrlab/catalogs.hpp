#pragma once

#include <string>

#include "aslrlab/address_space.hpp"

namespace aslrlab {

// 125 modules, 19 of them with a size no other module shares. `video`,
// `mac_hid` and `pinctrl_icelake` are among the unique sizes; `autofs4` and
// `x_tables` share one size with each other and with nothing else. Sizes are
// synthetic but every one is a 4-KiB multiple in the range a real modules
// listing would show.
const ModuleCatalog& default_module_catalog();

// Three libraries with distinct section-size signatures (r-x, ---, r--, rw-).
const LibraryCatalog& default_library_catalog();

ModuleCatalog load_module_catalog(const std::string& json_path);
LibraryCatalog load_library_catalog(const std::string& json_path);

// Scenario preset file: {"kind": "...", "seed": N, "mitigations": [...],
// "trampoline_offset": "0xc00000", ...}. Integers may be JSON numbers or
// hex strings. Unknown keys are rejected.
ScenarioSpec scenario_from_json(const std::string& json_path);

}  // namespace aslrlab
