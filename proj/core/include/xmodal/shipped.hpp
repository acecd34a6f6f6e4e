#pragma once

#include <nlohmann/json.hpp>

#include "xmodal/config.hpp"

namespace xmodal {

// Built-in desk-scale configs. The leakage config makes images hard and
// ground-truth text trivially informative, the regime where a fused
// teacher coasts on text; the separable config is an easy fast smoke
// setup. configs/*.json in the repo are dumps of these (kept in sync by
// a test); the binaries never read them from disk.
nlohmann::json shipped_leakage_json();
nlohmann::json shipped_separable_json();

TrainConfig shipped_leakage_config();
TrainConfig shipped_separable_config();

}  // namespace xmodal
