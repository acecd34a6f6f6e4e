#pragma once

#include <filesystem>
#include <string>

#include "xmodal/config.hpp"

namespace xmodal::cli {

// Pre-wired experiment chains: "table2", "fig2", "table3", "fig3". Each
// runs its sweep on the given base config, writes the report bundle
// under out, prints the summary table, and throws TrendCheckError naming
// the violated ordering when a directional check fails.
void reproduce(const std::string& what, const TrainConfig& base, int reps,
               const std::filesystem::path& out);

}  // namespace xmodal::cli
