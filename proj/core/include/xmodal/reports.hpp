#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace xmodal {

// CSV with a header row. Cells containing commas, quotes or newlines are
// double-quote escaped.
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Two-column numeric series, "x y" per line, for external plotting.
void write_series(const std::filesystem::path& path,
                  const std::vector<std::pair<double, double>>& points);

// Fixed-width text table for terminal summaries.
std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

// Spearman rank correlation, average ranks on ties. Requires >= 2 points
// and nonzero rank variance on both sides.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

// 0.8333 -> "83.33", the percent convention of the summary tables.
std::string format_accuracy(double acc01);

std::string format_double(double v, int precision = 4);

}  // namespace xmodal
