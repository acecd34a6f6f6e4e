#include "xmodal/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "xmodal/common.hpp"
#include "xmodal/recordio.hpp"

namespace xmodal {
namespace {

std::string csv_cell(const std::string& raw) {
  if (raw.find_first_of(",\"\n") == std::string::npos) return raw;
  std::string out = "\"";
  for (char c : raw) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    // Tied block [i, j] shares the mean of its 1-based rank range.
    double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ",";
    out += csv_cell(header[i]);
  }
  out += "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw InputError("write_csv: row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += csv_cell(row[i]);
    }
    out += "\n";
  }
  write_text_file(path, out);
}

void write_series(const std::filesystem::path& path,
                  const std::vector<std::pair<double, double>>& points) {
  std::string out;
  char buf[80];
  for (const auto& [x, y] : points) {
    std::snprintf(buf, sizeof(buf), "%.10g %.10g\n", x, y);
    out += buf;
  }
  write_text_file(path, out);
}

std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) widths[i] = header[i].size();
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw InputError("format_table: row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i)
      widths[i] = std::max(widths[i], row[i].size());
  }
  auto emit_row = [&](const std::vector<std::string>& row) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += "  ";
      line += row[i];
      line.append(widths[i] - row[i].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    return line + "\n";
  };
  std::string out = emit_row(header);
  std::string rule;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) rule += "  ";
    rule.append(widths[i], '-');
  }
  out += rule + "\n";
  for (const auto& row : rows) out += emit_row(row);
  return out;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size())
    throw InputError("spearman: length mismatch");
  if (xs.size() < 2)
    throw InputError("spearman: needs at least 2 points");
  auto rx = average_ranks(xs);
  auto ry = average_ranks(ys);
  double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
  double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw InputError("spearman: constant sequence has no rank correlation");
  return sxy / std::sqrt(sxx * syy);
}

std::string format_accuracy(double acc01) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", acc01 * 100.0);
  return buf;
}

std::string format_double(double v, int precision) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

}  // namespace xmodal
