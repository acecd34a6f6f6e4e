#include "xmodal/attribution.hpp"

#include <cmath>
#include <string>

#include "xmodal/common.hpp"

namespace xmodal {

IgResult integrated_gradients(const MlpHead& head, const Vec& input,
                              int target, const Vec& baseline, int n_steps) {
  if (n_steps < 1)
    throw InputError("integrated_gradients: n_steps must be >= 1");
  if (static_cast<int>(input.size()) != head.input_dim())
    throw InputError("integrated_gradients: input dim mismatch");
  if (baseline.size() != input.size())
    throw InputError("integrated_gradients: baseline dim mismatch");
  if (target < 0 || target >= head.output_dim())
    throw InputError("integrated_gradients: target out of range");

  Vec grad_sum(input.size(), 0.0);
  Vec point(input.size());
  for (int s = 1; s <= n_steps; ++s) {
    double alpha = static_cast<double>(s) / n_steps;
    for (std::size_t d = 0; d < input.size(); ++d)
      point[d] = baseline[d] + alpha * (input[d] - baseline[d]);
    Vec g = head.input_grad(point, target);
    for (std::size_t d = 0; d < g.size(); ++d) {
      if (!std::isfinite(g[d]))
        throw Error("integrated_gradients: non-finite gradient at step " +
                    std::to_string(s));
      grad_sum[d] += g[d];
    }
  }

  IgResult out;
  out.attributions.resize(input.size());
  double total = 0.0;
  for (std::size_t d = 0; d < input.size(); ++d) {
    out.attributions[d] = (input[d] - baseline[d]) * grad_sum[d] / n_steps;
    total += out.attributions[d];
  }
  std::size_t t = static_cast<std::size_t>(target);
  out.delta_f = head.forward(input)[t] - head.forward(baseline)[t];
  out.completeness_residual = std::fabs(total - out.delta_f);
  return out;
}

IgResult integrated_gradients(const MlpHead& head, const Vec& input,
                              int target, int n_steps) {
  return integrated_gradients(head, input, target, Vec(input.size(), 0.0),
                              n_steps);
}

ModalityShares modality_shares(const Vec& attr, int d_img, int d_txt) {
  if (d_img < 0 || d_txt < 0 ||
      attr.size() != static_cast<std::size_t>(d_img + d_txt))
    throw InputError("modality_shares: layout does not match attributions");
  double img = 0.0, txt = 0.0;
  for (int d = 0; d < d_img; ++d) img += std::fabs(attr[static_cast<std::size_t>(d)]);
  for (int d = d_img; d < d_img + d_txt; ++d)
    txt += std::fabs(attr[static_cast<std::size_t>(d)]);
  double total = img + txt;
  if (total == 0.0)
    throw InputError("modality_shares: all-zero attributions, shares undefined");
  return {img / total, txt / total};
}

ShareStats mean_shares(const MlpHead& head, const std::vector<Vec>& inputs,
                       int d_img, int d_txt, int n_steps) {
  if (inputs.empty()) throw InputError("mean_shares: no inputs");
  ShareStats stats;
  for (const auto& x : inputs) {
    Vec z = head.forward(x);
    int target = 0;
    for (std::size_t c = 1; c < z.size(); ++c)
      if (z[c] > z[static_cast<std::size_t>(target)])
        target = static_cast<int>(c);
    auto ig = integrated_gradients(head, x, target, n_steps);
    auto shares = modality_shares(ig.attributions, d_img, d_txt);
    stats.image_share += shares.image;
    stats.text_share += shares.text;
    double denom = std::fabs(ig.delta_f);
    if (denom > 0.0)
      stats.max_rel_residual =
          std::max(stats.max_rel_residual, ig.completeness_residual / denom);
    ++stats.count;
  }
  stats.image_share /= static_cast<double>(stats.count);
  stats.text_share /= static_cast<double>(stats.count);
  return stats;
}

}  // namespace xmodal
