#pragma once

#include <cstddef>
#include <vector>

#include "xmodal/models.hpp"

namespace xmodal {

struct IgResult {
  Vec attributions;  // per input dimension
  double delta_f = 0.0;  // f(input) - f(baseline) on the target logit
  double completeness_residual = 0.0;  // |sum(attributions) - delta_f|
};

// Integrated gradients on one logit f = logits[target], right-endpoint
// Riemann sum over n_steps points:
//   attr_d = (x_d - b_d) * (1/n) * sum_s df/dx_d at b + (s/n)(x - b).
// The residual shrinks as O(1/n); a non-finite gradient aborts with the
// offending step index.
IgResult integrated_gradients(const MlpHead& head, const Vec& input,
                              int target, const Vec& baseline,
                              int n_steps = 64);

// Zero baseline.
IgResult integrated_gradients(const MlpHead& head, const Vec& input,
                              int target, int n_steps = 64);

struct ModalityShares {
  double image = 0.0;
  double text = 0.0;  // image + text == 1
};

// Absolute-attribution mass per modality over the [image || text] layout.
// d_img 0 is the text-only teacher (image share 0 by construction).
// All-zero attributions leave the shares undefined and throw.
ModalityShares modality_shares(const Vec& attr, int d_img, int d_txt);

struct ShareStats {
  double image_share = 0.0;
  double text_share = 0.0;
  double max_rel_residual = 0.0;  // residual / |delta_f|, worst sample
  std::size_t count = 0;
};

// Mean shares over a set of assembled head inputs; the target logit is
// the head's own prediction per input.
ShareStats mean_shares(const MlpHead& head, const std::vector<Vec>& inputs,
                       int d_img, int d_txt, int n_steps = 64);

}  // namespace xmodal
