#pragma once

#include <vector>

namespace xmodal {

// Loss weights. tau softens both softmaxes of the distillation term;
// lambda_kd scales it against the student's supervised CE. lambda_hier
// and lambda_cosreg weight the two cosine regularizers of the multimodal
// teacher objective.
struct KDConfig {
  double tau = 4.0;
  double lambda_kd = 1.0;
  double lambda_hier = 0.1;
  double lambda_cosreg = 0.01;
};

// tau > 0, lambdas >= 0.
void validate(const KDConfig& cfg);

using Vec = std::vector<double>;

// (z_tm + z_tx) / 2 element-wise.
Vec average_logits(const Vec& z_tm, const Vec& z_tx);

// Index of the single 1 in a one-hot vector (entries 0 or 1, exactly one
// hot). Throws InputError otherwise.
std::size_t onehot_index(const Vec& y_onehot);

// -log softmax(z)_y.
double ce_loss(const Vec& z, const Vec& y_onehot);
// softmax(z) - y.
Vec ce_grad(const Vec& z, const Vec& y_onehot);

// -tau^2 sum_c softmax(z_bar/tau)_c * log softmax(z_s/tau)_c,
// log-sum-exp stabilized. Nonnegative for any tau > 0; minimized over
// z_s (up to a constant shift) at z_s = z_bar.
double kd_loss(const Vec& z_s, const Vec& z_bar, double tau);
// d kd / d z_s = tau * (softmax(z_s/tau) - softmax(z_bar/tau)).
Vec kd_grad_student(const Vec& z_s, const Vec& z_bar, double tau);
// d kd / d z_bar_k = -tau * p_k * (log q_k - sum_c p_c log q_c)
// with p = softmax(z_bar/tau), q = softmax(z_s/tau).
Vec kd_grad_teacher(const Vec& z_s, const Vec& z_bar, double tau);

// CE(z_s, y) + lambda_kd * kd_loss(z_s, z_bar, tau).
double student_total(const Vec& z_s, const Vec& z_bar, const Vec& y_onehot,
                     const KDConfig& cfg);
Vec student_total_grad(const Vec& z_s, const Vec& z_bar, const Vec& y_onehot,
                       const KDConfig& cfg);

// 1 - cos(a, b). In [0, 2] for non-zero inputs; zero-vector input throws.
double cosine_gap(const Vec& a, const Vec& b);
// d(1 - cos(a,b))/da = cos(a,b) * a / |a|^2 - b / (|a||b|); symmetric in
// the other argument.
Vec cosine_gap_grad_a(const Vec& a, const Vec& b);
Vec cosine_gap_grad_b(const Vec& a, const Vec& b);

// 1 - cos(n_gt, n_relaxed): keeps the relaxed embedding aligned with the
// exact class-name embedding.
double hierarchical_loss(const Vec& n_gt, const Vec& n_relaxed);
// 1 - cos(n_pretrained, n_relaxed): bounds drift from the frozen snapshot.
double cosreg_loss(const Vec& n_pretrained, const Vec& n_relaxed);

struct TeacherLossTerms {
  double ce = 0.0;
  double hier = 0.0;
  double cosreg = 0.0;
  double total = 0.0;
};

// CE(z_tx, y) + lambda_hier * hierarchical_loss + lambda_cosreg *
// cosreg_loss. Pass has_relaxed = false for samples whose text source is
// gt or noise: no relaxed embedding is in play, so both regularizer
// terms are omitted (contribution 0).
TeacherLossTerms teacher_total(const Vec& z_tx, const Vec& y_onehot,
                               const Vec& n_gt, const Vec& n_relaxed,
                               const Vec& n_pretrained, const KDConfig& cfg,
                               bool has_relaxed = true);

// Gradient of teacher_total w.r.t. the relaxed embedding (the only
// trainable vector among the three).
Vec teacher_grad_relaxed(const Vec& n_gt, const Vec& n_relaxed,
                         const Vec& n_pretrained, const KDConfig& cfg);

}  // namespace xmodal
