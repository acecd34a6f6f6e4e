#include "xmodal/losses.hpp"

#include <cmath>
#include <string>

#include "xmodal/common.hpp"

namespace xmodal {

namespace {

void check_same_length(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size())
    throw InputError(std::string(what) + ": length mismatch " +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  if (a.empty()) throw InputError(std::string(what) + ": empty vectors");
}

Vec scaled(const Vec& z, double inv_tau) {
  Vec out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * inv_tau;
  return out;
}

}  // namespace

void validate(const KDConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw ConfigError("kd: tau must be > 0");
  if (cfg.lambda_kd < 0.0) throw ConfigError("kd: lambda_kd must be >= 0");
  if (cfg.lambda_hier < 0.0) throw ConfigError("kd: lambda_hier must be >= 0");
  if (cfg.lambda_cosreg < 0.0)
    throw ConfigError("kd: lambda_cosreg must be >= 0");
}

Vec average_logits(const Vec& z_tm, const Vec& z_tx) {
  check_same_length(z_tm, z_tx, "average_logits");
  Vec out(z_tm.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.5 * (z_tm[i] + z_tx[i]);
  return out;
}

std::size_t onehot_index(const Vec& y_onehot) {
  std::size_t hot = y_onehot.size();
  for (std::size_t i = 0; i < y_onehot.size(); ++i) {
    if (y_onehot[i] == 0.0) continue;
    if (y_onehot[i] != 1.0 || hot != y_onehot.size())
      throw InputError("onehot_index: not a one-hot vector");
    hot = i;
  }
  if (hot == y_onehot.size())
    throw InputError("onehot_index: not a one-hot vector");
  return hot;
}

double ce_loss(const Vec& z, const Vec& y_onehot) {
  check_same_length(z, y_onehot, "ce_loss");
  return -log_softmax(z)[onehot_index(y_onehot)];
}

Vec ce_grad(const Vec& z, const Vec& y_onehot) {
  check_same_length(z, y_onehot, "ce_grad");
  onehot_index(y_onehot);
  Vec g = softmax(z);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= y_onehot[i];
  return g;
}

double kd_loss(const Vec& z_s, const Vec& z_bar, double tau) {
  check_same_length(z_s, z_bar, "kd_loss");
  if (!(tau > 0.0)) throw ConfigError("kd_loss: tau must be > 0");
  const Vec p = softmax(scaled(z_bar, 1.0 / tau));
  const Vec log_q = log_softmax(scaled(z_s, 1.0 / tau));
  double acc = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) acc += p[c] * log_q[c];
  return -tau * tau * acc;
}

Vec kd_grad_student(const Vec& z_s, const Vec& z_bar, double tau) {
  check_same_length(z_s, z_bar, "kd_grad_student");
  if (!(tau > 0.0)) throw ConfigError("kd_grad_student: tau must be > 0");
  const Vec p = softmax(scaled(z_bar, 1.0 / tau));
  Vec g = softmax(scaled(z_s, 1.0 / tau));
  for (std::size_t c = 0; c < g.size(); ++c) g[c] = tau * (g[c] - p[c]);
  return g;
}

Vec kd_grad_teacher(const Vec& z_s, const Vec& z_bar, double tau) {
  check_same_length(z_s, z_bar, "kd_grad_teacher");
  if (!(tau > 0.0)) throw ConfigError("kd_grad_teacher: tau must be > 0");
  const Vec p = softmax(scaled(z_bar, 1.0 / tau));
  const Vec log_q = log_softmax(scaled(z_s, 1.0 / tau));
  double mean_log_q = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) mean_log_q += p[c] * log_q[c];
  Vec g(p.size());
  for (std::size_t c = 0; c < p.size(); ++c)
    g[c] = -tau * p[c] * (log_q[c] - mean_log_q);
  return g;
}

double student_total(const Vec& z_s, const Vec& z_bar, const Vec& y_onehot,
                     const KDConfig& cfg) {
  validate(cfg);
  double loss = ce_loss(z_s, y_onehot);
  if (cfg.lambda_kd != 0.0)
    loss += cfg.lambda_kd * kd_loss(z_s, z_bar, cfg.tau);
  return loss;
}

Vec student_total_grad(const Vec& z_s, const Vec& z_bar, const Vec& y_onehot,
                       const KDConfig& cfg) {
  validate(cfg);
  Vec g = ce_grad(z_s, y_onehot);
  if (cfg.lambda_kd != 0.0) {
    const Vec gk = kd_grad_student(z_s, z_bar, cfg.tau);
    for (std::size_t c = 0; c < g.size(); ++c) g[c] += cfg.lambda_kd * gk[c];
  }
  return g;
}

double cosine_gap(const Vec& a, const Vec& b) {
  check_same_length(a, b, "cosine_gap");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw InputError("cosine_gap: zero vector");
  return 1.0 - dot(a, b) / (na * nb);
}

Vec cosine_gap_grad_a(const Vec& a, const Vec& b) {
  check_same_length(a, b, "cosine_gap_grad_a");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0)
    throw InputError("cosine_gap_grad_a: zero vector");
  const double cos_ab = dot(a, b) / (na * nb);
  Vec g(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    g[i] = cos_ab * a[i] / (na * na) - b[i] / (na * nb);
  return g;
}

Vec cosine_gap_grad_b(const Vec& a, const Vec& b) {
  return cosine_gap_grad_a(b, a);
}

double hierarchical_loss(const Vec& n_gt, const Vec& n_relaxed) {
  return cosine_gap(n_gt, n_relaxed);
}

double cosreg_loss(const Vec& n_pretrained, const Vec& n_relaxed) {
  return cosine_gap(n_pretrained, n_relaxed);
}

TeacherLossTerms teacher_total(const Vec& z_tx, const Vec& y_onehot,
                               const Vec& n_gt, const Vec& n_relaxed,
                               const Vec& n_pretrained, const KDConfig& cfg,
                               bool has_relaxed) {
  validate(cfg);
  TeacherLossTerms t;
  t.ce = ce_loss(z_tx, y_onehot);
  if (has_relaxed) {
    t.hier = hierarchical_loss(n_gt, n_relaxed);
    t.cosreg = cosreg_loss(n_pretrained, n_relaxed);
  }
  t.total = t.ce + cfg.lambda_hier * t.hier + cfg.lambda_cosreg * t.cosreg;
  return t;
}

Vec teacher_grad_relaxed(const Vec& n_gt, const Vec& n_relaxed,
                         const Vec& n_pretrained, const KDConfig& cfg) {
  validate(cfg);
  const Vec gh = cosine_gap_grad_b(n_gt, n_relaxed);
  const Vec gc = cosine_gap_grad_b(n_pretrained, n_relaxed);
  Vec g(n_relaxed.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = cfg.lambda_hier * gh[i] + cfg.lambda_cosreg * gc[i];
  return g;
}

}  // namespace xmodal
