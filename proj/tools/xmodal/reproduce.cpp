#include "reproduce.hpp"

#include <cstdio>
#include <iostream>
#include <vector>

#include "xmodal/attribution.hpp"
#include "xmodal/common.hpp"
#include "xmodal/reports.hpp"
#include "xmodal/training.hpp"

namespace xmodal::cli {
namespace {

void require_trend(bool ok, const std::string& what) {
  if (ok) {
    std::cout << "CHECK ok: " << what << "\n";
  } else {
    throw TrendCheckError(what);
  }
}

std::string pct_pair(double mean, double stdev) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s +/- %.2f", format_accuracy(mean).c_str(),
                stdev * 100.0);
  return buf;
}

const SweepRow& row_at(const SweepResult& res, double pct) {
  for (const auto& row : res.rows)
    if (row.percent == pct) return row;
  throw Error("reproduce: missing sweep point " + std::to_string(pct));
}

void check_sweep_complete(const SweepResult& res) {
  for (const auto& row : res.rows)
    if (row.failed)
      throw Error("reproduce: sweep point " + std::to_string(row.percent) +
                  " failed: " + row.error);
}

std::vector<std::pair<double, double>> series_of(
    const SweepResult& res, double SweepRow::* pct,
    SweepCell SweepRow::* cell) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : res.rows)
    pts.push_back({row.*pct, (row.*cell).mean});
  return pts;
}

void do_table2(const TrainConfig& base, int reps,
               const std::filesystem::path& out) {
  std::vector<double> wn_points{0, 20, 50, 80, 100};
  std::vector<double> noise_points{20, 50, 80, 100};
  auto wn = run_sweep(base, "wn", wn_points, reps, out / "wn");
  check_sweep_complete(wn);
  auto noise = run_sweep(base, "noise", noise_points, reps, out / "noise");
  check_sweep_complete(noise);

  // Row order mirrors the summary layout: relaxed-heavy rows first, the
  // pure ground-truth row in the middle, then rising noise rows.
  std::vector<const SweepRow*> rows;
  for (double p : {100.0, 80.0, 50.0, 20.0}) rows.push_back(&row_at(wn, p));
  rows.push_back(&row_at(wn, 0.0));
  for (double p : {20.0, 50.0, 80.0, 100.0}) rows.push_back(&row_at(noise, p));

  std::vector<std::string> header{"p_gt",       "p_wn",       "p_noise",
                                  "teacher",    "student_tx", "student_full"};
  std::vector<std::vector<std::string>> cells;
  std::vector<std::vector<std::string>> csv_rows;
  for (const auto* row : rows) {
    cells.push_back({format_double(row->policy.p_gt, 2),
                     format_double(row->policy.p_wn, 2),
                     format_double(row->policy.p_noise, 2),
                     pct_pair(row->teacher.mean, row->teacher.stdev),
                     pct_pair(row->student_tx.mean, row->student_tx.stdev),
                     pct_pair(row->student_full.mean, row->student_full.stdev)});
    csv_rows.push_back({format_double(row->policy.p_gt, 4),
                        format_double(row->policy.p_wn, 4),
                        format_double(row->policy.p_noise, 4),
                        format_double(row->teacher.mean, 6),
                        format_double(row->teacher.stdev, 6),
                        format_double(row->student_tx.mean, 6),
                        format_double(row->student_tx.stdev, 6),
                        format_double(row->student_full.mean, 6),
                        format_double(row->student_full.stdev, 6)});
  }
  write_csv(out / "table2.csv",
            {"p_gt", "p_wn", "p_noise", "teacher_mean", "teacher_std",
             "student_tx_mean", "student_tx_std", "student_full_mean",
             "student_full_std"},
            csv_rows);
  write_series(out / "wn_teacher.dat",
               series_of(wn, &SweepRow::percent, &SweepRow::teacher));
  write_series(out / "wn_student_full.dat",
               series_of(wn, &SweepRow::percent, &SweepRow::student_full));
  write_series(out / "noise_teacher.dat",
               series_of(noise, &SweepRow::percent, &SweepRow::teacher));
  write_series(out / "noise_student_full.dat",
               series_of(noise, &SweepRow::percent, &SweepRow::student_full));
  std::cout << format_table(header, cells);

  for (std::size_t i = 0; i + 1 < wn.rows.size(); ++i) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "teacher mean non-increasing in p_wn: %.4f (at %g%%) >= "
                  "%.4f (at %g%%)",
                  wn.rows[i].teacher.mean, wn.rows[i].percent,
                  wn.rows[i + 1].teacher.mean, wn.rows[i + 1].percent);
    require_trend(wn.rows[i].teacher.mean >= wn.rows[i + 1].teacher.mean, buf);
  }
  {
    double gt = row_at(wn, 0.0).teacher.mean;
    char buf[96];
    std::snprintf(buf, sizeof(buf),
                  "teacher at pure ground truth >= 0.99 (got %.4f)", gt);
    require_trend(gt >= 0.99, buf);
  }
  {
    double s_wn = row_at(wn, 100.0).student_full.mean;
    double s_noise = row_at(noise, 100.0).student_full.mean;
    double s_gt = row_at(wn, 0.0).student_full.mean;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "student ordering relaxed >= noise >= ground truth "
                  "(%.4f >= %.4f >= %.4f)",
                  s_wn, s_noise, s_gt);
    require_trend(s_wn >= s_noise && s_noise >= s_gt, buf);
  }
}

void do_fig2(const TrainConfig& base, int reps,
             const std::filesystem::path& out) {
  TrainConfig cfg = base;
  cfg.models.teacher_x_input = TeacherInputMode::kTextOnly;
  std::vector<double> points{0, 20, 50, 80, 100};
  auto sweep = run_sweep(cfg, "wn", points, reps, out / "wn");
  check_sweep_complete(sweep);

  std::vector<double> pcts, teacher_means, student_means;
  for (const auto& row : sweep.rows) {
    pcts.push_back(row.percent);
    teacher_means.push_back(row.teacher.mean);
    student_means.push_back(row.student_tx.mean);
  }
  write_series(out / "fig2_teacher.dat",
               series_of(sweep, &SweepRow::percent, &SweepRow::teacher));
  write_series(out / "fig2_student.dat",
               series_of(sweep, &SweepRow::percent, &SweepRow::student_tx));

  std::vector<std::vector<std::string>> cells;
  for (const auto& row : sweep.rows)
    cells.push_back({format_double(row.percent, 0),
                     pct_pair(row.teacher.mean, row.teacher.stdev),
                     pct_pair(row.student_tx.mean, row.student_tx.stdev)});
  std::cout << format_table({"p_wn %", "teacher (text-only)", "student"},
                            cells);

  double rho_t = spearman(pcts, teacher_means);
  double rho_s = spearman(pcts, student_means);
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "text-only teacher decreases with p_wn: Spearman %.3f <= -0.7",
                rho_t);
  require_trend(rho_t <= -0.7, buf);
  std::snprintf(buf, sizeof(buf),
                "student improves with p_wn: Spearman %.3f >= 0.7", rho_s);
  require_trend(rho_s >= 0.7, buf);
}

void do_table3(const TrainConfig& base, int reps,
               const std::filesystem::path& out) {
  TrainConfig learnable = base;
  learnable.bank.learnable = true;
  TrainConfig frozen = base;
  frozen.bank.learnable = false;
  auto run_l = run_sweep(learnable, "wn", {100}, reps, out / "learnable");
  check_sweep_complete(run_l);
  auto run_f = run_sweep(frozen, "wn", {100}, reps, out / "frozen");
  check_sweep_complete(run_f);
  const auto& L = row_at(run_l, 100.0);
  const auto& F = row_at(run_f, 100.0);

  std::vector<std::vector<std::string>> cells{
      {"learnable", pct_pair(L.teacher.mean, L.teacher.stdev),
       pct_pair(L.student_full.mean, L.student_full.stdev)},
      {"frozen", pct_pair(F.teacher.mean, F.teacher.stdev),
       pct_pair(F.student_full.mean, F.student_full.stdev)}};
  std::cout << format_table({"bank", "teacher", "student"}, cells);
  write_csv(out / "table3.csv",
            {"bank", "teacher_mean", "teacher_std", "student_mean",
             "student_std"},
            {{"learnable", format_double(L.teacher.mean, 6),
              format_double(L.teacher.stdev, 6),
              format_double(L.student_full.mean, 6),
              format_double(L.student_full.stdev, 6)},
             {"frozen", format_double(F.teacher.mean, 6),
              format_double(F.teacher.stdev, 6),
              format_double(F.student_full.mean, 6),
              format_double(F.student_full.stdev, 6)}});

  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "learnable bank teacher >= frozen (%.4f >= %.4f)",
                L.teacher.mean, F.teacher.mean);
  require_trend(L.teacher.mean >= F.teacher.mean, buf);
  std::snprintf(buf, sizeof(buf),
                "learnable bank student >= frozen (%.4f >= %.4f)",
                L.student_full.mean, F.student_full.mean);
  require_trend(L.student_full.mean >= F.student_full.mean, buf);
}

struct ShareTrial {
  double percent = 0;
  double image_share = 0;
  double text_share = 0;
};

// Trains only what attribution needs: the fused teacher for one mix,
// then integrated-gradient shares over the assembled val inputs.
ShareTrial share_trial(const TrainConfig& base, const std::string& axis,
                       double pct, int reps,
                       const std::filesystem::path& work) {
  ShareTrial trial;
  trial.percent = pct;
  for (int rep = 0; rep < reps; ++rep) {
    TrainConfig cfg = with_rep(base, rep);
    cfg.mix = axis_policy(axis, pct);
    cfg.out = work / ("point-" + std::to_string(static_cast<int>(pct))) /
              ("rep-" + std::to_string(rep));
    cfg.dataset.dir = work / ("data-rep" + std::to_string(rep));
    RunContext ctx = make_context(cfg);
    auto relax = relax_bank(ctx);
    auto tx = train_multimodal_teacher(ctx, std::move(relax.bank),
                                       std::move(relax.clusters));
    auto eval = assemble_eval_inputs(ctx, tx.teacher, tx.bank, tx.clusters,
                                     ctx.data.val);
    auto stats = mean_shares(tx.teacher.head, eval.inputs, eval.d_img,
                             eval.d_txt, 64);
    trial.image_share += stats.image_share;
    trial.text_share += stats.text_share;
  }
  trial.image_share /= reps;
  trial.text_share /= reps;
  return trial;
}

void do_fig3(const TrainConfig& base, int reps,
             const std::filesystem::path& out) {
  std::vector<double> points{0, 50, 100};
  std::vector<ShareTrial> noise_trials, wn_trials;
  for (double p : points)
    noise_trials.push_back(share_trial(base, "noise", p, reps, out / "noise"));
  // The 0% point is pure ground truth on either axis; reuse it.
  wn_trials.push_back(noise_trials.front());
  for (double p : {50.0, 100.0})
    wn_trials.push_back(share_trial(base, "wn", p, reps, out / "wn"));

  std::vector<std::pair<double, double>> noise_series, wn_series;
  for (const auto& t : noise_trials)
    noise_series.push_back({t.percent, t.image_share});
  for (const auto& t : wn_trials) wn_series.push_back({t.percent, t.image_share});
  write_series(out / "fig3_noise_image_share.dat", noise_series);
  write_series(out / "fig3_wn_image_share.dat", wn_series);

  std::vector<std::vector<std::string>> cells, csv_rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    cells.push_back({format_double(points[i], 0),
                     format_double(noise_trials[i].image_share, 4),
                     format_double(noise_trials[i].text_share, 4),
                     format_double(wn_trials[i].image_share, 4),
                     format_double(wn_trials[i].text_share, 4)});
    csv_rows.push_back({format_double(points[i], 0),
                        format_double(noise_trials[i].image_share, 6),
                        format_double(noise_trials[i].text_share, 6),
                        format_double(wn_trials[i].image_share, 6),
                        format_double(wn_trials[i].text_share, 6)});
  }
  std::cout << format_table({"percent", "noise img", "noise txt", "wn img",
                             "wn txt"},
                            cells);
  write_csv(out / "fig3_shares.csv",
            {"percent", "noise_image_share", "noise_text_share",
             "wn_image_share", "wn_text_share"},
            csv_rows);

  for (std::size_t i = 0; i + 1 < noise_trials.size(); ++i) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "image share increases with noise: %.4f (at %g%%) < %.4f "
                  "(at %g%%)",
                  noise_trials[i].image_share, noise_trials[i].percent,
                  noise_trials[i + 1].image_share, noise_trials[i + 1].percent);
    require_trend(
        noise_trials[i].image_share < noise_trials[i + 1].image_share, buf);
  }
  for (std::size_t i = 1; i < points.size(); ++i) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "relaxed text share >= noise text share at %g%% "
                  "(%.4f >= %.4f)",
                  points[i], wn_trials[i].text_share,
                  noise_trials[i].text_share);
    require_trend(wn_trials[i].text_share >= noise_trials[i].text_share, buf);
  }
}

}  // namespace

void reproduce(const std::string& what, const TrainConfig& base, int reps,
               const std::filesystem::path& out) {
  if (reps < 1) throw ConfigError("reproduce: seeds must be >= 1");
  std::filesystem::create_directories(out);
  if (what == "table2") do_table2(base, reps, out);
  else if (what == "fig2") do_fig2(base, reps, out);
  else if (what == "table3") do_table3(base, reps, out);
  else if (what == "fig3") do_fig3(base, reps, out);
  else
    throw ConfigError(
        "reproduce: unknown experiment \"" + what +
        "\" (expected table2, fig2, table3 or fig3)");
}

}  // namespace xmodal::cli
