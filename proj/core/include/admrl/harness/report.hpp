#pragma once

#include "admrl/trainers/meta_test.hpp"

#include <span>
#include <string>
#include <vector>

namespace admrl::harness {

/// Long-form evaluation CSV. Columns, in order:
/// regime,attack,scale,mean_return,std_return,n_tasks,pre_adapt_mean_return
std::string eval_rows_csv(std::span<const trainers::EvalRow> rows);
std::vector<trainers::EvalRow> parse_eval_rows_csv(const std::string& text);

/// Convergence CSV. Columns: iteration,regime,mean_return
std::string convergence_csv(trainers::Regime regime, std::span<const trainers::ConvergencePoint> series);

struct ReportTables {
  std::string markdown;
  /// regime,<attack@scale>...; cells are mean returns or "absent". A final
  /// "best" row names the flagged regime(s) per column, ';'-separated.
  std::string csv;
};

/// One row per regime, one column per (attack, scale) in first-seen order.
/// The highest mean return in each column is flagged; ties flag every tied
/// regime and are noted. Missing cells are written as "absent"; regimes in
/// `expected_regimes` appear even without rows. Pure.
ReportTables emit_report(std::span<const trainers::EvalRow> rows, std::span<const std::string> expected_regimes = {});

/// Column label, e.g. "clean" or "adgan@0.5".
std::string column_label(attacks::AttackKind kind, double scale);

}  // namespace admrl::harness
