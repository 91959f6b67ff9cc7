#include "admrl/harness/report.hpp"

#include "admrl/common/error.hpp"
#include "admrl/common/format.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace admrl::harness {

namespace {

constexpr const char* kEvalHeader = "regime,attack,scale,mean_return,std_return,n_tasks,pre_adapt_mean_return";

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ContractError("bad number in evaluation CSV: '" + s + "'");
  }
  if (used != s.size()) throw ContractError("bad number in evaluation CSV: '" + s + "'");
  return v;
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string column_label(attacks::AttackKind kind, double scale) {
  if (kind == attacks::AttackKind::Identity || scale == 0.0) return "clean";
  return std::string(attacks::to_string(kind)) + "@" + format_double(scale);
}

std::string eval_rows_csv(std::span<const trainers::EvalRow> rows) {
  std::string out = std::string(kEvalHeader) + "\n";
  for (const auto& r : rows) {
    out += r.regime + "," + std::string(attacks::to_string(r.attack)) + "," + format_double(r.scale) + "," +
           format_double(r.mean_return) + "," + format_double(r.std_return) + "," + std::to_string(r.n_tasks) + "," +
           format_double(r.pre_adapt_mean_return) + "\n";
  }
  return out;
}

std::vector<trainers::EvalRow> parse_eval_rows_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kEvalHeader) throw ContractError("evaluation CSV has an unexpected header");
  std::vector<trainers::EvalRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) throw ContractError("evaluation CSV row has " + std::to_string(f.size()) + " fields");
    trainers::EvalRow r;
    r.regime = f[0];
    r.attack = attacks::attack_from_string(f[1]);
    r.scale = to_double(f[2]);
    r.mean_return = to_double(f[3]);
    r.std_return = to_double(f[4]);
    r.n_tasks = static_cast<int>(to_double(f[5]));
    r.pre_adapt_mean_return = to_double(f[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string convergence_csv(trainers::Regime regime, std::span<const trainers::ConvergencePoint> series) {
  std::string out = "iteration,regime,mean_return\n";
  for (const auto& p : series)
    out += std::to_string(p.iteration) + "," + std::string(trainers::to_string(regime)) + "," +
           format_double(p.mean_return) + "\n";
  return out;
}

ReportTables emit_report(std::span<const trainers::EvalRow> rows, std::span<const std::string> expected_regimes) {
  if (rows.empty()) throw ContractError("emit_report needs at least one evaluation row");
  std::vector<std::string> regimes, columns;
  auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : expected_regimes) add_unique(regimes, r);
  for (const auto& r : rows) {
    add_unique(regimes, r.regime);
    add_unique(columns, column_label(r.attack, r.scale));
  }
  // cell[i][j] -> index into rows, or -1 when absent. Later duplicates win.
  std::vector<std::vector<long>> cell(regimes.size(), std::vector<long>(columns.size(), -1));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = std::find(regimes.begin(), regimes.end(), rows[k].regime) - regimes.begin();
    const auto j =
        std::find(columns.begin(), columns.end(), column_label(rows[k].attack, rows[k].scale)) - columns.begin();
    cell[i][j] = static_cast<long>(k);
  }

  std::vector<std::vector<bool>> best(regimes.size(), std::vector<bool>(columns.size(), false));
  std::vector<std::string> tie_notes;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    bool any = false;
    double top = 0.0;
    for (std::size_t i = 0; i < regimes.size(); ++i) {
      if (cell[i][j] < 0) continue;
      const double v = rows[cell[i][j]].mean_return;
      if (!any || v > top) top = v;
      any = true;
    }
    std::vector<std::string> tied;
    for (std::size_t i = 0; i < regimes.size(); ++i) {
      if (cell[i][j] >= 0 && rows[cell[i][j]].mean_return == top) {
        best[i][j] = true;
        tied.push_back(regimes[i]);
      }
    }
    if (tied.size() > 1) {
      std::string note = "tie in " + columns[j] + ":";
      for (const auto& t : tied) note += " " + t;
      tie_notes.push_back(note);
    }
  }

  std::string md = "| regime |";
  std::string sep = "|---|";
  for (const auto& c : columns) {
    md += " " + c + " |";
    sep += "---|";
  }
  md += "\n" + sep + "\n";
  std::string csv = "regime";
  for (const auto& c : columns) csv += "," + c;
  csv += "\n";
  for (std::size_t i = 0; i < regimes.size(); ++i) {
    md += "| " + regimes[i] + " |";
    csv += regimes[i];
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (cell[i][j] < 0) {
        md += " absent |";
        csv += ",absent";
        continue;
      }
      const auto& r = rows[cell[i][j]];
      std::string text = fixed3(r.mean_return) + " ± " + fixed3(r.std_return);
      if (best[i][j]) text = "**" + text + "**";
      md += " " + text + " |";
      csv += "," + format_double(r.mean_return);
    }
    md += "\n";
    csv += "\n";
  }
  csv += "best";
  for (std::size_t j = 0; j < columns.size(); ++j) {
    std::string who;
    for (std::size_t i = 0; i < regimes.size(); ++i)
      if (best[i][j]) who += (who.empty() ? "" : ";") + regimes[i];
    csv += "," + who;
  }
  csv += "\n";
  md += "\nBold marks the best regime per column (highest mean post-adaptation return).\n";
  for (const auto& n : tie_notes) md += "\n" + n + "\n";
  return {md, csv};
}

}  // namespace admrl::harness
