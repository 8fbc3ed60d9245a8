// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "cprsim/report.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cprsim {

namespace {

double percentile(std::vector<double> values, double q) {
  // Nearest-rank on sorted values; callers guarantee non-empty input.
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  const auto rank = static_cast<size_t>(std::min<double>(
      static_cast<double>(n) - 1.0, std::max(0.0, q * static_cast<double>(n) - 0.5)));
  return values[rank];
}

}  // namespace

RunAggregate aggregate_reports(const std::vector<SimulationReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_reports: no reports");
  RunAggregate agg;
  agg.runs = reports.size();
  std::vector<double> fractions;
  fractions.reserve(reports.size());
  double pls_sum = 0.0, auc_sum = 0.0;
  size_t auc_count = 0;
  for (const auto& r : reports) {
    fractions.push_back(r.overhead_fraction);
    agg.mean_overhead_fraction += r.overhead_fraction;
    pls_sum += r.final_pls;
    if (r.auc) {
      auc_sum += *r.auc;
      ++auc_count;
    }
  }
  agg.mean_overhead_fraction /= static_cast<double>(reports.size());
  agg.mean_final_pls = pls_sum / static_cast<double>(reports.size());
  agg.p50_overhead_fraction = percentile(fractions, 0.50);
  agg.p75_overhead_fraction = percentile(fractions, 0.75);
  agg.p95_overhead_fraction = percentile(fractions, 0.95);
  if (auc_count > 0) agg.mean_auc = auc_sum / static_cast<double>(auc_count);
  return agg;
}

std::string report_csv_header() {
  return "seed,strategy,interval_hours,save_hours,load_hours,lost_hours,"
         "reschedule_hours,overhead_fraction,final_pls,auc";
}

std::string report_csv_row(const SimulationReport& report) {
  std::ostringstream row;
  row.precision(17);
  row << report.seed << ',' << strategy_name(report.strategy) << ',' << report.interval_hours
      << ',' << report.ledger.save_hours << ',' << report.ledger.load_hours << ','
      << report.ledger.lost_hours << ',' << report.ledger.reschedule_hours << ','
      << report.overhead_fraction << ',' << report.final_pls << ',';
  if (report.auc) row << *report.auc;
  return row.str();
}

void write_reports_csv(std::ostream& out, const std::vector<SimulationReport>& reports) {
  out << report_csv_header() << '\n';
  for (const auto& r : reports) out << report_csv_row(r) << '\n';
}

}  // namespace cprsim
