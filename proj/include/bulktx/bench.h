#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bulktx/executors.h"
#include "bulktx/planner.h"
#include "bulktx/storage.h"
#include "bulktx/txmodel.h"

namespace bulktx {

struct BenchOptions {
  PlannerConfig planner;
  // Arrivals per second of logical time; 0 submits everything at time 0.
  double arrival_rate = 0;
  // Compare the final snapshot against the sequential oracle.
  bool check_oracle = true;
};

struct BulkReport {
  std::size_t index = 0;
  std::string strategy;
  std::size_t size = 0;
  std::size_t committed = 0;
  std::size_t aborted = 0;
  std::size_t rolled_back = 0;
  double gen_seconds = 0;
  double exec_seconds = 0;
  std::size_t divergence = 0;
  bool stats_valid = false;
  GraphStats stats;
  double avg_response_ms = 0;
};

struct ExecReport {
  std::string strategy;  // strategy name or "auto"
  std::vector<BulkReport> bulks;
  std::size_t txns = 0;
  std::size_t committed = 0;
  std::size_t aborted = 0;
  std::size_t rolled_back = 0;
  double gen_seconds = 0;
  double exec_seconds = 0;
  double submit_seconds = 0;
  double total_seconds = 0;
  double throughput_ktps = 0;  // committed / total wall time
  std::size_t divergence = 0;
  double avg_response_ms = 0;  // logical arrival to bulk completion
  std::vector<std::size_t> lane_txns;
  bool oracle_checked = false;
  bool oracle_ok = false;
  std::string oracle_detail;
  std::string failure;  // set when the run stopped early

  bool ok() const { return failure.empty() && (!oracle_checked || oracle_ok); }
};

/// Replays a workload against a copy of `initial`: logical-time arrivals,
/// bulks cut every `interval` of logical time, each bulk executed before
/// the next is cut. The final snapshot is checked against execute_sequential
/// on another copy; txns rolled back by cascade are skipped there.
ExecReport run_bench(const ColumnStore& initial, const TypeRegistry& registry, const Workload& workload,
                     const BenchOptions& options, ColumnStore* final_store = nullptr);

enum class ReportFormat { csv, text };

/// CSV: a `# bulktx-report 1` version line, a header, one row per bulk and
/// a summary row. An empty run has no data rows.
void emit_report(const ExecReport& report, ReportFormat format, std::ostream& out);

inline constexpr int kReportVersion = 1;

}  // namespace bulktx
