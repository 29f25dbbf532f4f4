#include "bulktx/bench.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <unordered_set>

namespace bulktx {
namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

ExecReport run_bench(const ColumnStore& initial, const TypeRegistry& registry, const Workload& workload,
                     const BenchOptions& options, ColumnStore* final_store) {
  const PlannerConfig& pc = options.planner;
  ExecReport rep;
  rep.strategy = pc.auto_strategy ? "auto" : to_string(pc.exec.strategy);
  rep.txns = workload.txns.size();

  // Relaxed strategies are checked against the serial order their trace
  // shows, not id order.
  const bool relaxed = !pc.auto_strategy && (pc.exec.strategy == Strategy::tpl_relaxed ||
                                             pc.exec.strategy == Strategy::part_relaxed);
  ExecutorConfig exec = pc.exec;
  exec.trace = exec.trace || (relaxed && options.check_oracle);
  std::vector<TxnId> serial;

  ColumnStore store = initial;
  Engine engine(pc.exec);
  ExecEnv env = engine.env(store, registry);
  TxnPool pool(registry);
  BulkPlanner planner(registry, pc);
  rep.lane_txns.assign(engine.lanes().size(), 0);

  const auto& txns = workload.txns;
  const double ms_per_txn = options.arrival_rate > 0 ? 1000.0 / options.arrival_rate : 0;
  auto arrival = [&](std::size_t i) { return static_cast<double>(i) * ms_per_txn; };
  std::vector<double> arrival_of;  // by position, for response times
  arrival_of.reserve(txns.size());
  for (std::size_t i = 0; i < txns.size(); ++i) arrival_of.push_back(arrival(i));
  auto position_of = [&](TxnId id) {
    auto it = std::lower_bound(txns.begin(), txns.end(), id, [](const TxnSignature& s, TxnId v) { return s.id < v; });
    return static_cast<std::size_t>(it - txns.begin());
  };

  std::vector<TxnId> cascaded;
  double clock = 0;
  double response_sum = 0;
  std::size_t responded = 0;
  std::size_t next = 0;
  const auto t_run = Clock::now();
  try {
    while (next < txns.size() || planner.held() > 0) {
      double tick = clock + pc.interval;
      if (next < txns.size() && planner.held() == 0 && arrival(next) > tick) tick = arrival(next);
      const auto t_sub = Clock::now();
      while (next < txns.size() && arrival(next) <= tick) pool.submit_signature(txns[next++]);
      rep.submit_seconds += since(t_sub);

      Bulk bulk = planner.generate(pool);
      ExecOutcome out = execute_planned(env, bulk, exec, options.check_oracle ? &serial : nullptr);

      BulkReport br;
      br.index = rep.bulks.size();
      br.strategy = to_string(bulk.strategy);
      br.size = out.txns.size();
      br.committed = out.committed;
      br.aborted = out.aborted;
      br.rolled_back = out.rolled_back;
      br.gen_seconds = bulk.gen_seconds;
      br.exec_seconds = out.seconds;
      br.divergence = bulk.divergence;
      br.stats_valid = bulk.stats_valid;
      br.stats = bulk.stats;
      const double done = tick + (br.gen_seconds + br.exec_seconds) * 1000.0;
      double bulk_resp = 0;
      for (TxnId id : out.txns) bulk_resp += done - arrival_of[position_of(id)];
      br.avg_response_ms = out.txns.empty() ? 0 : bulk_resp / static_cast<double>(out.txns.size());
      response_sum += bulk_resp;
      responded += out.txns.size();

      rep.committed += out.committed;
      rep.aborted += out.aborted;
      rep.rolled_back += out.rolled_back;
      rep.gen_seconds += br.gen_seconds;
      rep.exec_seconds += br.exec_seconds;
      rep.divergence += br.divergence;
      for (std::size_t l = 0; l < out.lane_txns.size() && l < rep.lane_txns.size(); ++l) {
        rep.lane_txns[l] += out.lane_txns[l];
      }
      cascaded.insert(cascaded.end(), out.cascaded.begin(), out.cascaded.end());
      if (br.size > 0) rep.bulks.push_back(std::move(br));
      clock = done;
    }
  } catch (const WatchdogTimeout& e) {
    rep.failure = std::string("watchdog: ") + e.what();
  } catch (const Error& e) {
    rep.failure = e.what();
  }
  rep.total_seconds = since(t_run);
  rep.throughput_ktps = rep.total_seconds > 0 ? static_cast<double>(rep.committed) / rep.total_seconds / 1000.0 : 0;
  rep.avg_response_ms = responded ? response_sum / static_cast<double>(responded) : 0;

  if (options.check_oracle && rep.failure.empty()) {
    rep.oracle_checked = true;
    ColumnStore oracle = initial;
    const std::unordered_set<TxnId> skip(cascaded.begin(), cascaded.end());
    SeqOptions so;
    so.skip = &skip;
    std::vector<TxnSignature> ordered;
    ordered.reserve(serial.size());
    for (TxnId id : serial) ordered.push_back(txns[position_of(id)]);
    so.any_order = true;
    const std::vector<TxnStatus> expect = execute_sequential(oracle, registry, ordered, so);
    std::size_t expect_committed = 0;
    for (TxnStatus s : expect) expect_committed += s == TxnStatus::committed;
    const auto diff = compare_snapshots(store.snapshot(), oracle.snapshot());
    if (diff) {
      rep.oracle_detail = "snapshot differs at " + to_string(*diff);
    } else if (expect_committed != rep.committed) {
      rep.oracle_detail = "committed " + std::to_string(rep.committed) + ", oracle committed " +
                          std::to_string(expect_committed);
    } else {
      rep.oracle_ok = true;
      rep.oracle_detail = "snapshot matches sequential execution";
    }
  }
  if (final_store) *final_store = std::move(store);
  return rep;
}

void emit_report(const ExecReport& r, ReportFormat format, std::ostream& out) {
  if (format == ReportFormat::csv) {
    out << "# bulktx-report " << kReportVersion << '\n';
    out << "row,index,strategy,size,committed,aborted,rolled_back,gen_s,exec_s,total_s,ktps,divergence,depth,w0,"
           "cross,avg_response_ms\n";
    if (r.bulks.empty()) return;
    for (const BulkReport& b : r.bulks) {
      const double total = b.gen_seconds + b.exec_seconds;
      const double ktps = total > 0 ? static_cast<double>(b.committed) / total / 1000.0 : 0;
      out << "bulk," << b.index << ',' << b.strategy << ',' << b.size << ',' << b.committed << ',' << b.aborted << ','
          << b.rolled_back << ',' << fixed3(b.gen_seconds) << ',' << fixed3(b.exec_seconds) << ',' << fixed3(total)
          << ',' << fixed3(ktps) << ',' << b.divergence << ',';
      if (b.stats_valid) {
        out << b.stats.d << ',' << b.stats.w0 << ',' << b.stats.c;
      } else {
        out << ",,";
      }
      out << ',' << fixed3(b.avg_response_ms) << '\n';
    }
    out << "summary," << r.bulks.size() << ',' << r.strategy << ',' << r.txns << ',' << r.committed << ','
        << r.aborted << ',' << r.rolled_back << ',' << fixed3(r.gen_seconds) << ',' << fixed3(r.exec_seconds) << ','
        << fixed3(r.total_seconds) << ',' << fixed3(r.throughput_ktps) << ',' << r.divergence << ",,,,"
        << fixed3(r.avg_response_ms) << '\n';
    return;
  }
  out << "strategy        " << r.strategy << '\n';
  out << "transactions    " << r.txns << " in " << r.bulks.size() << " bulks\n";
  out << "committed       " << r.committed << '\n';
  out << "aborted         " << r.aborted << '\n';
  out << "rolled back     " << r.rolled_back << '\n';
  out << "throughput      " << fixed3(r.throughput_ktps) << " ktps\n";
  out << "time            " << fixed3(r.total_seconds) << " s (generation " << fixed3(r.gen_seconds)
      << ", execution " << fixed3(r.exec_seconds) << ", submission " << fixed3(r.submit_seconds) << ")\n";
  out << "divergence      " << r.divergence << '\n';
  out << "avg response    " << fixed3(r.avg_response_ms) << " ms\n";
  out << "lanes           ";
  for (std::size_t i = 0; i < r.lane_txns.size(); ++i) out << (i ? " " : "") << r.lane_txns[i];
  out << '\n';
  if (r.oracle_checked) out << "oracle          " << (r.oracle_ok ? "ok: " : "FAILED: ") << r.oracle_detail << '\n';
  if (!r.failure.empty()) out << "failure         " << r.failure << '\n';
}

}  // namespace bulktx
