#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bulktx/bench.h"
#include "bulktx/workloads.h"

using namespace bulktx;

namespace {

ExecReport bench(const WorkloadSpec& spec, PlannerConfig pc, double rate = 0) {
  const Benchmark b = make_benchmark(spec);
  const Workload w = generate_workload(spec);
  BenchOptions o;
  pc.exec.partition_size = b.partition_size;
  pc.grouping.type_count = b.type_count;
  o.planner = pc;
  o.arrival_rate = rate;
  return run_bench(b.store, b.registry, w, o);
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Drops the timing columns (gen_s .. ktps, avg_response_ms).
std::string without_timings(const std::string& csv) {
  std::string out;
  for (const auto& l : lines(csv)) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    if (f.size() < 16) {
      out += l + "\n";
      continue;
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
      if ((i >= 7 && i <= 10) || i == 15) continue;
      out += f[i] + ",";
    }
    out += "\n";
  }
  return out;
}

}  // namespace

TEST_CASE("generators are deterministic and reject impossible specs") {
  for (auto kind : {WorkloadKind::micro, WorkloadKind::tpcb_like, WorkloadKind::tm1_like, WorkloadKind::mixed}) {
    WorkloadSpec s;
    s.kind = kind;
    s.txn_count = 300;
    s.seed = 77;
    std::stringstream a, b;
    write_workload(generate_workload(s), a);
    write_workload(generate_workload(s), b);
    CHECK(a.str() == b.str());
    s.seed = 78;
    std::stringstream c;
    write_workload(generate_workload(s), c);
    CHECK(a.str() != c.str());
    const WorkloadSpec back = WorkloadSpec::from_meta(s.to_meta());
    CHECK(back.kind == kind);
    CHECK(back.seed == 78);
  }
  WorkloadSpec z;
  z.tuple_count = 0;
  CHECK_THROWS_AS(generate_workload(z), Error);
  z.kind = WorkloadKind::tpcb_like;
  z.f = 0;
  CHECK_THROWS_AS(generate_workload(z), Error);
}

TEST_CASE("micro skew shapes the graph") {
  WorkloadSpec s;
  s.txn_count = 200;
  s.tuple_count = 1 << 20;
  s.alpha = 0;
  Benchmark b = make_benchmark(s);
  auto w = generate_workload(s);
  const RankTable uniform = compute_ranks(collect_ops(b.registry, w.txns));
  CHECK(uniform.max_depth() <= 1);

  s.alpha = 1;
  s.tuple_count = 16;
  b = make_benchmark(s);
  w = generate_workload(s);
  const RankTable chain = compute_ranks(collect_ops(b.registry, w.txns));
  CHECK(chain.max_depth() == s.txn_count - 1);
}

TEST_CASE("tpcb_like degrades to one chain per branch") {
  WorkloadSpec s;
  s.kind = WorkloadKind::tpcb_like;
  s.f = 4;
  s.txn_count = 400;
  const Benchmark b = make_benchmark(s);
  const Workload w = generate_workload(s);
  const PoolOps ops = collect_ops(b.registry, w.txns);
  const TDependencyGraph g = build_graph(ops);
  std::size_t sources = 0;
  for (std::size_t v = 0; v < g.size(); ++v) {
    CHECK(g.pred[v].size() <= 1);
    CHECK(g.succ[v].size() <= 1);
    sources += g.pred[v].empty();
  }
  CHECK(sources == 4);
  std::vector<std::uint8_t> cross(w.txns.size());
  for (std::size_t i = 0; i < w.txns.size(); ++i) cross[i] = !b.registry.partition_of(w.txns[i], 1).has_value();
  CHECK(graph_stats(compute_ranks(ops), cross).c == 0);
}

TEST_CASE("tm1_like aborts about as often as injected") {
  WorkloadSpec s;
  s.kind = WorkloadKind::tm1_like;
  s.f = 2;
  s.tuple_count = 500;
  s.txn_count = 4000;
  s.abort_rate = 0.1;
  PlannerConfig pc;
  pc.exec.strategy = Strategy::tpl;
  const ExecReport r = bench(s, pc);
  CHECK(r.ok());
  const double rate = static_cast<double>(r.aborted) / static_cast<double>(r.txns);
  CHECK(rate > 0.08);
  CHECK(rate < 0.45);  // lookups of missing rows abort as well
}

TEST_CASE("every strategy passes the oracle gate on every workload") {
  for (auto kind : {WorkloadKind::micro, WorkloadKind::tpcb_like, WorkloadKind::tm1_like, WorkloadKind::mixed}) {
    WorkloadSpec s;
    s.kind = kind;
    s.x = 1;
    s.txn_count = 600;
    s.tuple_count = 128;
    s.abort_rate = 0.05;
    s.with_scan = true;
    for (const char* strat : {"tpl", "part", "kset", "tpl-relaxed", "part-relaxed", "auto"}) {
      CAPTURE(to_string(kind));
      CAPTURE(strat);
      PlannerConfig pc;
      apply_setting(pc, "strategy", strat);
      pc.max_size = 128;
      const ExecReport r = bench(s, pc);
      CHECK_MESSAGE(r.ok(), r.failure << r.oracle_detail);
      CHECK(r.oracle_checked);
      CHECK(r.committed + r.aborted + r.rolled_back == s.txn_count);
    }
  }
}

TEST_CASE("CSV report layout") {
  std::ostringstream empty;
  emit_report(ExecReport{}, ReportFormat::csv, empty);
  const auto e = lines(empty.str());
  REQUIRE(e.size() == 2);
  CHECK(e[0] == "# bulktx-report 1");
  CHECK(e[1].rfind("row,index,strategy,size,", 0) == 0);

  WorkloadSpec s;
  s.txn_count = 300;
  s.x = 1;
  PlannerConfig pc;
  pc.max_size = 100;
  const ExecReport r = bench(s, pc);
  std::ostringstream out;
  emit_report(r, ReportFormat::csv, out);
  const auto l = lines(out.str());
  REQUIRE(l.size() == 2 + 3 + 1);
  CHECK(l[2].rfind("bulk,0,tpl,100,", 0) == 0);
  CHECK(l.back().rfind("summary,3,tpl,300,", 0) == 0);

  std::ostringstream text;
  emit_report(r, ReportFormat::text, text);
  CHECK(text.str().find("oracle          ok") != std::string::npos);
}

TEST_CASE("same seed and config give identical non-timing columns") {
  WorkloadSpec s;
  s.kind = WorkloadKind::mixed;
  s.txn_count = 500;
  s.abort_rate = 0.1;
  PlannerConfig pc;
  pc.auto_strategy = true;
  pc.max_size = 100;
  std::ostringstream a, b;
  emit_report(bench(s, pc), ReportFormat::csv, a);
  emit_report(bench(s, pc), ReportFormat::csv, b);
  CHECK(without_timings(a.str()) == without_timings(b.str()));
}

TEST_CASE("time breakdown sums to the bulk total") {
  WorkloadSpec s;
  s.txn_count = 2000;
  s.x = 4;
  PlannerConfig pc;
  pc.max_size = 250;
  const ExecReport r = bench(s, pc);
  REQUIRE(r.ok());
  double sum = 0;
  for (const auto& b : r.bulks) sum += b.gen_seconds + b.exec_seconds;
  CHECK(sum == doctest::Approx(r.gen_seconds + r.exec_seconds).epsilon(1e-9));
  CHECK(sum <= r.total_seconds * 1.05);
  CHECK(r.throughput_ktps == doctest::Approx(static_cast<double>(r.committed) / r.total_seconds / 1000.0));
}

TEST_CASE("interval batching cuts bulks of rate times interval") {
  WorkloadSpec s;
  s.txn_count = 2000;
  s.x = 0;
  PlannerConfig pc;
  pc.interval = 10;  // ms of logical time
  const ExecReport r = bench(s, pc, 20000);  // 20 arrivals per ms
  REQUIRE(r.ok());
  REQUIRE(r.bulks.size() >= 5);
  // The next tick is the previous bulk's completion plus the interval.
  CHECK(r.bulks[0].size == 201);
  for (std::size_t k = 1; k + 1 < r.bulks.size(); ++k) {
    const auto& prev = r.bulks[k - 1];
    const double window_ms = 10 + (prev.gen_seconds + prev.exec_seconds) * 1000.0;
    CHECK(std::abs(static_cast<double>(r.bulks[k].size) - window_ms * 20) <= 2);
  }
  CHECK(r.avg_response_ms > 0);
}

TEST_CASE("max_size one runs one txn per bulk") {
  WorkloadSpec s;
  s.txn_count = 50;
  PlannerConfig pc;
  pc.max_size = 1;
  const ExecReport r = bench(s, pc);
  CHECK(r.bulks.size() == 50);
  CHECK(r.ok());
}

TEST_CASE("mixed generator handles a lone account in the last group") {
  WorkloadSpec s;
  s.kind = WorkloadKind::mixed;
  s.tuple_count = kMixedGroup + 1;
  s.cross_rate = 0;
  s.txn_count = 2000;
  const Workload w = generate_workload(s);
  CHECK(w.txns.size() == 2000);
}
