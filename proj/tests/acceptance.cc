// Acceptance run: one PASS/FAIL line per property. Exit status is non-zero
// when any line fails.
//
//   acceptance [--only <n>] [--scale <f>]
//
// --scale shrinks the randomized corpora (1 = full size).

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "bulktx/bench.h"
#include "bulktx/executors.h"
#include "bulktx/planner.h"
#include "bulktx/workloads.h"
#include "fixtures.h"
#include "oracles.h"

using namespace bulktx;

namespace {

// Tolerances and corpus sizes.
constexpr std::size_t kEquivalenceWorkloads = 1000;
constexpr std::size_t kMaxWorkloadTxns = 10000;
constexpr std::size_t kRandomPools = 10000;
constexpr std::size_t kMaxPoolTxns = 1000;
constexpr std::size_t kExhaustiveTxns = 5;
constexpr std::size_t kExhaustiveItems = 3;
constexpr std::size_t kBrutePairLimit = 60;  // pools up to this size also get the O(n^3) edge check
const std::vector<std::size_t> kLaneCounts = {1, 4, 64, 1024};
constexpr auto kWatchdog = std::chrono::seconds(60);
constexpr std::size_t kRelaxedRuns = 1000;
constexpr std::size_t kGroupingBulks = 40;
constexpr int kTrendRuns = 5;
constexpr std::size_t kTrendLanes = 16;
constexpr double kTrendAlpha = 0.9;
constexpr std::size_t kRecoveryRuns = 300;

double scale = 1.0;
std::size_t scaled(std::size_t n) { return std::max<std::size_t>(1, static_cast<std::size_t>(n * scale)); }

struct Verdict {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

// -------------------------------------------------------------- helpers

std::map<TxnId, TxnStatus> by_id(std::span<const TxnSignature> txns, const std::vector<TxnStatus>& st) {
  std::map<TxnId, TxnStatus> m;
  for (std::size_t i = 0; i < txns.size(); ++i) m[txns[i].id] = st[i];
  return m;
}

struct Driven {
  std::map<TxnId, TxnStatus> status;
  Snapshot snap;
  std::vector<TxnId> serial;
  std::vector<TxnId> cascaded;
};

// Feeds the whole workload through the planner and executes bulk by bulk.
Driven drive(const ColumnStore& initial, const TypeRegistry& reg, std::span<const TxnSignature> txns,
             const PlannerConfig& pc, const std::unordered_set<TxnId>* forced) {
  ColumnStore store = initial;
  ExecutorConfig cfg = pc.exec;
  cfg.trace = cfg.trace || (!pc.auto_strategy && (cfg.strategy == Strategy::tpl_relaxed ||
                                                  cfg.strategy == Strategy::part_relaxed));
  Engine engine(cfg);
  ExecEnv env = engine.env(store, reg, forced);
  TxnPool pool(reg);
  for (const auto& t : txns) pool.submit_signature(t);
  BulkPlanner planner(reg, pc);
  Driven d;
  while (!pool.empty() || planner.held() > 0) {
    const Bulk b = planner.generate(pool);
    const ExecOutcome out = execute_planned(env, b, cfg, &d.serial);
    for (std::size_t i = 0; i < out.txns.size(); ++i) d.status[out.txns[i]] = out.status[i];
    d.cascaded.insert(d.cascaded.end(), out.cascaded.begin(), out.cascaded.end());
  }
  d.snap = store.snapshot();
  return d;
}

const TxnSignature& find_sig(std::span<const TxnSignature> txns, TxnId id) {
  auto it = std::lower_bound(txns.begin(), txns.end(), id, [](const TxnSignature& s, TxnId v) { return s.id < v; });
  return *it;
}

// ------------------------------------------------------------ properties

// Final snapshot and per-txn status of every strategy equal sequential
// execution in id order (serial order for the relaxed variants).
Verdict sequential_equivalence() {
  Verdict v;
  std::mt19937_64 rng(1001);
  const std::vector<std::string> strategies = {"tpl", "part", "kset", "tpl-relaxed", "part-relaxed", "auto"};
  std::size_t total_txns = 0, aborted = 0, runs = 0;
  const std::size_t n = scaled(kEquivalenceWorkloads);
  for (std::size_t w = 0; w < n && v.ok; ++w) {
    WorkloadSpec spec;
    const auto pick = rng() % 10;
    spec.kind = pick < 5 ? WorkloadKind::mixed
                         : pick < 7 ? WorkloadKind::tm1_like
                                    : pick < 8 ? WorkloadKind::tpcb_like : WorkloadKind::micro;
    spec.seed = rng();
    spec.txn_count = w % 50 == 0 ? 1 + rng() % kMaxWorkloadTxns : 1 + rng() % 1500;
    spec.abort_rate = static_cast<double>(rng() % 20) / 100.0;
    spec.tuple_count = 16 + rng() % 512;
    spec.f = 1 + rng() % 6;
    spec.T = 1 + rng() % 12;
    spec.x = rng() % 2;
    spec.alpha = static_cast<double>(rng() % 11) / 10.0;
    spec.cross_rate = static_cast<double>(rng() % 5) / 10.0;
    spec.with_scan = rng() % 3 == 0;
    if (spec.kind == WorkloadKind::tm1_like) spec.tuple_count = 16 + rng() % 64;
    const Benchmark b = make_benchmark(spec);
    Workload wl = generate_workload(spec);
    // Only two-phase txns are made to abort: an abort after writing is the
    // recovery property's business.
    std::unordered_set<TxnId> forced;
    for (auto& t : wl.txns) {
      if (!b.registry.get(t.type).is_two_phase) {
        t.params.back() = 0;
      } else if (rng() % 25 == 0) {
        forced.insert(t.id);
      }
    }
    ColumnStore seq_store = b.store;
    SeqOptions so;
    so.forced_aborts = &forced;
    const auto seq_status = by_id(wl.txns, execute_sequential(seq_store, b.registry, wl.txns, so));
    const Snapshot seq_snap = seq_store.snapshot();
    total_txns += wl.txns.size();
    for (auto& [id, s] : seq_status) aborted += s != TxnStatus::committed;

    for (const auto& name : strategies) {
      PlannerConfig pc;
      apply_setting(pc, "strategy", name);
      pc.exec.lane_count = 1 + rng() % 8;
      pc.exec.partition_size = b.partition_size * static_cast<Value>(1 + rng() % 3);
      pc.exec.lock_slots = rng() % 4 == 0 ? 64 + rng() % 4096 : 0;
      pc.exec.root_locks = rng() % 3 != 0;
      pc.exec.watchdog = kWatchdog;
      pc.grouping.type_count = b.type_count;
      pc.grouping.passes = static_cast<unsigned>(rng() % 3);
      pc.max_size = rng() % 3 == 0 ? 0 : 1 + rng() % 600;
      const bool relaxed = name == "tpl-relaxed" || name == "part-relaxed";
      std::ostringstream where;
      where << to_string(spec.kind) << " seed=" << spec.seed << " txns=" << spec.txn_count << " " << name
            << " lanes=" << pc.exec.lane_count;
      try {
        const Driven d = drive(b.store, b.registry, wl.txns, pc, &forced);
        ++runs;
        if (!d.cascaded.empty()) v.fail(where.str() + ": unexpected cascade");
        if (!relaxed) {
          if (d.status != seq_status) v.fail(where.str() + ": status vector differs");
          if (auto diff = compare_snapshots(d.snap, seq_snap)) v.fail(where.str() + ": snapshot differs at " + to_string(*diff));
        } else {
          std::vector<TxnSignature> ordered;
          for (TxnId id : d.serial) ordered.push_back(find_sig(wl.txns, id));
          ColumnStore s2 = b.store;
          SeqOptions o2;
          o2.forced_aborts = &forced;
          o2.any_order = true;
          const auto st = by_id(ordered, execute_sequential(s2, b.registry, ordered, o2));
          if (d.status != st) v.fail(where.str() + ": status vector differs from serial order");
          if (auto diff = compare_snapshots(d.snap, s2.snapshot())) v.fail(where.str() + ": snapshot differs at " + to_string(*diff));
        }
      } catch (const std::exception& e) {
        v.fail(where.str() + ": " + e.what());
      }
    }
  }
  if (v.ok) {
    v.detail = std::to_string(n) + " workloads, " + std::to_string(runs) + " runs, " + std::to_string(total_txns) +
               " txns, " + std::to_string(aborted) + " aborted in the oracle";
  }
  return v;
}

// Checks one pool: ranks against graph depths and a brute DP over the
// conflict relation; properties 1 and 2 by pair checks; edges by brute force
// on small pools.
struct PoolCheck {
  bool ranks_ok = true;
  bool props_ok = true;
  std::string why;
};

PoolCheck check_pool(std::span<const TxnId> txns, std::span<const BasicOp> ops) {
  PoolCheck r;
  const auto pool = oracle::make_pool(txns, ops);
  const std::size_t n = txns.size();
  std::vector<std::uint32_t> brute(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (pool.conflict[i][j]) brute[j] = std::max(brute[j], brute[i] + 1);
    }
  }
  const TDependencyGraph g = build_graph(txns, ops);
  const auto graph_depth = longest_path_depths(g);
  const RankTable ranks = compute_ranks(txns, ops);
  if (graph_depth != brute) {
    r.ranks_ok = false;
    r.why = "graph depth differs from brute depth";
  } else if (ranks.depth != graph_depth) {
    r.ranks_ok = false;
    r.why = "rank depth differs from graph depth";
  }
  if (n <= kBrutePairLimit) {
    const auto e = oracle::edges(pool);
    std::set<std::pair<std::uint32_t, std::uint32_t>> got(g.edges.begin(), g.edges.end());
    if (got != e) {
      r.ranks_ok = false;
      r.why = "edges differ from brute-force edges";
    }
  }
  if (!oracle::same_level_conflict_free(pool, ranks.depth)) {
    r.props_ok = false;
    r.why = "two txns of one k-set conflict";
  }
  if (!oracle::has_parent_level(pool, ranks.depth)) {
    r.props_ok = false;
    r.why = "a k-set txn has no conflicting txn in the (k-1)-set";
  }
  return r;
}

struct CorpusResult {
  Verdict ranks, props;
};

CorpusResult graph_corpus() {
  CorpusResult res;
  std::size_t exhaustive = 0, randomized = 0;
  auto note = [&](const PoolCheck& c, const std::string& where) {
    if (!c.ranks_ok) res.ranks.fail(where + ": " + c.why);
    if (!c.props_ok) res.props.fail(where + ": " + c.why);
  };
  // Every pool of up to 5 txns over up to 3 items, each txn touching each
  // item not at all, by a read, or by a write (at least one item touched).
  std::vector<TxnId> txns;
  std::vector<BasicOp> ops;
  for (std::size_t items = 1; items <= kExhaustiveItems; ++items) {
    std::size_t patterns = 1;
    for (std::size_t i = 0; i < items; ++i) patterns *= 3;
    --patterns;  // drop the empty footprint
    for (std::size_t n = 1; n <= kExhaustiveTxns; ++n) {
      std::size_t total = 1;
      for (std::size_t i = 0; i < n; ++i) total *= patterns;
      for (std::size_t code = 0; code < total; ++code) {
        txns.clear();
        ops.clear();
        std::size_t c = code;
        for (std::size_t t = 0; t < n; ++t) {
          std::size_t p = c % patterns + 1;
          c /= patterns;
          txns.push_back(t);
          for (std::size_t it = 0; it < items; ++it, p /= 3) {
            if (p % 3 == 1) ops.push_back({{0, 1, it}, t, AccessMode::read});
            if (p % 3 == 2) ops.push_back({{0, 1, it}, t, AccessMode::write});
          }
        }
        note(check_pool(txns, ops), "exhaustive pool n=" + std::to_string(n) + " items=" + std::to_string(items) +
                                        " code=" + std::to_string(code));
        ++exhaustive;
      }
    }
  }
  std::mt19937_64 rng(2002);
  const std::size_t pools = scaled(kRandomPools);
  for (std::size_t k = 0; k < pools; ++k) {
    const std::size_t n = k % 20 == 0 ? 1 + rng() % kMaxPoolTxns : 1 + rng() % 120;
    const std::uint64_t items = 1 + rng() % (k % 2 ? 8 : 4 * n + 1);
    const double wr = static_cast<double>(rng() % 101) / 100.0;
    std::uniform_real_distribution<double> u(0, 1);
    txns.clear();
    ops.clear();
    TxnId id = rng() % 100;
    for (std::size_t t = 0; t < n; ++t) {
      txns.push_back(id);
      const std::size_t m = rng() % 5;  // empty footprints included
      for (std::size_t j = 0; j < m; ++j) {
        ops.push_back({{static_cast<TableId>(rng() % 2), 1, rng() % items}, id, u(rng) < wr ? AccessMode::write : AccessMode::read});
      }
      id += 1 + rng() % 4;
    }
    std::shuffle(ops.begin(), ops.end(), rng);
    note(check_pool(txns, ops), "random pool " + std::to_string(k));
    ++randomized;
  }
  const std::string d = std::to_string(exhaustive) + " exhaustive + " + std::to_string(randomized) + " random pools";
  if (res.ranks.ok) res.ranks.detail = d;
  if (res.props.ok) res.props.detail = d;
  return res;
}

// Four txns: T1 writes a; T2 reads a, writes b; T3 reads a, writes c;
// T4 writes a, reads b and c.
Verdict diamond_fixture() {
  Verdict v;
  const DataItemId a{0, 1, 0}, b{0, 1, 1}, c{0, 1, 2};
  constexpr auto R = AccessMode::read;
  constexpr auto W = AccessMode::write;
  const std::vector<TxnId> t = {1, 2, 3, 4};
  const std::vector<BasicOp> ops = {{a, 1, W}, {a, 2, R}, {b, 2, W}, {a, 3, R},
                                    {c, 3, W}, {a, 4, W}, {b, 4, R}, {c, 4, R}};
  const TDependencyGraph g = build_graph(t, ops);
  const std::vector<std::pair<std::uint32_t, std::uint32_t>> want = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};
  if (g.edges != want) v.fail("edges differ");
  if (g.has_edge(1, 4)) v.fail("T1->T4 edge present");
  if (compute_ranks(t, ops).depth != std::vector<std::uint32_t>{0, 1, 1, 2}) v.fail("depths differ");
  if (longest_path_depths(g) != std::vector<std::uint32_t>{0, 1, 1, 2}) v.fail("graph depths differ");

  // The same shape on the key-value schema, through K-SET and the planner.
  auto kv = fixture::make_kv(4);
  const std::vector<TxnSignature> sigs = {{1, fixture::kScript, {0, 0, 1}},
                                          {2, fixture::kScript, {0, 0, 0, 1, 1}},
                                          {3, fixture::kScript, {0, 0, 0, 2, 1}},
                                          {4, fixture::kScript, {0, 0, 1, 1, 0, 2, 0}}};
  ExecutorConfig cfg;
  cfg.strategy = Strategy::kset;
  Engine engine(cfg);
  ColumnStore store = kv.store;
  ExecEnv env = engine.env(store, kv.registry);
  const ExecOutcome out = exec_kset(env, sigs, cfg);
  const std::vector<std::vector<TxnId>> rounds = {{1}, {2, 3}, {4}};
  if (out.rounds != rounds) v.fail("K-SET rounds differ");
  PlannerConfig pc;
  pc.exec.strategy = Strategy::kset;
  TxnPool pool(kv.registry);
  for (const auto& s : sigs) pool.submit_signature(s);
  BulkPlanner planner(kv.registry, pc);
  const Bulk first = planner.generate(pool);
  if (first.size() != 1 || first.segments[0].txns[0].id != 1) v.fail("first K-SET bulk is not {T1}");
  if (v.ok) v.detail = "edges, depths (0,1,1,2), rounds {T1},{T2,T3},{T4}";
  return v;
}

// Per-item traces of TPL are in txn-id order for conflicting accesses; no run
// hits the watchdog.
Verdict tpl_order_and_liveness() {
  Verdict v;
  std::size_t runs = 0, events = 0;
  double slowest = 0;
  for (std::size_t lanes : kLaneCounts) {
    for (auto kind : {WorkloadKind::micro, WorkloadKind::tpcb_like, WorkloadKind::tm1_like, WorkloadKind::mixed}) {
      for (bool roots : {true, false}) {
        WorkloadSpec spec;
        spec.kind = kind;
        spec.alpha = 0.9;
        spec.x = 1;
        spec.tuple_count = 256;
        spec.f = 4;
        spec.txn_count = scaled(3000);
        spec.abort_rate = 0.05;
        spec.with_scan = true;
        spec.seed = 5000 + lanes;
        const Benchmark b = make_benchmark(spec);
        Workload wl = generate_workload(spec);
        for (auto& t : wl.txns) {
          if (!b.registry.get(t.type).is_two_phase) t.params.back() = 0;
        }
        ExecutorConfig cfg;
        cfg.lane_count = lanes;
        cfg.trace = true;
        cfg.root_locks = roots;
        cfg.watchdog = kWatchdog;
        std::ostringstream where;
        where << to_string(kind) << " lanes=" << lanes << (roots ? " root locks" : " item locks");
        try {
          ColumnStore store = b.store;
          Engine engine(cfg);
          ExecEnv env = engine.env(store, b.registry);
          const auto t0 = std::chrono::steady_clock::now();
          const ExecOutcome out = exec_tpl(env, wl.txns, cfg);
          slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
          std::string why;
          if (!check_conflict_order(out.trace, &why)) v.fail(where.str() + ": " + why);
          ColumnStore seq = b.store;
          execute_sequential(seq, b.registry, wl.txns);
          if (auto diff = compare_snapshots(store.snapshot(), seq.snapshot())) {
            v.fail(where.str() + ": snapshot differs at " + to_string(*diff));
          }
          events += out.trace.size();
          ++runs;
        } catch (const std::exception& e) {
          v.fail(where.str() + ": " + e.what());
        }
      }
    }
  }
  if (v.ok) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu runs, %zu traced accesses, slowest %.2f s", runs, events, slowest);
    v.detail = buf;
  }
  return v;
}

// Relaxed variants: acyclic precedence graph from the trace; sort-free
// partition schedule has the sorted schedule's partition contents.
Verdict relaxed_variants() {
  Verdict v;
  std::mt19937_64 rng(6006);
  const std::size_t n = scaled(kRelaxedRuns);
  std::size_t edges = 0;
  for (std::size_t k = 0; k < n && v.ok; ++k) {
    const Value rows = 16 + static_cast<Value>(rng() % 512);
    auto kv = fixture::make_kv(rows);
    fixture::GenOptions g;
    g.txns = 1 + rng() % 400;
    g.rows = rows;
    g.max_keys = 1 + rng() % 4;
    g.write_rate = static_cast<double>(rng() % 101) / 100.0;
    g.fail_rate = 0.05;
    g.block = k % 2 ? 0 : std::max<Value>(1, rows / static_cast<Value>(1 + rng() % 16));
    const auto txns = fixture::random_txns(rng, g);
    ExecutorConfig cfg;
    cfg.strategy = k % 2 ? Strategy::tpl_relaxed : Strategy::part_relaxed;
    cfg.lane_count = 1 + rng() % 8;
    cfg.lock_slots = rng() % 3 == 0 ? 16 + rng() % 512 : 0;
    cfg.partition_size = g.block > 0 ? g.block : rows;
    cfg.trace = true;
    cfg.watchdog = kWatchdog;
    const std::string where = std::string(to_string(cfg.strategy)) + " run " + std::to_string(k);
    try {
      ColumnStore store = kv.store;
      Engine engine(cfg);
      ExecEnv env = engine.env(store, kv.registry);
      const ExecOutcome out = execute_bulk(env, txns, cfg);
      const SerializationCheck chk = check_serializable(out.trace);
      edges += chk.edges;
      if (!chk.acyclic) v.fail(where + ": precedence graph has a cycle");
      for (Value ps : {cfg.partition_size, static_cast<Value>(1 + rng() % 64)}) {
        std::vector<TxnSignature> single;
        for (const auto& t : txns) {
          if (kv.registry.partition_of(t, ps)) single.push_back(t);
        }
        const auto sorted = part_schedule(kv.registry, single, ps);
        const auto relaxed = exec_part_relaxed_gen(env, single, ps);
        if (!same_partition_contents(sorted, relaxed)) v.fail(where + ": partition contents differ");
      }
    } catch (const std::exception& e) {
      v.fail(where + ": " + e.what());
    }
  }
  if (v.ok) v.detail = std::to_string(n) + " runs, " + std::to_string(edges) + " precedence edges, no cycle";
  return v;
}

// Grouping: permutation; divergence within T-1 at full passes; divergence
// non-increasing in the pass count.
Verdict grouping() {
  Verdict v;
  std::mt19937_64 rng(7007);
  std::size_t bulks = 0;
  for (std::size_t k = 0; k < kGroupingBulks; ++k) {
    GroupingConfig g;
    g.type_count = k < kGroupingBulks / 2 ? 16 : std::size_t{2} << (rng() % 6);
    g.bits_per_pass = k < kGroupingBulks / 2 ? 2 : 1 + static_cast<unsigned>(rng() % 3);
    const std::size_t warp = k < kGroupingBulks / 2 ? 32 : std::size_t{4} << (rng() % 4);
    std::vector<TxnSignature> bulk;
    const std::size_t n = 64 + rng() % 4000;
    for (std::size_t i = 0; i < n; ++i) bulk.push_back({i, static_cast<TypeId>(rng() % g.type_count), {}});
    std::size_t prev = SIZE_MAX;
    for (unsigned p = 0; p <= g.full_passes(); ++p) {
      g.passes = p;
      const auto grouped = group_by_type(bulk, g);
      std::vector<TxnId> ids;
      for (const auto& s : grouped) ids.push_back(s.id);
      std::sort(ids.begin(), ids.end());
      for (std::size_t i = 0; i < n; ++i) {
        if (ids[i] != i) {
          v.fail("not a permutation");
          break;
        }
      }
      const std::size_t d = divergence(grouped, warp);
      if (d > prev) v.fail("divergence rose from " + std::to_string(prev) + " to " + std::to_string(d) + " at pass " + std::to_string(p));
      prev = d;
      if (p == g.full_passes() && d > g.type_count - 1) {
        v.fail("full-pass divergence " + std::to_string(d) + " exceeds T-1");
      }
    }
    ++bulks;
  }
  if (v.ok) v.detail = std::to_string(bulks) + " bulks";
  return v;
}

// Chooser against the rule table, over every ordering of each statistic
// relative to its threshold.
Verdict chooser() {
  Verdict v;
  // (w0 >= w0_bar, c <= c_bar, d >= d_bar) -> strategy
  const std::map<std::tuple<bool, bool, bool>, Strategy> table = {
      {{true, false, false}, Strategy::kset}, {{true, false, true}, Strategy::kset},
      {{true, true, false}, Strategy::kset},  {{true, true, true}, Strategy::kset},
      {{false, true, false}, Strategy::part}, {{false, true, true}, Strategy::part},
      {{false, false, true}, Strategy::part}, {{false, false, false}, Strategy::tpl},
  };
  std::size_t cases = 0;
  for (std::size_t wb : {0, 1, 2, 5, 64}) {
    for (std::size_t cb : {0, 1, 3, 40}) {
      for (std::size_t db : {0, 1, 4, 100}) {
        const StrategyThresholds t{wb, cb, db};
        for (std::size_t w0 = (wb > 2 ? wb - 2 : 0); w0 <= wb + 2; ++w0) {
          for (std::size_t c = (cb > 2 ? cb - 2 : 0); c <= cb + 2; ++c) {
            for (std::uint32_t d = (db > 2 ? static_cast<std::uint32_t>(db) - 2 : 0); d <= db + 2; ++d) {
              const Strategy want = table.at({w0 >= wb, c <= cb, d >= db});
              const Strategy got = choose_strategy({d, w0, c}, t);
              ++cases;
              if (got != want) {
                v.fail("w0=" + std::to_string(w0) + " c=" + std::to_string(c) + " d=" + std::to_string(d) + " gave " +
                       to_string(got));
              }
            }
          }
        }
      }
    }
  }
  if (v.ok) v.detail = std::to_string(cases) + " grid points";
  return v;
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return xs[xs.size() / 2];
}

double median_ktps(const WorkloadSpec& spec, const PlannerConfig& base, Verdict& v, const std::string& label) {
  const Benchmark b = make_benchmark(spec);
  const Workload w = generate_workload(spec);
  std::vector<double> xs;
  for (int r = 0; r < kTrendRuns; ++r) {
    BenchOptions o;
    o.planner = base;
    o.planner.grouping.type_count = b.type_count;
    const ExecReport rep = run_bench(b.store, b.registry, w, o);
    if (!rep.ok()) v.fail(label + ": run failed: " + rep.failure + rep.oracle_detail);
    xs.push_back(rep.throughput_ktps);
  }
  return median(xs);
}

// Orderings over medians; informational magnitudes are printed.
Verdict trends() {
  Verdict v;
  char buf[512];
  std::string detail;

  WorkloadSpec skew;
  skew.alpha = kTrendAlpha;
  skew.txn_count = scaled(4000);
  skew.tuple_count = 4096;
  skew.x = 16;
  PlannerConfig tpl;
  tpl.exec.lane_count = kTrendLanes;
  tpl.exec.strategy = Strategy::tpl;
  PlannerConfig kset = tpl;
  kset.exec.strategy = Strategy::kset;
  const double t_tpl = median_ktps(skew, tpl, v, "tpl alpha=0.9");
  const double t_kset = median_ktps(skew, kset, v, "kset alpha=0.9");
  if (!(t_kset >= t_tpl)) v.fail("K-SET below TPL at alpha=0.9");
  std::snprintf(buf, sizeof buf, "kset %.1f >= tpl %.1f ktps", t_kset, t_tpl);
  detail += buf;

  WorkloadSpec uni;
  uni.txn_count = scaled(3000);
  uni.tuple_count = 4096;
  uni.x = 4;
  PlannerConfig full;
  full.exec.lane_count = 4;
  PlannerConfig one = full;
  one.max_size = 1;
  const double t_full = median_ktps(uni, full, v, "full bulk");
  const double t_one = median_ktps(uni, one, v, "max_size=1");
  if (!(t_full > t_one)) v.fail("max_size=1 not slower than a full bulk");
  std::snprintf(buf, sizeof buf, "; full bulk %.1f > max_size=1 %.1f ktps", t_full, t_one);
  detail += buf;

  WorkloadSpec tp;
  tp.kind = WorkloadKind::tpcb_like;
  tp.f = 64;
  tp.txn_count = scaled(6000);
  const std::vector<Value> grid = {1, 4, 16, 64};
  std::vector<double> sweep;
  for (Value ps : grid) {
    PlannerConfig part;
    part.exec.lane_count = 8;
    part.exec.strategy = Strategy::part;
    part.exec.partition_size = ps;
    sweep.push_back(median_ktps(tp, part, v, "part psize=" + std::to_string(ps)));
  }
  const auto best = std::max_element(sweep.begin(), sweep.end());
  if (!(*best >= sweep.front() && *best >= sweep.back())) v.fail("partition-size optimum below an extreme");
  detail += "; part psize";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, " %lld:%.1f", static_cast<long long>(grid[i]), sweep[i]);
    detail += buf;
  }
  detail += " best=" + std::to_string(grid[static_cast<std::size_t>(best - sweep.begin())]);
  if (v.ok) v.detail = detail;
  else v.detail += " (" + detail + ")";
  return v;
}

// Aborts after writing: the strategies' repair equals sequential execution
// with the aborting txns and, for TPL, their graph descendants skipped.
Verdict recovery() {
  Verdict v;
  std::mt19937_64 rng(1010);
  std::size_t cascades = 0, undone = 0;
  const std::size_t n = scaled(kRecoveryRuns);
  for (std::size_t k = 0; k < n && v.ok; ++k) {
    const Value rows = 8 + static_cast<Value>(rng() % 128);
    auto kv = fixture::make_kv(rows);
    fixture::GenOptions g;
    g.txns = 1 + rng() % 250;
    g.rows = rows;
    g.max_keys = 1 + rng() % 3;
    g.fail_rate = 0.1;
    g.risky_rate = 0.3;
    g.block = k % 3 ? std::max<Value>(1, rows / 8) : 0;
    const auto txns = fixture::random_txns(rng, g);
    std::unordered_set<TxnId> forced;
    for (const auto& t : txns) {
      if (rng() % 20 == 0) forced.insert(t.id);
    }
    // Marked: risky txns that abort after writing something.
    std::vector<std::uint32_t> marked;
    for (std::uint32_t i = 0; i < txns.size(); ++i) {
      const auto& p = txns[i].params;
      bool writes = false;
      for (std::size_t j = 2; j < p.size(); j += 2) writes = writes || p[j] != 0;
      if (txns[i].type == fixture::kRisky && writes && (p[0] != 0 || forced.count(txns[i].id))) marked.push_back(i);
    }
    const PoolOps ops = collect_ops(kv.registry, txns);
    const auto pool = oracle::make_pool(ops.txns, ops.ops);
    const auto desc = oracle::descendants(txns.size(), oracle::edges(pool), marked);
    std::vector<TxnId> want_cascade;
    for (auto i : desc) want_cascade.push_back(txns[i].id);

    for (Strategy s : {Strategy::tpl, Strategy::part, Strategy::kset}) {
      ExecutorConfig cfg;
      cfg.strategy = s;
      cfg.lane_count = 1 + rng() % 6;
      cfg.partition_size = g.block > 0 ? g.block : rows;
      cfg.root_locks = rng() % 2;
      cfg.watchdog = kWatchdog;
      const std::string where = std::string(to_string(s)) + " run " + std::to_string(k);
      try {
        ColumnStore store = kv.store;
        Engine engine(cfg);
        ExecEnv env = engine.env(store, kv.registry, &forced);
        std::vector<TxnSignature> single;
        if (s == Strategy::part) {
          for (const auto& t : txns) {
            if (kv.registry.partition_of(t, cfg.partition_size)) single.push_back(t);
          }
        }
        const std::span<const TxnSignature> bulk = s == Strategy::part ? std::span<const TxnSignature>(single) : txns;
        const ExecOutcome out = execute_bulk(env, bulk, cfg);
        std::vector<TxnId> cascaded = out.cascaded;
        std::sort(cascaded.begin(), cascaded.end());
        std::unordered_set<TxnId> skip(cascaded.begin(), cascaded.end());
        if (s == Strategy::tpl) {
          if (cascaded != want_cascade) v.fail(where + ": cascade set differs from graph descendants");
        } else if (!cascaded.empty()) {
          v.fail(where + ": cascade outside TPL");
        }
        ColumnStore seq = kv.store;
        SeqOptions so;
        so.forced_aborts = &forced;
        so.skip = &skip;
        const auto st = execute_sequential(seq, kv.registry, bulk, so);
        for (std::size_t i = 0; i < bulk.size(); ++i) {
          TxnStatus got = out.status_of(bulk[i].id);
          if (got == TxnStatus::rolled_back) got = TxnStatus::aborted;
          if (got != st[i]) {
            v.fail(where + ": status of txn " + std::to_string(bulk[i].id) + " differs");
            break;
          }
        }
        if (auto diff = compare_snapshots(store.snapshot(), seq.snapshot())) {
          v.fail(where + ": snapshot differs at " + to_string(*diff));
        }
        cascades += cascaded.size();
        undone += static_cast<std::size_t>(std::count(out.status.begin(), out.status.end(), TxnStatus::aborted));
      } catch (const std::exception& e) {
        v.fail(where + ": " + e.what());
      }
    }
  }
  if (v.ok) {
    v.detail = std::to_string(n) + " pools x 3 strategies, " + std::to_string(undone) + " aborts, " +
               std::to_string(cascades) + " dependent rollbacks";
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance properties"};
  int only = 0;
  app.add_option("--only", only, "Run a single property (1-10)");
  app.add_option("--scale", scale, "Corpus scale factor")->check(CLI::Range(0.001, 1.0));
  CLI11_PARSE(app, argc, argv);

  std::optional<CorpusResult> corpus;
  auto corpus_part = [&](bool ranks) {
    if (!corpus) corpus = graph_corpus();
    return ranks ? corpus->ranks : corpus->props;
  };
  const std::vector<std::pair<std::string, std::function<Verdict()>>> props = {
      {"sequential equivalence", sequential_equivalence},
      {"rank depth equals graph depth", [&] { return corpus_part(true); }},
      {"k-set properties", [&] { return corpus_part(false); }},
      {"diamond fixture", diamond_fixture},
      {"TPL order and liveness", tpl_order_and_liveness},
      {"relaxed variants", relaxed_variants},
      {"type grouping", grouping},
      {"strategy chooser", chooser},
      {"throughput trends", trends},
      {"recovery", recovery},
  };
  int failed = 0;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (only != 0 && static_cast<std::size_t>(only) != i + 1) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = props[i].second();
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%-4s %2zu %-30s %s (%.1f s)\n", v.ok ? "PASS" : "FAIL", i + 1, props[i].first.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.ok;
  }
  return failed == 0 ? 0 : 1;
}
