#include "bulktx/executors.h"

#include <algorithm>
#include <array>
#include <map>
#include <mutex>
#include <numeric>
#include <unordered_map>

namespace bulktx {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct TxnRun {
  TxnStatus status = TxnStatus::committed;
  bool wrote = false;
  bool logged = false;
};

TxnRun run_one(ExecEnv& env, InsertBuffer& inserts, const TxnSignature& sig, std::vector<UndoRecord>& undo,
               AccessGuard* guard, AccessRecorder* recorder) {
  const TxnType& type = env.registry.get(sig.type);
  TxnContext ctx(env.store, inserts, sig, type);
  TxnRun r;
  r.logged = env.registry.needs_undo(sig.type);
  if (r.logged) ctx.set_undo(&undo);
  ctx.set_guard(guard);
  ctx.set_recorder(recorder);
  if (env.forced_aborts) ctx.set_forced_abort(env.forced_aborts->count(sig.id) != 0);
  r.status = run_procedure(ctx, type);
  r.wrote = ctx.wrote();
  return r;
}

// Lock-free strategies undo an abort on the spot: nothing that conflicts
// with the txn runs concurrently with it.
void settle_inline(ExecEnv& env, InsertBuffer& inserts, const TxnSignature& sig, const TxnRun& r,
                   std::vector<UndoRecord>& undo) {
  if (r.status != TxnStatus::committed) {
    if (r.wrote && !r.logged) {
      throw RecoveryError("txn " + std::to_string(sig.id) + " aborted after writing without an undo log");
    }
    apply_undo(env.store, undo);
    inserts.discard(sig.id);
  }
  undo.clear();
}

// Bulk positions of each lane: position p of `order` goes to lane p % M,
// each lane's share sorted by id.
std::vector<std::vector<std::uint32_t>> assign_lanes(std::size_t n, std::size_t lanes,
                                                     std::span<const std::uint32_t> order) {
  const std::size_t active = std::max<std::size_t>(1, std::min(lanes, n));
  std::vector<std::vector<std::uint32_t>> out(active);
  for (std::size_t p = 0; p < n; ++p) {
    out[p % active].push_back(order.empty() ? static_cast<std::uint32_t>(p) : order[p]);
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

ExecOutcome make_outcome(Strategy s, std::span<const TxnSignature> bulk, std::size_t lanes) {
  ExecOutcome out;
  out.strategy = s;
  out.txns.reserve(bulk.size());
  for (const TxnSignature& sig : bulk) out.txns.push_back(sig.id);
  out.status.assign(bulk.size(), TxnStatus::committed);
  out.lane_txns.assign(lanes, 0);
  return out;
}

void check_order(std::span<const TxnSignature> bulk) {
  for (std::size_t i = 1; i < bulk.size(); ++i) {
    if (bulk[i].id <= bulk[i - 1].id) throw SchedulingError("bulk not in id order");
  }
}

std::uint64_t lock_object(DataItemId item, std::span<const TableId> coarse) {
  if (std::find(coarse.begin(), coarse.end(), item.table) != coarse.end()) {
    return DataItemId::whole_table(item.table).encode();
  }
  return item.encode();
}

// First non-watchdog failure of a bulk; the poisoning it triggers makes the
// other lanes fail with WatchdogTimeout.
class FirstCause {
 public:
  void set(std::exception_ptr e) {
    std::lock_guard lock(mu_);
    if (!err_) err_ = e;
  }
  void rethrow_if_set() {
    if (err_) std::rethrow_exception(err_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr err_;
};

void finish_bulk(ExecEnv& env, InsertBuffer& inserts, ExecOutcome& out, Clock::time_point t0) {
  out.inserted = env.store.merge_inserts(inserts);
  out.tally();
  out.seconds = seconds_since(t0);
}

}  // namespace

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::tpl:
      return "tpl";
    case Strategy::part:
      return "part";
    case Strategy::kset:
      return "kset";
    case Strategy::tpl_relaxed:
      return "tpl-relaxed";
    case Strategy::part_relaxed:
      return "part-relaxed";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::tpl, Strategy::part, Strategy::kset, Strategy::tpl_relaxed, Strategy::part_relaxed}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

Engine::Engine(const ExecutorConfig& config)
    : lanes_(config.lane_count),
      locks_(config.lock_slots == 0 ? LockTable::exact() : LockTable::hashed(config.lock_slots)) {}

ExecEnv Engine::env(ColumnStore& store, const TypeRegistry& registry,
                    const std::unordered_set<TxnId>* forced_aborts) {
  return ExecEnv{store, registry, lanes_, locks_, watchdog_, forced_aborts};
}

void ExecOutcome::tally() {
  committed = aborted = rolled_back = 0;
  for (TxnStatus s : status) {
    if (s == TxnStatus::committed) ++committed;
    if (s == TxnStatus::aborted) ++aborted;
    if (s == TxnStatus::rolled_back) ++rolled_back;
  }
}

TxnStatus ExecOutcome::status_of(TxnId id) const {
  auto it = std::lower_bound(txns.begin(), txns.end(), id);
  if (it == txns.end() || *it != id) throw SchedulingError("no outcome for txn " + std::to_string(id));
  return status[static_cast<std::size_t>(it - txns.begin())];
}

void ExecOutcome::append(ExecOutcome&& other) {
  std::vector<std::pair<TxnId, TxnStatus>> all;
  all.reserve(txns.size() + other.txns.size());
  for (std::size_t i = 0; i < txns.size(); ++i) all.emplace_back(txns[i], status[i]);
  for (std::size_t i = 0; i < other.txns.size(); ++i) all.emplace_back(other.txns[i], other.status[i]);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  txns.clear();
  status.clear();
  for (auto [id, s] : all) {
    txns.push_back(id);
    status.push_back(s);
  }
  inserted += other.inserted;
  seconds += other.seconds;
  if (lane_txns.size() < other.lane_txns.size()) lane_txns.resize(other.lane_txns.size(), 0);
  for (std::size_t i = 0; i < other.lane_txns.size(); ++i) lane_txns[i] += other.lane_txns[i];
  for (auto& r : other.rounds) rounds.push_back(std::move(r));
  cascaded.insert(cascaded.end(), other.cascaded.begin(), other.cascaded.end());
  trace.insert(trace.end(), other.trace.begin(), other.trace.end());
  tally();
}

// --------------------------------------------------------------------- TPL

TplPlan plan_tpl(const TypeRegistry& registry, std::span<const TxnSignature> bulk, LockTable& locks,
                 bool allow_root_locks) {
  TplPlan plan;
  plan.txns.resize(bulk.size());
  std::vector<Footprint> fps;
  fps.reserve(bulk.size());
  for (const TxnSignature& sig : bulk) {
    fps.push_back(registry.declared_ops(sig));
    for (auto [t, mode] : fps.back().unknown) plan.coarse.push_back(t);
  }
  std::sort(plan.coarse.begin(), plan.coarse.end());
  plan.coarse.erase(std::unique(plan.coarse.begin(), plan.coarse.end()), plan.coarse.end());

  std::vector<std::vector<DataItemId>> roots(bulk.size());
  plan.root_locking = allow_root_locks && plan.coarse.empty() && !bulk.empty();
  for (std::size_t i = 0; i < bulk.size() && plan.root_locking; ++i) {
    const TxnType& type = registry.get(bulk[i].type);
    if (type.lock_roots) roots[i] = type.lock_roots(bulk[i].params);
    if (roots[i].empty()) plan.root_locking = false;
  }

  std::unordered_map<std::uint32_t, std::uint32_t> next_key;
  for (std::size_t i = 0; i < bulk.size(); ++i) {
    TplTxnPlan& tp = plan.txns[i];
    auto entry_for = [&](std::uint64_t object) -> KeyedLockRequest& {
      for (auto& [obj, idx] : tp.objects) {
        if (obj == object) return tp.locks[idx];
      }
      const std::uint32_t slot = locks.slot_of(object);
      for (std::uint32_t k = 0; k < tp.locks.size(); ++k) {
        if (tp.locks[k].slot == slot) {
          tp.objects.emplace_back(object, k);
          return tp.locks[k];
        }
      }
      tp.objects.emplace_back(object, static_cast<std::uint32_t>(tp.locks.size()));
      tp.locks.push_back({slot, next_key[slot]++, 0});
      return tp.locks.back();
    };
    if (plan.root_locking) {
      for (const DataItemId& r : roots[i]) entry_for(r.encode()).count = KeyedLockRequest::kHold;
    } else {
      for (const ItemAccess& a : fps[i].accesses) {
        KeyedLockRequest& req = entry_for(lock_object(a.item, plan.coarse));
        if (req.count != KeyedLockRequest::kHold) ++req.count;
      }
      for (auto [t, mode] : fps[i].unknown) {
        entry_for(DataItemId::whole_table(t).encode()).count = KeyedLockRequest::kHold;
      }
    }
    std::sort(tp.locks.begin(), tp.locks.end(),
              [](const KeyedLockRequest& a, const KeyedLockRequest& b) { return a.slot < b.slot; });
    // Re-point objects after sorting.
    for (auto& [obj, idx] : tp.objects) {
      const std::uint32_t slot = locks.slot_of(obj);
      for (std::uint32_t k = 0; k < tp.locks.size(); ++k) {
        if (tp.locks[k].slot == slot) idx = k;
      }
    }
  }
  plan.slots.reserve(next_key.size());
  for (auto [slot, n] : next_key) plan.slots.push_back(slot);
  std::sort(plan.slots.begin(), plan.slots.end());
  return plan;
}

namespace {

class TplGuard final : public AccessGuard {
 public:
  TplGuard(const TplTxnPlan& plan, LockTable& locks, std::span<const TableId> coarse, bool root)
      : plan_(plan), locks_(locks), coarse_(coarse), root_(root), state_(plan.locks.size()) {
    for (std::size_t k = 0; k < plan.locks.size(); ++k) state_[k].remaining = plan.locks[k].count;
  }

  void acquire_all() {
    for (std::size_t k = 0; k < plan_.locks.size(); ++k) acquire(k);
  }

  void before(DataItemId item, AccessMode) override {
    if (root_) return;
    const std::size_t k = find(item);
    if (state_[k].released) throw FootprintViolation("access to " + to_string(item) + " after its lock was released");
    if (!state_[k].acquired) acquire(k);
  }

  void after(DataItemId item) override {
    if (root_) return;
    const std::size_t k = find(item);
    State& s = state_[k];
    if (s.remaining == KeyedLockRequest::kHold) return;
    if (--s.remaining == 0) release(k);
  }

  // Completes the key protocol for every slot, acquired or not.
  void finish() {
    for (std::size_t k = 0; k < plan_.locks.size(); ++k) {
      if (state_[k].released) continue;
      if (!state_[k].acquired) acquire(k);
      release(k);
    }
  }

 private:
  struct State {
    std::uint32_t remaining = 0;
    bool acquired = false;
    bool released = false;
  };

  std::size_t find(DataItemId item) const {
    const std::uint64_t obj = lock_object(item, coarse_);
    for (const auto& [o, idx] : plan_.objects) {
      if (o == obj) return idx;
    }
    throw FootprintViolation("undeclared access to " + to_string(item));
  }

  void acquire(std::size_t k) {
    wait_for_value(locks_.counter(plan_.locks[k].slot), plan_.locks[k].key);
    state_[k].acquired = true;
  }

  void release(std::size_t k) {
    auto& c = locks_.counter(plan_.locks[k].slot);
    c.fetch_add(1, std::memory_order_acq_rel);
    c.notify_all();
    state_[k].released = true;
  }

  const TplTxnPlan& plan_;
  LockTable& locks_;
  std::span<const TableId> coarse_;
  bool root_;
  std::vector<State> state_;
};

}  // namespace

ExecOutcome exec_tpl(ExecEnv& env, std::span<const TxnSignature> bulk, const ExecutorConfig& config,
                     std::span<const std::uint32_t> lane_order) {
  check_order(bulk);
  const auto t0 = Clock::now();
  ExecOutcome out = make_outcome(Strategy::tpl, bulk, env.lanes.size());
  const std::size_t n = bulk.size();
  if (n == 0) {
    out.seconds = seconds_since(t0);
    return out;
  }
  TplPlan plan = plan_tpl(env.registry, bulk, env.locks, config.root_locks);
  InsertBuffer inserts;
  UndoLog undo;
  undo.resize(n);
  std::vector<std::uint8_t> wrote(n, 0), logged(n, 0);
  std::optional<TraceCollector> collector;
  if (config.trace) collector.emplace(env.lanes.size());
  const auto lanes = assign_lanes(n, env.lanes.size(), lane_order);

  FirstCause cause;
  env.watchdog.arm(config.watchdog, [&locks = env.locks] { locks.poison_all(); });
  std::exception_ptr failure;
  try {
    env.lanes.run(lanes.size(), [&](std::size_t lane) {
      try {
        for (std::uint32_t i : lanes[lane]) {
          TplGuard guard(plan.txns[i], env.locks, plan.coarse, plan.root_locking);
          if (plan.root_locking) guard.acquire_all();
          const TxnRun r = run_one(env, inserts, bulk[i], undo.records(i), &guard, collector ? &*collector : nullptr);
          guard.finish();
          out.status[i] = r.status;
          wrote[i] = r.wrote;
          logged[i] = r.logged;
          ++out.lane_txns[lane];
        }
      } catch (const WatchdogTimeout&) {
        throw;
      } catch (...) {
        cause.set(std::current_exception());
        env.locks.poison_all();
        throw;
      }
    });
  } catch (...) {
    failure = std::current_exception();
  }
  const bool fired = env.watchdog.disarm();
  env.locks.reset(plan.slots);
  cause.rethrow_if_set();
  if (fired) throw WatchdogTimeout("TPL bulk exceeded the watchdog budget");
  if (failure) std::rethrow_exception(failure);

  // Committed logs stay until recovery: a committed descendant of a marked
  // txn is rolled back too.
  bool any_marked = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (out.status[i] == TxnStatus::committed) continue;
    if (wrote[i]) {
      undo.mark(i);
      any_marked = true;
    } else {
      inserts.discard(bulk[i].id);
    }
  }
  if (any_marked) {
    const TDependencyGraph g = build_graph(collect_ops(env.registry, bulk));
    const RecoveryResult rec = recover(env.store, inserts, undo, &g, bulk, out.status, wrote, logged, true);
    for (std::uint32_t i : rec.cascaded) out.cascaded.push_back(bulk[i].id);
  }
  if (collector) out.trace = collector->events();
  finish_bulk(env, inserts, out, t0);
  return out;
}

// -------------------------------------------------------------------- PART

PartitionSchedule part_schedule(const TypeRegistry& registry, std::span<const TxnSignature> bulk,
                                Value partition_size) {
  if (partition_size <= 0) throw SchedulingError("partition size must be positive");
  PartitionSchedule s;
  s.sorted = true;
  s.P.reserve(bulk.size());
  for (std::size_t i = 0; i < bulk.size(); ++i) {
    auto p = registry.partition_of(bulk[i], partition_size);
    if (!p) throw SchedulingError("txn " + std::to_string(bulk[i].id) + " is cross-partition");
    s.P.emplace_back(*p, static_cast<std::uint32_t>(i));
  }
  if (s.P.empty()) return s;
  // LSD radix sort on (partition - min), 8 bits per pass; stable, so ids
  // stay ascending within a partition.
  Value lo = s.P.front().first, hi = lo;
  for (auto& e : s.P) {
    lo = std::min(lo, e.first);
    hi = std::max(hi, e.first);
  }
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
  std::vector<std::pair<Value, std::uint32_t>> tmp(s.P.size());
  for (unsigned shift = 0; shift < 64 && (span >> shift) != 0; shift += 8) {
    std::array<std::size_t, 257> count{};
    auto digit = [&](const std::pair<Value, std::uint32_t>& e) {
      return ((static_cast<std::uint64_t>(e.first) - static_cast<std::uint64_t>(lo)) >> shift) & 0xFF;
    };
    for (auto& e : s.P) ++count[digit(e) + 1];
    for (std::size_t d = 1; d < count.size(); ++d) count[d] += count[d - 1];
    for (auto& e : s.P) tmp[count[digit(e)]++] = e;
    s.P.swap(tmp);
  }
  for (std::size_t i = 0; i < s.P.size(); ++i) {
    if (i == 0 || s.P[i].first != s.P[i - 1].first) s.partitions.push_back(s.P[i].first);
  }
  for (Value p : s.partitions) {
    auto lo_it = std::lower_bound(s.P.begin(), s.P.end(), p, [](const auto& e, Value v) { return e.first < v; });
    auto hi_it = std::upper_bound(s.P.begin(), s.P.end(), p, [](Value v, const auto& e) { return v < e.first; });
    s.bounds.emplace_back(static_cast<std::uint32_t>(lo_it - s.P.begin()),
                          static_cast<std::uint32_t>(hi_it - s.P.begin()));
  }
  return s;
}

PartitionSchedule exec_part_relaxed_gen(ExecEnv& env, std::span<const TxnSignature> bulk, Value partition_size) {
  if (partition_size <= 0) throw SchedulingError("partition size must be positive");
  PartitionSchedule s;
  const std::size_t n = bulk.size();
  if (n == 0) return s;
  std::vector<Value> part(n);
  std::vector<std::uint32_t> group(n);
  std::unordered_map<Value, std::uint32_t> dense;
  for (std::size_t i = 0; i < n; ++i) {
    auto p = env.registry.partition_of(bulk[i], partition_size);
    if (!p) throw SchedulingError("txn " + std::to_string(bulk[i].id) + " is cross-partition");
    part[i] = *p;
    auto [it, inserted] = dense.try_emplace(*p, static_cast<std::uint32_t>(s.partitions.size()));
    if (inserted) s.partitions.push_back(*p);
    group[i] = it->second;
  }
  const std::size_t groups = s.partitions.size();
  auto counters = std::make_unique<std::atomic<std::uint32_t>[]>(groups);
  for (std::size_t g = 0; g < groups; ++g) counters[g].store(0, std::memory_order_relaxed);
  std::vector<std::uint32_t> pos(n);
  const std::size_t lanes = std::min(env.lanes.size(), n);
  env.lanes.run(lanes, [&](std::size_t lane) {
    for (std::size_t i = lane; i < n; i += lanes) pos[i] = counters[group[i]].fetch_add(1, std::memory_order_relaxed);
  });
  std::vector<std::uint32_t> start(groups + 1, 0);
  for (std::size_t g = 0; g < groups; ++g) start[g + 1] = start[g] + counters[g].load(std::memory_order_relaxed);
  s.P.resize(n);
  env.lanes.run(lanes, [&](std::size_t lane) {
    for (std::size_t i = lane; i < n; i += lanes) {
      s.P[start[group[i]] + pos[i]] = {part[i], static_cast<std::uint32_t>(i)};
    }
  });
  for (std::size_t g = 0; g < groups; ++g) s.bounds.emplace_back(start[g], start[g + 1]);
  return s;
}

bool same_partition_contents(const PartitionSchedule& a, const PartitionSchedule& b) {
  auto contents = [](const PartitionSchedule& s) {
    std::map<Value, std::vector<std::uint32_t>> m;
    for (auto [p, i] : s.P) m[p].push_back(i);
    for (auto& [p, v] : m) std::sort(v.begin(), v.end());
    return m;
  };
  return contents(a) == contents(b);
}

ExecOutcome exec_part_schedule(ExecEnv& env, std::span<const TxnSignature> bulk, const PartitionSchedule& schedule,
                               const ExecutorConfig& config) {
  const auto t0 = Clock::now();
  ExecOutcome out = make_outcome(schedule.sorted ? Strategy::part : Strategy::part_relaxed, bulk, env.lanes.size());
  InsertBuffer inserts;
  std::optional<TraceCollector> collector;
  if (config.trace) collector.emplace(env.lanes.size());
  const std::size_t groups = schedule.partitions.size();
  const std::size_t lanes = std::min(env.lanes.size(), groups);
  env.lanes.run(lanes, [&](std::size_t lane) {
    std::vector<UndoRecord> undo;
    for (std::size_t g = lane; g < groups; g += lanes) {
      std::size_t lo, hi;
      if (schedule.sorted) {
        const Value p = schedule.partitions[g];
        const auto& P = schedule.P;
        lo = static_cast<std::size_t>(
            std::lower_bound(P.begin(), P.end(), p, [](const auto& e, Value v) { return e.first < v; }) - P.begin());
        hi = static_cast<std::size_t>(
            std::upper_bound(P.begin(), P.end(), p, [](Value v, const auto& e) { return v < e.first; }) - P.begin());
      } else {
        std::tie(lo, hi) = schedule.bounds[g];
      }
      for (std::size_t k = lo; k < hi; ++k) {
        const std::uint32_t i = schedule.P[k].second;
        const TxnRun r = run_one(env, inserts, bulk[i], undo, nullptr, collector ? &*collector : nullptr);
        settle_inline(env, inserts, bulk[i], r, undo);
        out.status[i] = r.status;
        ++out.lane_txns[lane];
      }
    }
  });
  if (collector) out.trace = collector->events();
  finish_bulk(env, inserts, out, t0);
  return out;
}

ExecOutcome exec_part(ExecEnv& env, std::span<const TxnSignature> bulk, const ExecutorConfig& config) {
  check_order(bulk);
  const auto t0 = Clock::now();
  const PartitionSchedule s = part_schedule(env.registry, bulk, config.partition_size);
  ExecOutcome out = exec_part_schedule(env, bulk, s, config);
  out.seconds = seconds_since(t0);
  return out;
}

ExecOutcome exec_part_relaxed(ExecEnv& env, std::span<const TxnSignature> bulk, const ExecutorConfig& config) {
  check_order(bulk);
  const auto t0 = Clock::now();
  const PartitionSchedule s = exec_part_relaxed_gen(env, bulk, config.partition_size);
  ExecOutcome out = exec_part_schedule(env, bulk, s, config);
  out.seconds = seconds_since(t0);
  return out;
}

// ------------------------------------------------------------------- K-SET

namespace {

ExecOutcome conflict_free(ExecEnv& env, std::span<const TxnSignature> bulk, std::span<const std::uint32_t> lane_order,
                          TraceCollector* collector) {
  const auto t0 = Clock::now();
  ExecOutcome out = make_outcome(Strategy::kset, bulk, env.lanes.size());
  InsertBuffer inserts;
  const auto lanes = assign_lanes(bulk.size(), env.lanes.size(), lane_order);
  if (!bulk.empty()) {
    env.lanes.run(lanes.size(), [&](std::size_t lane) {
      std::vector<UndoRecord> undo;
      for (std::uint32_t i : lanes[lane]) {
        const TxnRun r = run_one(env, inserts, bulk[i], undo, nullptr, collector);
        settle_inline(env, inserts, bulk[i], r, undo);
        out.status[i] = r.status;
        ++out.lane_txns[lane];
      }
    });
  }
  finish_bulk(env, inserts, out, t0);
  return out;
}

}  // namespace

ExecOutcome exec_conflict_free(ExecEnv& env, std::span<const TxnSignature> bulk, const ExecutorConfig& config,
                               std::span<const std::uint32_t> lane_order) {
  std::optional<TraceCollector> collector;
  if (config.trace) collector.emplace(env.lanes.size());
  ExecOutcome out = conflict_free(env, bulk, lane_order, collector ? &*collector : nullptr);
  if (collector) out.trace = collector->events();
  return out;
}

ExecOutcome exec_kset(ExecEnv& env, std::span<const TxnSignature> pool, const ExecutorConfig& config) {
  check_order(pool);
  const auto t0 = Clock::now();
  ExecOutcome out = make_outcome(Strategy::kset, pool, env.lanes.size());
  const PoolOps ops = collect_ops(env.registry, pool);
  KSetTracker tracker;
  {
    std::size_t k = 0;
    for (const TxnSignature& sig : pool) {
      std::vector<KSetTracker::Access> acc;
      while (k < ops.ops.size() && ops.ops[k].txn == sig.id) {
        acc.emplace_back(ops.ops[k].item, ops.ops[k].mode);
        ++k;
      }
      tracker.add(sig.id, std::move(acc));
    }
  }
  std::optional<TraceCollector> collector;
  if (config.trace) collector.emplace(env.lanes.size());
  std::vector<TxnSignature> round;
  while (!tracker.empty()) {
    const std::vector<TxnId> ids = tracker.extract_zero_set();
    round.clear();
    for (TxnId id : ids) {
      auto it = std::lower_bound(pool.begin(), pool.end(), id,
                                 [](const TxnSignature& s, TxnId v) { return s.id < v; });
      round.push_back(*it);
    }
    ExecOutcome r = conflict_free(env, round, {}, collector ? &*collector : nullptr);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out.status[static_cast<std::size_t>(std::lower_bound(out.txns.begin(), out.txns.end(), ids[i]) -
                                          out.txns.begin())] = r.status[i];
    }
    for (std::size_t l = 0; l < r.lane_txns.size(); ++l) out.lane_txns[l] += r.lane_txns[l];
    out.inserted += r.inserted;
    out.rounds.push_back(ids);
  }
  if (collector) out.trace = collector->events();
  out.tally();
  out.seconds = seconds_since(t0);
  return out;
}

// ------------------------------------------------------------ TPL relaxed

namespace {

void spin_acquire(std::atomic<std::uint32_t>& c) {
  for (int i = 0;; ++i) {
    std::uint32_t v = c.load(std::memory_order_acquire);
    if (v & LockTable::kPoison) throw WatchdogTimeout("spin lock abandoned by watchdog");
    if (v == 0 && c.compare_exchange_weak(v, 1, std::memory_order_acq_rel)) return;
    if (i < 64) continue;
    if (i < 68) {
      std::this_thread::yield();
      continue;
    }
    if (v != 0) c.wait(v, std::memory_order_acquire);
  }
}

}  // namespace

ExecOutcome exec_tpl_relaxed(ExecEnv& env, std::span<const TxnSignature> bulk, const ExecutorConfig& config) {
  check_order(bulk);
  const auto t0 = Clock::now();
  ExecOutcome out = make_outcome(Strategy::tpl_relaxed, bulk, env.lanes.size());
  const std::size_t n = bulk.size();
  if (n == 0) {
    out.seconds = seconds_since(t0);
    return out;
  }
  const PoolOps ops = collect_ops(env.registry, bulk);
  std::vector<std::vector<std::uint32_t>> slots(n);
  std::vector<std::uint32_t> used;
  {
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      while (k < ops.ops.size() && ops.ops[k].txn == bulk[i].id) {
        slots[i].push_back(env.locks.slot_of(ops.ops[k].item.encode()));
        ++k;
      }
      std::sort(slots[i].begin(), slots[i].end());
      slots[i].erase(std::unique(slots[i].begin(), slots[i].end()), slots[i].end());
      used.insert(used.end(), slots[i].begin(), slots[i].end());
    }
  }
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());

  InsertBuffer inserts;
  std::optional<TraceCollector> collector;
  if (config.trace) collector.emplace(env.lanes.size());
  const auto lanes = assign_lanes(n, env.lanes.size(), {});
  FirstCause cause;
  env.watchdog.arm(config.watchdog, [&locks = env.locks] { locks.poison_all(); });
  std::exception_ptr failure;
  try {
    env.lanes.run(lanes.size(), [&](std::size_t lane) {
      std::vector<UndoRecord> undo;
      for (std::uint32_t i : lanes[lane]) {
        std::size_t held = 0;
        try {
          for (std::uint32_t s : slots[i]) {
            spin_acquire(env.locks.counter(s));
            ++held;
          }
          const TxnRun r = run_one(env, inserts, bulk[i], undo, nullptr, collector ? &*collector : nullptr);
          settle_inline(env, inserts, bulk[i], r, undo);
          out.status[i] = r.status;
        } catch (const WatchdogTimeout&) {
          throw;
        } catch (...) {
          cause.set(std::current_exception());
          env.locks.poison_all();
          throw;
        }
        for (std::size_t k = 0; k < held; ++k) {
          auto& c = env.locks.counter(slots[i][k]);
          c.store(0, std::memory_order_release);
          c.notify_all();
        }
        ++out.lane_txns[lane];
      }
    });
  } catch (...) {
    failure = std::current_exception();
  }
  const bool fired = env.watchdog.disarm();
  env.locks.reset(used);
  cause.rethrow_if_set();
  if (fired) throw WatchdogTimeout("relaxed TPL bulk exceeded the watchdog budget");
  if (failure) std::rethrow_exception(failure);
  if (collector) out.trace = collector->events();
  finish_bulk(env, inserts, out, t0);
  return out;
}

ExecOutcome execute_bulk(ExecEnv& env, std::span<const TxnSignature> bulk, const ExecutorConfig& config,
                         std::span<const std::uint32_t> lane_order) {
  switch (config.strategy) {
    case Strategy::tpl:
      return exec_tpl(env, bulk, config, lane_order);
    case Strategy::part:
      return exec_part(env, bulk, config);
    case Strategy::kset:
      return exec_kset(env, bulk, config);
    case Strategy::tpl_relaxed:
      return exec_tpl_relaxed(env, bulk, config);
    case Strategy::part_relaxed:
      return exec_part_relaxed(env, bulk, config);
  }
  throw SchedulingError("unknown strategy");
}

}  // namespace bulktx
