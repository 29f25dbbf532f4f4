#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "bulktx/depgraph.h"
#include "bulktx/lanes.h"
#include "bulktx/storage.h"
#include "bulktx/trace.h"
#include "bulktx/txmodel.h"

namespace bulktx {

enum class Strategy : std::uint8_t { tpl, part, kset, tpl_relaxed, part_relaxed };

const char* to_string(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

struct ExecutorConfig {
  std::size_t lane_count = 4;
  std::size_t warp_size = 32;
  Value partition_size = 128;
  Strategy strategy = Strategy::tpl;
  // 0 selects exact lock addressing; otherwise the hashed table size.
  std::size_t lock_slots = 0;
  bool root_locks = true;
  bool trace = false;
  std::chrono::milliseconds watchdog{60000};
};

/// What a bulk runs against. The strategies own the store for the duration
/// of a bulk.
struct ExecEnv {
  ColumnStore& store;
  const TypeRegistry& registry;
  LanePool& lanes;
  LockTable& locks;
  Watchdog& watchdog;
  const std::unordered_set<TxnId>* forced_aborts = nullptr;
};

/// Owns the lanes, lock table and watchdog for a config.
class Engine {
 public:
  explicit Engine(const ExecutorConfig& config);
  ExecEnv env(ColumnStore& store, const TypeRegistry& registry,
              const std::unordered_set<TxnId>* forced_aborts = nullptr);
  LanePool& lanes() { return lanes_; }
  LockTable& locks() { return locks_; }

 private:
  LanePool lanes_;
  LockTable locks_;
  Watchdog watchdog_;
};

struct ExecOutcome {
  Strategy strategy = Strategy::tpl;
  std::vector<TxnId> txns;  // ascending
  std::vector<TxnStatus> status;
  std::size_t committed = 0;
  std::size_t aborted = 0;
  std::size_t rolled_back = 0;
  std::size_t inserted = 0;
  double seconds = 0;
  std::vector<std::size_t> lane_txns;       // txns executed per lane
  std::vector<std::vector<TxnId>> rounds;   // K-SET bulks, in order
  // Rolled back as descendants of a txn that aborted after writing.
  std::vector<TxnId> cascaded;
  std::vector<TraceEvent> trace;

  void tally();
  TxnStatus status_of(TxnId id) const;
  // Appends another outcome over later txns.
  void append(ExecOutcome&& other);
};

/// Lock request of one transaction on one lock slot. Within a slot, keys
/// are 0..n-1 in id order of the requesting transactions. The counter is
/// released after `count` accesses (kHold: at transaction end).
struct KeyedLockRequest {
  static constexpr std::uint32_t kHold = 0xFFFFFFFFu;
  std::uint32_t slot = 0;
  std::uint32_t key = 0;
  std::uint32_t count = 0;
};

struct TplTxnPlan {
  std::vector<KeyedLockRequest> locks;
  // Lock object code -> index into locks.
  std::vector<std::pair<std::uint64_t, std::uint32_t>> objects;
};

struct TplPlan {
  std::vector<TplTxnPlan> txns;
  std::vector<std::uint32_t> slots;  // every slot used, for the reset
  std::vector<TableId> coarse;
  // Every txn locks only its root-relation keys, for its whole duration.
  bool root_locking = false;
};

TplPlan plan_tpl(const TypeRegistry& registry, std::span<const TxnSignature> bulk, LockTable& locks,
                 bool allow_root_locks);

/// Counter-lock two-phase locking. `lane_order` permutes bulk positions for
/// the lane assignment (type grouping); each lane still runs its share in id
/// order.
ExecOutcome exec_tpl(ExecEnv& env, std::span<const TxnSignature> bulk, const ExecutorConfig& config,
                     std::span<const std::uint32_t> lane_order = {});

/// P: (partition, bulk position) grouped by partition.
struct PartitionSchedule {
  std::vector<std::pair<Value, std::uint32_t>> P;
  std::vector<Value> partitions;                               // one per group, in P order
  std::vector<std::pair<std::uint32_t, std::uint32_t>> bounds;  // [start, end) per group
  bool sorted = false;  // P sorted by partition, groups found by binary search

  std::size_t size() const { return P.size(); }
};

// Steps 1-2: partition of every txn, stable radix sort by partition.
PartitionSchedule part_schedule(const TypeRegistry& registry, std::span<const TxnSignature> bulk,
                                Value partition_size);
// Sort-free: per-partition counters with fetch-and-add, prefix sum of the
// counts for group starts, scatter. Order within a partition is arbitrary.
PartitionSchedule exec_part_relaxed_gen(ExecEnv& env, std::span<const TxnSignature> bulk, Value partition_size);
bool same_partition_contents(const PartitionSchedule& a, const PartitionSchedule& b);

ExecOutcome exec_part(ExecEnv& env, std::span<const TxnSignature> bulk, const ExecutorConfig& config);
ExecOutcome exec_part_schedule(ExecEnv& env, std::span<const TxnSignature> bulk, const PartitionSchedule& schedule,
                               const ExecutorConfig& config);
ExecOutcome exec_part_relaxed(ExecEnv& env, std::span<const TxnSignature> bulk, const ExecutorConfig& config);

// One lock-free bulk whose transactions are mutually conflict-free.
ExecOutcome exec_conflict_free(ExecEnv& env, std::span<const TxnSignature> bulk, const ExecutorConfig& config,
                               std::span<const std::uint32_t> lane_order = {});
// Repeatedly extracts and runs the 0-set until the pool is empty.
ExecOutcome exec_kset(ExecEnv& env, std::span<const TxnSignature> pool, const ExecutorConfig& config);

// 0/1 spin locks taken in slot order before execution and released at the
// end. Serializable, not timestamp ordered.
ExecOutcome exec_tpl_relaxed(ExecEnv& env, std::span<const TxnSignature> bulk, const ExecutorConfig& config);

ExecOutcome execute_bulk(ExecEnv& env, std::span<const TxnSignature> bulk, const ExecutorConfig& config,
                         std::span<const std::uint32_t> lane_order = {});

/// Post-bulk repair. Marked txns in `undo` are rolled back; with `cascade`,
/// so are their descendants in `graph`, all in reverse id order.
/// Descendants become rolled_back. A marked or cascaded txn that wrote
/// without an undo log makes the bulk unrecoverable.
struct RecoveryResult {
  std::vector<std::uint32_t> undone;     // bulk positions, descending id
  std::vector<std::uint32_t> cascaded;   // descendants, ascending
};
RecoveryResult recover(ColumnStore& store, InsertBuffer& inserts, UndoLog& undo, const TDependencyGraph* graph,
                       std::span<const TxnSignature> bulk, std::span<TxnStatus> status,
                       std::span<const std::uint8_t> wrote, std::span<const std::uint8_t> logged, bool cascade);

}  // namespace bulktx
