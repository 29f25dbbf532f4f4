#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bulktx/storage.h"

namespace bulktx {

enum class AccessMode : std::uint8_t { read, write };

/// Conflict-analysis unit. Items are logical: the row coordinate holds the
/// row's primary-key value rather than its physical row id, so a footprint is
/// a pure function of the parameters and survives merges between bulks.
struct BasicOp {
  DataItemId item;
  TxnId txn = 0;
  AccessMode mode = AccessMode::read;
};

inline bool conflicts(const BasicOp& a, const BasicOp& b) {
  return a.item == b.item && (a.mode == AccessMode::write || b.mode == AccessMode::write);
}

// Logical item for column c of the row whose key is `key`.
inline DataItemId logical_item(TableId t, ColumnId c, Value key) {
  return {t, c, static_cast<RowId>(key) & DataItemId::kRowMask};
}

struct ItemAccess {
  DataItemId item;
  AccessMode mode = AccessMode::read;
};

/// Declared footprint of one instance, in execution order. Repeats matter:
/// the counter-lock executor releases a lock after the declared number of
/// accesses. `unknown` lists tables whose accesses cannot be derived from the
/// parameters; they are handled at table granularity.
struct Footprint {
  std::vector<ItemAccess> accesses;
  std::vector<std::pair<TableId, AccessMode>> unknown;

  void read(DataItemId item) { accesses.push_back({item, AccessMode::read}); }
  void write(DataItemId item) { accesses.push_back({item, AccessMode::write}); }
  void rmw(DataItemId item) {
    read(item);
    write(item);
  }
};

struct TxnSignature {
  TxnId id = 0;
  TypeId type = 0;
  std::vector<Value> params;
};

enum class TxnStatus : std::uint8_t { committed, aborted, rolled_back };
const char* to_string(TxnStatus s);

// Thrown by TxnContext::abort. Not an Error: it is ordinary control flow.
struct TxnAbort {
  std::string reason;
};

/// Hook used by the counter-lock executor to order accesses.
class AccessGuard {
 public:
  virtual ~AccessGuard() = default;
  virtual void before(DataItemId item, AccessMode mode) = 0;
  virtual void after(DataItemId item) = 0;
};

/// Receives every performed access (test-mode trace).
class AccessRecorder {
 public:
  virtual ~AccessRecorder() = default;
  virtual void record(DataItemId item, TxnId txn, AccessMode mode) = 0;
};

/// Declared footprint indexed for membership checks.
class DeclaredSet {
 public:
  DeclaredSet() = default;
  explicit DeclaredSet(const Footprint& fp);
  // Throws FootprintViolation when the access is not covered or exceeds the
  // declared count.
  void check(DataItemId item, AccessMode mode);

 private:
  struct Entry {
    bool write = false;
    std::uint32_t remaining = 0;
  };
  std::unordered_map<DataItemId, Entry> items_;
  std::unordered_map<TableId, bool> coarse_;  // table -> write allowed
};

struct TxnType;

/// Store accessor handed to procedures. Rows are addressed through lookup;
/// every access is reported to the optional guard, recorder, footprint check
/// and undo log.
class TxnContext {
 public:
  TxnContext(ColumnStore& store, InsertBuffer& inserts, const TxnSignature& sig, const TxnType& type)
      : store_(store), inserts_(inserts), sig_(sig), type_(type) {}

  void set_undo(std::vector<UndoRecord>* undo) { undo_ = undo; }
  void set_guard(AccessGuard* guard) { guard_ = guard; }
  void set_recorder(AccessRecorder* rec) { recorder_ = rec; }
  void set_declared(DeclaredSet* declared) { declared_ = declared; }
  void set_forced_abort(bool forced) { forced_abort_ = forced; }
  void set_strict_two_phase(bool strict) { strict_two_phase_ = strict; }

  const TxnSignature& sig() const { return sig_; }
  std::span<const Value> params() const { return sig_.params; }
  const ColumnStore& store() const { return store_; }

  std::optional<RowId> lookup(TableId t, Value key);
  Value read(TableId t, RowId row, ColumnId c);
  void write(TableId t, RowId row, ColumnId c, Value v);
  std::string read_bytes(TableId t, RowId row, ColumnId c);
  void write_bytes(TableId t, RowId row, ColumnId c, std::string_view bytes);
  // Buffered until the bulk boundary; not part of the conflict footprint.
  void insert(TableId t, std::vector<Cell> cells);
  // A delete writes every field of the row.
  void erase(TableId t, RowId row);

  // Marks the point where the procedure decides to commit or abort. Forced
  // aborts fire here.
  void decision_point();
  [[noreturn]] void abort(std::string reason);

  bool wrote() const { return wrote_; }
  bool inserted() const { return inserted_; }

 private:
  DataItemId item_of(TableId t, RowId row, ColumnId c) const;
  void enter(DataItemId item, AccessMode mode);
  void leave(DataItemId item);

  ColumnStore& store_;
  InsertBuffer& inserts_;
  const TxnSignature& sig_;
  const TxnType& type_;
  std::vector<UndoRecord>* undo_ = nullptr;
  AccessGuard* guard_ = nullptr;
  AccessRecorder* recorder_ = nullptr;
  DeclaredSet* declared_ = nullptr;
  bool forced_abort_ = false;
  bool strict_two_phase_ = false;
  bool wrote_ = false;
  bool inserted_ = false;
};

using Procedure = std::function<void(TxnContext&, std::span<const Value>)>;

struct TxnType {
  TypeId type_id = 0;
  std::string name;
  Procedure procedure;
  std::function<Footprint(std::span<const Value>)> declared_ops;
  // Root-relation key locks covering every access of the instance. Empty
  // function or empty result: lock per item.
  std::function<std::vector<DataItemId>(std::span<const Value>)> lock_roots;
  // Partitioning-key values the instance touches.
  std::function<std::vector<Value>(std::span<const Value>)> partition_keys;
  bool is_two_phase = true;
  bool is_single_partition = true;
  std::vector<TableId> tables;
};

class TypeRegistry {
 public:
  TypeId register_type(TxnType type);
  const TxnType& get(TypeId id) const;
  bool contains(TypeId id) const { return types_.count(id) != 0; }
  std::size_t size() const { return types_.size(); }
  std::vector<TypeId> ids() const;

  // Types that keep undo logs: non-two-phase types plus everything that
  // conflicts with them, transitively, through shared tables.
  bool needs_undo(TypeId id) const;

  Footprint declared_ops(const TxnSignature& sig) const;
  std::vector<Value> partition_keys(const TxnSignature& sig) const;
  // Partition of the instance, or nullopt when it spans more than one.
  std::optional<Value> partition_of(const TxnSignature& sig, Value partition_size) const;

 private:
  void compute_undo_set();

  std::map<TypeId, TxnType> types_;
  std::unordered_set<TypeId> undo_set_;
};

std::vector<BasicOp> declared_ops_of(const TypeRegistry& registry, const TxnSignature& sig);

/// Conflict ops of a list of transactions: one op per (item, txn), a write
/// dominating a read. Every op on a table with an unknown footprint anywhere
/// in the list is coarsened to the whole table.
struct PoolOps {
  std::vector<TxnId> txns;  // ascending
  std::vector<BasicOp> ops;
  std::vector<TableId> coarse_tables;

  bool footprint_unknown() const { return !coarse_tables.empty(); }
};

PoolOps collect_ops(const TypeRegistry& registry, std::span<const TxnSignature> txns,
                    std::span<const TableId> extra_coarse = {});

// Normalized accesses of one instance given the coarse table set.
std::vector<std::pair<DataItemId, AccessMode>> normalized_accesses(const Footprint& fp,
                                                                   std::span<const TableId> coarse);

/// Submitted signatures awaiting execution, in id order. Thread-safe for one
/// producer and one consumer.
class TxnPool {
 public:
  explicit TxnPool(const TypeRegistry& registry) : registry_(registry) {}

  TxnSignature submit(TypeId type, std::vector<Value> params);
  // Replay path: keeps sig.id, which must exceed every id seen so far.
  void submit_signature(TxnSignature sig);

  std::vector<TxnSignature> take_prefix(std::size_t max_count);
  std::vector<TxnSignature> take_all() { return take_prefix(SIZE_MAX); }
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  TxnId next_id() const;

 private:
  const TypeRegistry& registry_;
  mutable std::mutex mu_;
  std::deque<TxnSignature> pending_;
  TxnId next_id_ = 0;
};

struct SeqOptions {
  const std::unordered_set<TxnId>* forced_aborts = nullptr;
  // Verify performed accesses against the declared footprint and the
  // two-phase contract.
  bool check_footprints = false;
  AccessRecorder* recorder = nullptr;
  // Not run at all; reported as aborted.
  const std::unordered_set<TxnId>* skip = nullptr;
  // Accept txns in any order of distinct ids instead of ascending ids.
  bool any_order = false;
};

/// Reference executor: runs txns one at a time in the given (id) order,
/// rolling back aborted ones, then merges their inserts.
std::vector<TxnStatus> execute_sequential(ColumnStore& store, const TypeRegistry& registry,
                                          std::span<const TxnSignature> txns, const SeqOptions& options = {});

// Runs one procedure. Returns committed or aborted; an abort leaves the
// caller to roll back. FootprintViolation and WatchdogTimeout propagate.
TxnStatus run_procedure(TxnContext& ctx, const TxnType& type);

/// Workload file:
///
///   # bulktx-workload key=value ...
///   id,type,param,param,...
///
/// An empty id is assigned as previous id + 1 (0 for the first line).
struct Workload {
  std::map<std::string, std::string> meta;
  std::vector<TxnSignature> txns;
};

Workload read_workload(std::istream& in);
void write_workload(const Workload& w, std::ostream& out);

}  // namespace bulktx
