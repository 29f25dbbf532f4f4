#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bulktx/errors.h"
#include "bulktx/types.h"

namespace bulktx {

enum class ColumnKind : std::uint8_t { fixed, var };

struct ColumnDef {
  std::string name;
  ColumnKind kind = ColumnKind::fixed;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;
  ColumnId key_column = 0;        // primary key, must be fixed-length
  ColumnId partition_column = 0;  // partitioning key, fixed-length

  std::optional<ColumnId> column_id(std::string_view name) const;
};

/// Append-only byte arena for one variable-length column.
///
/// Storage is a list of fixed-size chunks that never move, so readers of one
/// row may run concurrently with a writer relocating another row. Regions
/// abandoned by relocation stay dead until the store is copied.
class BytePool {
 public:
  static constexpr std::size_t kChunkBytes = std::size_t{1} << 20;
  static constexpr std::size_t kMaxChunks = std::size_t{1} << 14;

  BytePool();
  BytePool(const BytePool& other);
  BytePool& operator=(const BytePool& other);
  BytePool(BytePool&&) noexcept;
  BytePool& operator=(BytePool&&) noexcept;
  ~BytePool();

  // Returns the global offset of the copied bytes. Thread-safe.
  std::uint64_t append(std::string_view bytes);
  std::string_view view(std::uint64_t offset, std::uint32_t length) const;
  void overwrite(std::uint64_t offset, std::string_view bytes);

  // High-water mark in bytes, including dead regions and chunk tails.
  std::uint64_t used() const;
  bool contains(std::uint64_t offset, std::uint32_t length) const;

 private:
  std::vector<std::unique_ptr<char[]>> chunks_;
  std::uint64_t tail_ = 0;  // offset of the next free byte
  mutable std::mutex mu_;
};

class InsertBuffer;
struct Snapshot;

/// In-memory column store.
///
/// Fixed-length columns are flat Value arrays; variable-length columns keep a
/// per-row (offset, length) pair into the column's BytePool. Each table has a
/// primary-key hash index and a per-row liveness flag (deletes only clear the
/// flag). Cells of distinct items may be read and written concurrently; the
/// store does not order accesses to the same item, that is the executor's job.
class ColumnStore {
 public:
  ColumnStore() = default;
  ColumnStore(const ColumnStore&) = default;
  ColumnStore& operator=(const ColumnStore&) = default;
  ColumnStore(ColumnStore&&) = default;
  ColumnStore& operator=(ColumnStore&&) = default;

  TableId create_table(TableDef def);

  std::size_t table_count() const { return tables_.size(); }
  const TableDef& def(TableId table) const;
  std::optional<TableId> table_id(std::string_view name) const;
  TableId require_table(std::string_view name) const;
  RowId row_count(TableId table) const;
  std::size_t live_row_count(TableId table) const;
  bool is_live(TableId table, RowId row) const;

  // Index probe. Returns the row even when it is dead; callers check liveness.
  std::optional<RowId> find(TableId table, Value key) const;
  std::optional<RowId> find_live(TableId table, Value key) const;

  Value read_item(DataItemId item) const;
  void write_item(DataItemId item, Value value);
  std::string read_bytes(DataItemId item) const;
  void write_bytes(DataItemId item, std::string_view bytes);
  Cell read_cell(DataItemId item) const;
  void write_cell(DataItemId item, const Cell& cell);

  void delete_row(TableId table, RowId row);
  void revive_row(TableId table, RowId row);

  // Load path: appends a live row immediately. Throws MergeError on a
  // duplicate live key.
  RowId append_row(TableId table, std::span<const Cell> cells);

  // Between bulks only. All-or-nothing: on a duplicate key the store is left
  // untouched and the buffer keeps its rows.
  std::size_t merge_inserts(InsertBuffer& buffer);

  Snapshot snapshot() const;

  // Raw (offset, length) of a variable-length cell, for pool-bound checks.
  std::pair<std::uint64_t, std::uint32_t> var_extent(DataItemId item) const;
  std::uint64_t pool_used(TableId table, ColumnId column) const;

  // Total addressable cells, used to size direct lock tables.
  std::size_t cell_count() const;

 private:
  struct Column {
    ColumnKind kind = ColumnKind::fixed;
    std::vector<Value> values;
    std::vector<std::uint64_t> offsets;
    std::vector<std::uint32_t> lengths;
    BytePool pool;
  };
  struct Table {
    TableDef def;
    std::vector<Column> columns;
    std::vector<std::uint8_t> live;
    std::unordered_map<Value, RowId> index;
  };

  const Table& table_at(TableId table) const;
  Table& table_at(TableId table);
  const Column& checked_column(DataItemId item, ColumnKind expected) const;
  Column& checked_column(DataItemId item, ColumnKind expected);
  void check_row(const Table& t, RowId row) const;
  void validate_row(const Table& t, std::span<const Cell> cells) const;
  RowId push_row(Table& t, std::span<const Cell> cells);

  std::vector<Table> tables_;
};

/// Rows produced by inserts during a bulk. Invisible to reads until
/// ColumnStore::merge_inserts runs at the bulk boundary, which appends them in
/// (txn id, per-txn sequence) order.
struct PendingRow {
  TxnId txn = 0;
  std::uint32_t seq = 0;
  TableId table = 0;
  std::vector<Cell> cells;
};

class InsertBuffer {
 public:
  explicit InsertBuffer(std::size_t capacity = std::size_t{1} << 24) : capacity_(capacity) {}

  // Thread-safe.
  void add(TxnId txn, TableId table, std::vector<Cell> cells);
  // Drops every pending row of txn (abort / rollback).
  void discard(TxnId txn);

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  std::size_t capacity() const { return capacity_; }

  std::vector<PendingRow> sorted_rows() const;
  void clear();

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::vector<PendingRow> rows_;
  std::unordered_map<TxnId, std::uint32_t> next_seq_;
};

/// Counter array backing both the keyed (counter) locks and the 0/1 spin
/// locks. Slots are resolved from lock objects (encoded DataItemIds) either
/// exactly (one slot per distinct object, assigned while planning a bulk) or
/// by hashing into a fixed array. Hashing may merge two objects onto one
/// slot; that only serializes more than needed.
class LockTable {
 public:
  enum class Addressing : std::uint8_t { exact, hashed };

  static LockTable exact();
  static LockTable hashed(std::size_t slots);

  LockTable(LockTable&&) noexcept = default;
  LockTable& operator=(LockTable&&) noexcept = default;

  Addressing addressing() const { return addressing_; }

  // Planning phase only (single-threaded): may grow the exact table.
  std::uint32_t slot_of(std::uint64_t lock_object);

  std::atomic<std::uint32_t>& counter(std::uint32_t slot) { return counters_[slot]; }
  std::size_t size() const { return size_; }

  void reset(std::span<const std::uint32_t> slots);
  void reset_all();
  bool all_zero() const;

  // Forces every counter to move so blocked waiters wake up; used by the
  // watchdog. Poisoned values carry kPoison.
  void poison_all();
  static constexpr std::uint32_t kPoison = 0x80000000u;

 private:
  LockTable(Addressing addressing, std::size_t slots);
  void grow(std::size_t slots);

  Addressing addressing_;
  std::size_t size_ = 0;
  std::unique_ptr<std::atomic<std::uint32_t>[]> counters_;
  std::unordered_map<std::uint64_t, std::uint32_t> exact_slots_;
};

/// Before-images of one transaction.
struct UndoRecord {
  enum class Kind : std::uint8_t { value, bytes, liveness };
  Kind kind = Kind::value;
  DataItemId item;
  Value old_value = 0;
  std::string old_bytes;
};

class UndoLog {
 public:
  enum class Status : std::uint8_t { committed, marked };

  void resize(std::size_t txns);
  std::size_t size() const { return records_.size(); }

  std::vector<UndoRecord>& records(std::size_t txn) { return records_[txn]; }
  const std::vector<UndoRecord>& records(std::size_t txn) const { return records_[txn]; }
  Status status(std::size_t txn) const { return status_[txn]; }
  void mark(std::size_t txn) { status_[txn] = Status::marked; }

  // Applies the records of txn in reverse order and clears them.
  void rollback(ColumnStore& store, std::size_t txn);
  void discard(std::size_t txn);

 private:
  std::vector<std::vector<UndoRecord>> records_;
  std::vector<Status> status_;
};

void apply_undo(ColumnStore& store, std::vector<UndoRecord>& records);

/// Value image of every live row, ordered by primary key per table so that
/// stores reached through different insert orders compare equal.
struct Snapshot {
  struct TableImage {
    std::string name;
    std::vector<ColumnKind> kinds;
    ColumnId key_column = 0;
    std::vector<RowId> rows;  // live rows sorted by key
    std::vector<std::vector<Cell>> columns;
  };
  std::vector<TableImage> tables;

  std::uint64_t digest() const;
};

// nullopt when equal; otherwise the first differing cell, addressed by the
// row id in `a` (or in `b` when `a` has run out of rows).
std::optional<DataItemId> compare_snapshots(const Snapshot& a, const Snapshot& b);

/// Text schema/load format (documented in README):
///
///   # comment
///   table <name> key=<column> partition=<column>
///   column <name> fixed|var
///   row <table> <cell> <cell> ...
///
/// Fixed cells are decimal integers; var cells are double-quoted with \\, \"
/// and \xHH escapes. Table and column lines must precede rows of that table.
ColumnStore load_store(std::istream& in);
void dump_store(const ColumnStore& store, std::ostream& out);

std::string quote_bytes(std::string_view bytes);

}  // namespace bulktx
