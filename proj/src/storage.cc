#include "bulktx/storage.h"

#include <algorithm>
#include <cstring>
#include <sstream>
#include <utility>

namespace bulktx {

std::string to_string(const DataItemId& item) {
  std::ostringstream os;
  os << "(" << item.table << ",";
  if (item.column == DataItemId::kWholeTable) {
    os << "*,*)";
  } else if (item.column == DataItemId::kKeyLock) {
    os << "key," << item.row << ")";
  } else {
    os << item.column << "," << item.row << ")";
  }
  return os.str();
}

std::optional<ColumnId> TableDef::column_id(std::string_view n) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == n) return static_cast<ColumnId>(i);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- BytePool

BytePool::BytePool() { chunks_.reserve(kMaxChunks); }

BytePool::BytePool(const BytePool& other) : BytePool() { *this = other; }

BytePool& BytePool::operator=(const BytePool& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  chunks_.clear();
  chunks_.reserve(kMaxChunks);
  for (const auto& c : other.chunks_) {
    auto copy = std::make_unique<char[]>(kChunkBytes);
    std::memcpy(copy.get(), c.get(), kChunkBytes);
    chunks_.push_back(std::move(copy));
  }
  tail_ = other.tail_;
  return *this;
}

BytePool::BytePool(BytePool&& other) noexcept : chunks_(std::move(other.chunks_)), tail_(other.tail_) {
  other.tail_ = 0;
}

BytePool& BytePool::operator=(BytePool&& other) noexcept {
  chunks_ = std::move(other.chunks_);
  tail_ = other.tail_;
  other.tail_ = 0;
  return *this;
}

BytePool::~BytePool() = default;

std::uint64_t BytePool::append(std::string_view bytes) {
  if (bytes.size() > kChunkBytes) throw AddressingError("variable-length value exceeds chunk size");
  std::lock_guard lock(mu_);
  std::uint64_t in_chunk = tail_ % kChunkBytes;
  if (chunks_.empty() || in_chunk + bytes.size() > kChunkBytes) {
    if (chunks_.size() == kMaxChunks) throw AddressingError("byte pool exhausted");
    if (!chunks_.empty()) tail_ = chunks_.size() * kChunkBytes;
    chunks_.push_back(std::make_unique<char[]>(kChunkBytes));
    in_chunk = 0;
  }
  const std::uint64_t offset = tail_;
  std::memcpy(chunks_[offset / kChunkBytes].get() + in_chunk, bytes.data(), bytes.size());
  tail_ += bytes.size();
  return offset;
}

std::string_view BytePool::view(std::uint64_t offset, std::uint32_t length) const {
  if (length == 0) return {};
  return {chunks_[offset / kChunkBytes].get() + offset % kChunkBytes, length};
}

void BytePool::overwrite(std::uint64_t offset, std::string_view bytes) {
  if (bytes.empty()) return;
  std::memcpy(chunks_[offset / kChunkBytes].get() + offset % kChunkBytes, bytes.data(), bytes.size());
}

std::uint64_t BytePool::used() const {
  std::lock_guard lock(mu_);
  return tail_;
}

bool BytePool::contains(std::uint64_t offset, std::uint32_t length) const {
  std::lock_guard lock(mu_);
  if (length == 0) return offset <= tail_;
  return offset + length <= tail_ && offset / kChunkBytes == (offset + length - 1) / kChunkBytes;
}

// ------------------------------------------------------------- ColumnStore

TableId ColumnStore::create_table(TableDef def) {
  if (tables_.size() >= DataItemId::kMaxTables) throw AddressingError("too many tables");
  if (def.columns.empty() || def.columns.size() >= DataItemId::kMaxColumns) {
    throw AddressingError("table " + def.name + ": bad column count");
  }
  if (table_id(def.name)) throw AddressingError("duplicate table " + def.name);
  if (def.key_column >= def.columns.size() || def.columns[def.key_column].kind != ColumnKind::fixed) {
    throw AddressingError("table " + def.name + ": key column must be a fixed column");
  }
  if (def.partition_column >= def.columns.size() ||
      def.columns[def.partition_column].kind != ColumnKind::fixed) {
    throw AddressingError("table " + def.name + ": partition column must be a fixed column");
  }
  Table t;
  t.columns.resize(def.columns.size());
  for (std::size_t c = 0; c < def.columns.size(); ++c) t.columns[c].kind = def.columns[c].kind;
  t.def = std::move(def);
  tables_.push_back(std::move(t));
  return static_cast<TableId>(tables_.size() - 1);
}

const ColumnStore::Table& ColumnStore::table_at(TableId table) const {
  if (table >= tables_.size()) throw AddressingError("no table " + std::to_string(table));
  return tables_[table];
}

ColumnStore::Table& ColumnStore::table_at(TableId table) {
  if (table >= tables_.size()) throw AddressingError("no table " + std::to_string(table));
  return tables_[table];
}

const TableDef& ColumnStore::def(TableId table) const { return table_at(table).def; }

std::optional<TableId> ColumnStore::table_id(std::string_view name) const {
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    if (tables_[i].def.name == name) return static_cast<TableId>(i);
  }
  return std::nullopt;
}

TableId ColumnStore::require_table(std::string_view name) const {
  auto id = table_id(name);
  if (!id) throw AddressingError("no table named " + std::string(name));
  return *id;
}

RowId ColumnStore::row_count(TableId table) const { return table_at(table).live.size(); }

std::size_t ColumnStore::live_row_count(TableId table) const {
  const auto& live = table_at(table).live;
  return static_cast<std::size_t>(std::count(live.begin(), live.end(), std::uint8_t{1}));
}

bool ColumnStore::is_live(TableId table, RowId row) const {
  const Table& t = table_at(table);
  return row < t.live.size() && t.live[row];
}

std::optional<RowId> ColumnStore::find(TableId table, Value key) const {
  const Table& t = table_at(table);
  auto it = t.index.find(key);
  if (it == t.index.end()) return std::nullopt;
  return it->second;
}

std::optional<RowId> ColumnStore::find_live(TableId table, Value key) const {
  auto row = find(table, key);
  if (row && !tables_[table].live[*row]) return std::nullopt;
  return row;
}

void ColumnStore::check_row(const Table& t, RowId row) const {
  if (row >= t.live.size()) {
    throw RowNotFound("table " + t.def.name + ": row " + std::to_string(row) + " not found");
  }
  if (!t.live[row]) {
    throw RowNotFound("table " + t.def.name + ": row " + std::to_string(row) + " is deleted");
  }
}

const ColumnStore::Column& ColumnStore::checked_column(DataItemId item, ColumnKind expected) const {
  const Table& t = table_at(item.table);
  if (item.column >= t.columns.size()) throw AddressingError("bad item " + to_string(item));
  const Column& c = t.columns[item.column];
  if (c.kind != expected) throw AddressingError("column kind mismatch at " + to_string(item));
  check_row(t, item.row);
  return c;
}

ColumnStore::Column& ColumnStore::checked_column(DataItemId item, ColumnKind expected) {
  return const_cast<Column&>(std::as_const(*this).checked_column(item, expected));
}

Value ColumnStore::read_item(DataItemId item) const {
  return checked_column(item, ColumnKind::fixed).values[item.row];
}

void ColumnStore::write_item(DataItemId item, Value value) {
  Column& c = checked_column(item, ColumnKind::fixed);
  if (item.column == tables_[item.table].def.key_column) {
    throw AddressingError("primary key column is immutable: " + to_string(item));
  }
  c.values[item.row] = value;
}

std::string ColumnStore::read_bytes(DataItemId item) const {
  const Column& c = checked_column(item, ColumnKind::var);
  return std::string(c.pool.view(c.offsets[item.row], c.lengths[item.row]));
}

void ColumnStore::write_bytes(DataItemId item, std::string_view bytes) {
  Column& c = checked_column(item, ColumnKind::var);
  if (bytes.size() > c.lengths[item.row]) {
    c.offsets[item.row] = c.pool.append(bytes);
  } else {
    c.pool.overwrite(c.offsets[item.row], bytes);
  }
  c.lengths[item.row] = static_cast<std::uint32_t>(bytes.size());
}

Cell ColumnStore::read_cell(DataItemId item) const {
  const Table& t = table_at(item.table);
  if (item.column >= t.columns.size()) throw AddressingError("bad item " + to_string(item));
  if (t.columns[item.column].kind == ColumnKind::fixed) return read_item(item);
  return read_bytes(item);
}

void ColumnStore::write_cell(DataItemId item, const Cell& cell) {
  if (const Value* v = std::get_if<Value>(&cell)) {
    write_item(item, *v);
  } else {
    write_bytes(item, std::get<std::string>(cell));
  }
}

void ColumnStore::delete_row(TableId table, RowId row) {
  Table& t = table_at(table);
  check_row(t, row);
  t.live[row] = 0;
}

void ColumnStore::revive_row(TableId table, RowId row) {
  Table& t = table_at(table);
  if (row >= t.live.size()) throw RowNotFound("revive: no row " + std::to_string(row));
  t.live[row] = 1;
}

void ColumnStore::validate_row(const Table& t, std::span<const Cell> cells) const {
  if (cells.size() != t.columns.size()) {
    throw AddressingError("table " + t.def.name + ": expected " + std::to_string(t.columns.size()) +
                          " cells, got " + std::to_string(cells.size()));
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const bool fixed = std::holds_alternative<Value>(cells[c]);
    if (fixed != (t.columns[c].kind == ColumnKind::fixed)) {
      throw AddressingError("table " + t.def.name + ": cell kind mismatch in column " +
                            t.def.columns[c].name);
    }
  }
}

RowId ColumnStore::push_row(Table& t, std::span<const Cell> cells) {
  const RowId row = t.live.size();
  if (row > DataItemId::kRowMask) throw AddressingError("row id space exhausted");
  for (std::size_t c = 0; c < cells.size(); ++c) {
    Column& col = t.columns[c];
    if (col.kind == ColumnKind::fixed) {
      col.values.push_back(std::get<Value>(cells[c]));
    } else {
      const auto& s = std::get<std::string>(cells[c]);
      col.offsets.push_back(col.pool.append(s));
      col.lengths.push_back(static_cast<std::uint32_t>(s.size()));
    }
  }
  t.live.push_back(1);
  t.index[std::get<Value>(cells[t.def.key_column])] = row;
  return row;
}

RowId ColumnStore::append_row(TableId table, std::span<const Cell> cells) {
  Table& t = table_at(table);
  validate_row(t, cells);
  const Value key = std::get<Value>(cells[t.def.key_column]);
  auto it = t.index.find(key);
  if (it != t.index.end() && t.live[it->second]) {
    throw MergeError("table " + t.def.name + ": duplicate key " + std::to_string(key), key);
  }
  return push_row(t, cells);
}

std::size_t ColumnStore::merge_inserts(InsertBuffer& buffer) {
  std::vector<PendingRow> rows = buffer.sorted_rows();
  if (rows.empty()) return 0;
  // Validate everything first so a failed merge leaves the store untouched.
  std::vector<std::unordered_map<Value, bool>> seen(tables_.size());
  for (const PendingRow& r : rows) {
    Table& t = table_at(r.table);
    validate_row(t, r.cells);
    const Value key = std::get<Value>(r.cells[t.def.key_column]);
    auto it = t.index.find(key);
    if ((it != t.index.end() && t.live[it->second]) || !seen[r.table].emplace(key, true).second) {
      throw MergeError("merge into " + t.def.name + ": duplicate key " + std::to_string(key), key);
    }
  }
  for (const PendingRow& r : rows) push_row(tables_[r.table], r.cells);
  buffer.clear();
  return rows.size();
}

std::pair<std::uint64_t, std::uint32_t> ColumnStore::var_extent(DataItemId item) const {
  const Column& c = checked_column(item, ColumnKind::var);
  return {c.offsets[item.row], c.lengths[item.row]};
}

std::uint64_t ColumnStore::pool_used(TableId table, ColumnId column) const {
  const Table& t = table_at(table);
  if (column >= t.columns.size()) throw AddressingError("bad column");
  return t.columns[column].pool.used();
}

std::size_t ColumnStore::cell_count() const {
  std::size_t n = 0;
  for (const Table& t : tables_) n += t.columns.size() * t.live.size();
  return n;
}

Snapshot ColumnStore::snapshot() const {
  Snapshot snap;
  snap.tables.reserve(tables_.size());
  for (const Table& t : tables_) {
    Snapshot::TableImage img;
    img.name = t.def.name;
    img.key_column = t.def.key_column;
    for (const Column& c : t.columns) img.kinds.push_back(c.kind);
    for (RowId r = 0; r < t.live.size(); ++r) {
      if (t.live[r]) img.rows.push_back(r);
    }
    const auto& keys = t.columns[t.def.key_column].values;
    std::sort(img.rows.begin(), img.rows.end(), [&](RowId a, RowId b) { return keys[a] < keys[b]; });
    img.columns.resize(t.columns.size());
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      const Column& col = t.columns[c];
      auto& out = img.columns[c];
      out.reserve(img.rows.size());
      for (RowId r : img.rows) {
        if (col.kind == ColumnKind::fixed) {
          out.emplace_back(col.values[r]);
        } else {
          out.emplace_back(std::string(col.pool.view(col.offsets[r], col.lengths[r])));
        }
      }
    }
    snap.tables.push_back(std::move(img));
  }
  return snap;
}

// ------------------------------------------------------------ InsertBuffer

void InsertBuffer::add(TxnId txn, TableId table, std::vector<Cell> cells) {
  std::lock_guard lock(mu_);
  if (rows_.size() >= capacity_) throw Error("insert buffer full");
  rows_.push_back(PendingRow{txn, next_seq_[txn]++, table, std::move(cells)});
}

void InsertBuffer::discard(TxnId txn) {
  std::lock_guard lock(mu_);
  std::erase_if(rows_, [txn](const PendingRow& r) { return r.txn == txn; });
  next_seq_.erase(txn);
}

std::size_t InsertBuffer::size() const {
  std::lock_guard lock(mu_);
  return rows_.size();
}

std::vector<PendingRow> InsertBuffer::sorted_rows() const {
  std::lock_guard lock(mu_);
  std::vector<PendingRow> out = rows_;
  std::sort(out.begin(), out.end(), [](const PendingRow& a, const PendingRow& b) {
    return a.txn != b.txn ? a.txn < b.txn : a.seq < b.seq;
  });
  return out;
}

void InsertBuffer::clear() {
  std::lock_guard lock(mu_);
  rows_.clear();
  next_seq_.clear();
}

// --------------------------------------------------------------- LockTable

LockTable::LockTable(Addressing addressing, std::size_t slots) : addressing_(addressing) { grow(slots); }

LockTable LockTable::exact() { return LockTable(Addressing::exact, 1024); }

LockTable LockTable::hashed(std::size_t slots) {
  std::size_t n = 1;
  while (n < slots) n <<= 1;
  return LockTable(Addressing::hashed, n);
}

void LockTable::grow(std::size_t slots) {
  auto next = std::make_unique<std::atomic<std::uint32_t>[]>(slots);
  for (std::size_t i = 0; i < slots; ++i) {
    next[i].store(i < size_ ? counters_[i].load(std::memory_order_relaxed) : 0, std::memory_order_relaxed);
  }
  counters_ = std::move(next);
  size_ = slots;
}

std::uint32_t LockTable::slot_of(std::uint64_t lock_object) {
  if (addressing_ == Addressing::hashed) {
    // splitmix64 finalizer
    std::uint64_t z = lock_object + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    return static_cast<std::uint32_t>(z & (size_ - 1));
  }
  auto [it, inserted] = exact_slots_.try_emplace(lock_object, static_cast<std::uint32_t>(exact_slots_.size()));
  if (inserted && it->second >= size_) grow(size_ * 2);
  return it->second;
}

void LockTable::reset(std::span<const std::uint32_t> slots) {
  for (std::uint32_t s : slots) counters_[s].store(0, std::memory_order_release);
}

void LockTable::reset_all() {
  for (std::size_t i = 0; i < size_; ++i) counters_[i].store(0, std::memory_order_release);
}

bool LockTable::all_zero() const {
  for (std::size_t i = 0; i < size_; ++i) {
    if (counters_[i].load(std::memory_order_acquire) != 0) return false;
  }
  return true;
}

void LockTable::poison_all() {
  for (std::size_t i = 0; i < size_; ++i) {
    counters_[i].fetch_or(kPoison, std::memory_order_acq_rel);
    counters_[i].notify_all();
  }
}

// ----------------------------------------------------------------- UndoLog

void UndoLog::resize(std::size_t txns) {
  records_.assign(txns, {});
  status_.assign(txns, Status::committed);
}

void apply_undo(ColumnStore& store, std::vector<UndoRecord>& records) {
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    switch (it->kind) {
      case UndoRecord::Kind::value:
        store.write_item(it->item, it->old_value);
        break;
      case UndoRecord::Kind::bytes:
        store.write_bytes(it->item, it->old_bytes);
        break;
      case UndoRecord::Kind::liveness:
        if (it->old_value) {
          store.revive_row(it->item.table, it->item.row);
        } else {
          store.delete_row(it->item.table, it->item.row);
        }
        break;
    }
  }
  records.clear();
}

void UndoLog::rollback(ColumnStore& store, std::size_t txn) { apply_undo(store, records_[txn]); }

void UndoLog::discard(std::size_t txn) { records_[txn].clear(); }

// ---------------------------------------------------------------- Snapshot

std::uint64_t Snapshot::digest() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& t : tables) {
    mix(t.name.data(), t.name.size());
    const std::uint64_t n = t.rows.size();
    mix(&n, sizeof n);
    for (const auto& col : t.columns) {
      for (const Cell& c : col) {
        if (const Value* v = std::get_if<Value>(&c)) {
          mix(v, sizeof *v);
        } else {
          const auto& s = std::get<std::string>(c);
          const std::uint64_t len = s.size();
          mix(&len, sizeof len);
          mix(s.data(), s.size());
        }
      }
    }
  }
  return h;
}

std::optional<DataItemId> compare_snapshots(const Snapshot& a, const Snapshot& b) {
  const std::size_t tables = std::max(a.tables.size(), b.tables.size());
  for (std::size_t ti = 0; ti < tables; ++ti) {
    const auto table = static_cast<TableId>(ti);
    if (ti >= a.tables.size() || ti >= b.tables.size()) return DataItemId::whole_table(table);
    const auto& ta = a.tables[ti];
    const auto& tb = b.tables[ti];
    if (ta.name != tb.name || ta.kinds != tb.kinds) return DataItemId::whole_table(table);
    const std::size_t rows = std::max(ta.rows.size(), tb.rows.size());
    for (std::size_t i = 0; i < rows; ++i) {
      if (i >= ta.rows.size()) return DataItemId{table, ta.key_column, tb.rows[i]};
      if (i >= tb.rows.size()) return DataItemId{table, ta.key_column, ta.rows[i]};
      // Key column first so a missing/extra row is reported on the key.
      if (ta.columns[ta.key_column][i] != tb.columns[tb.key_column][i]) {
        return DataItemId{table, ta.key_column, ta.rows[i]};
      }
      for (std::size_t c = 0; c < ta.columns.size(); ++c) {
        if (ta.columns[c][i] != tb.columns[c][i]) {
          return DataItemId{table, static_cast<ColumnId>(c), ta.rows[i]};
        }
      }
    }
  }
  return std::nullopt;
}

}  // namespace bulktx
