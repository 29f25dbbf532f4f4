#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>

namespace bulktx {

using Value = std::int64_t;
using TableId = std::uint16_t;
using ColumnId = std::uint16_t;
using RowId = std::uint64_t;
using TxnId = std::uint64_t;
using TypeId = std::uint32_t;

// A fixed-length cell is a Value; a variable-length cell is a byte string.
using Cell = std::variant<Value, std::string>;

/// Field-granularity address of one cell: (table, column, row).
///
/// Encodes to a single 64-bit integer as table:8 | column:8 | row:48, so the
/// encoding is order-preserving with respect to the (table, column, row)
/// lexicographic order. Two reserved column values give non-cell lockable
/// objects: kWholeTable (coarse, table-granularity conflicts) and kKeyLock
/// (a primary-key value of a root relation, row holds the key).
struct DataItemId {
  TableId table = 0;
  ColumnId column = 0;
  RowId row = 0;

  static constexpr ColumnId kWholeTable = 0xFF;
  static constexpr ColumnId kKeyLock = 0xFE;
  static constexpr ColumnId kMaxColumns = 0xFE;
  static constexpr TableId kMaxTables = 0x100;
  static constexpr RowId kRowMask = (RowId{1} << 48) - 1;

  static DataItemId whole_table(TableId t) { return {t, kWholeTable, kRowMask}; }
  static DataItemId key_lock(TableId t, Value key) {
    return {t, kKeyLock, static_cast<RowId>(key) & kRowMask};
  }

  bool is_cell() const { return column < kMaxColumns; }

  std::uint64_t encode() const {
    return (std::uint64_t{table} << 56) | (std::uint64_t{column} << 48) | (row & kRowMask);
  }
  static DataItemId decode(std::uint64_t code) {
    return {static_cast<TableId>(code >> 56), static_cast<ColumnId>((code >> 48) & 0xFF),
            code & kRowMask};
  }

  auto operator<=>(const DataItemId&) const = default;
};

std::string to_string(const DataItemId& item);

}  // namespace bulktx

template <>
struct std::hash<bulktx::DataItemId> {
  size_t operator()(const bulktx::DataItemId& d) const noexcept {
    return std::hash<std::uint64_t>{}(d.encode());
  }
};
