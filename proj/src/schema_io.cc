#include <cctype>
#include <charconv>
#include <istream>
#include <ostream>

#include "bulktx/storage.h"

namespace bulktx {
namespace {

const char kHex[] = "0123456789abcdef";

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

struct Cursor {
  std::string_view line;
  std::size_t pos = 0;
  std::size_t line_no = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("schema line " + std::to_string(line_no) + ": " + msg);
  }

  void skip_ws() {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
  }
  bool done() {
    skip_ws();
    return pos >= line.size();
  }
  std::string_view word() {
    skip_ws();
    const std::size_t start = pos;
    while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (start == pos) fail("unexpected end of line");
    return line.substr(start, pos - start);
  }

  Cell cell(ColumnKind kind) {
    skip_ws();
    if (kind == ColumnKind::fixed) {
      std::string_view w = word();
      Value v = 0;
      auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
      if (ec != std::errc() || p != w.data() + w.size()) fail("bad integer '" + std::string(w) + "'");
      return v;
    }
    if (pos >= line.size() || line[pos] != '"') fail("expected quoted string");
    ++pos;
    std::string out;
    while (true) {
      if (pos >= line.size()) fail("unterminated string");
      const char c = line[pos++];
      if (c == '"') break;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (pos >= line.size()) fail("dangling escape");
      const char e = line[pos++];
      if (e == '\\' || e == '"') {
        out.push_back(e);
      } else if (e == 'x') {
        if (pos + 2 > line.size()) fail("short \\x escape");
        const int hi = hex_digit(line[pos]);
        const int lo = hex_digit(line[pos + 1]);
        if (hi < 0 || lo < 0) fail("bad \\x escape");
        out.push_back(static_cast<char>(hi * 16 + lo));
        pos += 2;
      } else {
        fail(std::string("unknown escape \\") + e);
      }
    }
    return out;
  }
};

std::pair<std::string_view, std::string_view> split_assign(Cursor& cur, std::string_view w) {
  const auto eq = w.find('=');
  if (eq == std::string_view::npos) cur.fail("expected key=value, got '" + std::string(w) + "'");
  return {w.substr(0, eq), w.substr(eq + 1)};
}

}  // namespace

std::string quote_bytes(std::string_view bytes) {
  std::string out = "\"";
  for (char c : bytes) {
    const auto u = static_cast<unsigned char>(c);
    if (c == '"' || c == '\\') {
      out.push_back('\\');
      out.push_back(c);
    } else if (u < 0x20 || u >= 0x7f) {
      out += "\\x";
      out.push_back(kHex[u >> 4]);
      out.push_back(kHex[u & 0xf]);
    } else {
      out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

ColumnStore load_store(std::istream& in) {
  ColumnStore store;
  struct PendingTable {
    TableDef def;
    std::string key, partition;
  };
  std::optional<PendingTable> open;
  auto close = [&](Cursor& cur) {
    if (!open) return;
    auto key = open->def.column_id(open->key);
    auto part = open->def.column_id(open->partition);
    if (!key) cur.fail("table " + open->def.name + ": unknown key column " + open->key);
    if (!part) cur.fail("table " + open->def.name + ": unknown partition column " + open->partition);
    open->def.key_column = *key;
    open->def.partition_column = *part;
    try {
      store.create_table(std::move(open->def));
    } catch (const AddressingError& e) {
      cur.fail(e.what());
    }
    open.reset();
  };

  std::string raw;
  Cursor cur;
  std::vector<Cell> cells;
  while (std::getline(in, raw)) {
    ++cur.line_no;
    cur.line = raw;
    cur.pos = 0;
    if (cur.done() || raw[cur.pos] == '#') continue;
    const std::string_view kw = cur.word();
    if (kw == "table") {
      close(cur);
      PendingTable t;
      t.def.name = std::string(cur.word());
      while (!cur.done()) {
        auto [k, v] = split_assign(cur, cur.word());
        if (k == "key") {
          t.key = v;
        } else if (k == "partition") {
          t.partition = v;
        } else {
          cur.fail("unknown table attribute " + std::string(k));
        }
      }
      if (t.key.empty()) cur.fail("table " + t.def.name + " needs key=");
      if (t.partition.empty()) t.partition = t.key;
      open = std::move(t);
    } else if (kw == "column") {
      if (!open) cur.fail("column outside a table declaration");
      ColumnDef c;
      c.name = std::string(cur.word());
      const std::string_view kind = cur.word();
      if (kind == "fixed") {
        c.kind = ColumnKind::fixed;
      } else if (kind == "var") {
        c.kind = ColumnKind::var;
      } else {
        cur.fail("column kind must be fixed or var");
      }
      if (!cur.done()) cur.fail("trailing text after column");
      open->def.columns.push_back(std::move(c));
    } else if (kw == "row") {
      close(cur);
      const std::string_view name = cur.word();
      const auto table = store.table_id(name);
      if (!table) cur.fail("row for unknown table " + std::string(name));
      const TableDef& def = store.def(*table);
      cells.clear();
      for (const ColumnDef& c : def.columns) cells.push_back(cur.cell(c.kind));
      if (!cur.done()) cur.fail("too many cells for table " + def.name);
      try {
        store.append_row(*table, cells);
      } catch (const Error& e) {
        cur.fail(e.what());
      }
    } else {
      cur.fail("unknown keyword '" + std::string(kw) + "'");
    }
  }
  close(cur);
  return store;
}

void dump_store(const ColumnStore& store, std::ostream& out) {
  for (TableId t = 0; t < store.table_count(); ++t) {
    const TableDef& def = store.def(t);
    out << "table " << def.name << " key=" << def.columns[def.key_column].name
        << " partition=" << def.columns[def.partition_column].name << "\n";
    for (const ColumnDef& c : def.columns) {
      out << "column " << c.name << (c.kind == ColumnKind::fixed ? " fixed" : " var") << "\n";
    }
  }
  for (TableId t = 0; t < store.table_count(); ++t) {
    const TableDef& def = store.def(t);
    for (RowId r = 0; r < store.row_count(t); ++r) {
      if (!store.is_live(t, r)) continue;
      out << "row " << def.name;
      for (ColumnId c = 0; c < def.columns.size(); ++c) {
        const DataItemId item{t, c, r};
        if (def.columns[c].kind == ColumnKind::fixed) {
          out << ' ' << store.read_item(item);
        } else {
          out << ' ' << quote_bytes(store.read_bytes(item));
        }
      }
      out << "\n";
    }
  }
}

}  // namespace bulktx
