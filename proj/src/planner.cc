#include "bulktx/planner.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <istream>
#include <ostream>
#include <unordered_set>

namespace bulktx {
namespace {

using Clock = std::chrono::steady_clock;

unsigned key_width(std::span<const TxnSignature> bulk, std::size_t type_count) {
  std::uint64_t hi = type_count > 0 ? type_count - 1 : 0;
  for (const TxnSignature& s : bulk) hi = std::max<std::uint64_t>(hi, s.type);
  return static_cast<unsigned>(std::bit_width(hi));
}

}  // namespace

unsigned GroupingConfig::full_passes() const {
  const unsigned width = static_cast<unsigned>(std::bit_width(type_count > 1 ? type_count - 1 : 0));
  const unsigned b = std::max(1u, bits_per_pass);
  return (width + b - 1) / b;
}

std::vector<std::uint32_t> group_order(std::span<const TxnSignature> bulk, const GroupingConfig& config) {
  std::vector<std::uint32_t> order(bulk.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  const unsigned b = std::max(1u, std::min(config.bits_per_pass, 16u));
  const unsigned width = key_width(bulk, config.type_count);
  // Bucket bounds over `order`; each pass splits every bucket by the next
  // b bits of the type id, most significant first.
  std::vector<std::pair<std::size_t, std::size_t>> buckets{{0, order.size()}};
  std::vector<std::uint32_t> tmp(order.size());
  std::vector<std::size_t> count((std::size_t{1} << b) + 1);
  unsigned consumed = 0;
  for (unsigned pass = 0; pass < config.passes && consumed < width; ++pass) {
    const unsigned take = std::min(b, width - consumed);
    const unsigned shift = width - consumed - take;
    const std::uint64_t mask = (std::uint64_t{1} << take) - 1;
    auto digit = [&](std::uint32_t pos) { return (bulk[pos].type >> shift) & mask; };
    std::vector<std::pair<std::size_t, std::size_t>> next;
    for (auto [lo, hi] : buckets) {
      if (hi - lo <= 1) {
        next.emplace_back(lo, hi);
        continue;
      }
      std::fill(count.begin(), count.end(), 0);
      for (std::size_t i = lo; i < hi; ++i) ++count[digit(order[i]) + 1];
      for (std::size_t d = 1; d < count.size(); ++d) count[d] += count[d - 1];
      for (std::size_t d = 0; d + 1 < count.size(); ++d) {
        if (count[d + 1] > count[d]) next.emplace_back(lo + count[d], lo + count[d + 1]);
      }
      for (std::size_t i = lo; i < hi; ++i) tmp[lo + count[digit(order[i])]++] = order[i];
      std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
                order.begin() + static_cast<std::ptrdiff_t>(lo));
    }
    buckets.swap(next);
    consumed += take;
  }
  return order;
}

std::vector<TxnSignature> group_by_type(std::span<const TxnSignature> bulk, const GroupingConfig& config) {
  std::vector<TxnSignature> out;
  out.reserve(bulk.size());
  for (std::uint32_t p : group_order(bulk, config)) out.push_back(bulk[p]);
  return out;
}

std::size_t divergence(std::span<const TxnSignature> bulk, std::span<const std::uint32_t> order,
                       std::size_t warp_size) {
  if (warp_size == 0) warp_size = 1;
  std::size_t total = 0;
  std::vector<TypeId> chunk;
  for (std::size_t start = 0; start < bulk.size(); start += warp_size) {
    chunk.clear();
    for (std::size_t i = start; i < std::min(bulk.size(), start + warp_size); ++i) {
      chunk.push_back(bulk[order.empty() ? i : order[i]].type);
    }
    std::sort(chunk.begin(), chunk.end());
    total += static_cast<std::size_t>(std::unique(chunk.begin(), chunk.end()) - chunk.begin()) - 1;
  }
  return total;
}

Strategy choose_strategy(const GraphStats& stats, const StrategyThresholds& t) {
  if (stats.w0 >= t.w0_bar) return Strategy::kset;
  if (stats.c <= t.c_bar || stats.d >= t.d_bar) return Strategy::part;
  return Strategy::tpl;
}

StrategyThresholds PlannerConfig::thresholds_for(std::size_t bulk_size) const {
  const std::size_t lanes = std::max<std::size_t>(1, exec.lane_count);
  StrategyThresholds t;
  t.w0_bar = w0_bar.value_or(lanes);
  t.c_bar = c_bar.value_or(0);
  t.d_bar = d_bar.value_or(std::max<std::size_t>(1, bulk_size / lanes));
  return t;
}

// ------------------------------------------------------------------ config

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ParseError("config: bad value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ParseError("config: bad boolean '" + std::string(v) + "' for " + std::string(key));
}

}  // namespace

void apply_setting(PlannerConfig& c, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "lane_count") {
    c.exec.lane_count = parse_number<std::size_t>(key, value);
    if (c.exec.lane_count == 0) throw ParseError("config: lane_count must be positive");
  } else if (key == "warp_size") {
    c.exec.warp_size = parse_number<std::size_t>(key, value);
  } else if (key == "partition_size") {
    c.exec.partition_size = parse_number<Value>(key, value);
    if (c.exec.partition_size <= 0) throw ParseError("config: partition_size must be positive");
  } else if (key == "lock_slots") {
    c.exec.lock_slots = parse_number<std::size_t>(key, value);
  } else if (key == "root_locks") {
    c.exec.root_locks = parse_bool(key, value);
  } else if (key == "watchdog_ms") {
    c.exec.watchdog = std::chrono::milliseconds(parse_number<long long>(key, value));
  } else if (key == "bits_per_pass") {
    c.grouping.bits_per_pass = parse_number<unsigned>(key, value);
    if (c.grouping.bits_per_pass == 0) throw ParseError("config: bits_per_pass must be positive");
  } else if (key == "passes") {
    c.grouping.passes = parse_number<unsigned>(key, value);
  } else if (key == "type_count") {
    c.grouping.type_count = parse_number<std::size_t>(key, value);
  } else if (key == "w0_bar") {
    c.w0_bar = parse_number<std::size_t>(key, value);
  } else if (key == "c_bar") {
    c.c_bar = parse_number<std::size_t>(key, value);
  } else if (key == "d_bar") {
    c.d_bar = parse_number<std::size_t>(key, value);
  } else if (key == "strategy") {
    if (value == "auto") {
      c.auto_strategy = true;
    } else if (auto s = parse_strategy(value)) {
      c.auto_strategy = false;
      c.exec.strategy = *s;
    } else {
      throw ParseError("config: unknown strategy '" + std::string(value) + "'");
    }
  } else if (key == "max_size") {
    c.max_size = parse_number<std::size_t>(key, value);
  } else if (key == "interval") {
    c.interval = parse_number<double>(key, value);
    if (c.interval < 0) throw ParseError("config: interval must be non-negative");
  } else {
    throw ParseError("config: unknown key '" + std::string(key) + "'");
  }
}

PlannerConfig read_config(std::istream& in, PlannerConfig base) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::string_view s = line;
    if (auto h = s.find('#'); h != std::string_view::npos) s = s.substr(0, h);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError("config line " + std::to_string(n) + ": expected key = value");
    try {
      apply_setting(base, s.substr(0, eq), s.substr(eq + 1));
    } catch (const ParseError& e) {
      throw ParseError("config line " + std::to_string(n) + ": " + e.what());
    }
  }
  return base;
}

void write_config(const PlannerConfig& c, std::ostream& out) {
  out << "lane_count = " << c.exec.lane_count << '\n';
  out << "warp_size = " << c.exec.warp_size << '\n';
  out << "partition_size = " << c.exec.partition_size << '\n';
  out << "lock_slots = " << c.exec.lock_slots << '\n';
  out << "root_locks = " << (c.exec.root_locks ? "true" : "false") << '\n';
  out << "watchdog_ms = " << c.exec.watchdog.count() << '\n';
  out << "bits_per_pass = " << c.grouping.bits_per_pass << '\n';
  out << "passes = " << c.grouping.passes << '\n';
  out << "type_count = " << c.grouping.type_count << '\n';
  if (c.w0_bar) out << "w0_bar = " << *c.w0_bar << '\n';
  if (c.c_bar) out << "c_bar = " << *c.c_bar << '\n';
  if (c.d_bar) out << "d_bar = " << *c.d_bar << '\n';
  out << "strategy = " << (c.auto_strategy ? "auto" : to_string(c.exec.strategy)) << '\n';
  out << "max_size = " << c.max_size << '\n';
  out << "interval = " << c.interval << '\n';
}

// ----------------------------------------------------------------- planner

std::size_t Bulk::size() const {
  std::size_t n = 0;
  for (const BulkSegment& s : segments) n += s.txns.size();
  return n;
}

BulkPlanner::BulkPlanner(const TypeRegistry& registry, PlannerConfig config)
    : registry_(registry), config_(std::move(config)) {}

void BulkPlanner::pull(TxnPool& pool) {
  for (TxnSignature& s : pool.take_all()) {
    if (!held_.empty() && s.id <= held_.back().id) throw SchedulingError("pool ids not increasing");
    held_.push_back(std::move(s));
  }
}

std::vector<TxnSignature> BulkPlanner::take_prefix(std::size_t n) {
  n = std::min(n, held_.size());
  std::vector<TxnSignature> out(std::make_move_iterator(held_.begin()),
                                std::make_move_iterator(held_.begin() + static_cast<std::ptrdiff_t>(n)));
  held_.erase(held_.begin(), held_.begin() + static_cast<std::ptrdiff_t>(n));
  if (tracked_ > 0) {
    std::vector<TxnId> ids;
    for (std::size_t i = 0; i < std::min(n, tracked_); ++i) ids.push_back(out[i].id);
    tracker_.remove(ids);
    tracked_ -= ids.size();
  }
  return out;
}

// Removes the given ids (ascending, all held) from the held queue without
// touching the tracker.
std::vector<TxnSignature> BulkPlanner::take_ids(std::span<const TxnId> ids) {
  std::vector<TxnSignature> out;
  out.reserve(ids.size());
  // held_ is in ascending id order (pull enforces it).
  if (ids.size() * 16 < held_.size()) {
    for (TxnId id : ids) {
      auto it = std::lower_bound(held_.begin(), held_.end(), id,
                                 [](const TxnSignature& t, TxnId v) { return t.id < v; });
      if (it == held_.end() || it->id != id) throw SchedulingError("planner: 0-set names a txn that is not held");
      out.push_back(std::move(*it));
      if (static_cast<std::size_t>(it - held_.begin()) < tracked_) --tracked_;
      held_.erase(it);
    }
    return out;
  }
  std::deque<TxnSignature> rest;
  std::size_t k = 0;
  std::size_t tracked_taken = 0;
  for (std::size_t i = 0; i < held_.size(); ++i) {
    if (k < ids.size() && held_[i].id == ids[k]) {
      out.push_back(std::move(held_[i]));
      if (i < tracked_) ++tracked_taken;
      ++k;
    } else {
      rest.push_back(std::move(held_[i]));
    }
  }
  if (k != ids.size()) throw SchedulingError("planner: 0-set names a txn that is not held");
  held_.swap(rest);
  tracked_ -= tracked_taken;
  return out;
}

void BulkPlanner::sync_tracker() {
  if (tracked_ == held_.size()) return;
  std::vector<Footprint> fps;
  bool grew = false;
  for (std::size_t i = tracked_; i < held_.size(); ++i) {
    fps.push_back(registry_.declared_ops(held_[i]));
    for (auto [t, mode] : fps.back().unknown) {
      if (std::find(coarse_.begin(), coarse_.end(), t) == coarse_.end()) {
        coarse_.push_back(t);
        grew = true;
      }
    }
  }
  if (grew) {
    // Held txns already tracked were analysed at cell granularity; redo them.
    tracker_.clear();
    for (std::size_t i = 0; i < tracked_; ++i) {
      tracker_.add(held_[i].id, normalized_accesses(registry_.declared_ops(held_[i]), coarse_));
    }
  }
  for (std::size_t i = tracked_; i < held_.size(); ++i) {
    tracker_.add(held_[i].id, normalized_accesses(fps[i - tracked_], coarse_));
  }
  tracked_ = held_.size();
}

void BulkPlanner::add_segments(Bulk& bulk, Strategy s, std::vector<TxnSignature> txns) const {
  if (txns.empty()) return;
  const bool grouped = config_.grouping.passes > 0;
  if (s != Strategy::part && s != Strategy::part_relaxed) {
    BulkSegment seg;
    seg.strategy = s;
    seg.txns = std::move(txns);
    if (grouped) seg.lane_order = group_order(seg.txns, config_.grouping);
    bulk.segments.push_back(std::move(seg));
    return;
  }
  // Single-partition id-runs go to PART, cross-partition runs to TPL.
  const Value psize = config_.exec.partition_size;
  std::size_t i = 0;
  while (i < txns.size()) {
    const bool single = registry_.partition_of(txns[i], psize).has_value();
    std::size_t j = i + 1;
    while (j < txns.size() && registry_.partition_of(txns[j], psize).has_value() == single) ++j;
    BulkSegment seg;
    seg.strategy = single ? s : Strategy::tpl;
    seg.txns.assign(std::make_move_iterator(txns.begin() + static_cast<std::ptrdiff_t>(i)),
                    std::make_move_iterator(txns.begin() + static_cast<std::ptrdiff_t>(j)));
    if (single && s == Strategy::part) seg.schedule = part_schedule(registry_, seg.txns, psize);
    if (!single && grouped) seg.lane_order = group_order(seg.txns, config_.grouping);
    bulk.segments.push_back(std::move(seg));
    i = j;
  }
}

Bulk BulkPlanner::generate(TxnPool& pool) {
  return generate(pool, config_.exec.strategy);
}

Bulk BulkPlanner::generate(TxnPool& pool, Strategy strategy) {
  const auto t0 = Clock::now();
  pull(pool);
  Bulk bulk;
  const std::size_t cap = config_.max_size == 0 ? held_.size() : std::min(config_.max_size, held_.size());

  if (config_.auto_strategy) {
    std::vector<TxnSignature> cand(held_.begin(), held_.begin() + static_cast<std::ptrdiff_t>(cap));
    const PoolOps ops = collect_ops(registry_, cand);
    if (ops.footprint_unknown()) {
      bulk.strategy = Strategy::tpl;
    } else {
      const RankTable ranks = compute_ranks(ops);
      std::vector<std::uint8_t> cross(cand.size());
      for (std::size_t i = 0; i < cand.size(); ++i) {
        cross[i] = !registry_.partition_of(cand[i], config_.exec.partition_size).has_value();
      }
      bulk.stats = graph_stats(ranks, cross);
      bulk.stats_valid = true;
      bulk.strategy = choose_strategy(bulk.stats, config_.thresholds_for(cand.size()));
      if (bulk.strategy == Strategy::kset) {
        add_segments(bulk, Strategy::kset, take_ids(ranks.k_set(0)));
      }
    }
    if (bulk.strategy != Strategy::kset) add_segments(bulk, bulk.strategy, take_prefix(cap));
  } else if (strategy == Strategy::kset) {
    bulk.strategy = Strategy::kset;
    sync_tracker();
    const std::vector<TxnId> ids = tracker_.extract_zero_set();
    add_segments(bulk, Strategy::kset, take_ids(ids));
  } else {
    bulk.strategy = strategy;
    add_segments(bulk, strategy, take_prefix(cap));
  }

  for (const BulkSegment& seg : bulk.segments) {
    if (seg.strategy == Strategy::part || seg.strategy == Strategy::part_relaxed) continue;
    bulk.divergence += divergence(seg.txns, seg.lane_order, config_.exec.warp_size);
  }
  bulk.gen_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return bulk;
}

ExecOutcome execute_planned(ExecEnv& env, const Bulk& bulk, const ExecutorConfig& config,
                            std::vector<TxnId>* serial_order) {
  ExecOutcome out;
  out.strategy = bulk.strategy;
  out.lane_txns.assign(env.lanes.size(), 0);
  for (const BulkSegment& seg : bulk.segments) {
    ExecutorConfig c = config;
    c.strategy = seg.strategy;
    ExecOutcome r;
    if (seg.strategy == Strategy::kset) {
      r = exec_conflict_free(env, seg.txns, c, seg.lane_order);
      r.rounds.push_back(r.txns);
    } else if (seg.strategy == Strategy::part && seg.schedule) {
      r = exec_part_schedule(env, seg.txns, *seg.schedule, c);
    } else {
      r = execute_bulk(env, seg.txns, c, seg.lane_order);
    }
    if (serial_order) {
      const bool relaxed = seg.strategy == Strategy::tpl_relaxed || seg.strategy == Strategy::part_relaxed;
      if (relaxed) {
        if (!config.trace) throw SchedulingError("serial order of a relaxed segment needs a trace");
        const SerializationCheck check = check_serializable(r.trace);
        if (!check.acyclic) throw SchedulingError("relaxed segment is not serializable");
        std::unordered_set<TxnId> placed(check.order.begin(), check.order.end());
        // Txns without recorded accesses commute with everything.
        for (const TxnSignature& sig : seg.txns) {
          if (!placed.count(sig.id)) serial_order->push_back(sig.id);
        }
        serial_order->insert(serial_order->end(), check.order.begin(), check.order.end());
      } else {
        for (const TxnSignature& sig : seg.txns) serial_order->push_back(sig.id);
      }
    }
    out.append(std::move(r));
  }
  return out;
}

// ------------------------------------------------------------- calibration

CalibrationResult calibrate(const PlannerConfig& base, const CalibrationSpace& space,
                            const std::function<double(const PlannerConfig&)>& measure) {
  CalibrationResult res;
  res.config = base;
  if (!measure) {
    res.config.grouping.passes = base.grouping.full_passes();
    res.config.exec.partition_size = 128;
    return res;
  }
  auto search = [&](const char* knob, std::size_t n, const std::function<void(PlannerConfig&, std::size_t)>& set) {
    if (n == 0) return;
    double best = -1;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < n; ++i) {
      PlannerConfig c = res.config;
      set(c, i);
      const double tp = measure(c);
      res.curve.push_back({knob, i, tp});
      if (tp > best) {
        best = tp;
        best_i = i;
      }
    }
    set(res.config, best_i);
  };
  search("passes", space.passes.size(), [&](PlannerConfig& c, std::size_t i) {
    c.auto_strategy = false;
    c.exec.strategy = Strategy::tpl;
    c.grouping.passes = space.passes[i];
  });
  search("partition_size", space.partition_sizes.size(), [&](PlannerConfig& c, std::size_t i) {
    c.auto_strategy = false;
    c.exec.strategy = Strategy::part;
    c.exec.partition_size = space.partition_sizes[i];
  });
  search("thresholds", space.thresholds.size(), [&](PlannerConfig& c, std::size_t i) {
    c.auto_strategy = true;
    c.w0_bar = space.thresholds[i].w0_bar;
    c.c_bar = space.thresholds[i].c_bar;
    c.d_bar = space.thresholds[i].d_bar;
  });
  res.config.auto_strategy = base.auto_strategy || !space.thresholds.empty();
  res.config.exec.strategy = base.exec.strategy;
  return res;
}

}  // namespace bulktx
