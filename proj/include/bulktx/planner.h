#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bulktx/depgraph.h"
#include "bulktx/executors.h"
#include "bulktx/txmodel.h"

namespace bulktx {

/// Radix grouping of a bulk by type id: `passes` MSD passes of
/// `bits_per_pass` bits each over a key of ceil(log2 T) bits.
struct GroupingConfig {
  unsigned bits_per_pass = 2;
  unsigned passes = 0;  // 0 = no grouping
  std::size_t type_count = 1;

  // Passes needed for fully homogeneous groups.
  unsigned full_passes() const;
};

// Bulk positions in grouped order. Stable: ids stay ascending per bucket.
std::vector<std::uint32_t> group_order(std::span<const TxnSignature> bulk, const GroupingConfig& config);
std::vector<TxnSignature> group_by_type(std::span<const TxnSignature> bulk, const GroupingConfig& config);

// Sum over warp-sized chunks of (distinct types - 1), in the given order.
std::size_t divergence(std::span<const TxnSignature> bulk, std::span<const std::uint32_t> order,
                       std::size_t warp_size);
inline std::size_t divergence(std::span<const TxnSignature> bulk, std::size_t warp_size) {
  return divergence(bulk, {}, warp_size);
}

struct StrategyThresholds {
  std::size_t w0_bar = 1;
  std::size_t c_bar = 0;
  std::size_t d_bar = 1;
};

// w0 >= w0_bar -> KSET; else c <= c_bar or d >= d_bar -> PART; else TPL.
Strategy choose_strategy(const GraphStats& stats, const StrategyThresholds& t);

/// Everything the planner and executors read from a config file or flags.
///
///   key = value   # comment
struct PlannerConfig {
  ExecutorConfig exec;
  GroupingConfig grouping;
  // Unset thresholds default per bulk: w0_bar = lanes, c_bar = 0,
  // d_bar = bulk size / lanes.
  std::optional<std::size_t> w0_bar;
  std::optional<std::size_t> c_bar;
  std::optional<std::size_t> d_bar;
  bool auto_strategy = false;
  std::size_t max_size = 0;  // 0 = unbounded
  double interval = 0;       // logical ms between bulks; 0 = one bulk per drain

  StrategyThresholds thresholds_for(std::size_t bulk_size) const;
};

// Throws ParseError on an unknown key or a bad value.
void apply_setting(PlannerConfig& config, std::string_view key, std::string_view value);
PlannerConfig read_config(std::istream& in, PlannerConfig base = {});
void write_config(const PlannerConfig& config, std::ostream& out);

/// A run of a bulk executed with one strategy. A bulk is executed segment
/// by segment in order.
struct BulkSegment {
  Strategy strategy = Strategy::tpl;
  std::vector<TxnSignature> txns;
  std::vector<std::uint32_t> lane_order;  // grouped positions; empty = id order
  std::optional<PartitionSchedule> schedule;
};

struct Bulk {
  Strategy strategy = Strategy::tpl;  // as chosen for the whole bulk
  std::vector<BulkSegment> segments;
  GraphStats stats;
  bool stats_valid = false;
  std::size_t divergence = 0;
  double gen_seconds = 0;

  std::size_t size() const;
  bool empty() const { return size() == 0; }
};

/// Periodic bulk generation. Transactions are taken from the pool into a
/// held queue; TPL and PART bulks are a prefix of it, KSET bulks its 0-set.
class BulkPlanner {
 public:
  BulkPlanner(const TypeRegistry& registry, PlannerConfig config);

  // Pulls everything pending in the pool, then cuts one bulk. Uses the
  // chooser when config.auto_strategy is set.
  Bulk generate(TxnPool& pool);
  Bulk generate(TxnPool& pool, Strategy strategy);

  std::size_t held() const { return held_.size(); }
  const PlannerConfig& config() const { return config_; }

 private:
  void pull(TxnPool& pool);
  std::vector<TxnSignature> take_prefix(std::size_t n);
  std::vector<TxnSignature> take_ids(std::span<const TxnId> ids);
  void sync_tracker();
  void add_segments(Bulk& bulk, Strategy s, std::vector<TxnSignature> txns) const;

  const TypeRegistry& registry_;
  PlannerConfig config_;
  std::deque<TxnSignature> held_;
  KSetTracker tracker_;
  std::size_t tracked_ = 0;  // held_ prefix mirrored in the tracker
  std::vector<TableId> coarse_;
};

// With `serial_order`, appends an order in which running the bulk's txns
// one by one gives the same result: id order, except for relaxed segments,
// whose order comes from their trace (config.trace must be set).
ExecOutcome execute_planned(ExecEnv& env, const Bulk& bulk, const ExecutorConfig& config,
                            std::vector<TxnId>* serial_order = nullptr);

/// Grid for calibrate(). Each list is searched in turn, the best value kept
/// for the following searches.
struct CalibrationSpace {
  std::vector<unsigned> passes;
  std::vector<Value> partition_sizes;
  std::vector<StrategyThresholds> thresholds;
};

struct CalibrationPoint {
  std::string knob;  // passes | partition_size | thresholds
  std::size_t index = 0;
  double throughput = 0;
};

struct CalibrationResult {
  PlannerConfig config;
  std::vector<CalibrationPoint> curve;
};

// `measure` runs the sample under a config and returns its throughput.
// Searches passes with TPL, partition size with PART, thresholds with auto.
// No measure function means no sample: the defaults come back.
CalibrationResult calibrate(const PlannerConfig& base, const CalibrationSpace& space,
                            const std::function<double(const PlannerConfig&)>& measure);

}  // namespace bulktx
