// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint policies and their save schedules, a versioned in-memory
// snapshot store with overlay restore, and the binary snapshot file format.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cprsim/cost_model.hpp"
#include "cprsim/embedding_store.hpp"

namespace cprsim {

/// How a strategy saves: its base interval, the priority-save ratio r, and
/// which tables are prioritized (saved partially at the faster cadence).
struct CheckpointPolicy {
  Strategy strategy = Strategy::FullRecovery;
  double t_save = 0.0;  ///< hours between full-coverage saves
  double r = 0.125;     ///< priority strategies save rN rows every r * t_save
  /// Tables saved partially by priority strategies. Empty means "derive
  /// from coverage": the largest tables covering prioritized_coverage of
  /// all parameters.
  std::vector<size_t> prioritized_tables;
  double prioritized_coverage = 0.99;

  void validate() const;
};

/// What one scheduled save covers.
enum class SaveKind {
  FullAll,             ///< every table, every row
  FullNonPrioritized,  ///< full rows of the non-prioritized tables only
  PartialPrioritized,  ///< rN selected rows of each prioritized table
};

std::string_view save_kind_name(SaveKind kind);

struct SaveAction {
  double time_hours = 0.0;
  SaveKind kind = SaveKind::FullAll;
};

/// Save actions over (0, horizon], ordered by time; at coincident times the
/// full-coverage action precedes the partial one. Plain strategies save
/// everything at multiples of t_save; priority strategies additionally save
/// prioritized tables partially at multiples of r * t_save.
std::vector<SaveAction> plan_schedule(const CheckpointPolicy& policy, double horizon_hours);

enum class SnapshotKind : uint32_t { Full = 0, PartialRows = 1 };

/// Snapshot of (a subset of) one table's rows as captured for one shard.
struct TableSliceSnapshot {
  uint64_t table_id = 0;
  uint32_t dim = 0;
  SnapshotKind kind = SnapshotKind::Full;
  double logical_time = 0.0;
  uint64_t sample_count = 0;
  uint32_t opt_count = 0;  ///< optimizer scalars per row (0 or 1)
  std::vector<uint64_t> row_ids;
  std::vector<float> values;  ///< row_ids.size() * dim, row-major
  std::vector<float> opt;     ///< row_ids.size() * opt_count
};

/// Binary little-endian serialization; byte-exact round-trip. Layout:
/// magic "CPRSNAP1", version u32, table_id u32, row_count u64, dim u32,
/// kind u32, logical_time f64, sample_count u64, opt_count u32, then per
/// row: id u64, dim float32 values, opt_count float32 scalars.
void write_snapshot(std::ostream& out, const TableSliceSnapshot& snap);
TableSliceSnapshot read_snapshot(std::istream& in);
void write_snapshot_file(const std::string& path, const TableSliceSnapshot& snap);
TableSliceSnapshot read_snapshot_file(const std::string& path);

/// Everything one shard persisted at one schedule tick.
struct ShardSnapshot {
  uint64_t snapshot_id = 0;
  double logical_time = 0.0;
  uint64_t sample_count = 0;
  bool full = false;  ///< covers every row the shard owns
  std::vector<TableSliceSnapshot> slices;
};

/// Versioned snapshot storage per shard, with latest-wins overlay restore.
/// Initialization counts as a virtual full snapshot at time 0: a shard with
/// no stored full snapshot restores to its deterministic initial rows, then
/// overlays whatever partial snapshots exist.
class SnapshotStore {
 public:
  /// `include_optimizer_state` controls whether per-row optimizer scalars
  /// travel with snapshots; when excluded, restored rows get a fresh (zero)
  /// accumulator.
  explicit SnapshotStore(int n_emb, bool include_optimizer_state = true);

  /// Captures every row `shard` owns across all tables, then prunes older
  /// generations (keeps this snapshot and later partials).
  uint64_t save_full_shard(const EmbeddingShardSet& set, int shard, double logical_time,
                           uint64_t sample_count);

  /// Captures the shard-owned subset of `row_ids_by_table` (pairs of table
  /// index and row ids; out-of-shard rows are filtered out).
  uint64_t save_partial_rows(
      const EmbeddingShardSet& set, int shard,
      std::span<const std::pair<size_t, std::vector<uint64_t>>> row_ids_by_table,
      double logical_time, uint64_t sample_count);

  /// Dense (non-embedding) model state attached to a full save round, used
  /// by full recovery to rewind the trainer.
  void put_global_blob(double logical_time, std::vector<uint8_t> blob);

  /// Rebuilds every row of `shard`: latest full snapshot (or initialization)
  /// overlaid with all later partial snapshots, row-wise latest-wins.
  /// Returns the logical time of the base full snapshot (0 for init).
  double restore_shard(EmbeddingShardSet& set, int shard) const;

  struct FullRestoreResult {
    double logical_time = 0.0;
    uint64_t sample_count = 0;
    const std::vector<uint8_t>* global_blob = nullptr;  ///< null when restoring to init
  };

  /// Full-recovery semantics: finds the latest time at which every shard
  /// has a full snapshot and restores all shards to exactly that state (no
  /// partial overlay). With no consistent set, restores initialization.
  FullRestoreResult restore_all_consistent(EmbeddingShardSet& set) const;

  /// Drops snapshots older than the shard's latest full one.
  void prune(int shard);

  size_t snapshot_count(int shard) const;
  const std::vector<ShardSnapshot>& snapshots(int shard) const;

  /// Total payload bytes currently retained (values + optimizer scalars).
  uint64_t stored_bytes() const;

 private:
  std::vector<ShardSnapshot>& shard_list(int shard);
  const std::vector<ShardSnapshot>& shard_list(int shard) const;
  void apply_slice(EmbeddingShardSet& set, const TableSliceSnapshot& slice) const;

  int n_emb_;
  bool include_opt_;
  uint64_t next_id_ = 1;
  std::vector<std::vector<ShardSnapshot>> per_shard_;
  std::map<double, std::vector<uint8_t>> global_blobs_;
};

/// Resolves a policy against a shard set: fills prioritized_tables from
/// coverage when empty (priority strategies only) and validates.
CheckpointPolicy resolve_policy(CheckpointPolicy policy, const EmbeddingShardSet& set);

}  // namespace cprsim
