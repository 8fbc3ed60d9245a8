// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Sharded embedding tables with the access/update instrumentation behind
// the three priority-save selectors: per-row access counters (MFU), a
// bounded subsampled-access list (SSU), and a shadow-copy delta tracker
// (SCAR).

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cprsim/rng.hpp"

namespace cprsim {

/// Bounded non-duplicate list of row ids fed by periodic subsampling of the
/// access stream; overflow evicts uniformly at random. Capacity may be
/// given absolutely or as a ratio of the table's rows (used when capacity
/// is 0, resolved at table construction).
struct SsuConfig {
  uint64_t capacity = 0;
  double capacity_ratio = 0.0;
  uint32_t sampling_period = 2;
};

/// Which auxiliary structures a table maintains, plus initialization and
/// optimizer settings.
struct TableOptions {
  bool track_counters = true;
  bool track_shadow = false;
  std::optional<SsuConfig> ssu;
  bool adagrad = false;
  double init_scale = 0.01;  ///< rows initialize to N(0, init_scale^2) per component
};

/// One embedding table: float32 row storage, optional per-row optimizer
/// scalar, and the priority-save instrumentation. Row initialization is a
/// pure function of (seed, table id, row), so lost rows can be regenerated.
class EmbeddingTable {
 public:
  EmbeddingTable(uint64_t table_id, uint64_t rows, uint32_t dim, const TableOptions& options,
                 uint64_t seed);

  uint64_t table_id() const { return id_; }
  uint64_t rows() const { return rows_; }
  uint32_t dim() const { return dim_; }
  const TableOptions& options() const { return opts_; }

  std::span<const float> row(uint64_t r) const;
  std::span<float> mutable_row(uint64_t r);
  float opt_state(uint64_t r) const;
  void set_opt_state(uint64_t r, float v);
  /// Optimizer scalars stored per row (1 with adaptive updates, else 0).
  uint32_t opt_count() const { return opts_.adagrad ? 1u : 0u; }

  /// Returns the requested rows (appended to `out` as doubles, dim per
  /// index, when non-null), increments each accessed row's counter, and
  /// offers every sampling_period-th processed access to the SSU list
  /// (phase: the 2nd, 4th, ... accesses). Throws std::out_of_range.
  void lookup_and_count(std::span<const uint64_t> indices, std::vector<double>* out = nullptr);

  /// Adds `deltas` (indices.size() x dim, row-major) to the rows in place.
  /// Throws std::invalid_argument on non-finite components.
  void apply_updates(std::span<const uint64_t> indices, std::span<const double> deltas);

  /// Gradient-descent write path: plain SGD applies -lr * grad; with
  /// adaptive updates the per-row accumulator scales the step.
  void apply_gradients(std::span<const uint64_t> indices, std::span<const double> grads,
                       double lr);

  /// The rn rows with the highest access counters; ties broken by lower row
  /// id. Requires 0 < rn <= rows.
  std::vector<uint64_t> top_rn_by_counter(uint64_t rn) const;

  /// The rn rows with the largest L2 change since their shadow copy was
  /// refreshed; ties broken by lower row id. Requires the shadow tracker.
  std::vector<uint64_t> top_rn_by_delta(uint64_t rn) const;

  /// L2 norm of (current - shadow) for one row.
  double delta(uint64_t r) const;
  uint32_t counter(uint64_t r) const;

  /// Pearson correlation between per-row access counts and per-row L2
  /// update magnitudes since the last reset. Throws std::domain_error when
  /// either series has zero variance.
  double frequency_delta_correlation() const;

  /// Row ids currently held by the SSU list (unordered snapshot).
  std::vector<uint64_t> ssu_entries() const;
  uint64_t ssu_capacity() const;

  /// Save bookkeeping: clears saved rows' counters, refreshes their shadow
  /// copies, and drops them from the SSU list.
  void mark_rows_saved(std::span<const uint64_t> row_ids);
  void mark_range_saved(uint64_t begin, uint64_t end);

  /// A failed-and-restored shard lost its in-memory instrumentation: reset
  /// counters, re-anchor shadows at the restored values, and drop SSU
  /// entries for rows in [begin, end).
  void on_range_restored(uint64_t begin, uint64_t end);

  /// Regenerates rows in [begin, end) to their initialization values (and
  /// zeroed optimizer state).
  void reinit_range(uint64_t begin, uint64_t end);

  /// Instrumented auxiliary-memory budgets in bytes.
  uint64_t counter_aux_bytes() const;
  uint64_t ssu_aux_bytes() const;
  uint64_t shadow_aux_bytes() const;

 private:
  void check_row(uint64_t r) const;
  void offer_to_ssu(uint64_t r);
  void ssu_remove(uint64_t r);
  void init_row(uint64_t r);

  uint64_t id_;
  uint64_t rows_;
  uint32_t dim_;
  TableOptions opts_;
  uint64_t seed_;
  std::vector<float> values_;
  std::vector<float> opt_;
  std::vector<uint32_t> counters_;
  std::vector<float> shadow_;
  std::vector<uint64_t> ssu_entries_;
  std::unordered_map<uint64_t, size_t> ssu_pos_;
  uint64_t processed_accesses_ = 0;
  Rng ssu_rng_;
};

/// Table shape: row count and embedding dimension.
struct TableSpec {
  uint64_t rows = 0;
  uint32_t dim = 0;
};

/// A set of tables contiguously range-partitioned across n_emb shards:
/// shard s owns rows [floor(s*rows/n), floor((s+1)*rows/n)) of every table.
class EmbeddingShardSet {
 public:
  EmbeddingShardSet(std::span<const TableSpec> specs, int n_emb, const TableOptions& options,
                    uint64_t seed);

  size_t table_count() const { return tables_.size(); }
  EmbeddingTable& table(size_t i) { return tables_[i]; }
  const EmbeddingTable& table(size_t i) const { return tables_[i]; }
  int n_emb() const { return n_emb_; }

  /// Row range of `shard` within `table_index`, as [begin, end).
  std::pair<uint64_t, uint64_t> shard_range(size_t table_index, int shard) const;
  int shard_of_row(size_t table_index, uint64_t row) const;

  uint64_t total_params() const;

  /// Indices of the largest tables whose cumulative parameter count reaches
  /// `coverage` of the total; ordered by table index.
  std::vector<size_t> prioritized_tables(double coverage) const;

  /// Number of whole shards a failure of `lost_fraction` takes down:
  /// ceil(fraction * n_emb), clamped to [1, n_emb].
  int shards_for_fraction(double lost_fraction) const;

  /// Distinct uniformly chosen failed shards for one failure event.
  std::vector<int> sample_failed_shards(double lost_fraction, Rng& rng) const;

 private:
  std::vector<EmbeddingTable> tables_;
  int n_emb_;
};

}  // namespace cprsim
