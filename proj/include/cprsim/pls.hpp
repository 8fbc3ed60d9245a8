// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Portion-of-lost-samples (PLS) accounting: the cumulative fraction of
// training samples whose embedding updates were discarded by failures,
// weighted by the failed shard fraction, plus its closed-form expectation.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace cprsim {

/// Running PLS state for one simulation run. Each shard remembers the
/// sample count at its last row-complete checkpoint; a failure of shard s at
/// sample count S adds (S - S_last_chkpt[s]) / (s_total * n_emb).
class PlsLedger {
 public:
  /// All shards start checkpointed at sample count 0 (initial state counts
  /// as a free, consistent checkpoint).
  PlsLedger(int64_t s_total, int n_emb);

  /// Marks `shard_ids` as checkpointed at `sample_count`. Requires
  /// sample_count >= every previously recorded count (checkpoints move
  /// forward in the event log). Throws std::out_of_range on unknown shards.
  void record_checkpoint(std::span<const int> shard_ids, int64_t sample_count);

  /// Marks every shard as checkpointed at `sample_count`.
  void record_checkpoint_all(int64_t sample_count);

  /// Accumulates the PLS contribution of `failed_shards` going down at
  /// `sample_count`. Requires sample_count >= each failed shard's
  /// last-checkpoint count. A shard never checkpointed is charged from 0.
  void record_failure(int64_t sample_count, std::span<const int> failed_shards);

  double pls() const { return pls_; }
  int64_t s_total() const { return s_total_; }
  int n_emb() const { return n_emb_; }
  int64_t current_sample_count() const { return current_; }
  int64_t samples_at_last_checkpoint(int shard) const;

 private:
  void check_shard(int shard) const;

  double pls_ = 0.0;
  int64_t s_total_ = 1;
  int n_emb_ = 1;
  int64_t current_ = 0;
  std::vector<int64_t> last_checkpoint_;
};

/// Expected final PLS when saving every t_save hours under uniform failure
/// placement and single-shard failures: 0.5 * t_save / (t_fail * n_emb).
double expected_pls(double t_save, double t_fail, int n_emb);

}  // namespace cprsim
