// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "cprsim/checkpoint_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cprsim/binary_io.hpp"

namespace cprsim {

namespace {

constexpr char kMagic[8] = {'C', 'P', 'R', 'S', 'N', 'A', 'P', '1'};
constexpr uint32_t kFormatVersion = 1;
constexpr double kTimeEps = 1e-9;

}  // namespace

void CheckpointPolicy::validate() const {
  if (!(t_save > 0.0)) {
    throw std::invalid_argument("CheckpointPolicy: t_save must be positive");
  }
  if (!(r > 0.0 && r <= 1.0)) {
    throw std::invalid_argument("CheckpointPolicy: r must be in (0, 1]");
  }
  if (is_priority_strategy(strategy) && !(r < 1.0)) {
    throw std::invalid_argument("CheckpointPolicy: priority strategies require r < 1");
  }
  if (!(prioritized_coverage > 0.0 && prioritized_coverage <= 1.0)) {
    throw std::invalid_argument("CheckpointPolicy: prioritized_coverage must be in (0, 1]");
  }
}

std::string_view save_kind_name(SaveKind kind) {
  switch (kind) {
    case SaveKind::FullAll: return "full_all";
    case SaveKind::FullNonPrioritized: return "full_non_prioritized";
    case SaveKind::PartialPrioritized: return "partial_prioritized";
  }
  return "unknown";
}

std::vector<SaveAction> plan_schedule(const CheckpointPolicy& policy, double horizon_hours) {
  policy.validate();
  if (!(horizon_hours > 0.0)) {
    throw std::invalid_argument("plan_schedule: horizon must be positive");
  }
  std::vector<SaveAction> actions;
  const auto tick_count = [&](double interval) {
    return static_cast<uint64_t>(std::floor(horizon_hours / interval + kTimeEps));
  };
  if (!is_priority_strategy(policy.strategy)) {
    const uint64_t n = tick_count(policy.t_save);
    actions.reserve(n);
    for (uint64_t k = 1; k <= n; ++k) {
      actions.push_back({static_cast<double>(k) * policy.t_save, SaveKind::FullAll});
    }
    return actions;
  }
  const uint64_t n_full = tick_count(policy.t_save);
  const double partial_interval = policy.r * policy.t_save;
  const uint64_t n_partial = tick_count(partial_interval);
  actions.reserve(n_full + n_partial);
  for (uint64_t k = 1; k <= n_full; ++k) {
    actions.push_back({static_cast<double>(k) * policy.t_save, SaveKind::FullNonPrioritized});
  }
  for (uint64_t k = 1; k <= n_partial; ++k) {
    actions.push_back(
        {static_cast<double>(k) * partial_interval, SaveKind::PartialPrioritized});
  }
  std::stable_sort(actions.begin(), actions.end(), [](const SaveAction& a, const SaveAction& b) {
    if (std::abs(a.time_hours - b.time_hours) > kTimeEps) return a.time_hours < b.time_hours;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  return actions;
}

void write_snapshot(std::ostream& out, const TableSliceSnapshot& snap) {
  if (snap.values.size() != snap.row_ids.size() * snap.dim ||
      snap.opt.size() != snap.row_ids.size() * snap.opt_count) {
    throw std::invalid_argument("write_snapshot: payload shape mismatch");
  }
  out.write(kMagic, sizeof(kMagic));
  write_le<uint32_t>(out, kFormatVersion);
  write_le<uint32_t>(out, static_cast<uint32_t>(snap.table_id));
  write_le<uint64_t>(out, snap.row_ids.size());
  write_le<uint32_t>(out, snap.dim);
  write_le<uint32_t>(out, static_cast<uint32_t>(snap.kind));
  write_le<double>(out, snap.logical_time);
  write_le<uint64_t>(out, snap.sample_count);
  write_le<uint32_t>(out, snap.opt_count);
  for (size_t i = 0; i < snap.row_ids.size(); ++i) {
    write_le<uint64_t>(out, snap.row_ids[i]);
    for (uint32_t d = 0; d < snap.dim; ++d) {
      write_le<float>(out, snap.values[i * snap.dim + d]);
    }
    for (uint32_t c = 0; c < snap.opt_count; ++c) {
      write_le<float>(out, snap.opt[i * snap.opt_count + c]);
    }
  }
  if (!out) throw std::runtime_error("write_snapshot: stream write failed");
}

TableSliceSnapshot read_snapshot(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("read_snapshot: bad magic");
  }
  const auto version = read_le<uint32_t>(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("read_snapshot: unsupported version " + std::to_string(version));
  }
  TableSliceSnapshot snap;
  snap.table_id = read_le<uint32_t>(in);
  const auto row_count = read_le<uint64_t>(in);
  snap.dim = read_le<uint32_t>(in);
  const auto kind = read_le<uint32_t>(in);
  if (kind > 1) throw std::runtime_error("read_snapshot: bad snapshot kind");
  snap.kind = static_cast<SnapshotKind>(kind);
  snap.logical_time = read_le<double>(in);
  snap.sample_count = read_le<uint64_t>(in);
  snap.opt_count = read_le<uint32_t>(in);
  snap.row_ids.resize(row_count);
  snap.values.resize(row_count * snap.dim);
  snap.opt.resize(row_count * snap.opt_count);
  for (uint64_t i = 0; i < row_count; ++i) {
    snap.row_ids[i] = read_le<uint64_t>(in);
    for (uint32_t d = 0; d < snap.dim; ++d) {
      snap.values[i * snap.dim + d] = read_le<float>(in);
    }
    for (uint32_t c = 0; c < snap.opt_count; ++c) {
      snap.opt[i * snap.opt_count + c] = read_le<float>(in);
    }
  }
  return snap;
}

void write_snapshot_file(const std::string& path, const TableSliceSnapshot& snap) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open snapshot file for writing: " + path);
  write_snapshot(out, snap);
  out.flush();
  if (!out) throw std::runtime_error("snapshot write failed: " + path);
}

TableSliceSnapshot read_snapshot_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open snapshot file: " + path);
  return read_snapshot(in);
}

SnapshotStore::SnapshotStore(int n_emb, bool include_optimizer_state)
    : n_emb_(n_emb), include_opt_(include_optimizer_state) {
  if (n_emb < 1) throw std::invalid_argument("SnapshotStore: n_emb must be >= 1");
  per_shard_.resize(static_cast<size_t>(n_emb));
}

std::vector<ShardSnapshot>& SnapshotStore::shard_list(int shard) {
  if (shard < 0 || shard >= n_emb_) throw std::out_of_range("SnapshotStore: bad shard id");
  return per_shard_[static_cast<size_t>(shard)];
}

const std::vector<ShardSnapshot>& SnapshotStore::shard_list(int shard) const {
  if (shard < 0 || shard >= n_emb_) throw std::out_of_range("SnapshotStore: bad shard id");
  return per_shard_[static_cast<size_t>(shard)];
}

namespace {

TableSliceSnapshot capture_rows(const EmbeddingTable& table, std::span<const uint64_t> row_ids,
                                SnapshotKind kind, double logical_time, uint64_t sample_count,
                                bool include_opt) {
  TableSliceSnapshot slice;
  slice.table_id = table.table_id();
  slice.dim = table.dim();
  slice.kind = kind;
  slice.logical_time = logical_time;
  slice.sample_count = sample_count;
  slice.opt_count = include_opt ? table.opt_count() : 0;
  slice.row_ids.assign(row_ids.begin(), row_ids.end());
  slice.values.reserve(row_ids.size() * table.dim());
  for (uint64_t r : row_ids) {
    const auto row = table.row(r);
    slice.values.insert(slice.values.end(), row.begin(), row.end());
    if (slice.opt_count > 0) slice.opt.push_back(table.opt_state(r));
  }
  return slice;
}

}  // namespace

uint64_t SnapshotStore::save_full_shard(const EmbeddingShardSet& set, int shard,
                                        double logical_time, uint64_t sample_count) {
  ShardSnapshot snap;
  snap.snapshot_id = next_id_++;
  snap.logical_time = logical_time;
  snap.sample_count = sample_count;
  snap.full = true;
  for (size_t t = 0; t < set.table_count(); ++t) {
    const auto [begin, end] = set.shard_range(t, shard);
    if (begin == end) continue;
    std::vector<uint64_t> ids(end - begin);
    std::iota(ids.begin(), ids.end(), begin);
    snap.slices.push_back(capture_rows(set.table(t), ids, SnapshotKind::Full, logical_time,
                                       sample_count, include_opt_));
  }
  auto& list = shard_list(shard);
  list.push_back(std::move(snap));
  prune(shard);
  return list.back().snapshot_id;
}

uint64_t SnapshotStore::save_partial_rows(
    const EmbeddingShardSet& set, int shard,
    std::span<const std::pair<size_t, std::vector<uint64_t>>> row_ids_by_table,
    double logical_time, uint64_t sample_count) {
  ShardSnapshot snap;
  snap.snapshot_id = next_id_++;
  snap.logical_time = logical_time;
  snap.sample_count = sample_count;
  snap.full = false;
  for (const auto& [t, ids] : row_ids_by_table) {
    const auto [begin, end] = set.shard_range(t, shard);
    std::vector<uint64_t> owned;
    owned.reserve(ids.size());
    for (uint64_t r : ids) {
      if (r >= begin && r < end) owned.push_back(r);
    }
    if (owned.empty()) continue;
    snap.slices.push_back(capture_rows(set.table(t), owned, SnapshotKind::PartialRows,
                                       logical_time, sample_count, include_opt_));
  }
  auto& list = shard_list(shard);
  list.push_back(std::move(snap));
  return list.back().snapshot_id;
}

void SnapshotStore::put_global_blob(double logical_time, std::vector<uint8_t> blob) {
  global_blobs_[logical_time] = std::move(blob);
}

void SnapshotStore::apply_slice(EmbeddingShardSet& set, const TableSliceSnapshot& slice) const {
  auto& table = set.table(slice.table_id);
  for (size_t i = 0; i < slice.row_ids.size(); ++i) {
    auto dst = table.mutable_row(slice.row_ids[i]);
    std::copy_n(slice.values.data() + i * slice.dim, slice.dim, dst.data());
    if (slice.opt_count > 0) {
      table.set_opt_state(slice.row_ids[i], slice.opt[i * slice.opt_count]);
    } else {
      table.set_opt_state(slice.row_ids[i], 0.0f);
    }
  }
}

double SnapshotStore::restore_shard(EmbeddingShardSet& set, int shard) const {
  const auto& list = shard_list(shard);
  // Base generation: the latest full snapshot, or initialization.
  const ShardSnapshot* base = nullptr;
  for (const auto& snap : list) {
    if (snap.full && (base == nullptr || snap.logical_time >= base->logical_time)) {
      base = &snap;
    }
  }
  double base_time = 0.0;
  if (base == nullptr) {
    for (size_t t = 0; t < set.table_count(); ++t) {
      const auto [begin, end] = set.shard_range(t, shard);
      set.table(t).reinit_range(begin, end);
    }
  } else {
    base_time = base->logical_time;
    for (const auto& slice : base->slices) apply_slice(set, slice);
  }
  // Overlay partial snapshots at or after the base, oldest first so the
  // latest write to a row wins.
  for (const auto& snap : list) {
    if (snap.full || snap.logical_time < base_time - kTimeEps) continue;
    for (const auto& slice : snap.slices) apply_slice(set, slice);
  }
  // The shard's in-memory instrumentation did not survive the failure.
  for (size_t t = 0; t < set.table_count(); ++t) {
    const auto [begin, end] = set.shard_range(t, shard);
    if (begin != end) set.table(t).on_range_restored(begin, end);
  }
  return base_time;
}

SnapshotStore::FullRestoreResult SnapshotStore::restore_all_consistent(
    EmbeddingShardSet& set) const {
  // Times at which every shard holds a full snapshot.
  std::map<int64_t, int> full_time_counts;
  const auto key_of = [](double t) { return static_cast<int64_t>(std::llround(t * 1e9)); };
  for (int s = 0; s < n_emb_; ++s) {
    std::set<int64_t> shard_times;
    for (const auto& snap : shard_list(s)) {
      if (snap.full) shard_times.insert(key_of(snap.logical_time));
    }
    for (int64_t t : shard_times) ++full_time_counts[t];
  }
  int64_t chosen_key = -1;
  for (const auto& [t, count] : full_time_counts) {
    if (count == n_emb_) chosen_key = std::max(chosen_key, t);
  }

  FullRestoreResult result;
  if (chosen_key < 0) {
    for (size_t t = 0; t < set.table_count(); ++t) {
      set.table(t).reinit_range(0, set.table(t).rows());
    }
    for (size_t t = 0; t < set.table_count(); ++t) {
      set.table(t).on_range_restored(0, set.table(t).rows());
    }
    return result;
  }
  for (int s = 0; s < n_emb_; ++s) {
    const ShardSnapshot* chosen = nullptr;
    for (const auto& snap : shard_list(s)) {
      if (snap.full && key_of(snap.logical_time) == chosen_key) chosen = &snap;
    }
    if (chosen == nullptr) {
      throw std::logic_error("restore_all_consistent: missing shard snapshot");
    }
    for (const auto& slice : chosen->slices) apply_slice(set, slice);
    result.logical_time = chosen->logical_time;
    result.sample_count = chosen->sample_count;
  }
  for (size_t t = 0; t < set.table_count(); ++t) {
    set.table(t).on_range_restored(0, set.table(t).rows());
  }
  if (const auto it = global_blobs_.find(result.logical_time); it != global_blobs_.end()) {
    result.global_blob = &it->second;
  }
  return result;
}

void SnapshotStore::prune(int shard) {
  auto& list = shard_list(shard);
  double latest_full = -1.0;
  for (const auto& snap : list) {
    if (snap.full) latest_full = std::max(latest_full, snap.logical_time);
  }
  if (latest_full < 0.0) return;  // nothing full yet: keep all partials
  std::erase_if(list, [&](const ShardSnapshot& snap) {
    return snap.logical_time < latest_full - kTimeEps;
  });
}

size_t SnapshotStore::snapshot_count(int shard) const { return shard_list(shard).size(); }

const std::vector<ShardSnapshot>& SnapshotStore::snapshots(int shard) const {
  return shard_list(shard);
}

uint64_t SnapshotStore::stored_bytes() const {
  uint64_t bytes = 0;
  for (const auto& list : per_shard_) {
    for (const auto& snap : list) {
      for (const auto& slice : snap.slices) {
        bytes += slice.values.size() * sizeof(float) + slice.opt.size() * sizeof(float) +
                 slice.row_ids.size() * sizeof(uint64_t);
      }
    }
  }
  return bytes;
}

CheckpointPolicy resolve_policy(CheckpointPolicy policy, const EmbeddingShardSet& set) {
  if (is_priority_strategy(policy.strategy) && policy.prioritized_tables.empty()) {
    policy.prioritized_tables = set.prioritized_tables(policy.prioritized_coverage);
  }
  policy.validate();
  for (size_t t : policy.prioritized_tables) {
    if (t >= set.table_count()) {
      throw std::invalid_argument("resolve_policy: prioritized table index out of range");
    }
  }
  return policy;
}

}  // namespace cprsim
