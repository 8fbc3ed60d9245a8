// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "cprsim/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cprsim {

namespace {

constexpr double kAdagradEpsilon = 1e-8;

}  // namespace

EmbeddingTable::EmbeddingTable(uint64_t table_id, uint64_t rows, uint32_t dim,
                               const TableOptions& options, uint64_t seed)
    : id_(table_id),
      rows_(rows),
      dim_(dim),
      opts_(options),
      seed_(seed),
      ssu_rng_(split_seed(split_seed(seed, table_id), 0x55u)) {
  if (rows == 0 || dim == 0) {
    throw std::invalid_argument("EmbeddingTable: rows and dim must be positive");
  }
  if (opts_.ssu) {
    if (opts_.ssu->capacity == 0) {
      if (!(opts_.ssu->capacity_ratio > 0.0)) {
        throw std::invalid_argument("EmbeddingTable: SSU needs a capacity or a capacity ratio");
      }
      opts_.ssu->capacity = std::max<uint64_t>(
          1, static_cast<uint64_t>(std::llround(opts_.ssu->capacity_ratio *
                                                static_cast<double>(rows_))));
    }
    if (opts_.ssu->sampling_period == 0) {
      throw std::invalid_argument("EmbeddingTable: SSU sampling period must be positive");
    }
  }
  values_.resize(rows_ * dim_);
  for (uint64_t r = 0; r < rows_; ++r) init_row(r);
  if (opts_.adagrad) opt_.assign(rows_, 0.0f);
  if (opts_.track_counters) counters_.assign(rows_, 0);
  if (opts_.track_shadow) shadow_ = values_;
  if (opts_.ssu) {
    ssu_entries_.reserve(opts_.ssu->capacity);
    ssu_pos_.reserve(opts_.ssu->capacity * 2);
  }
}

void EmbeddingTable::check_row(uint64_t r) const {
  if (r >= rows_) {
    throw std::out_of_range("EmbeddingTable " + std::to_string(id_) + ": row " +
                            std::to_string(r) + " out of range [0, " + std::to_string(rows_) +
                            ")");
  }
}

void EmbeddingTable::init_row(uint64_t r) {
  Rng rng(split_seed(split_seed(seed_, id_), r));
  float* dst = values_.data() + r * dim_;
  for (uint32_t d = 0; d < dim_; ++d) {
    dst[d] = static_cast<float>(opts_.init_scale * sample_normal(rng));
  }
}

std::span<const float> EmbeddingTable::row(uint64_t r) const {
  check_row(r);
  return {values_.data() + r * dim_, dim_};
}

std::span<float> EmbeddingTable::mutable_row(uint64_t r) {
  check_row(r);
  return {values_.data() + r * dim_, dim_};
}

float EmbeddingTable::opt_state(uint64_t r) const {
  check_row(r);
  return opts_.adagrad ? opt_[r] : 0.0f;
}

void EmbeddingTable::set_opt_state(uint64_t r, float v) {
  check_row(r);
  if (opts_.adagrad) opt_[r] = v;
}

void EmbeddingTable::lookup_and_count(std::span<const uint64_t> indices,
                                      std::vector<double>* out) {
  for (uint64_t idx : indices) check_row(idx);
  for (uint64_t idx : indices) {
    if (opts_.track_counters) ++counters_[idx];
    if (opts_.ssu) {
      ++processed_accesses_;
      if (processed_accesses_ % opts_.ssu->sampling_period == 0) offer_to_ssu(idx);
    }
    if (out != nullptr) {
      const float* src = values_.data() + idx * dim_;
      out->insert(out->end(), src, src + dim_);
    }
  }
}

void EmbeddingTable::offer_to_ssu(uint64_t r) {
  if (ssu_pos_.contains(r)) return;
  const uint64_t capacity = opts_.ssu->capacity;
  if (ssu_entries_.size() < capacity) {
    ssu_pos_.emplace(r, ssu_entries_.size());
    ssu_entries_.push_back(r);
    return;
  }
  // Overflow: evict uniformly among current entries plus the incoming one.
  const uint64_t k = uniform_below(ssu_rng_, ssu_entries_.size() + 1);
  if (k == ssu_entries_.size()) return;  // incoming entry discarded
  ssu_pos_.erase(ssu_entries_[k]);
  ssu_entries_[k] = r;
  ssu_pos_.emplace(r, k);
}

void EmbeddingTable::ssu_remove(uint64_t r) {
  const auto it = ssu_pos_.find(r);
  if (it == ssu_pos_.end()) return;
  const size_t pos = it->second;
  const uint64_t back = ssu_entries_.back();
  ssu_entries_[pos] = back;
  ssu_entries_.pop_back();
  ssu_pos_.erase(it);
  if (back != r) ssu_pos_[back] = pos;
}

void EmbeddingTable::apply_updates(std::span<const uint64_t> indices,
                                   std::span<const double> deltas) {
  if (deltas.size() != indices.size() * dim_) {
    throw std::invalid_argument("apply_updates: delta shape mismatch");
  }
  for (double d : deltas) {
    if (!std::isfinite(d)) throw std::invalid_argument("apply_updates: non-finite update");
  }
  for (size_t i = 0; i < indices.size(); ++i) {
    check_row(indices[i]);
    float* dst = values_.data() + indices[i] * dim_;
    const double* src = deltas.data() + i * dim_;
    for (uint32_t d = 0; d < dim_; ++d) {
      dst[d] = static_cast<float>(static_cast<double>(dst[d]) + src[d]);
    }
  }
}

void EmbeddingTable::apply_gradients(std::span<const uint64_t> indices,
                                     std::span<const double> grads, double lr) {
  if (grads.size() != indices.size() * dim_) {
    throw std::invalid_argument("apply_gradients: gradient shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw std::invalid_argument("apply_gradients: non-finite gradient");
  }
  for (size_t i = 0; i < indices.size(); ++i) {
    check_row(indices[i]);
    const uint64_t r = indices[i];
    float* dst = values_.data() + r * dim_;
    const double* g = grads.data() + i * dim_;
    double step = lr;
    if (opts_.adagrad) {
      double sq = 0.0;
      for (uint32_t d = 0; d < dim_; ++d) sq += g[d] * g[d];
      const double acc = static_cast<double>(opt_[r]) + sq / dim_;
      opt_[r] = static_cast<float>(acc);
      step = lr / std::sqrt(acc + kAdagradEpsilon);
    }
    for (uint32_t d = 0; d < dim_; ++d) {
      dst[d] = static_cast<float>(static_cast<double>(dst[d]) - step * g[d]);
    }
  }
}

namespace {

// Top-rn selection with (key desc, id asc) ordering, shared by both selectors.
template <typename KeyFn>
std::vector<uint64_t> select_top(uint64_t rows, uint64_t rn, KeyFn key) {
  if (rn == 0 || rn > rows) {
    throw std::domain_error("top-rn selection requires 0 < rn <= rows");
  }
  std::vector<uint64_t> ids(rows);
  std::iota(ids.begin(), ids.end(), 0);
  const auto better = [&](uint64_t a, uint64_t b) {
    const auto ka = key(a), kb = key(b);
    if (ka != kb) return ka > kb;
    return a < b;
  };
  std::nth_element(ids.begin(), ids.begin() + static_cast<ptrdiff_t>(rn - 1), ids.end(), better);
  ids.resize(rn);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

std::vector<uint64_t> EmbeddingTable::top_rn_by_counter(uint64_t rn) const {
  if (!opts_.track_counters) {
    throw std::logic_error("top_rn_by_counter: counters not tracked");
  }
  return select_top(rows_, rn, [&](uint64_t r) { return counters_[r]; });
}

std::vector<uint64_t> EmbeddingTable::top_rn_by_delta(uint64_t rn) const {
  if (!opts_.track_shadow) {
    throw std::logic_error("top_rn_by_delta: shadow copies not tracked");
  }
  std::vector<double> deltas(rows_);
  for (uint64_t r = 0; r < rows_; ++r) deltas[r] = delta(r);
  return select_top(rows_, rn, [&](uint64_t r) { return deltas[r]; });
}

double EmbeddingTable::delta(uint64_t r) const {
  check_row(r);
  if (!opts_.track_shadow) {
    throw std::logic_error("delta: shadow copies not tracked");
  }
  const float* cur = values_.data() + r * dim_;
  const float* sh = shadow_.data() + r * dim_;
  double sq = 0.0;
  for (uint32_t d = 0; d < dim_; ++d) {
    const double diff = static_cast<double>(cur[d]) - static_cast<double>(sh[d]);
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

uint32_t EmbeddingTable::counter(uint64_t r) const {
  check_row(r);
  return opts_.track_counters ? counters_[r] : 0;
}

double EmbeddingTable::frequency_delta_correlation() const {
  if (!opts_.track_counters || !opts_.track_shadow) {
    throw std::logic_error("frequency_delta_correlation: needs counters and shadow copies");
  }
  if (rows_ < 2) throw std::domain_error("frequency_delta_correlation: needs >= 2 rows");
  double mean_x = 0.0, mean_y = 0.0;
  std::vector<double> ys(rows_);
  for (uint64_t r = 0; r < rows_; ++r) {
    ys[r] = delta(r);
    mean_x += counters_[r];
    mean_y += ys[r];
  }
  mean_x /= static_cast<double>(rows_);
  mean_y /= static_cast<double>(rows_);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (uint64_t r = 0; r < rows_; ++r) {
    const double dx = static_cast<double>(counters_[r]) - mean_x;
    const double dy = ys[r] - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw std::domain_error("frequency_delta_correlation: zero variance in a series");
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<uint64_t> EmbeddingTable::ssu_entries() const { return ssu_entries_; }

uint64_t EmbeddingTable::ssu_capacity() const { return opts_.ssu ? opts_.ssu->capacity : 0; }

void EmbeddingTable::mark_rows_saved(std::span<const uint64_t> row_ids) {
  for (uint64_t r : row_ids) check_row(r);
  for (uint64_t r : row_ids) {
    if (opts_.track_counters) counters_[r] = 0;
    if (opts_.track_shadow) {
      std::copy_n(values_.data() + r * dim_, dim_, shadow_.data() + r * dim_);
    }
    if (opts_.ssu) ssu_remove(r);
  }
}

void EmbeddingTable::mark_range_saved(uint64_t begin, uint64_t end) {
  if (begin > end || end > rows_) throw std::out_of_range("mark_range_saved: bad range");
  for (uint64_t r = begin; r < end; ++r) {
    if (opts_.track_counters) counters_[r] = 0;
    if (opts_.track_shadow) {
      std::copy_n(values_.data() + r * dim_, dim_, shadow_.data() + r * dim_);
    }
  }
  if (opts_.ssu) {
    for (uint64_t r = begin; r < end; ++r) ssu_remove(r);
  }
}

void EmbeddingTable::on_range_restored(uint64_t begin, uint64_t end) {
  // Same bookkeeping as a save of the range: the node's RAM-resident
  // instrumentation did not survive, so it restarts from the restored state.
  mark_range_saved(begin, end);
}

void EmbeddingTable::reinit_range(uint64_t begin, uint64_t end) {
  if (begin > end || end > rows_) throw std::out_of_range("reinit_range: bad range");
  for (uint64_t r = begin; r < end; ++r) {
    init_row(r);
    if (opts_.adagrad) opt_[r] = 0.0f;
  }
}

uint64_t EmbeddingTable::counter_aux_bytes() const {
  return opts_.track_counters ? rows_ * sizeof(uint32_t) : 0;
}

uint64_t EmbeddingTable::ssu_aux_bytes() const {
  return opts_.ssu ? opts_.ssu->capacity * sizeof(uint64_t) : 0;
}

uint64_t EmbeddingTable::shadow_aux_bytes() const {
  return opts_.track_shadow ? rows_ * dim_ * sizeof(float) : 0;
}

EmbeddingShardSet::EmbeddingShardSet(std::span<const TableSpec> specs, int n_emb,
                                     const TableOptions& options, uint64_t seed)
    : n_emb_(n_emb) {
  if (specs.empty()) throw std::invalid_argument("EmbeddingShardSet: no tables");
  if (n_emb < 1) throw std::invalid_argument("EmbeddingShardSet: n_emb must be >= 1");
  tables_.reserve(specs.size());
  for (size_t i = 0; i < specs.size(); ++i) {
    tables_.emplace_back(static_cast<uint64_t>(i), specs[i].rows, specs[i].dim, options, seed);
  }
}

std::pair<uint64_t, uint64_t> EmbeddingShardSet::shard_range(size_t table_index,
                                                             int shard) const {
  if (table_index >= tables_.size()) {
    throw std::out_of_range("EmbeddingShardSet: bad table index");
  }
  if (shard < 0 || shard >= n_emb_) {
    throw std::out_of_range("EmbeddingShardSet: bad shard id");
  }
  const auto rows = tables_[table_index].rows();
  const auto s = static_cast<uint64_t>(shard);
  const auto n = static_cast<uint64_t>(n_emb_);
  return {rows * s / n, rows * (s + 1) / n};
}

int EmbeddingShardSet::shard_of_row(size_t table_index, uint64_t row) const {
  if (table_index >= tables_.size()) {
    throw std::out_of_range("EmbeddingShardSet: bad table index");
  }
  const auto rows = tables_[table_index].rows();
  if (row >= rows) throw std::out_of_range("EmbeddingShardSet: bad row");
  // Invert the range split: the shard whose [begin, end) contains the row.
  const auto n = static_cast<uint64_t>(n_emb_);
  auto guess = static_cast<int>(row * n / rows);
  while (guess > 0 && shard_range(table_index, guess).first > row) --guess;
  while (guess + 1 < n_emb_ && shard_range(table_index, guess).second <= row) ++guess;
  return guess;
}

uint64_t EmbeddingShardSet::total_params() const {
  uint64_t total = 0;
  for (const auto& t : tables_) total += t.rows() * t.dim();
  return total;
}

std::vector<size_t> EmbeddingShardSet::prioritized_tables(double coverage) const {
  if (!(coverage > 0.0 && coverage <= 1.0)) {
    throw std::invalid_argument("prioritized_tables: coverage must be in (0, 1]");
  }
  std::vector<size_t> order(tables_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const uint64_t pa = tables_[a].rows() * tables_[a].dim();
    const uint64_t pb = tables_[b].rows() * tables_[b].dim();
    if (pa != pb) return pa > pb;
    return a < b;
  });
  const double target = coverage * static_cast<double>(total_params());
  std::vector<size_t> chosen;
  double acc = 0.0;
  for (size_t idx : order) {
    chosen.push_back(idx);
    acc += static_cast<double>(tables_[idx].rows() * tables_[idx].dim());
    if (acc >= target) break;
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

int EmbeddingShardSet::shards_for_fraction(double lost_fraction) const {
  if (!(lost_fraction > 0.0 && lost_fraction <= 1.0)) {
    throw std::invalid_argument("shards_for_fraction: fraction must be in (0, 1]");
  }
  const int k = static_cast<int>(std::ceil(lost_fraction * static_cast<double>(n_emb_) - 1e-9));
  return std::clamp(k, 1, n_emb_);
}

std::vector<int> EmbeddingShardSet::sample_failed_shards(double lost_fraction, Rng& rng) const {
  const int k = shards_for_fraction(lost_fraction);
  std::vector<int> ids(static_cast<size_t>(n_emb_));
  std::iota(ids.begin(), ids.end(), 0);
  // Partial Fisher-Yates: the first k entries become the failed set.
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(uniform_below(rng, static_cast<uint64_t>(n_emb_ - i)));
    std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(j)]);
  }
  ids.resize(static_cast<size_t>(k));
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace cprsim
