// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "cprsim/pls.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace cprsim {

PlsLedger::PlsLedger(int64_t s_total, int n_emb) : s_total_(s_total), n_emb_(n_emb) {
  if (s_total < 1) throw std::invalid_argument("PlsLedger: s_total must be >= 1");
  if (n_emb < 1) throw std::invalid_argument("PlsLedger: n_emb must be >= 1");
  last_checkpoint_.assign(static_cast<size_t>(n_emb), 0);
}

void PlsLedger::check_shard(int shard) const {
  if (shard < 0 || shard >= n_emb_) {
    throw std::out_of_range("PlsLedger: unknown shard id " + std::to_string(shard));
  }
}

void PlsLedger::record_checkpoint(std::span<const int> shard_ids, int64_t sample_count) {
  for (int s : shard_ids) check_shard(s);
  for (int64_t prior : last_checkpoint_) {
    if (sample_count < prior) {
      throw std::invalid_argument("PlsLedger: checkpoint sample count moved backwards");
    }
  }
  for (int s : shard_ids) last_checkpoint_[static_cast<size_t>(s)] = sample_count;
  if (sample_count > current_) current_ = sample_count;
}

void PlsLedger::record_checkpoint_all(int64_t sample_count) {
  std::vector<int> all(static_cast<size_t>(n_emb_));
  std::iota(all.begin(), all.end(), 0);
  record_checkpoint(all, sample_count);
}

void PlsLedger::record_failure(int64_t sample_count, std::span<const int> failed_shards) {
  for (int s : failed_shards) {
    check_shard(s);
    if (sample_count < last_checkpoint_[static_cast<size_t>(s)]) {
      throw std::invalid_argument(
          "PlsLedger: failure sample count precedes the shard's last checkpoint");
    }
  }
  const double denom = static_cast<double>(s_total_) * static_cast<double>(n_emb_);
  for (int s : failed_shards) {
    const auto lost = sample_count - last_checkpoint_[static_cast<size_t>(s)];
    pls_ += static_cast<double>(lost) / denom;
  }
  if (sample_count > current_) current_ = sample_count;
}

int64_t PlsLedger::samples_at_last_checkpoint(int shard) const {
  check_shard(shard);
  return last_checkpoint_[static_cast<size_t>(shard)];
}

double expected_pls(double t_save, double t_fail, int n_emb) {
  if (!(t_save >= 0.0)) throw std::invalid_argument("expected_pls: t_save must be >= 0");
  if (!(t_fail > 0.0)) throw std::invalid_argument("expected_pls: t_fail must be positive");
  if (n_emb < 1) throw std::invalid_argument("expected_pls: n_emb must be >= 1");
  return 0.5 * t_save / (t_fail * static_cast<double>(n_emb));
}

}  // namespace cprsim
