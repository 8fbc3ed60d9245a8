// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale click-through-rate trainer: synthetic Zipfian datasets with
// planted logistic labels, an embedding + MLP model with dot-product
// feature interaction, single-epoch SGD training, AUC evaluation, and the
// failure-experiment harness that couples training to checkpoint policies.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cprsim/checkpoint_engine.hpp"
#include "cprsim/embedding_store.hpp"
#include "cprsim/failure_model.hpp"
#include "cprsim/pls.hpp"
#include "cprsim/report.hpp"

namespace cprsim {

/// Shapes and hyperparameters of the synthetic training setup. Defaults
/// give 131072 train / 32768 test samples and 4096 steps of batch-32 SGD
/// over eight tables (78700 rows total, dim 16).
struct ToyTrainerConfig {
  int64_t n_samples = 163840;
  double test_fraction = 0.2;
  int batch_size = 32;
  double learning_rate = 0.1;
  double zipf_exponent = 1.05;
  uint32_t embedding_dim = 16;
  std::vector<uint32_t> vocab_sizes = {40000, 20000, 10000, 5000, 2000, 1000, 500, 200};
  uint32_t dense_dim = 4;
  double label_scale = 1.0;  ///< stddev of the planted per-id logit weights
  bool adagrad = false;
  double init_scale = 0.01;
  uint32_t ssu_sampling_period = 2;

  void validate() const;
};

struct TrainMetrics {
  double logloss = 0.0;
  double auc = 0.5;
  int64_t samples_seen = 0;
};

/// Synthetic CTR data: per-feature categorical ids drawn Zipfian over each
/// vocabulary (hot ranks scattered over the id space by a fixed random
/// permutation), a small dense vector, and Bernoulli labels from a planted
/// logistic model, so the Bayes-optimal AUC is strictly above 0.5.
class SyntheticDataset {
 public:
  SyntheticDataset(const ToyTrainerConfig& config, uint64_t seed);

  int64_t n_samples() const { return n_samples_; }
  int64_t n_train() const { return n_train_; }
  int64_t n_test() const { return n_samples_ - n_train_; }
  uint32_t n_sparse() const { return n_sparse_; }
  uint32_t dense_dim() const { return dense_dim_; }
  const std::vector<uint32_t>& vocab_sizes() const { return vocabs_; }

  /// n_sparse() categorical ids of sample i.
  const uint32_t* sparse_ids(int64_t i) const { return ids_.data() + i * n_sparse_; }
  const float* dense(int64_t i) const { return dense_.data() + i * dense_dim_; }
  int label(int64_t i) const { return labels_[static_cast<size_t>(i)]; }

  /// Empirical frequency of each id of one feature over the whole dataset.
  std::vector<int64_t> id_frequencies(uint32_t feature) const;

  /// Columnar binary export/import; byte-exact round-trip.
  void write_file(const std::string& path) const;
  static SyntheticDataset read_file(const std::string& path);

 private:
  SyntheticDataset() = default;

  int64_t n_samples_ = 0;
  int64_t n_train_ = 0;
  uint32_t n_sparse_ = 0;
  uint32_t dense_dim_ = 0;
  std::vector<uint32_t> vocabs_;
  std::vector<uint32_t> ids_;
  std::vector<float> dense_;
  std::vector<uint8_t> labels_;
};

/// Accumulated mini-batch gradients: dense MLP parameters plus per-table
/// sparse row gradients (unique rows, ascending).
struct GradBuffer {
  std::vector<double> dense;
  std::vector<std::vector<uint64_t>> emb_rows;
  std::vector<std::vector<double>> emb_grads;
  double mean_loss = 0.0;
};

/// Embedding + MLP model over a shard set it does not own. Architecture:
/// bottom MLP dense -> dim -> dim (ReLU), pairwise dot interaction of the
/// per-feature embeddings and the bottom output, concatenated with the
/// bottom output into the top MLP -> 32 -> 1 logit. Dense parameters are
/// doubles; embeddings live in the shard set as float32.
class ToyModel {
 public:
  ToyModel(const ToyTrainerConfig& config, EmbeddingShardSet* shards, uint64_t seed);

  /// One SGD step over train samples [begin, end): gradient computation
  /// (instrumented lookups) plus parameter update. Returns the mean loss.
  /// Throws std::runtime_error on non-finite loss.
  double train_batch(const SyntheticDataset& data, int64_t begin, int64_t end);

  /// Gradients and loss only, without applying the update. When
  /// `count_accesses` is false the lookups bypass the instrumentation (used
  /// by the finite-difference checks).
  void compute_gradients(const SyntheticDataset& data, int64_t begin, int64_t end,
                         GradBuffer& out, bool count_accesses = true) const;

  /// Evaluation path (no counter updates).
  double logit_for(const SyntheticDataset& data, int64_t index) const;
  double sample_loss(const SyntheticDataset& data, int64_t index) const;

  /// Rank-based test AUC and mean test logloss.
  TrainMetrics evaluate(const SyntheticDataset& data, int64_t samples_seen) const;

  /// Flat view over all dense MLP parameters (for serialization and
  /// finite-difference perturbation).
  std::span<double> dense_parameters() { return {params_.data(), params_.size()}; }
  std::span<const double> dense_parameters() const { return {params_.data(), params_.size()}; }

  std::vector<uint8_t> serialize_dense() const;
  void deserialize_dense(std::span<const uint8_t> blob);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  struct Workspace;
  double forward(const double* emb_vecs, const float* dense, Workspace& ws) const;
  void gather_eval(const uint32_t* ids, std::vector<double>& out) const;

  EmbeddingShardSet* shards_;
  uint32_t dim_ = 0;
  uint32_t dense_dim_ = 0;
  uint32_t n_sparse_ = 0;
  uint32_t top_hidden_ = 32;
  uint32_t z_dim_ = 0;
  double lr_ = 0.1;
  std::vector<double> params_;
  // Offsets into params_: [w1, b1, w2, b2, w3, b3, w4, b4]
  size_t off_[8] = {0};
};

/// Owns one deterministic training run: dataset, shard set, model, and the
/// batch cursor. Rewinding the cursor and restoring state replays the same
/// ordered batches (single epoch, fixed order).
class TrainerSession {
 public:
  /// `ssu_ratio` > 0 enables the SSU list at that capacity ratio.
  TrainerSession(const ToyTrainerConfig& config, uint64_t seed, double ssu_ratio = 0.0);

  const ToyTrainerConfig& config() const { return config_; }
  SyntheticDataset& dataset() { return data_; }
  EmbeddingShardSet& shards() { return shards_; }
  ToyModel& model() { return model_; }

  int64_t total_steps() const { return total_steps_; }
  int64_t current_step() const { return step_; }
  int64_t samples_seen() const { return step_ * config_.batch_size; }

  /// Trains batches until current_step() == step (no-op when already past).
  void run_to(int64_t step);

  /// Rewinds the batch cursor (full-recovery rollback); the caller is
  /// responsible for restoring model state to match.
  void reset_cursor(int64_t step);

  TrainMetrics evaluate() { return model_.evaluate(data_, samples_seen()); }

 private:
  ToyTrainerConfig config_;
  SyntheticDataset data_;
  EmbeddingShardSet shards_;
  ToyModel model_;
  int64_t total_steps_ = 0;
  int64_t step_ = 0;
};

/// Runs `steps` training steps, invoking `after_step` once before training
/// (step 0) and after each completed step; the hook may rewind the session.
/// Returns final test metrics.
TrainMetrics train(TrainerSession& session, int64_t steps,
                   const std::function<void(TrainerSession&, int64_t)>& after_step = {});

/// One coupled failure experiment: everything needed to judge a policy.
struct ExperimentResult {
  TrainMetrics metrics;
  double final_pls = 0.0;
  OverheadLedger ledger;
  double overhead_fraction = 0.0;
  std::vector<SimEvent> events;
};

struct ExperimentConfig {
  ToyTrainerConfig trainer;
  CostParameters costs;  ///< o_save/o_load/o_res charge the ledger; t_total maps hours to steps
  CheckpointPolicy policy;
};

/// Trains one epoch with the policy's save schedule and the trace's
/// failures mapped onto the step axis. Failures roll back state per the
/// strategy (full: globally consistent rewind and replay; partial: failed
/// shards only), the PLS ledger tracks lost samples, and the ledger charges
/// volume-proportional save costs plus per-failure load/reschedule costs.
ExperimentResult run_failure_experiment(const ExperimentConfig& config,
                                        const FailureTrace& trace, uint64_t seed);

/// Failure-free single-epoch training (baseline for degradation metrics).
TrainMetrics train_failure_free(const ToyTrainerConfig& config, uint64_t seed);

}  // namespace cprsim
