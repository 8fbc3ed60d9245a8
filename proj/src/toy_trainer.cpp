// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "cprsim/toy_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "cprsim/binary_io.hpp"

namespace cprsim {

namespace {

constexpr char kDatasetMagic[8] = {'C', 'P', 'R', 'D', 'S', 'E', 'T', '1'};
constexpr uint32_t kDatasetVersion = 1;

double stable_bce(double logit, double label) {
  // max(z, 0) - z*y + log(1 + exp(-|z|)), numerically safe for large |z|.
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

void ToyTrainerConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("ToyTrainerConfig: ") + what);
  };
  require(n_samples >= 1, "n_samples must be >= 1");
  require(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must be in (0, 1)");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(learning_rate >= 0.0, "learning_rate must be >= 0");
  require(zipf_exponent > 0.0, "zipf_exponent must be positive");
  require(embedding_dim >= 1, "embedding_dim must be >= 1");
  require(!vocab_sizes.empty(), "need at least one embedding table");
  for (uint32_t v : vocab_sizes) require(v >= 2, "vocab sizes must be >= 2");
  require(dense_dim >= 1, "dense_dim must be >= 1");
  require(label_scale > 0.0, "label_scale must be positive");
  require(init_scale > 0.0, "init_scale must be positive");
  require(ssu_sampling_period >= 1, "ssu_sampling_period must be >= 1");
}

SyntheticDataset::SyntheticDataset(const ToyTrainerConfig& config, uint64_t seed) {
  config.validate();
  n_samples_ = config.n_samples;
  n_train_ = n_samples_ - static_cast<int64_t>(std::llround(
                              config.test_fraction * static_cast<double>(n_samples_)));
  if (n_train_ < 1 || n_train_ >= n_samples_) {
    throw std::invalid_argument("SyntheticDataset: degenerate train/test split");
  }
  n_sparse_ = static_cast<uint32_t>(config.vocab_sizes.size());
  dense_dim_ = config.dense_dim;
  vocabs_ = config.vocab_sizes;

  const uint64_t base = split_seed(seed, 0xda7aULL);
  // Per-feature Zipf samplers and rank->id permutations. The permutation
  // scatters hot ranks uniformly over the id space (and therefore over the
  // contiguous shard ranges).
  std::vector<ZipfSampler> zipf;
  std::vector<std::vector<uint32_t>> perm(n_sparse_);
  std::vector<std::vector<float>> planted(n_sparse_);
  zipf.reserve(n_sparse_);
  for (uint32_t f = 0; f < n_sparse_; ++f) {
    zipf.emplace_back(vocabs_[f], config.zipf_exponent);
    perm[f].resize(vocabs_[f]);
    std::iota(perm[f].begin(), perm[f].end(), 0u);
    Rng prng(split_seed(base, 0x1000ULL + f));
    for (uint32_t i = vocabs_[f] - 1; i > 0; --i) {
      const auto j = static_cast<uint32_t>(uniform_below(prng, i + 1));
      std::swap(perm[f][i], perm[f][j]);
    }
    planted[f].resize(vocabs_[f]);
    Rng trng(split_seed(base, 0x2000ULL + f));
    for (uint32_t i = 0; i < vocabs_[f]; ++i) {
      planted[f][i] = static_cast<float>(config.label_scale * sample_normal(trng));
    }
  }
  std::vector<double> dense_w(dense_dim_);
  Rng wrng(split_seed(base, 0x3000ULL));
  for (auto& w : dense_w) w = config.label_scale * sample_normal(wrng);

  ids_.resize(static_cast<size_t>(n_samples_) * n_sparse_);
  dense_.resize(static_cast<size_t>(n_samples_) * dense_dim_);
  labels_.resize(static_cast<size_t>(n_samples_));
  Rng idrng(split_seed(base, 0x4000ULL));
  Rng drng(split_seed(base, 0x5000ULL));
  Rng lrng(split_seed(base, 0x6000ULL));
  for (int64_t i = 0; i < n_samples_; ++i) {
    double logit = 0.0;
    for (uint32_t f = 0; f < n_sparse_; ++f) {
      const uint32_t rank = zipf[f](idrng);
      const uint32_t id = perm[f][rank];
      ids_[static_cast<size_t>(i) * n_sparse_ + f] = id;
      logit += planted[f][id];
    }
    for (uint32_t d = 0; d < dense_dim_; ++d) {
      const double x = sample_normal(drng);
      dense_[static_cast<size_t>(i) * dense_dim_ + d] = static_cast<float>(x);
      logit += dense_w[d] * x;
    }
    labels_[static_cast<size_t>(i)] = uniform01(lrng) < sigmoid(logit) ? 1 : 0;
  }
}

std::vector<int64_t> SyntheticDataset::id_frequencies(uint32_t feature) const {
  if (feature >= n_sparse_) throw std::out_of_range("id_frequencies: bad feature");
  std::vector<int64_t> freq(vocabs_[feature], 0);
  for (int64_t i = 0; i < n_samples_; ++i) {
    ++freq[sparse_ids(i)[feature]];
  }
  return freq;
}

void SyntheticDataset::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open dataset file for writing: " + path);
  out.write(kDatasetMagic, sizeof(kDatasetMagic));
  write_le<uint32_t>(out, kDatasetVersion);
  write_le<uint64_t>(out, static_cast<uint64_t>(n_samples_));
  write_le<uint64_t>(out, static_cast<uint64_t>(n_train_));
  write_le<uint32_t>(out, n_sparse_);
  write_le<uint32_t>(out, dense_dim_);
  for (uint32_t v : vocabs_) write_le<uint32_t>(out, v);
  for (int64_t i = 0; i < n_samples_; ++i) {
    const uint32_t* ids = sparse_ids(i);
    for (uint32_t f = 0; f < n_sparse_; ++f) write_le<uint32_t>(out, ids[f]);
    const float* dv = dense(i);
    for (uint32_t d = 0; d < dense_dim_; ++d) write_le<float>(out, dv[d]);
    write_le<uint8_t>(out, labels_[static_cast<size_t>(i)]);
  }
  if (!out) throw std::runtime_error("dataset write failed: " + path);
}

SyntheticDataset SyntheticDataset::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDatasetMagic, sizeof(kDatasetMagic)) != 0) {
    throw std::runtime_error("dataset read: bad magic");
  }
  const auto version = read_le<uint32_t>(in);
  if (version != kDatasetVersion) {
    throw std::runtime_error("dataset read: unsupported version");
  }
  SyntheticDataset data;
  data.n_samples_ = static_cast<int64_t>(read_le<uint64_t>(in));
  data.n_train_ = static_cast<int64_t>(read_le<uint64_t>(in));
  data.n_sparse_ = read_le<uint32_t>(in);
  data.dense_dim_ = read_le<uint32_t>(in);
  data.vocabs_.resize(data.n_sparse_);
  for (auto& v : data.vocabs_) v = read_le<uint32_t>(in);
  data.ids_.resize(static_cast<size_t>(data.n_samples_) * data.n_sparse_);
  data.dense_.resize(static_cast<size_t>(data.n_samples_) * data.dense_dim_);
  data.labels_.resize(static_cast<size_t>(data.n_samples_));
  for (int64_t i = 0; i < data.n_samples_; ++i) {
    for (uint32_t f = 0; f < data.n_sparse_; ++f) {
      data.ids_[static_cast<size_t>(i) * data.n_sparse_ + f] = read_le<uint32_t>(in);
    }
    for (uint32_t d = 0; d < data.dense_dim_; ++d) {
      data.dense_[static_cast<size_t>(i) * data.dense_dim_ + d] = read_le<float>(in);
    }
    data.labels_[static_cast<size_t>(i)] = read_le<uint8_t>(in);
  }
  return data;
}

struct ToyModel::Workspace {
  std::vector<double> h0pre, h0, h1pre, h1;
  std::vector<double> vecs;  ///< (n_sparse + 1) * dim: embeddings then bottom output
  std::vector<double> dots;
  std::vector<double> z, t0pre, t0;
  // backward scratch
  std::vector<double> g_t0, g_z, g_vecs, g_h1, g_h0;
};

ToyModel::ToyModel(const ToyTrainerConfig& config, EmbeddingShardSet* shards, uint64_t seed)
    : shards_(shards),
      dim_(config.embedding_dim),
      dense_dim_(config.dense_dim),
      n_sparse_(static_cast<uint32_t>(config.vocab_sizes.size())),
      lr_(config.learning_rate) {
  config.validate();
  if (shards == nullptr || shards->table_count() != n_sparse_) {
    throw std::invalid_argument("ToyModel: shard set does not match the config's tables");
  }
  const uint32_t n_vec = n_sparse_ + 1;
  z_dim_ = dim_ + n_vec * (n_vec - 1) / 2;

  const size_t sizes[8] = {
      static_cast<size_t>(dim_) * dense_dim_, dim_,          // w1, b1
      static_cast<size_t>(dim_) * dim_,       dim_,          // w2, b2
      static_cast<size_t>(top_hidden_) * z_dim_, top_hidden_, // w3, b3
      top_hidden_,                             1,             // w4, b4
  };
  size_t total = 0;
  for (int i = 0; i < 8; ++i) {
    off_[i] = total;
    total += sizes[i];
  }
  params_.assign(total, 0.0);
  // He-style initialization of the weight matrices; biases stay zero.
  const double fan_in[4] = {static_cast<double>(dense_dim_), static_cast<double>(dim_),
                            static_cast<double>(z_dim_), static_cast<double>(top_hidden_)};
  for (int layer = 0; layer < 4; ++layer) {
    Rng rng(split_seed(split_seed(seed, 0x3317ULL), static_cast<uint64_t>(layer)));
    const double scale = std::sqrt(2.0 / fan_in[layer]);
    double* w = params_.data() + off_[layer * 2];
    const size_t count = sizes[layer * 2];
    for (size_t i = 0; i < count; ++i) w[i] = scale * sample_normal(rng);
  }
}

double ToyModel::forward(const double* emb_vecs, const float* dense, Workspace& ws) const {
  const uint32_t D = dim_;
  const uint32_t n_vec = n_sparse_ + 1;
  ws.h0pre.assign(D, 0.0);
  ws.h0.assign(D, 0.0);
  ws.h1pre.assign(D, 0.0);
  ws.h1.assign(D, 0.0);
  ws.vecs.assign(static_cast<size_t>(n_vec) * D, 0.0);
  ws.dots.assign(static_cast<size_t>(n_vec) * (n_vec - 1) / 2, 0.0);
  ws.z.assign(z_dim_, 0.0);
  ws.t0pre.assign(top_hidden_, 0.0);
  ws.t0.assign(top_hidden_, 0.0);

  const double* w1 = params_.data() + off_[0];
  const double* b1 = params_.data() + off_[1];
  const double* w2 = params_.data() + off_[2];
  const double* b2 = params_.data() + off_[3];
  const double* w3 = params_.data() + off_[4];
  const double* b3 = params_.data() + off_[5];
  const double* w4 = params_.data() + off_[6];
  const double* b4 = params_.data() + off_[7];

  for (uint32_t o = 0; o < D; ++o) {
    double acc = b1[o];
    for (uint32_t i = 0; i < dense_dim_; ++i) acc += w1[o * dense_dim_ + i] * dense[i];
    ws.h0pre[o] = acc;
    ws.h0[o] = acc > 0.0 ? acc : 0.0;
  }
  for (uint32_t o = 0; o < D; ++o) {
    double acc = b2[o];
    for (uint32_t i = 0; i < D; ++i) acc += w2[o * D + i] * ws.h0[i];
    ws.h1pre[o] = acc;
    ws.h1[o] = acc > 0.0 ? acc : 0.0;
  }
  std::copy_n(emb_vecs, static_cast<size_t>(n_sparse_) * D, ws.vecs.data());
  std::copy_n(ws.h1.data(), D, ws.vecs.data() + static_cast<size_t>(n_sparse_) * D);

  size_t pair = 0;
  for (uint32_t a = 0; a < n_vec; ++a) {
    const double* va = ws.vecs.data() + static_cast<size_t>(a) * D;
    for (uint32_t b = a + 1; b < n_vec; ++b) {
      const double* vb = ws.vecs.data() + static_cast<size_t>(b) * D;
      double acc = 0.0;
      for (uint32_t d = 0; d < D; ++d) acc += va[d] * vb[d];
      ws.dots[pair++] = acc;
    }
  }
  std::copy_n(ws.h1.data(), D, ws.z.data());
  std::copy_n(ws.dots.data(), ws.dots.size(), ws.z.data() + D);

  for (uint32_t o = 0; o < top_hidden_; ++o) {
    double acc = b3[o];
    const double* row = w3 + static_cast<size_t>(o) * z_dim_;
    for (uint32_t i = 0; i < z_dim_; ++i) acc += row[i] * ws.z[i];
    ws.t0pre[o] = acc;
    ws.t0[o] = acc > 0.0 ? acc : 0.0;
  }
  double logit = b4[0];
  for (uint32_t i = 0; i < top_hidden_; ++i) logit += w4[i] * ws.t0[i];
  return logit;
}

void ToyModel::gather_eval(const uint32_t* ids, std::vector<double>& out) const {
  out.clear();
  for (uint32_t f = 0; f < n_sparse_; ++f) {
    const auto row = shards_->table(f).row(ids[f]);
    out.insert(out.end(), row.begin(), row.end());
  }
}

double ToyModel::logit_for(const SyntheticDataset& data, int64_t index) const {
  Workspace ws;
  std::vector<double> emb;
  gather_eval(data.sparse_ids(index), emb);
  return forward(emb.data(), data.dense(index), ws);
}

double ToyModel::sample_loss(const SyntheticDataset& data, int64_t index) const {
  return stable_bce(logit_for(data, index), static_cast<double>(data.label(index)));
}

void ToyModel::compute_gradients(const SyntheticDataset& data, int64_t begin, int64_t end,
                                 GradBuffer& out, bool count_accesses) const {
  if (begin < 0 || end <= begin || end > data.n_train()) {
    throw std::invalid_argument("compute_gradients: bad train range");
  }
  const auto batch = static_cast<size_t>(end - begin);
  const uint32_t D = dim_;
  const uint32_t n_vec = n_sparse_ + 1;

  out.dense.assign(params_.size(), 0.0);
  out.emb_rows.assign(n_sparse_, {});
  out.emb_grads.assign(n_sparse_, {});
  out.mean_loss = 0.0;

  // Batched instrumented lookups, one call per table.
  std::vector<std::vector<uint64_t>> batch_ids(n_sparse_);
  std::vector<std::vector<double>> batch_vals(n_sparse_);
  for (uint32_t f = 0; f < n_sparse_; ++f) {
    batch_ids[f].reserve(batch);
    for (int64_t i = begin; i < end; ++i) batch_ids[f].push_back(data.sparse_ids(i)[f]);
    batch_vals[f].reserve(batch * D);
    if (count_accesses) {
      shards_->table(f).lookup_and_count(batch_ids[f], &batch_vals[f]);
    } else {
      for (uint64_t id : batch_ids[f]) {
        const auto row = shards_->table(f).row(id);
        batch_vals[f].insert(batch_vals[f].end(), row.begin(), row.end());
      }
    }
  }

  // Per-table sparse gradient accumulators (row -> summed gradient).
  std::vector<std::map<uint64_t, std::vector<double>>> sparse_acc(n_sparse_);

  const double* w2 = params_.data() + off_[2];
  const double* w3 = params_.data() + off_[4];
  const double* w4 = params_.data() + off_[6];
  double* gw1 = out.dense.data() + off_[0];
  double* gb1 = out.dense.data() + off_[1];
  double* gw2 = out.dense.data() + off_[2];
  double* gb2 = out.dense.data() + off_[3];
  double* gw3 = out.dense.data() + off_[4];
  double* gb3 = out.dense.data() + off_[5];
  double* gw4 = out.dense.data() + off_[6];
  double* gb4 = out.dense.data() + off_[7];

  Workspace ws;
  std::vector<double> emb(static_cast<size_t>(n_sparse_) * D);
  for (int64_t s = begin; s < end; ++s) {
    const auto k = static_cast<size_t>(s - begin);
    for (uint32_t f = 0; f < n_sparse_; ++f) {
      std::copy_n(batch_vals[f].data() + k * D, D, emb.data() + static_cast<size_t>(f) * D);
    }
    const float* dense = data.dense(s);
    const double logit = forward(emb.data(), dense, ws);
    const double label = static_cast<double>(data.label(s));
    out.mean_loss += stable_bce(logit, label);

    const double g = sigmoid(logit) - label;  // dL/dlogit

    // Top MLP.
    ws.g_t0.assign(top_hidden_, 0.0);
    for (uint32_t i = 0; i < top_hidden_; ++i) {
      gw4[i] += g * ws.t0[i];
      if (ws.t0pre[i] > 0.0) ws.g_t0[i] = g * w4[i];
    }
    gb4[0] += g;
    ws.g_z.assign(z_dim_, 0.0);
    for (uint32_t o = 0; o < top_hidden_; ++o) {
      const double go = ws.g_t0[o];
      if (go == 0.0) continue;
      double* grow = gw3 + static_cast<size_t>(o) * z_dim_;
      const double* row = w3 + static_cast<size_t>(o) * z_dim_;
      for (uint32_t i = 0; i < z_dim_; ++i) {
        grow[i] += go * ws.z[i];
        ws.g_z[i] += go * row[i];
      }
      gb3[o] += go;
    }

    // Interaction: route dot gradients into the vectors.
    ws.g_vecs.assign(static_cast<size_t>(n_vec) * D, 0.0);
    size_t pair = 0;
    for (uint32_t a = 0; a < n_vec; ++a) {
      const double* va = ws.vecs.data() + static_cast<size_t>(a) * D;
      double* ga = ws.g_vecs.data() + static_cast<size_t>(a) * D;
      for (uint32_t b = a + 1; b < n_vec; ++b) {
        const double gd = ws.g_z[D + pair];
        ++pair;
        if (gd == 0.0) continue;
        const double* vb = ws.vecs.data() + static_cast<size_t>(b) * D;
        double* gb = ws.g_vecs.data() + static_cast<size_t>(b) * D;
        for (uint32_t d = 0; d < D; ++d) {
          ga[d] += gd * vb[d];
          gb[d] += gd * va[d];
        }
      }
    }

    // Embedding gradients.
    for (uint32_t f = 0; f < n_sparse_; ++f) {
      const double* gv = ws.g_vecs.data() + static_cast<size_t>(f) * D;
      auto& acc = sparse_acc[f][batch_ids[f][k]];
      if (acc.empty()) acc.assign(D, 0.0);
      for (uint32_t d = 0; d < D; ++d) acc[d] += gv[d];
    }

    // Bottom MLP: direct path (z head) plus interaction path.
    ws.g_h1.assign(D, 0.0);
    const double* gv_bottom = ws.g_vecs.data() + static_cast<size_t>(n_sparse_) * D;
    for (uint32_t d = 0; d < D; ++d) {
      const double total = ws.g_z[d] + gv_bottom[d];
      ws.g_h1[d] = ws.h1pre[d] > 0.0 ? total : 0.0;
    }
    ws.g_h0.assign(D, 0.0);
    for (uint32_t o = 0; o < D; ++o) {
      const double go = ws.g_h1[o];
      if (go == 0.0) continue;
      for (uint32_t i = 0; i < D; ++i) {
        gw2[o * D + i] += go * ws.h0[i];
        ws.g_h0[i] += go * w2[o * D + i];
      }
      gb2[o] += go;
    }
    for (uint32_t o = 0; o < D; ++o) {
      const double go = ws.h0pre[o] > 0.0 ? ws.g_h0[o] : 0.0;
      if (go == 0.0) continue;
      for (uint32_t i = 0; i < dense_dim_; ++i) {
        gw1[o * dense_dim_ + i] += go * static_cast<double>(dense[i]);
      }
      gb1[o] += go;
    }
  }

  const double inv = 1.0 / static_cast<double>(batch);
  for (auto& v : out.dense) v *= inv;
  out.mean_loss *= inv;
  for (uint32_t f = 0; f < n_sparse_; ++f) {
    out.emb_rows[f].reserve(sparse_acc[f].size());
    out.emb_grads[f].reserve(sparse_acc[f].size() * D);
    for (auto& [row, grad] : sparse_acc[f]) {
      out.emb_rows[f].push_back(row);
      for (uint32_t d = 0; d < D; ++d) out.emb_grads[f].push_back(grad[d] * inv);
    }
  }
}

double ToyModel::train_batch(const SyntheticDataset& data, int64_t begin, int64_t end) {
  GradBuffer grads;
  compute_gradients(data, begin, end, grads, /*count_accesses=*/true);
  if (!std::isfinite(grads.mean_loss)) {
    throw std::runtime_error("train_batch: training diverged (non-finite loss)");
  }
  for (size_t i = 0; i < params_.size(); ++i) params_[i] -= lr_ * grads.dense[i];
  for (uint32_t f = 0; f < n_sparse_; ++f) {
    if (!grads.emb_rows[f].empty()) {
      shards_->table(f).apply_gradients(grads.emb_rows[f], grads.emb_grads[f], lr_);
    }
  }
  return grads.mean_loss;
}

TrainMetrics ToyModel::evaluate(const SyntheticDataset& data, int64_t samples_seen) const {
  const int64_t n = data.n_test();
  if (n < 2) throw std::domain_error("evaluate: test set too small");
  std::vector<std::pair<double, int>> scored;
  scored.reserve(static_cast<size_t>(n));
  double logloss = 0.0;
  int64_t positives = 0;
  for (int64_t i = data.n_train(); i < data.n_samples(); ++i) {
    const double z = logit_for(data, i);
    const int y = data.label(i);
    logloss += stable_bce(z, static_cast<double>(y));
    scored.emplace_back(z, y);
    positives += y;
  }
  const int64_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw std::domain_error("evaluate: degenerate test labels");
  }
  // Rank-based AUC with average ranks over score ties.
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < scored.size()) {
    size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t k = i; k < j; ++k) {
      if (scored[k].second == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  TrainMetrics m;
  m.logloss = logloss / static_cast<double>(n);
  m.auc = (rank_sum_pos - 0.5 * static_cast<double>(positives) *
                              (static_cast<double>(positives) + 1.0)) /
          (static_cast<double>(positives) * static_cast<double>(negatives));
  m.samples_seen = samples_seen;
  return m;
}

std::vector<uint8_t> ToyModel::serialize_dense() const {
  std::vector<uint8_t> blob(params_.size() * sizeof(double));
  std::memcpy(blob.data(), params_.data(), blob.size());
  return blob;
}

void ToyModel::deserialize_dense(std::span<const uint8_t> blob) {
  if (blob.size() != params_.size() * sizeof(double)) {
    throw std::invalid_argument("deserialize_dense: blob size mismatch");
  }
  std::memcpy(params_.data(), blob.data(), blob.size());
}

namespace {

std::vector<TableSpec> specs_from_config(const ToyTrainerConfig& config) {
  std::vector<TableSpec> specs;
  specs.reserve(config.vocab_sizes.size());
  for (uint32_t v : config.vocab_sizes) {
    specs.push_back({v, config.embedding_dim});
  }
  return specs;
}

TableOptions options_from_config(const ToyTrainerConfig& config, double ssu_ratio) {
  TableOptions opts;
  opts.track_counters = true;
  opts.track_shadow = true;
  opts.adagrad = config.adagrad;
  opts.init_scale = config.init_scale;
  if (ssu_ratio > 0.0) {
    SsuConfig ssu;
    ssu.capacity_ratio = ssu_ratio;
    ssu.sampling_period = config.ssu_sampling_period;
    opts.ssu = ssu;
  }
  return opts;
}

}  // namespace

TrainerSession::TrainerSession(const ToyTrainerConfig& config, uint64_t seed, double ssu_ratio)
    : config_(config),
      data_(config, split_seed(seed, 0x01ULL)),
      shards_(specs_from_config(config), /*n_emb=*/8, options_from_config(config, ssu_ratio),
              split_seed(seed, 0x02ULL)),
      model_(config, &shards_, split_seed(seed, 0x03ULL)) {
  total_steps_ = data_.n_train() / config_.batch_size;
}

void TrainerSession::run_to(int64_t step) {
  if (step > total_steps_) {
    throw std::invalid_argument("run_to: step beyond the single epoch");
  }
  while (step_ < step) {
    const int64_t begin = step_ * config_.batch_size;
    model_.train_batch(data_, begin, begin + config_.batch_size);
    ++step_;
  }
}

void TrainerSession::reset_cursor(int64_t step) {
  if (step < 0 || step > total_steps_) {
    throw std::invalid_argument("reset_cursor: bad step");
  }
  step_ = step;
}

TrainMetrics train(TrainerSession& session, int64_t steps,
                   const std::function<void(TrainerSession&, int64_t)>& after_step) {
  if (steps > session.total_steps()) {
    throw std::invalid_argument("train: steps beyond the single epoch");
  }
  if (after_step) after_step(session, 0);
  while (session.current_step() < steps) {
    session.run_to(session.current_step() + 1);
    if (after_step) after_step(session, session.current_step());
  }
  return session.evaluate();
}

TrainMetrics train_failure_free(const ToyTrainerConfig& config, uint64_t seed) {
  TrainerSession session(config, seed);
  return train(session, session.total_steps());
}

namespace {

/// The shard set's n_emb is fixed by the session; failure experiments need
/// it to agree with the cost model's shard count.
constexpr int kSessionShards = 8;

struct TimedEvent {
  double time_hours = 0.0;
  bool is_save = false;
  SaveKind kind = SaveKind::FullAll;
  double lost_fraction = 0.0;
  size_t failure_ordinal = 0;
};

}  // namespace

ExperimentResult run_failure_experiment(const ExperimentConfig& config,
                                        const FailureTrace& trace, uint64_t seed) {
  config.costs.validate();
  trace.validate();
  if (config.costs.n_emb != kSessionShards) {
    throw std::invalid_argument("run_failure_experiment: costs.n_emb must match the session's 8 shards");
  }
  if (std::abs(trace.horizon_hours - config.costs.t_total) > 1e-9) {
    throw std::invalid_argument("run_failure_experiment: trace horizon != costs.t_total");
  }

  const bool ssu = config.policy.strategy == Strategy::CprSsu;
  TrainerSession session(config.trainer, seed, ssu ? config.policy.r : 0.0);
  auto& shards = session.shards();
  auto& model = session.model();
  const CheckpointPolicy policy = resolve_policy(config.policy, shards);

  const double t_total = config.costs.t_total;
  const int64_t total_steps = session.total_steps();
  const auto step_of = [&](double t) {
    const auto s = static_cast<int64_t>(
        std::floor(t / t_total * static_cast<double>(total_steps) + 1e-9));
    return std::clamp<int64_t>(s, 0, total_steps);
  };

  // Merge saves and failures on the hour axis; saves win ties so a failure
  // at a checkpoint instant loses nothing.
  std::vector<TimedEvent> events;
  for (const auto& a : plan_schedule(policy, t_total)) {
    events.push_back({a.time_hours, true, a.kind, 0.0, 0});
  }
  for (size_t i = 0; i < trace.events.size(); ++i) {
    events.push_back({trace.events[i].time_hours, false, SaveKind::FullAll,
                      trace.events[i].lost_fraction, i});
  }
  std::stable_sort(events.begin(), events.end(), [](const TimedEvent& a, const TimedEvent& b) {
    if (a.time_hours != b.time_hours) return a.time_hours < b.time_hours;
    return a.is_save && !b.is_save;
  });

  std::vector<size_t> non_prioritized;
  for (size_t t = 0; t < shards.table_count(); ++t) {
    if (std::find(policy.prioritized_tables.begin(), policy.prioritized_tables.end(), t) ==
        policy.prioritized_tables.end()) {
      non_prioritized.push_back(t);
    }
  }
  const auto total_params = static_cast<double>(shards.total_params());

  SnapshotStore store(kSessionShards);
  const std::vector<uint8_t> initial_dense = model.serialize_dense();
  PlsLedger pls(session.dataset().n_train(), kSessionShards);

  ExperimentResult result;
  auto& ledger = result.ledger;

  const auto charge_save = [&](double params_saved, double time, bool full_coverage) {
    const double cost = config.costs.o_save * (params_saved / total_params);
    ledger.save_hours += cost;
    SimEvent ev;
    ev.kind = SimEventKind::Save;
    ev.time_hours = time;
    ev.charged_hours = cost;
    ev.full_coverage = full_coverage;
    result.events.push_back(ev);
  };

  const auto handle_save = [&](const TimedEvent& e) {
    const auto samples = session.samples_seen();
    switch (e.kind) {
      case SaveKind::FullAll: {
        for (int s = 0; s < kSessionShards; ++s) {
          store.save_full_shard(shards, s, e.time_hours, static_cast<uint64_t>(samples));
        }
        store.put_global_blob(e.time_hours, model.serialize_dense());
        pls.record_checkpoint_all(samples);
        for (size_t t = 0; t < shards.table_count(); ++t) {
          shards.table(t).mark_range_saved(0, shards.table(t).rows());
        }
        charge_save(total_params, e.time_hours, true);
        break;
      }
      case SaveKind::FullNonPrioritized: {
        double saved = 0.0;
        std::vector<std::pair<size_t, std::vector<uint64_t>>> rows_by_table;
        for (size_t t : non_prioritized) {
          std::vector<uint64_t> ids(shards.table(t).rows());
          std::iota(ids.begin(), ids.end(), 0);
          saved += static_cast<double>(ids.size()) * shards.table(t).dim();
          rows_by_table.emplace_back(t, std::move(ids));
        }
        for (int s = 0; s < kSessionShards; ++s) {
          store.save_partial_rows(shards, s, rows_by_table, e.time_hours,
                                  static_cast<uint64_t>(samples));
        }
        for (size_t t : non_prioritized) {
          shards.table(t).mark_range_saved(0, shards.table(t).rows());
        }
        // The schedule's full-interval tick: the PLS bookkeeping treats the
        // shard as checkpointed here (prioritized rows are refreshed far
        // more often by the partial saves, measured separately by AUC).
        pls.record_checkpoint_all(samples);
        charge_save(saved, e.time_hours, true);
        break;
      }
      case SaveKind::PartialPrioritized: {
        double saved = 0.0;
        std::vector<std::pair<size_t, std::vector<uint64_t>>> rows_by_table;
        for (size_t t : policy.prioritized_tables) {
          auto& table = shards.table(t);
          const auto rn = std::max<uint64_t>(
              1, static_cast<uint64_t>(std::floor(policy.r * static_cast<double>(table.rows()))));
          std::vector<uint64_t> ids;
          switch (policy.strategy) {
            case Strategy::CprMfu: ids = table.top_rn_by_counter(rn); break;
            case Strategy::CprScar: ids = table.top_rn_by_delta(rn); break;
            case Strategy::CprSsu: {
              ids = table.ssu_entries();
              std::sort(ids.begin(), ids.end());
              if (ids.size() > rn) ids.resize(rn);
              break;
            }
            default:
              throw std::logic_error("partial save scheduled for a non-priority strategy");
          }
          if (ids.empty()) continue;
          saved += static_cast<double>(ids.size()) * table.dim();
          rows_by_table.emplace_back(t, std::move(ids));
        }
        for (int s = 0; s < kSessionShards; ++s) {
          store.save_partial_rows(shards, s, rows_by_table, e.time_hours,
                                  static_cast<uint64_t>(samples));
        }
        for (const auto& [t, ids] : rows_by_table) {
          shards.table(t).mark_rows_saved(ids);
        }
        charge_save(saved, e.time_hours, false);
        break;
      }
    }
  };

  const auto handle_failure = [&](const TimedEvent& e) {
    const auto samples = session.samples_seen();
    SimEvent ev;
    ev.kind = SimEventKind::Failure;
    ev.time_hours = e.time_hours;
    ev.lost_fraction = e.lost_fraction;
    if (policy.strategy == Strategy::FullRecovery) {
      const auto res = store.restore_all_consistent(shards);
      if (res.global_blob != nullptr) {
        model.deserialize_dense(*res.global_blob);
      } else {
        model.deserialize_dense(initial_dense);
      }
      const int64_t back_to = static_cast<int64_t>(res.sample_count) / config.trainer.batch_size;
      session.reset_cursor(back_to);
      const double lost = e.time_hours - res.logical_time;
      ledger.load_hours += config.costs.o_load;
      ledger.reschedule_hours += config.costs.o_res;
      ledger.lost_hours += lost;
      ev.charged_hours = config.costs.o_load + config.costs.o_res + lost;
    } else {
      Rng event_rng(split_seed(seed, 0xe000ULL + e.failure_ordinal));
      ev.failed_shards = shards.sample_failed_shards(e.lost_fraction, event_rng);
      pls.record_failure(samples, ev.failed_shards);
      for (int s : ev.failed_shards) store.restore_shard(shards, s);
      ledger.load_hours += config.costs.o_load;
      ledger.reschedule_hours += config.costs.o_res;
      ev.charged_hours = config.costs.o_load + config.costs.o_res;
    }
    result.events.push_back(ev);
  };

  // Drive training between events; the event cursor only moves forward even
  // when a full-recovery rollback rewinds the training cursor (recomputed
  // work does not re-trigger saves or failures).
  for (const auto& e : events) {
    session.run_to(step_of(e.time_hours));
    if (e.is_save) {
      handle_save(e);
    } else {
      handle_failure(e);
    }
  }
  session.run_to(total_steps);

  result.metrics = session.evaluate();
  result.final_pls = pls.pls();
  result.overhead_fraction = ledger.total() / t_total;
  return result;
}

}  // namespace cprsim
