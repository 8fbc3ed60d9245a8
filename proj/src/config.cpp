// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "cprsim/config.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string_view>

namespace cprsim {

namespace {

using nlohmann::json;

/// Tracks which keys of one JSON object have been consumed so leftovers can
/// be reported as unknown keys.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) {
      throw ConfigError("config: '" + path_ + "' must be an object");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  const json& at(const char* key) { return node_.at(key); }

  std::string key_path(const char* key) const {
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

  double number(const char* key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError("config: '" + key_path(key) + "' must be a number");
    return v.get<double>();
  }

  int64_t integer(const char* key, int64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_integer()) {
      throw ConfigError("config: '" + key_path(key) + "' must be an integer");
    }
    return v.get<int64_t>();
  }

  uint64_t unsigned_integer(const char* key, uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<int64_t>() >= 0)) {
      throw ConfigError("config: '" + key_path(key) + "' must be a non-negative integer");
    }
    return v.get<uint64_t>();
  }

  bool boolean(const char* key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_boolean()) throw ConfigError("config: '" + key_path(key) + "' must be a boolean");
    return v.get<bool>();
  }

  std::string text(const char* key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError("config: '" + key_path(key) + "' must be a string");
    return v.get<std::string>();
  }

  template <typename T>
  std::vector<T> number_array(const char* key, std::vector<T> fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_array()) throw ConfigError("config: '" + key_path(key) + "' must be an array");
    std::vector<T> out;
    out.reserve(v.size());
    for (const auto& item : v) {
      if (!item.is_number()) {
        throw ConfigError("config: '" + key_path(key) + "' must contain only numbers");
      }
      out.push_back(item.get<T>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      (void)value;
      if (!seen_.contains(key)) {
        const std::string where = path_.empty() ? "top level" : "'" + path_ + "'";
        throw ConfigError("config: unknown key '" + key + "' in " + where);
      }
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

CostParameters parse_costs(const json& node) {
  CostParameters defaults;
  ObjectReader r(node, "cost");
  CostParameters c;
  c.o_save = r.number("o_save", defaults.o_save);
  c.o_load = r.number("o_load", defaults.o_load);
  c.o_res = r.number("o_res", defaults.o_res);
  c.t_fail = r.number("t_fail", defaults.t_fail);
  c.t_total = r.number("t_total", defaults.t_total);
  c.n_emb = static_cast<int>(r.integer("n_emb", defaults.n_emb));
  r.finish();
  return c;
}

FailureProcess parse_process(const json& node) {
  FailureProcess defaults;
  ObjectReader r(node, "process");
  FailureProcess p;
  const std::string family = r.text("family", std::string(family_name(defaults.family)));
  const auto parsed = parse_family(family);
  if (!parsed) throw ConfigError("config: unknown distribution family '" + family + "'");
  p.family = *parsed;
  p.params = r.number_array<double>("params", {});
  if (p.params.empty()) {
    // Family-appropriate default: one failure per 28 hours, matching the
    // emulation setup.
    p.params = (p.family == DistFamily::Exponential || p.family == DistFamily::UniformHazard)
                   ? std::vector<double>{1.0 / 28.0}
                   : std::vector<double>{1.0, 28.0};
  }
  p.base_nodes = static_cast<int>(r.integer("base_nodes", defaults.base_nodes));
  const std::string scaling = r.text("scaling", std::string(scaling_name(defaults.scaling)));
  const auto parsed_scaling = parse_scaling(scaling);
  if (!parsed_scaling) throw ConfigError("config: unknown scaling rule '" + scaling + "'");
  p.scaling = *parsed_scaling;
  p.node_failure_prob = r.number("node_failure_prob", defaults.node_failure_prob);
  p.period_hours = r.number("period_hours", defaults.period_hours);
  p.burn_in_multiplier = r.number("burn_in_multiplier", defaults.burn_in_multiplier);
  p.burn_in_fraction = r.number("burn_in_fraction", defaults.burn_in_fraction);
  r.finish();
  return p;
}

CheckpointPolicy parse_policy(const json& node) {
  CheckpointPolicy defaults;
  ObjectReader r(node, "policy");
  CheckpointPolicy p;
  const std::string strategy = r.text("strategy", std::string(strategy_name(defaults.strategy)));
  const auto parsed = parse_strategy(strategy);
  if (!parsed) throw ConfigError("config: unknown strategy '" + strategy + "'");
  p.strategy = *parsed;
  p.t_save = r.number("t_save", defaults.t_save);
  p.r = r.number("r", defaults.r);
  p.prioritized_tables = r.number_array<size_t>("prioritized_tables", defaults.prioritized_tables);
  p.prioritized_coverage = r.number("prioritized_coverage", defaults.prioritized_coverage);
  r.finish();
  return p;
}

ToyTrainerConfig parse_trainer(const json& node) {
  ToyTrainerConfig defaults;
  ObjectReader r(node, "trainer");
  ToyTrainerConfig t;
  t.n_samples = r.integer("n_samples", defaults.n_samples);
  t.test_fraction = r.number("test_fraction", defaults.test_fraction);
  t.batch_size = static_cast<int>(r.integer("batch_size", defaults.batch_size));
  t.learning_rate = r.number("learning_rate", defaults.learning_rate);
  t.zipf_exponent = r.number("zipf_exponent", defaults.zipf_exponent);
  t.embedding_dim = static_cast<uint32_t>(r.integer("embedding_dim", defaults.embedding_dim));
  t.vocab_sizes = r.number_array<uint32_t>("vocab_sizes", defaults.vocab_sizes);
  t.dense_dim = static_cast<uint32_t>(r.integer("dense_dim", defaults.dense_dim));
  t.label_scale = r.number("label_scale", defaults.label_scale);
  t.adagrad = r.boolean("adagrad", defaults.adagrad);
  t.init_scale = r.number("init_scale", defaults.init_scale);
  t.ssu_sampling_period =
      static_cast<uint32_t>(r.integer("ssu_sampling_period", defaults.ssu_sampling_period));
  r.finish();
  return t;
}

}  // namespace

SimConfig parse_sim_config(const json& doc) {
  SimConfig defaults;
  ObjectReader r(doc, "");
  SimConfig c;
  if (r.has("cost")) c.costs = parse_costs(r.at("cost"));
  if (r.has("process")) c.process = parse_process(r.at("process"));
  if (r.has("policy")) c.policy = parse_policy(r.at("policy"));
  const std::string mode =
      r.text("mode", defaults.mode == SimMode::Coupled ? "coupled" : "analytic");
  if (mode == "analytic") {
    c.mode = SimMode::Analytic;
  } else if (mode == "coupled") {
    c.mode = SimMode::Coupled;
  } else {
    throw ConfigError("config: 'mode' must be \"analytic\" or \"coupled\"");
  }
  c.fraction_set = r.number_array<double>("fraction_set", defaults.fraction_set);
  c.n_seeds = static_cast<int>(r.integer("n_seeds", defaults.n_seeds));
  c.master_seed = r.unsigned_integer("master_seed", defaults.master_seed);
  c.target_pls = r.number("target_pls", defaults.target_pls);
  c.margin_fraction = r.number("margin_fraction", defaults.margin_fraction);
  c.prioritized_fraction = r.number("prioritized_fraction", defaults.prioritized_fraction);
  if (r.has("trainer")) c.trainer = parse_trainer(r.at("trainer"));
  r.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

SimConfig load_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  return parse_sim_config(doc);
}

json to_json(const SimConfig& config) {
  json doc;
  doc["cost"] = {
      {"o_save", config.costs.o_save}, {"o_load", config.costs.o_load},
      {"o_res", config.costs.o_res},   {"t_fail", config.costs.t_fail},
      {"t_total", config.costs.t_total}, {"n_emb", config.costs.n_emb},
  };
  doc["process"] = {
      {"family", std::string(family_name(config.process.family))},
      {"params", config.process.params},
      {"base_nodes", config.process.base_nodes},
      {"scaling", std::string(scaling_name(config.process.scaling))},
      {"node_failure_prob", config.process.node_failure_prob},
      {"period_hours", config.process.period_hours},
      {"burn_in_multiplier", config.process.burn_in_multiplier},
      {"burn_in_fraction", config.process.burn_in_fraction},
  };
  doc["policy"] = {
      {"strategy", std::string(strategy_name(config.policy.strategy))},
      {"t_save", config.policy.t_save},
      {"r", config.policy.r},
      {"prioritized_tables", config.policy.prioritized_tables},
      {"prioritized_coverage", config.policy.prioritized_coverage},
  };
  doc["mode"] = config.mode == SimMode::Coupled ? "coupled" : "analytic";
  doc["fraction_set"] = config.fraction_set;
  doc["n_seeds"] = config.n_seeds;
  doc["master_seed"] = config.master_seed;
  doc["target_pls"] = config.target_pls;
  doc["margin_fraction"] = config.margin_fraction;
  doc["prioritized_fraction"] = config.prioritized_fraction;
  if (config.trainer.has_value()) {
    const auto& t = *config.trainer;
    doc["trainer"] = {
        {"n_samples", t.n_samples},
        {"test_fraction", t.test_fraction},
        {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate},
        {"zipf_exponent", t.zipf_exponent},
        {"embedding_dim", t.embedding_dim},
        {"vocab_sizes", t.vocab_sizes},
        {"dense_dim", t.dense_dim},
        {"label_scale", t.label_scale},
        {"adagrad", t.adagrad},
        {"init_scale", t.init_scale},
        {"ssu_sampling_period", t.ssu_sampling_period},
    };
  }
  return doc;
}

uint64_t config_hash(const SimConfig& config) {
  // nlohmann::json orders object keys, so dump() is canonical.
  const std::string canonical = to_json(config).dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash_hex(const SimConfig& config) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << config_hash(config);
  return out.str();
}

}  // namespace cprsim
