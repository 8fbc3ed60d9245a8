// Copyright (c) 2026 The cprsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON experiment-config schema: parsing with fail-fast unknown-key
// rejection, serialization of fully resolved configs, and a stable hash so
// emitted artifacts are attributable to the exact configuration.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cprsim/simulator.hpp"

namespace cprsim {

/// Thrown on malformed config input; the message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a config document. Every key is optional and falls back to the
/// engine default; unknown keys anywhere are errors.
SimConfig parse_sim_config(const nlohmann::json& doc);

/// Reads and parses a config file (throws ConfigError on I/O or parse).
SimConfig load_sim_config(const std::string& path);

/// Serializes the fully resolved config; parse_sim_config(to_json(c))
/// round-trips to an equivalent config.
nlohmann::json to_json(const SimConfig& config);

/// FNV-1a 64-bit hash over the canonical serialized form.
uint64_t config_hash(const SimConfig& config);
std::string config_hash_hex(const SimConfig& config);

}  // namespace cprsim
