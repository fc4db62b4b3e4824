#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "trge/adapter.hpp"
#include "trge/benchmark.hpp"
#include "trge/training.hpp"

namespace trge {

enum class RecognizerKind { kOracle, kPrototype, kSemantic };

std::string to_string(RecognizerKind kind);
RecognizerKind parse_recognizer(const std::string& text);

struct RunConfig {
  StreamConfig stream;
  TrainConfig train;
  RoutingConfig routing;
  std::size_t num_experts = 3;
  std::size_t rank = 4;
  double expert_scale = 0.0;  // 0 selects 1/rank
  double init_std = 0.1;
  RecognizerKind recognizer = RecognizerKind::kSemantic;
  double recognizer_error_rate = 0.0;
  double unseen_margin = 2.0;
  std::string out_dir = "trge_run";
  std::uint64_t seed = 0;

  GroupShape group_shape() const;
  // Copies the master seed into the stream and trainer sub-seeds.
  RunConfig with_derived_seeds() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// One documented key of the flat config format.
struct ConfigKey {
  std::string name;
  std::string description;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<ConfigKey>& config_schema();

// Environment variables named kEnvPrefix + KEY (upper case) override keys.
inline constexpr const char* kEnvPrefix = "TRGE_";

// Parses "key = value" lines ('#' starts a comment). Unknown keys, malformed
// values and out-of-range values throw ConfigError naming the key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path, bool apply_env = true);
void apply_overrides(RunConfig& cfg, const std::map<std::string, std::string>& values);
std::map<std::string, std::string> environment_overrides();
void validate(const RunConfig& cfg);

// Every key with its current value, one per line, in schema order.
std::string to_config_text(const RunConfig& cfg);

}  // namespace trge
