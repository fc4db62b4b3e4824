#include "trge/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "trge/error.hpp"

namespace trge {

std::string to_string(RecognizerKind kind) {
  switch (kind) {
    case RecognizerKind::kOracle:
      return "oracle";
    case RecognizerKind::kPrototype:
      return "prototype";
    case RecognizerKind::kSemantic:
      return "semantic";
  }
  return "semantic";
}

RecognizerKind parse_recognizer(const std::string& text) {
  if (text == "oracle") return RecognizerKind::kOracle;
  if (text == "prototype") return RecognizerKind::kPrototype;
  if (text == "semantic") return RecognizerKind::kSemantic;
  throw InvalidArgument("unknown recognizer '" + text + "' (oracle, prototype, semantic)");
}

GroupShape RunConfig::group_shape() const {
  GroupShape shape;
  shape.dim = stream.feature_dim;
  shape.num_experts = num_experts;
  shape.rank = rank;
  shape.scale = expert_scale > 0.0 ? expert_scale : 1.0 / static_cast<double>(rank);
  shape.init_std = init_std;
  return shape;
}

RunConfig RunConfig::with_derived_seeds() const {
  RunConfig out = *this;
  out.stream.seed = mix_seed(seed, 1);
  out.train.seed = mix_seed(seed, 2);
  return out;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    throw ConfigError(key, "expected a real number, got '" + text + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "on" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "off" || text == "0" || text == "no") return false;
  throw ConfigError(key, "expected true/false, got '" + text + "'");
}

template <typename Field>
ConfigKey real_key(std::string name, std::string description, Field field) {
  return ConfigKey{
      name, std::move(description),
      [name, field](RunConfig& c, const std::string& v) { field(c) = to_double(name, v); },
      [field](const RunConfig& c) { return format_double(field(c)); }};
}

template <typename Field>
ConfigKey count_key(std::string name, std::string description, Field field) {
  return ConfigKey{
      name, std::move(description),
      [name, field](RunConfig& c, const std::string& v) {
        field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(to_u64(name, v));
      },
      [field](const RunConfig& c) { return std::to_string(field(c)); }};
}

template <typename Field>
ConfigKey flag_key(std::string name, std::string description, Field field) {
  return ConfigKey{
      name, std::move(description),
      [name, field](RunConfig& c, const std::string& v) { field(c) = to_bool(name, v); },
      [field](const RunConfig& c) {
        return std::string(field(c) ? "true" : "false");
      }};
}

std::vector<ConfigKey> build_schema() {
  std::vector<ConfigKey> keys;
  keys.push_back(ConfigKey{
      "mode", "stream mode: mtil (task-incremental) or mcil (class-incremental); default mtil",
      [](RunConfig& c, const std::string& v) {
        try {
          c.stream.mode = parse_stream_mode(v);
        } catch (const InvalidArgument& e) {
          throw ConfigError("mode", e.what());
        }
      },
      [](const RunConfig& c) { return to_string(c.stream.mode); }});
  keys.push_back(count_key("tasks", "number of tasks T; default 5",
                           [](auto& c) -> auto& { return c.stream.tasks; }));
  keys.push_back(count_key("classes_per_task", "classes per task; default 4",
                           [](auto& c) -> auto& { return c.stream.classes_per_task; }));
  keys.push_back(real_key("class_overlap",
                          "mtil only: fraction of classes reused from the previous task; default 0.25",
                          [](auto& c) -> auto& { return c.stream.class_overlap; }));
  keys.push_back(count_key("input_dim", "raw input dimension; default 32",
                           [](auto& c) -> auto& { return c.stream.input_dim; }));
  keys.push_back(count_key("feature_dim", "backbone feature dimension d; default 16",
                           [](auto& c) -> auto& { return c.stream.feature_dim; }));
  keys.push_back(count_key("train_samples", "training samples per task; default 200",
                           [](auto& c) -> auto& { return c.stream.train_samples; }));
  keys.push_back(count_key("test_samples", "test samples per task; default 200",
                           [](auto& c) -> auto& { return c.stream.test_samples; }));
  keys.push_back(real_key("shift_strength", "overall domain shift magnitude; default 1.0",
                          [](auto& c) -> auto& { return c.stream.shift_strength; }));
  keys.push_back(real_key("shared_shift", "shift component common to every task; default 0.6",
                          [](auto& c) -> auto& { return c.stream.shared_shift; }));
  keys.push_back(real_key("domain_separation", "per-family offset magnitude; default 1.0",
                          [](auto& c) -> auto& { return c.stream.domain_separation; }));
  keys.push_back(count_key("domain_families",
                           "tasks t and t+F share a domain when F > 0, 0 = one per task; default 0",
                           [](auto& c) -> auto& { return c.stream.domain_families; }));
  keys.push_back(real_key("task_jitter", "per-task deviation within a family; default 0.0",
                          [](auto& c) -> auto& { return c.stream.task_jitter; }));
  keys.push_back(real_key("rotation", "input rotation angle scale; default 1.5",
                          [](auto& c) -> auto& { return c.stream.rotation; }));
  keys.push_back(real_key("anchor_gain", "class anchor pre-activation norm; default 1.2",
                          [](auto& c) -> auto& { return c.stream.anchor_gain; }));
  keys.push_back(real_key("noise", "input noise standard deviation; default 0.4",
                          [](auto& c) -> auto& { return c.stream.noise; }));
  keys.push_back(count_key("max_retries", "stream regeneration attempts; default 16",
                           [](auto& c) -> auto& { return c.stream.max_retries; }));
  keys.push_back(count_key("iterations", "optimiser steps per task; default 1000",
                           [](auto& c) -> auto& { return c.train.iterations; }));
  keys.push_back(count_key("batch_size", "samples per step; default 32",
                           [](auto& c) -> auto& { return c.train.batch_size; }));
  keys.push_back(real_key("learning_rate", "AdamW learning rate; default 0.001",
                          [](auto& c) -> auto& { return c.train.learning_rate; }));
  keys.push_back(real_key("weight_decay", "AdamW decoupled weight decay; default 0.01",
                          [](auto& c) -> auto& { return c.train.weight_decay; }));
  keys.push_back(real_key("label_smoothing", "label smoothing epsilon in [0, 1); default 0.1",
                          [](auto& c) -> auto& { return c.train.label_smoothing; }));
  keys.push_back(real_key("beta1", "AdamW first-moment decay; default 0.9",
                          [](auto& c) -> auto& { return c.train.beta1; }));
  keys.push_back(real_key("beta2", "AdamW second-moment decay; default 0.999",
                          [](auto& c) -> auto& { return c.train.beta2; }));
  keys.push_back(real_key("adam_epsilon", "AdamW denominator epsilon; default 1e-8",
                          [](auto& c) -> auto& { return c.train.adam_epsilon; }));
  keys.push_back(real_key("temperature", "logit scale applied to cosine scores; default 1/0.07",
                          [](auto& c) -> auto& { return c.train.temperature; }));
  keys.push_back(count_key("log_every", "training log interval in steps; default 100",
                           [](auto& c) -> auto& { return c.train.log_every; }));
  keys.push_back(count_key("num_experts", "experts per group N_e; default 3",
                           [](auto& c) -> auto& { return c.num_experts; }));
  keys.push_back(count_key("top_k", "experts selected per group; default 2",
                           [](auto& c) -> auto& { return c.routing.top_k; }));
  keys.push_back(count_key("rank", "low-rank expert rank r; default 4",
                           [](auto& c) -> auto& { return c.rank; }));
  keys.push_back(real_key("expert_scale", "expert output scale, 0 means 1/rank; default 0",
                          [](auto& c) -> auto& { return c.expert_scale; }));
  keys.push_back(real_key("init_std", "down-projection and gate init std; default 0.1",
                          [](auto& c) -> auto& { return c.init_std; }));
  keys.push_back(real_key("theta", "assistant relevance threshold in (0, 1]; default 0.3",
                          [](auto& c) -> auto& { return c.routing.theta; }));
  keys.push_back(real_key("alpha", "unseen-path growth factor; default 0.025",
                          [](auto& c) -> auto& { return c.routing.alpha; }));
  keys.push_back(count_key("k_groups", "groups kept for unseen samples; default 2",
                           [](auto& c) -> auto& { return c.routing.k_groups; }));
  keys.push_back(flag_key("grouping", "one expert group per task (false: shared MoE); default true",
                          [](auto& c) -> auto& { return c.routing.grouping; }));
  keys.push_back(flag_key("inter_router", "prototype-based assistant groups; default true",
                          [](auto& c) -> auto& { return c.routing.inter_router; }));
  keys.push_back(flag_key("dynamic_fusion", "adapter output for unseen samples; default true",
                          [](auto& c) -> auto& { return c.routing.dynamic_fusion; }));
  keys.push_back(flag_key("train_with_assistants", "route assistants while training; default true",
                          [](auto& c) -> auto& { return c.routing.train_with_assistants; }));
  keys.push_back(ConfigKey{
      "recognizer", "task recognition: oracle, prototype or semantic; default semantic",
      [](RunConfig& c, const std::string& v) {
        try {
          c.recognizer = parse_recognizer(v);
        } catch (const InvalidArgument& e) {
          throw ConfigError("recognizer", e.what());
        }
      },
      [](const RunConfig& c) { return to_string(c.recognizer); }});
  keys.push_back(real_key("recognizer_error_rate", "semantic recognizer error rate; default 0",
                          [](auto& c) -> auto& { return c.recognizer_error_rate; }));
  keys.push_back(real_key("unseen_margin", "prototype recognizer unseen margin in stddevs; default 2",
                          [](auto& c) -> auto& { return c.unseen_margin; }));
  keys.push_back(ConfigKey{"out_dir", "output directory; default trge_run",
                           [](RunConfig& c, const std::string& v) { c.out_dir = v; },
                           [](const RunConfig& c) { return c.out_dir; }});
  keys.push_back(count_key("seed", "master seed; default 0",
                           [](auto& c) -> auto& { return c.seed; }));
  return keys;
}

const ConfigKey* find_key(const std::string& name) {
  for (const ConfigKey& k : config_schema())
    if (k.name == name) return &k;
  return nullptr;
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = build_schema();
  return schema;
}

void apply_overrides(RunConfig& cfg, const std::map<std::string, std::string>& values) {
  for (const auto& [name, value] : values) {
    const ConfigKey* key = find_key(name);
    if (key == nullptr) throw ConfigError(name, "unknown configuration key");
    key->set(cfg, value);
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
    }
    const std::string name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(name).second) throw ConfigError(name, "key given twice");
    apply_overrides(cfg, {{name, value}});
  }
  validate(cfg);
  return cfg;
}

std::map<std::string, std::string> environment_overrides() {
  std::map<std::string, std::string> out;
  const std::string prefix = kEnvPrefix;
  for (const ConfigKey& key : config_schema()) {
    std::string env_name = prefix;
    for (char ch : key.name) env_name.push_back(static_cast<char>(std::toupper(ch)));
    if (const char* v = std::getenv(env_name.c_str())) out[key.name] = v;
  }
  return out;
}

RunConfig load_config(const std::string& path, bool apply_env) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig cfg = parse_config(buffer.str());
  if (apply_env) {
    apply_overrides(cfg, environment_overrides());
    validate(cfg);
  }
  return cfg;
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const char* key, const std::string& msg) {
    if (!ok) throw ConfigError(key, msg);
  };
  require(c.stream.tasks >= 2, "tasks", "must be at least 2");
  require(c.stream.classes_per_task >= 2, "classes_per_task", "must be at least 2");
  require(c.stream.class_overlap >= 0.0 && c.stream.class_overlap < 1.0, "class_overlap",
          "must lie in [0, 1)");
  require(c.stream.feature_dim >= 1, "feature_dim", "must be positive");
  require(c.stream.input_dim >= c.stream.feature_dim, "input_dim", "must be >= feature_dim");
  require(c.stream.train_samples >= 1, "train_samples", "must be positive");
  require(c.stream.test_samples >= 1, "test_samples", "must be positive");
  require(c.stream.shift_strength >= 0.0, "shift_strength", "must be >= 0");
  require(c.stream.noise >= 0.0, "noise", "must be >= 0");
  require(c.stream.shared_shift >= 0.0, "shared_shift", "must be >= 0");
  require(c.stream.domain_separation >= 0.0, "domain_separation", "must be >= 0");
  require(c.stream.task_jitter >= 0.0, "task_jitter", "must be >= 0");
  require(c.stream.anchor_gain > 0.0, "anchor_gain", "must be positive");
  require(c.stream.max_retries >= 1, "max_retries", "must be positive");
  require(c.train.batch_size >= 1, "batch_size", "must be positive");
  require(c.train.learning_rate > 0.0, "learning_rate", "must be positive");
  require(c.train.weight_decay >= 0.0, "weight_decay", "must be >= 0");
  require(c.train.label_smoothing >= 0.0 && c.train.label_smoothing < 1.0, "label_smoothing",
          "must lie in [0, 1)");
  require(c.train.beta1 >= 0.0 && c.train.beta1 < 1.0, "beta1", "must lie in [0, 1)");
  require(c.train.beta2 >= 0.0 && c.train.beta2 < 1.0, "beta2", "must lie in [0, 1)");
  require(c.train.adam_epsilon > 0.0, "adam_epsilon", "must be positive");
  require(c.train.temperature > 0.0, "temperature", "must be positive");
  require(c.num_experts >= 1, "num_experts", "must be positive");
  require(c.routing.top_k >= 1, "top_k", "must be positive");
  require(c.rank >= 1, "rank", "must be positive");
  require(c.expert_scale >= 0.0, "expert_scale", "must be >= 0");
  require(c.init_std > 0.0, "init_std", "must be positive");
  require(c.routing.theta > 0.0 && c.routing.theta <= 1.0, "theta",
          "value " + format_double(c.routing.theta) + " outside (0, 1]");
  require(c.routing.alpha > 0.0, "alpha", "must be positive");
  require(c.routing.k_groups >= 1, "k_groups", "must be positive");
  require(c.recognizer_error_rate >= 0.0 && c.recognizer_error_rate < 1.0,
          "recognizer_error_rate", "must lie in [0, 1)");
  require(c.unseen_margin >= 0.0, "unseen_margin", "must be >= 0");
  require(!c.out_dir.empty(), "out_dir", "must not be empty");
}

std::string to_config_text(const RunConfig& cfg) {
  std::ostringstream out;
  for (const ConfigKey& key : config_schema()) out << key.name << " = " << key.get(cfg) << '\n';
  return out.str();
}

}  // namespace trge
