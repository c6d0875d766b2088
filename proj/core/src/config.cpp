#include "wavedef/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "wavedef/random.hpp"

namespace wavedef {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int64_t v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("config key '" + key + "' expects true/false, got '" + value + "'");
}

std::vector<std::string> parse_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Key table: one row per config field keeps parse and dump in lockstep.
struct KeyHandler {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<std::pair<std::string, KeyHandler>>& key_table() {
  static const std::vector<std::pair<std::string, KeyHandler>> table = {
      {"dataset",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.dataset = v; },
        [](const RunConfig& c) { return c.dataset; }}},
      {"data_dir",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = v; },
        [](const RunConfig& c) { return c.data_dir; }}},
      {"out_dir",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
        [](const RunConfig& c) { return c.out_dir; }}},
      {"seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.seed = static_cast<uint64_t>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"subset_train",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.subset_train = parse_int(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.subset_train); }}},
      {"subset_test",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.subset_test = parse_int(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.subset_test); }}},
      {"embed_dim",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.embed_dim = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.embed_dim); }}},
      {"heads",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.heads = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.heads); }}},
      {"scales",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.scales = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.scales); }}},
      {"blocks_per_stage",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.blocks_per_stage = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.blocks_per_stage); }}},
      {"gdfn_expansion",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.gdfn_expansion = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.gdfn_expansion); }}},
      {"classifier_epochs",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.classifier_epochs = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.classifier_epochs); }}},
      {"denoiser_epochs",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.denoiser_epochs = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.denoiser_epochs); }}},
      {"retrain_epochs",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.retrain_epochs = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.retrain_epochs); }}},
      {"batch_size",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.batch_size = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.batch_size); }}},
      {"lr_start",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.lr_start = parse_double(k, v);
        },
        [](const RunConfig& c) { return format_double(c.lr_start); }}},
      {"lr_end",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.lr_end = parse_double(k, v);
        },
        [](const RunConfig& c) { return format_double(c.lr_end); }}},
      {"charbonnier_eps",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.charbonnier_eps = parse_double(k, v);
        },
        [](const RunConfig& c) { return format_double(c.charbonnier_eps); }}},
      {"train_epsilon",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train_epsilon = parse_double(k, v);
        },
        [](const RunConfig& c) { return format_double(c.train_epsilon); }}},
      {"test_epsilon",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.test_epsilon = parse_double(k, v);
        },
        [](const RunConfig& c) { return format_double(c.test_epsilon); }}},
      {"attack_steps",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.attack_steps = static_cast<int>(parse_int(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.attack_steps); }}},
      {"attack_step_size",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.attack_step_size = parse_double(k, v);
        },
        [](const RunConfig& c) { return format_double(c.attack_step_size); }}},
      {"attack_decay",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.attack_decay = parse_double(k, v);
        },
        [](const RunConfig& c) { return format_double(c.attack_decay); }}},
      {"attack_random_start",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.attack_random_start = parse_bool(k, v);
        },
        [](const RunConfig& c) { return c.attack_random_start ? "true" : "false"; }}},
      {"attack_families",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.attack_families = parse_list(v);
        },
        [](const RunConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.attack_families.size(); ++i) {
            if (i) out += ",";
            out += c.attack_families[i];
          }
          return out;
        }}},
  };
  return table;
}

}  // namespace

RunConfig RunConfig::parse(std::istream& in) {
  RunConfig config;
  std::map<std::string, const KeyHandler*> handlers;
  for (const auto& [key, handler] : key_table()) handlers[key] = &handler;

  std::map<std::string, bool> set_keys;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    auto it = handlers.find(key);
    if (it == handlers.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    if (set_keys[key]) {
      throw ConfigError("duplicate config key '" + key + "'");
    }
    set_keys[key] = true;
    it->second->set(config, key, value);
  }
  config.validate();
  return config;
}

RunConfig RunConfig::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse(in);
}

std::string RunConfig::dump() const {
  std::ostringstream os;
  for (const auto& [key, handler] : key_table()) {
    os << key << " = " << handler.get(*this) << "\n";
  }
  return os.str();
}

double RunConfig::resolved_train_epsilon() const {
  if (train_epsilon >= 0.0) return train_epsilon;
  if (dataset == "mnist" || dataset == "fmnist" || dataset == "synthetic") return 0.3;
  if (dataset == "cifar10") return 0.15;
  return 0.3;
}

double RunConfig::resolved_test_epsilon() const {
  if (test_epsilon >= 0.0) return test_epsilon;
  if (dataset == "mnist") return 0.2;
  if (dataset == "fmnist") return 0.1;
  if (dataset == "cifar10") return 0.05;
  return 0.3;  // synthetic: same budget for train and test
}

DenoiserConfig RunConfig::denoiser_config(int image_channels) const {
  DenoiserConfig d;
  d.embed_dim = embed_dim;
  d.heads = heads;
  d.scales = scales;
  d.blocks_per_stage = blocks_per_stage;
  d.gdfn_expansion = gdfn_expansion;
  d.image_channels = image_channels;
  d.validate();
  return d;
}

AttackSpec RunConfig::attack_spec(AttackFamily family, double epsilon) const {
  AttackSpec spec;
  spec.family = family;
  spec.epsilon = epsilon;
  spec.steps = attack_steps;
  spec.step_size = attack_step_size;
  spec.decay = attack_decay;
  spec.random_start = attack_random_start;
  spec.seed = seed_stream(seed, "attack", static_cast<uint64_t>(family));
  return spec.normalized();
}

std::vector<AttackSpec> RunConfig::eval_attacks() const {
  std::vector<AttackSpec> out;
  for (const auto& name : attack_families) {
    out.push_back(attack_spec(attack_family_from_name(name), resolved_test_epsilon()));
  }
  return out;
}

void RunConfig::validate() const {
  if (dataset != "synthetic" && dataset != "mnist" && dataset != "fmnist" &&
      dataset != "cifar10") {
    throw ConfigError("dataset must be synthetic|mnist|fmnist|cifar10, got '" + dataset + "'");
  }
  if (lr_start < lr_end || lr_end <= 0.0) {
    throw ConfigError("learning rates must satisfy lr_start >= lr_end > 0");
  }
  if (charbonnier_eps <= 0.0) throw ConfigError("charbonnier_eps must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (classifier_epochs < 1 || denoiser_epochs < 1 || retrain_epochs < 1) {
    throw ConfigError("epoch counts must be >= 1");
  }
  if (attack_families.empty()) throw ConfigError("attack_families must be non-empty");
  for (const auto& name : attack_families) attack_family_from_name(name);
}

}  // namespace wavedef
