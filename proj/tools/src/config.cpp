#include "config.hpp"

#include <fstream>
#include <sstream>

namespace klda::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::map<std::string, std::string>& Config::defaults() {
  static const std::map<std::string, std::string> table = {
      // objective
      {"method", "kl"},  // erm | erm_prob | kl | coral | mmd
      {"beta", "0.3"},
      {"beta_aux", "0.0"},
      {"penalty_coef", "0.01"},
      {"loss_bound_m", "3.0"},
      {"prob_floor", "0.05"},
      {"batch_size", "256"},
      {"eval_samples", "64"},
      {"lr", "0.001"},
      {"epochs", "100"},
      {"d_z", "16"},
      {"hidden", "128,128"},
      {"deterministic_encoder", "auto"},  // auto resolves from method
      {"mmd_bandwidths", ""},             // empty: median ladder per batch
      // data
      {"dataset", "blobs"},  // blobs | digits | mnist
      {"source_angle", "0"},
      {"target_angle", "45"},
      {"blobs.n_per_class", "400"},
      {"blobs.classes", "3"},
      {"blobs.radius", "2.0"},
      {"blobs.spread", "0.45"},
      {"digits.per_domain", "2500"},
      {"mnist.dir", ""},  // empty: KLDA_DATA_DIR
      {"mnist.per_domain", "2500"},
      {"mnist.full", "false"},
      // verification sweep
      {"verify.seed", "20240917"},
      {"verify.max_size", "6"},
      {"verify.pinsker_pairs", "10000"},
      {"verify.tv_pairs", "10000"},
      {"verify.chain_cases", "1000"},
      {"verify.prop1_cases", "1000"},
      {"verify.prop2_cases", "120"},
      // fetch
      {"fetch.base_url", "https://ossci-datasets.s3.amazonaws.com/mnist/"},
      {"fetch.from", ""},  // local directory instead of the network
      {"fetch.sha256.train-images-idx3-ubyte.gz",
       "440fcabf73cc546fa21475e81ea370265605f56be210a4024d2ca8f203523609"},
      {"fetch.sha256.train-labels-idx1-ubyte.gz",
       "3552534a0a558bbed6aed32b30c495cca23d567ec52cac8be1a0730e8010255c"},
      {"fetch.sha256.t10k-images-idx3-ubyte.gz",
       "8d422c7b0a1c1c79245a5bcf07fe86e33eeafee792b84584aec276f5a2dbc4e6"},
      {"fetch.sha256.t10k-labels-idx1-ubyte.gz",
       "f7ae60f92e00ec6debd23a6088c31dbd2371eca3ffa0defaefb259924204aec6"},
  };
  return table;
}

Config Config::resolve(const std::string& config_path,
                       const std::vector<std::string>& overrides) {
  Config cfg;
  cfg.kv_ = defaults();

  auto assign = [&cfg](const std::string& key, const std::string& value,
                       const std::string& where) {
    if (cfg.kv_.find(key) == cfg.kv_.end())
      throw ContractViolation("unknown config field '" + key + "' (" + where + ")");
    cfg.kv_[key] = value;
  };

  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ContractViolation("config file not found: " + config_path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ContractViolation("config line " + std::to_string(lineno) +
                                " is not key = value: " + config_path);
      assign(trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
             config_path + ":" + std::to_string(lineno));
    }
  }

  for (const auto& pair : overrides) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos)
      throw ContractViolation("--set expects key=value, got: " + pair);
    assign(trim(pair.substr(0, eq)), trim(pair.substr(eq + 1)), "--set");
  }
  return cfg;
}

const std::string& Config::raw(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end())
    throw ContractViolation("unknown config field '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key) const {
  try {
    std::size_t used = 0;
    double v = std::stod(raw(key), &used);
    if (used != raw(key).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ContractViolation("config field '" + key + "' is not a number: " +
                            raw(key));
  }
}

int Config::get_int(const std::string& key) const {
  try {
    std::size_t used = 0;
    int v = std::stoi(raw(key), &used);
    if (used != raw(key).size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ContractViolation("config field '" + key + "' is not an integer: " +
                            raw(key));
  }
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = raw(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ContractViolation("config field '" + key + "' is not a boolean: " + v);
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  std::vector<int> out;
  std::stringstream ss(raw(key));
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) continue;
    try {
      out.push_back(std::stoi(cell));
    } catch (const std::exception&) {
      throw ContractViolation("config field '" + key +
                              "' has a non-integer element: " + cell);
    }
  }
  return out;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(raw(key));
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (cell.empty()) continue;
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ContractViolation("config field '" + key +
                              "' has a non-numeric element: " + cell);
    }
  }
  return out;
}

std::uint64_t Config::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : kv_) {  // std::map iterates in sorted key order
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  return h;
}

}  // namespace klda::cli
