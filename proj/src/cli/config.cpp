#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fdm/binio.hpp"
#include "fdm/cli.hpp"

namespace fdm {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Model and training keys come from presets; the rest have fixed defaults.
const std::map<std::string, std::string>& fixed_defaults() {
  static const std::map<std::string, std::string> d = [] {
    std::map<std::string, std::string> m;
    const PromptConfig pc;
    m["prompt.fraction"] = num(pc.prompt_fraction);
    m["prompt.goal_fraction"] = num(pc.goal_fraction);
    m["prompt.length"] = std::to_string(pc.prompt_len);
    m["prompt.eval_top_quantile"] = num(pc.eval_top_quantile);
    const SuiteParams sp;
    m["suite.grid_size"] = std::to_string(sp.grid_size);
    m["suite.grid_objects"] = std::to_string(sp.grid_objects);
    m["suite.grid_horizon"] = std::to_string(sp.grid_horizon);
    m["suite.sokoban_size"] = std::to_string(sp.sokoban_size);
    m["suite.sokoban_boxes"] = std::to_string(sp.sokoban_boxes);
    m["suite.sokoban_pulls"] = std::to_string(sp.sokoban_pulls);
    m["suite.sokoban_horizon"] = std::to_string(sp.sokoban_horizon);
    m["suite.tsp_n"] = std::to_string(sp.tsp_n);
    m["suite.tsp_k"] = std::to_string(sp.tsp_k);
    m["suite.caption_slots"] = std::to_string(sp.caption_slots);
    m["gen.task"] = "";
    m["gen.count"] = "100";
    m["gen.workers"] = "1";
    m["eval.task"] = "";
    m["eval.episodes"] = "10";
    m["eval.first_seed"] = "0";
    m["eval.random_episodes"] = "100";
    m["eval.strategy"] = "greedy";
    m["eval.temperature"] = "1";
    m["eval.prompt_seed"] = "0";
    m["inspect.task"] = "";
    m["inspect.entry"] = "0";
    m["train.log_every"] = "50";
    m["paths.data"] = "data";
    m["paths.cache"] = "cache";
    m["paths.run"] = "run";
    m["paths.results"] = "results";
    m["paths.report"] = "report";
    m["seed"] = "0";
    return m;
  }();
  return d;
}

std::map<std::string, std::string> preset_values(const std::string& name) {
  const ModelConfig mc = ModelConfig::preset(name);
  const TrainConfig tc = TrainConfig::preset(name);
  std::map<std::string, std::string> m;
  m["model.blocks"] = std::to_string(mc.blocks);
  m["model.heads"] = std::to_string(mc.heads);
  m["model.width"] = std::to_string(mc.width);
  m["model.ffn_size"] = std::to_string(mc.ffn_size);
  m["model.dropout"] = num(mc.dropout);
  m["model.norm"] = to_string(mc.norm);
  m["model.tied_embedding"] = mc.tied_embedding ? "true" : "false";
  m["model.seq_len"] = std::to_string(tc.seq_len);
  m["model.mem_len"] = std::to_string(mc.mem_len);
  m["train.batch"] = std::to_string(tc.batch);
  m["train.warmup_steps"] = std::to_string(tc.warmup_steps);
  m["train.decay_steps"] = std::to_string(tc.decay_steps);
  m["train.lr_max"] = num(tc.lr_max);
  m["train.decay_factor"] = num(tc.decay_factor);
  m["train.beta1"] = num(tc.beta1);
  m["train.beta2"] = num(tc.beta2);
  m["train.eps"] = num(tc.eps);
  m["train.weight_decay"] = num(tc.weight_decay);
  m["train.clip_norm"] = num(tc.clip_norm);
  m["train.total_steps"] = std::to_string(tc.total_steps);
  m["train.checkpoint_every"] = std::to_string(tc.checkpoint_every);
  m["train.workers"] = std::to_string(tc.workers);
  return m;
}

bool is_weight_key(const std::string& key) {
  const std::string prefix = "sample.weight.";
  if (key.rfind(prefix, 0) != 0) return false;
  const auto& names = suite_names();
  return std::find(names.begin(), names.end(), key.substr(prefix.size())) != names.end();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& [k, v] : fixed_defaults()) {
    values_[k] = v;
    origins_[k] = "default";
  }
  apply_preset("desk", "default");
}

bool RunConfig::is_known(const std::string& key) {
  static const auto preset_keys = preset_values("desk");
  return fixed_defaults().count(key) != 0 || preset_keys.count(key) != 0 || is_weight_key(key);
}

void RunConfig::set(const std::string& key, const std::string& value, const std::string& origin) {
  if (!is_known(key)) throw ConfigError(origin + ": unknown config key '" + key + "'");
  values_[key] = value;
  origins_[key] = origin;
}

void RunConfig::parse_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": missing key");
    set(key, trim(line.substr(eq + 1)), where);
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  parse_text(text, path.string());
}

void RunConfig::apply_preset(const std::string& name, const std::string& origin) {
  for (const auto& [k, v] : preset_values(name)) {
    values_[k] = v;
    origins_[k] = origin + " (preset " + name + ")";
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config key '" + key + "' is not set");
  return it->second;
}

long long RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(origins_.at(key) + ": key '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size() && std::isfinite(out)) return out;
  } catch (const std::exception&) {
  }
  throw ConfigError(origins_.at(key) + ": key '" + key + "' expects a number, got '" + v + "'");
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(origins_.at(key) + ": key '" + key + "' expects true or false, got '" + v + "'");
}

namespace {

template <class F>
auto with_key(const std::map<std::string, std::string>& origins, const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(origins.at(key) + ": key '" + key + "': " + e.what());
  }
}

int narrow(long long v, const std::string& key) {
  if (v < -(1LL << 31) || v >= (1LL << 31)) throw ConfigError("key '" + key + "' is out of range");
  return static_cast<int>(v);
}

std::size_t non_negative(long long v, const std::string& key) {
  if (v < 0) throw ConfigError("key '" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

}  // namespace

ModelConfig RunConfig::model() const {
  ModelConfig c;
  c.blocks = narrow(get_int("model.blocks"), "model.blocks");
  c.heads = narrow(get_int("model.heads"), "model.heads");
  c.width = narrow(get_int("model.width"), "model.width");
  c.ffn_size = narrow(get_int("model.ffn_size"), "model.ffn_size");
  c.dropout = get_double("model.dropout");
  c.norm = with_key(origins_, "model.norm", [&] { return parse_norm(get("model.norm")); });
  c.tied_embedding = get_bool("model.tied_embedding");
  c.seq_len = narrow(get_int("model.seq_len"), "model.seq_len");
  c.mem_len = narrow(get_int("model.mem_len"), "model.mem_len");
  c.validate();
  return c;
}

TrainConfig RunConfig::train() const {
  TrainConfig c;
  c.batch = non_negative(get_int("train.batch"), "train.batch");
  c.seq_len = non_negative(get_int("model.seq_len"), "model.seq_len");
  c.warmup_steps = get_int("train.warmup_steps");
  c.decay_steps = get_int("train.decay_steps");
  c.lr_max = get_double("train.lr_max");
  c.decay_factor = get_double("train.decay_factor");
  c.beta1 = get_double("train.beta1");
  c.beta2 = get_double("train.beta2");
  c.eps = get_double("train.eps");
  c.weight_decay = get_double("train.weight_decay");
  c.clip_norm = get_double("train.clip_norm");
  c.total_steps = get_int("train.total_steps");
  c.checkpoint_every = get_int("train.checkpoint_every");
  c.seed = static_cast<std::uint64_t>(get_int("seed"));
  c.workers = narrow(get_int("train.workers"), "train.workers");
  c.validate();
  return c;
}

SuiteParams RunConfig::suite() const {
  SuiteParams p;
  p.grid_size = narrow(get_int("suite.grid_size"), "suite.grid_size");
  p.grid_objects = narrow(get_int("suite.grid_objects"), "suite.grid_objects");
  p.grid_horizon = narrow(get_int("suite.grid_horizon"), "suite.grid_horizon");
  p.sokoban_size = narrow(get_int("suite.sokoban_size"), "suite.sokoban_size");
  p.sokoban_boxes = narrow(get_int("suite.sokoban_boxes"), "suite.sokoban_boxes");
  p.sokoban_pulls = narrow(get_int("suite.sokoban_pulls"), "suite.sokoban_pulls");
  p.sokoban_horizon = narrow(get_int("suite.sokoban_horizon"), "suite.sokoban_horizon");
  p.tsp_n = narrow(get_int("suite.tsp_n"), "suite.tsp_n");
  p.tsp_k = narrow(get_int("suite.tsp_k"), "suite.tsp_k");
  p.caption_slots = narrow(get_int("suite.caption_slots"), "suite.caption_slots");
  p.validate();
  return p;
}

PromptConfig RunConfig::prompt() const {
  PromptConfig c;
  c.prompt_fraction = get_double("prompt.fraction");
  c.goal_fraction = get_double("prompt.goal_fraction");
  c.prompt_len = narrow(get_int("prompt.length"), "prompt.length");
  c.eval_top_quantile = get_double("prompt.eval_top_quantile");
  c.validate(non_negative(get_int("model.seq_len"), "model.seq_len"));
  return c;
}

SampleWeights RunConfig::weights(const std::vector<std::string>& tasks) const {
  SampleWeights w;
  for (const auto& t : tasks) {
    const std::string key = "sample.weight." + t;
    w[t] = has(key) ? get_double(key) : 1.0;
  }
  return w;
}

std::string RunConfig::dump() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
  return out.str();
}

}  // namespace fdm
