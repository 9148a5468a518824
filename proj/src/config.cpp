#include "hdice/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace hdice::harness {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Ppo:
      return "ppo";
    case Method::PpoHca:
      return "ppo-hca";
    case Method::PpoHcaClip:
      return "ppo-hca-clip";
    case Method::HDice:
      return "hdice";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  if (text == "ppo") return Method::Ppo;
  if (text == "ppo-hca") return Method::PpoHca;
  if (text == "ppo-hca-clip") return Method::PpoHcaClip;
  if (text == "hdice") return Method::HDice;
  throw ParseError("unknown method '" + std::string(text) + "' (ppo, ppo-hca, ppo-hca-clip, hdice)");
}

Estimator estimator_for(Method m) {
  switch (m) {
    case Method::Ppo:
      return Estimator::Gae;
    case Method::PpoHca:
      return Estimator::Hca;
    case Method::PpoHcaClip:
      return Estimator::HcaClip;
    case Method::HDice:
      return Estimator::HDice;
  }
  return Estimator::Gae;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(x))
    throw ParseError("key '" + key + "': expected a number, got '" + v + "'");
  return x;
}

long parse_long(const std::string& key, const std::string& v) {
  long x = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ParseError("key '" + key + "': expected an integer, got '" + v + "'");
  return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ParseError("key '" + key + "': expected an unsigned integer, got '" + v + "'");
  return x;
}

int parse_int(const std::string& key, const std::string& v) {
  const long x = parse_long(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    throw ParseError("key '" + key + "': integer out of range");
  return static_cast<int>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ParseError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::optional<double> parse_optional_double(const std::string& key, const std::string& v, std::string_view none) {
  if (v == none) return std::nullopt;
  return parse_double(key, v);
}

std::string show(bool b) { return b ? "true" : "false"; }
std::string show(const std::optional<double>& x, std::string_view none) {
  return x ? format_double(*x) : std::string(none);
}

std::vector<Eigen::Index> parse_widths(const std::string& key, const std::string& v) {
  std::vector<Eigen::Index> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const long w = parse_long(key, trim(item));
    if (w < 1) throw ParseError("key '" + key + "': layer widths must be positive");
    out.push_back(w);
  }
  if (out.empty()) throw ParseError("key '" + key + "': at least one hidden width is required");
  return out;
}

std::string show_widths(const std::vector<Eigen::Index>& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
  return out;
}

PsiSampler::Kind parse_psi(const std::string& v) {
  if (v == "uniform") return PsiSampler::Kind::Uniform;
  if (v == "conditional") return PsiSampler::Kind::Conditional;
  throw ParseError("key 'psi': expected uniform or conditional, got '" + v + "'");
}

enum Scope : unsigned { kAll = 15, kPpo = 1, kHca = 2, kHcaClip = 4, kHDice = 8, kHindsight = 14, kDirect = 6 };

unsigned bit(Method m) {
  switch (m) {
    case Method::Ppo:
      return kPpo;
    case Method::PpoHca:
      return kHca;
    case Method::PpoHcaClip:
      return kHcaClip;
    case Method::HDice:
      return kHDice;
  }
  return 0;
}

struct Key {
  const char* name;
  unsigned scope;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
  // Shown in the echo only when this returns true (defaults to always).
  std::function<bool(const RunConfig&)> active = {};
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"env", kAll, [](const RunConfig& c) { return c.env; }, [](RunConfig& c, const std::string& v) { c.env = v; }},
      {"method", kAll, [](const RunConfig& c) { return std::string(to_string(c.method)); },
       [](RunConfig& c, const std::string& v) { c.method = parse_method(v); }},
      {"seed", kAll, [](const RunConfig& c) { return std::to_string(c.seed); },
       [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); }},
      {"iterations", kAll, [](const RunConfig& c) { return std::to_string(c.iterations); },
       [](RunConfig& c, const std::string& v) { c.iterations = parse_long("iterations", v); }},
      {"eval_every", kAll, [](const RunConfig& c) { return std::to_string(c.eval_every); },
       [](RunConfig& c, const std::string& v) { c.eval_every = parse_long("eval_every", v); }},
      {"eval_episodes", kAll, [](const RunConfig& c) { return std::to_string(c.eval_episodes); },
       [](RunConfig& c, const std::string& v) { c.eval_episodes = parse_int("eval_episodes", v); }},
      {"update_every_episodes", kAll, [](const RunConfig& c) { return std::to_string(c.budget.amount); },
       [](RunConfig& c, const std::string& v) { c.budget = Budget::episodes(parse_long("update_every_episodes", v)); },
       [](const RunConfig& c) { return c.budget.kind == Budget::Kind::Episodes; }},
      {"update_every_steps", kAll, [](const RunConfig& c) { return std::to_string(c.budget.amount); },
       [](RunConfig& c, const std::string& v) { c.budget = Budget::steps(parse_long("update_every_steps", v)); },
       [](const RunConfig& c) { return c.budget.kind == Budget::Kind::Steps; }},
      {"policy_hidden", kAll, [](const RunConfig& c) { return show_widths(c.policy_hidden); },
       [](RunConfig& c, const std::string& v) { c.policy_hidden = parse_widths("policy_hidden", v); }},
      {"ppo_lr", kAll, [](const RunConfig& c) { return format_double(c.ppo.lr); },
       [](RunConfig& c, const std::string& v) { c.ppo.lr = parse_double("ppo_lr", v); }},
      {"clip_eps", kAll, [](const RunConfig& c) { return format_double(c.ppo.clip_eps); },
       [](RunConfig& c, const std::string& v) { c.ppo.clip_eps = parse_double("clip_eps", v); }},
      {"ppo_epochs", kAll, [](const RunConfig& c) { return std::to_string(c.ppo.epochs); },
       [](RunConfig& c, const std::string& v) { c.ppo.epochs = parse_int("ppo_epochs", v); }},
      {"entropy_coef", kAll, [](const RunConfig& c) { return format_double(c.ppo.entropy_coef); },
       [](RunConfig& c, const std::string& v) { c.ppo.entropy_coef = parse_double("entropy_coef", v); }},
      {"gamma", kAll, [](const RunConfig& c) { return format_double(c.ppo.gamma); },
       [](RunConfig& c, const std::string& v) { c.ppo.gamma = parse_double("gamma", v); }},
      {"minibatch_size", kAll, [](const RunConfig& c) { return std::to_string(c.ppo.minibatch_size); },
       [](RunConfig& c, const std::string& v) { c.ppo.minibatch_size = parse_int("minibatch_size", v); }},
      {"ppo_max_grad_norm", kAll, [](const RunConfig& c) { return show(c.ppo.max_grad_norm, "none"); },
       [](RunConfig& c, const std::string& v) {
         c.ppo.max_grad_norm = parse_optional_double("ppo_max_grad_norm", v, "none");
       }},
      {"normalize_advantages", kAll, [](const RunConfig& c) { return show(c.ppo.normalize_advantages); },
       [](RunConfig& c, const std::string& v) { c.ppo.normalize_advantages = parse_bool("normalize_advantages", v); }},
      {"log_wall_time", kAll, [](const RunConfig& c) { return show(c.log_wall_time); },
       [](RunConfig& c, const std::string& v) { c.log_wall_time = parse_bool("log_wall_time", v); }},
      {"out_dir", kAll, [](const RunConfig& c) { return c.out_dir; },
       [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      {"run_name", kAll, [](const RunConfig& c) { return c.run_name.empty() ? std::string("auto") : c.run_name; },
       [](RunConfig& c, const std::string& v) { c.run_name = v == "auto" ? std::string() : v; }},

      {"value_loss_coef", kPpo, [](const RunConfig& c) { return format_double(c.ppo.value_loss_coef); },
       [](RunConfig& c, const std::string& v) { c.ppo.value_loss_coef = parse_double("value_loss_coef", v); }},
      {"gae_lambda", kPpo, [](const RunConfig& c) { return format_double(c.ppo.gae_lambda); },
       [](RunConfig& c, const std::string& v) { c.ppo.gae_lambda = parse_double("gae_lambda", v); }},

      // One learning rate and batch size serve all auxiliary models.
      {"aux_lr", kHindsight, [](const RunConfig& c) { return format_double(c.hindsight.lr); },
       [](RunConfig& c, const std::string& v) {
         c.hindsight.lr = c.return_model.lr = c.dice.lr = parse_double("aux_lr", v);
       }},
      {"aux_batch_size", kHindsight, [](const RunConfig& c) { return std::to_string(c.hindsight.batch_size); },
       [](RunConfig& c, const std::string& v) {
         c.hindsight.batch_size = c.return_model.batch_size = c.dice.batch_size = parse_int("aux_batch_size", v);
       }},
      {"hindsight_epochs", kHindsight, [](const RunConfig& c) { return std::to_string(c.hindsight.epochs); },
       [](RunConfig& c, const std::string& v) { c.hindsight.epochs = parse_int("hindsight_epochs", v); }},
      {"hindsight_max_grad_norm", kHindsight,
       [](const RunConfig& c) { return show(c.hindsight.max_grad_norm, "none"); },
       [](RunConfig& c, const std::string& v) {
         c.hindsight.max_grad_norm = parse_optional_double("hindsight_max_grad_norm", v, "none");
       }},
      {"aux_schedule", kHindsight, [](const RunConfig& c) { return std::to_string(c.aux_schedule); },
       [](RunConfig& c, const std::string& v) { c.aux_schedule = parse_int("aux_schedule", v); }},
      {"condition_on", kHindsight, [](const RunConfig& c) { return std::string(to_string(c.condition_on)); },
       [](RunConfig& c, const std::string& v) { c.condition_on = parse_condition_on(v); }},
      {"ratio_cap", kDirect, [](const RunConfig& c) { return format_double(c.ratio_cap); },
       [](RunConfig& c, const std::string& v) { c.ratio_cap = parse_double("ratio_cap", v); }},

      {"return_epochs", kHDice, [](const RunConfig& c) { return std::to_string(c.return_model.epochs); },
       [](RunConfig& c, const std::string& v) { c.return_model.epochs = parse_int("return_epochs", v); }},
      {"return_max_grad_norm", kHDice, [](const RunConfig& c) { return show(c.return_model.max_grad_norm, "none"); },
       [](RunConfig& c, const std::string& v) {
         c.return_model.max_grad_norm = parse_optional_double("return_max_grad_norm", v, "none");
       }},
      {"normalize_return_targets", kHDice, [](const RunConfig& c) { return show(c.normalize_return_targets); },
       [](RunConfig& c, const std::string& v) {
         c.normalize_return_targets = parse_bool("normalize_return_targets", v);
       }},
      {"dice_epochs", kHDice, [](const RunConfig& c) { return std::to_string(c.dice.epochs); },
       [](RunConfig& c, const std::string& v) { c.dice.epochs = parse_int("dice_epochs", v); }},
      {"dice_max_grad_norm", kHDice, [](const RunConfig& c) { return show(c.dice.max_grad_norm, "none"); },
       [](RunConfig& c, const std::string& v) {
         c.dice.max_grad_norm = parse_optional_double("dice_max_grad_norm", v, "none");
       }},
      {"dice_c", kHDice, [](const RunConfig& c) { return format_double(c.dice_c); },
       [](RunConfig& c, const std::string& v) { c.dice_c = parse_double("dice_c", v); }},
      {"psi", kHDice, [](const RunConfig& c) { return std::string(to_string(c.psi)); },
       [](RunConfig& c, const std::string& v) { c.psi = parse_psi(v); }},
      {"psi_lo", kHDice, [](const RunConfig& c) { return show(c.psi_lo, "auto"); },
       [](RunConfig& c, const std::string& v) { c.psi_lo = parse_optional_double("psi_lo", v, "auto"); }},
      {"psi_hi", kHDice, [](const RunConfig& c) { return show(c.psi_hi, "auto"); },
       [](RunConfig& c, const std::string& v) { c.psi_hi = parse_optional_double("psi_hi", v, "auto"); }},
  };
  return table;
}

const Key* find_key(const std::string& name) {
  for (const auto& k : keys())
    if (name == k.name) return &k;
  return nullptr;
}

bool is_gridworld(const std::string& env) { return env.rfind("gridworld", 0) == 0; }

}  // namespace

std::string RunConfig::name() const {
  if (!run_name.empty()) return run_name;
  return std::string(to_string(method)) + "_seed" + std::to_string(seed);
}

void RunConfig::validate() const {
  if (iterations < 1) throw ContractError("iterations must be at least 1");
  if (eval_every < 1) throw ContractError("eval_every must be at least 1");
  if (eval_episodes < 1) throw ContractError("eval_episodes must be at least 1");
  if (budget.amount < 1) throw ContractError("the collection budget must be positive");
  if (policy_hidden.empty()) throw ContractError("policy_hidden needs at least one layer");
  ppo.validate();
  if (uses_hindsight(method)) {
    hindsight.validate();
    if (aux_schedule < 1) throw ContractError("aux_schedule must be at least 1");
    if (!(ratio_cap > 0.0)) throw ContractError("ratio_cap must be positive");
  }
  if (method == Method::HDice) {
    return_model.validate();
    dice.validate();
    if (!(dice_c > 0.0)) throw ContractError("dice_c must be positive");
    if (psi_lo.has_value() != psi_hi.has_value()) throw ContractError("psi_lo and psi_hi must be set together");
    if (psi_lo && !(*psi_lo < *psi_hi)) throw ContractError("psi_lo must be below psi_hi");
  }
  if (run_name.find('/') != std::string::npos) throw ContractError("run_name must not contain '/'");
}

RunConfig default_config(const std::string& env, Method method) {
  RunConfig c;
  c.env = env;
  c.method = method;
  c.ppo.normalize_advantages = method == Method::Ppo;
  if (is_gridworld(env) || env.rfind("chain", 0) == 0) {
    c.budget = Budget::episodes(50);
    c.ppo.lr = 3e-4;
    c.ppo.entropy_coef = 0.1;
    c.ppo.value_loss_coef = 1e-4;
    c.ppo.epochs = 30;
    c.ppo.max_grad_norm.reset();
  } else {
    // Continuous control.
    c.budget = Budget::steps(6144);
    c.ppo.entropy_coef = 0.01;
    c.ppo.value_loss_coef = 0.5;
    c.ppo.epochs = 80;
    c.ppo.max_grad_norm = 0.5;
    c.ppo.lr = method == Method::PpoHca ? 3e-5 : 3e-4;
  }
  c.ppo.clip_eps = 0.2;
  c.ppo.gae_lambda = 0.95;
  c.ppo.gamma = 0.99;
  for (AuxTrainConfig* a : {&c.hindsight, &c.return_model, &c.dice}) *a = AuxTrainConfig{10, 3e-4, 256, 10.0};
  return c;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ParseError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string env = RunConfig{}.env;
  Method method = RunConfig{}.method;
  for (const auto& [k, v] : entries) {
    if (k == "env") env = v;
    if (k == "method") method = parse_method(v);
  }
  RunConfig c = default_config(env, method);
  for (const auto& [k, v] : entries) {
    const Key* key = find_key(k);
    if (!key) throw ParseError("unknown configuration key '" + k + "'");
    if (!(key->scope & bit(method)))
      throw ParseError("key '" + k + "' does not apply to method " + std::string(to_string(method)));
    key->set(c, v);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto entries = parse_key_values(ss.str());
  entries.insert(entries.end(), overrides.begin(), overrides.end());
  return resolve_config(entries);
}

std::string echo_config(const RunConfig& config) {
  std::string out;
  for (const auto& k : keys()) {
    if (!(k.scope & bit(config.method))) continue;
    if (k.active && !k.active(config)) continue;
    out += std::string(k.name) + " = " + k.get(config) + "\n";
  }
  return out;
}

std::vector<std::string> config_keys(Method method) {
  std::vector<std::string> out;
  for (const auto& k : keys())
    if (k.scope & bit(method)) out.emplace_back(k.name);
  return out;
}

}  // namespace hdice::harness
