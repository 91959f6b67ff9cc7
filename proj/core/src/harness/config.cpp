#include "admrl/harness/config.hpp"

#include "admrl/common/error.hpp"
#include "admrl/common/format.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace admrl::harness {

std::string_view to_string(GanSource source) { return source == GanSource::AdMrl ? "admrl" : "attacker"; }

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
  return std::string(s);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected, int line) {
  throw ConfigError("bad value '" + std::string(value) + "' for '" + std::string(key) + "' (expected " +
                        std::string(expected) + ")",
                    line);
}

double parse_double(std::string_view key, std::string_view text, int line) {
  const auto s = trim(text);
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) bad_value(key, text, "a number", line);
  return v;
}

long long parse_int(std::string_view key, std::string_view text, int line) {
  const auto s = trim(text);
  long long v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) bad_value(key, text, "an integer", line);
  return v;
}

std::uint64_t parse_u64(std::string_view key, std::string_view text, int line) {
  const auto s = trim(text);
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) bad_value(key, text, "an unsigned integer", line);
  return v;
}

bool parse_bool(std::string_view key, std::string_view text, int line) {
  const auto s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, text, "a boolean", line);
}

std::vector<std::string> parse_list(std::string_view text) {
  auto s = trim(text);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ConfigError("unterminated list");
    s = s.substr(1, s.size() - 2);
  }
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(unquote(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F&& fmt) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt(v[i]);
  }
  return s + "]";
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Key {
  std::string name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view, int)> set;
};

template <class Get>
Key real_key(std::string name, Get field) {
  return {name, [field](const ExperimentConfig& c) { return format_double(field(c)); },
          [field, name](ExperimentConfig& c, std::string_view v, int line) { field(c) = parse_double(name, v, line); }};
}

template <class Get>
Key int_key(std::string name, Get field) {
  return {name, [field](const ExperimentConfig& c) { return std::to_string(field(c)); },
          [field, name](ExperimentConfig& c, std::string_view v, int line) {
            field(c) = static_cast<std::remove_cvref_t<decltype(field(c))>>(parse_int(name, v, line));
          }};
}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    // env
    k.push_back({"env.family", [](const ExperimentConfig& c) { return std::string(envs::to_string(c.family.kind)); },
                 [](ExperimentConfig& c, std::string_view v, int line) {
                   envs::FamilyKind kind;
                   try {
                     kind = envs::family_from_string(unquote(v));
                   } catch (const std::exception&) {
                     bad_value("env.family", v, "nav2d, point_dir or point_vel", line);
                   }
                   // Switching family restores that family's documented defaults.
                   c.family = envs::TaskFamily::defaults(kind);
                   c.meta.inner_lr = metapg::MetaConfig::defaults(kind).inner_lr;
                 }});
    k.push_back(int_key("env.horizon", [](auto& c) -> auto& { return c.family.horizon; }));
    k.push_back(real_key("env.action_bound", [](auto& c) -> auto& { return c.family.action_bound; }));
    k.push_back(real_key("env.dt", [](auto& c) -> auto& { return c.family.dt; }));
    k.push_back(real_key("env.ctrl_cost", [](auto& c) -> auto& { return c.family.ctrl_cost; }));
    k.push_back(real_key("env.goal_tolerance", [](auto& c) -> auto& { return c.family.goal_tolerance; }));
    k.push_back(real_key("env.param_low", [](auto& c) -> auto& { return c.family.param_low; }));
    k.push_back(real_key("env.param_high", [](auto& c) -> auto& { return c.family.param_high; }));
    // policy
    k.push_back({"policy.hidden",
                 [](const ExperimentConfig& c) { return join(c.policy_hidden, [](std::size_t h) { return std::to_string(h); }); },
                 [](ExperimentConfig& c, std::string_view v, int line) {
                   std::vector<std::size_t> h;
                   for (const auto& s : parse_list(v)) {
                     const auto n = parse_int("policy.hidden", s, line);
                     if (n <= 0) bad_value("policy.hidden", v, "positive layer widths", line);
                     h.push_back(static_cast<std::size_t>(n));
                   }
                   c.policy_hidden = std::move(h);
                 }});
    k.push_back(real_key("policy.init_log_std", [](auto& c) -> auto& { return c.init_log_std; }));
    // metapg
    k.push_back(real_key("metapg.inner_lr", [](auto& c) -> auto& { return c.meta.inner_lr; }));
    k.push_back(int_key("metapg.inner_steps", [](auto& c) -> auto& { return c.meta.inner_steps; }));
    k.push_back(int_key("metapg.meta_batch_size", [](auto& c) -> auto& { return c.meta.meta_batch_size; }));
    k.push_back(int_key("metapg.k", [](auto& c) -> auto& { return c.meta.K; }));
    k.push_back(real_key("metapg.gamma", [](auto& c) -> auto& { return c.meta.gamma; }));
    k.push_back(real_key("metapg.max_kl", [](auto& c) -> auto& { return c.meta.trpo.max_kl; }));
    k.push_back(int_key("metapg.cg_iters", [](auto& c) -> auto& { return c.meta.trpo.cg_iters; }));
    k.push_back(real_key("metapg.cg_damping", [](auto& c) -> auto& { return c.meta.trpo.cg_damping; }));
    k.push_back(real_key("metapg.backtrack_ratio", [](auto& c) -> auto& { return c.meta.trpo.backtrack_ratio; }));
    k.push_back(int_key("metapg.max_backtracks", [](auto& c) -> auto& { return c.meta.trpo.max_backtracks; }));
    // attack
    k.push_back({"attack.kinds",
                 [](const ExperimentConfig& c) {
                   return join(c.attack_kinds, [](attacks::AttackKind a) { return std::string(attacks::to_string(a)); });
                 },
                 [](ExperimentConfig& c, std::string_view v, int line) {
                   std::vector<attacks::AttackKind> kinds;
                   for (const auto& s : parse_list(v)) {
                     try {
                       kinds.push_back(attacks::attack_from_string(s));
                     } catch (const std::exception&) {
                       bad_value("attack.kinds", s, "identity, random, fgsm or adgan", line);
                     }
                   }
                   c.attack_kinds = std::move(kinds);
                 }});
    k.push_back({"attack.scales", [](const ExperimentConfig& c) { return join(c.scales, format_double); },
                 [](ExperimentConfig& c, std::string_view v, int line) {
                   std::vector<double> s;
                   for (const auto& x : parse_list(v)) s.push_back(parse_double("attack.scales", x, line));
                   c.scales = std::move(s);
                 }});
    k.push_back(real_key("attack.mu", [](auto& c) -> auto& { return c.noise_mu; }));
    k.push_back(real_key("attack.sigma", [](auto& c) -> auto& { return c.noise_sigma; }));
    k.push_back(real_key("attack.c", [](auto& c) -> auto& { return c.gan.c; }));
    k.push_back(real_key("attack.alpha", [](auto& c) -> auto& { return c.gan.gan_weight_alpha; }));
    k.push_back(real_key("attack.beta", [](auto& c) -> auto& { return c.gan.hinge_weight_beta; }));
    k.push_back(real_key("attack.generator_init_gain", [](auto& c) -> auto& { return c.gan.generator_output_gain; }));
    k.push_back(real_key("attack.gan_lr", [](auto& c) -> auto& { return c.gan_lr; }));
    k.push_back(real_key("attack.attacker_lr", [](auto& c) -> auto& { return c.attacker_lr; }));
    k.push_back(real_key("attack.train_scale", [](auto& c) -> auto& { return c.train_scale; }));
    k.push_back(int_key("attack.attacker_iterations", [](auto& c) -> auto& { return c.attacker_iterations; }));
    k.push_back({"attack.gan_source", [](const ExperimentConfig& c) { return std::string(to_string(c.gan_source)); },
                 [](ExperimentConfig& c, std::string_view v, int line) {
                   const auto s = unquote(v);
                   if (s == "attacker") c.gan_source = GanSource::Attacker;
                   else if (s == "admrl") c.gan_source = GanSource::AdMrl;
                   else bad_value("attack.gan_source", v, "attacker or admrl", line);
                 }});
    for (const char* which : {"generator", "discriminator"}) {
      const std::string name = std::string("attack.") + which + "_hidden";
      const bool gen = std::string_view(which) == "generator";
      k.push_back({name,
                   [gen](const ExperimentConfig& c) {
                     return join(gen ? c.gan.generator_hidden : c.gan.discriminator_hidden,
                                 [](std::size_t h) { return std::to_string(h); });
                   },
                   [gen, name](ExperimentConfig& c, std::string_view v, int line) {
                     std::vector<std::size_t> h;
                     for (const auto& s : parse_list(v)) {
                       const auto n = parse_int(name, s, line);
                       if (n <= 0) bad_value(name, v, "positive layer widths", line);
                       h.push_back(static_cast<std::size_t>(n));
                     }
                     (gen ? c.gan.generator_hidden : c.gan.discriminator_hidden) = std::move(h);
                   }});
    }
    // trainers
    k.push_back({"trainers.regimes",
                 [](const ExperimentConfig& c) {
                   return join(c.regimes, [](trainers::Regime r) { return std::string(trainers::to_string(r)); });
                 },
                 [](ExperimentConfig& c, std::string_view v, int line) {
                   std::vector<trainers::Regime> r;
                   for (const auto& s : parse_list(v)) {
                     try {
                       r.push_back(trainers::regime_from_string(s));
                     } catch (const std::exception&) {
                       bad_value("trainers.regimes", s, "maml, random_noise, fgsm or admrl", line);
                     }
                   }
                   c.regimes = std::move(r);
                 }});
    k.push_back(int_key("trainers.total_iterations", [](auto& c) -> auto& { return c.total_iterations; }));
    k.push_back(int_key("trainers.noise_start_iteration", [](auto& c) -> auto& { return c.noise_start_iteration; }));
    k.push_back(int_key("trainers.log_every", [](auto& c) -> auto& { return c.log_every; }));
    k.push_back({"trainers.dump_trajectories", [](const ExperimentConfig& c) { return fmt_bool(c.dump_trajectories); },
                 [](ExperimentConfig& c, std::string_view v, int line) {
                   c.dump_trajectories = parse_bool("trainers.dump_trajectories", v, line);
                 }});
    // eval
    k.push_back(int_key("eval.n_tasks", [](auto& c) -> auto& { return c.eval_tasks; }));
    // run
    k.push_back({"run.seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
                 [](ExperimentConfig& c, std::string_view v, int line) { c.seed = parse_u64("run.seed", v, line); }});
    k.push_back({"run.out", [](const ExperimentConfig& c) { return c.out.string(); },
                 [](ExperimentConfig& c, std::string_view v, int) { c.out = unquote(v); }});
    k.push_back({"run.workers", [](const ExperimentConfig& c) { return std::to_string(c.workers); },
                 [](ExperimentConfig& c, std::string_view v, int line) {
                   const auto n = parse_int("run.workers", v, line);
                   if (n <= 0) bad_value("run.workers", v, "a positive integer", line);
                   c.workers = static_cast<std::size_t>(n);
                 }});
    std::sort(k.begin(), k.end(), [](const Key& a, const Key& b) { return a.name < b.name; });
    return k;
  }();
  return keys;
}

const Key* find_key(std::string_view name) {
  for (const auto& k : registry())
    if (k.name == name) return &k;
  return nullptr;
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    family.validate();
    meta.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (policy_hidden.empty()) throw ConfigError("policy.hidden must list at least one layer");
  if (attack_kinds.empty()) throw ConfigError("attack.kinds must not be empty");
  for (double s : scales)
    if (!(s >= 0.0)) throw ConfigError("attack.scales must be non-negative");
  if (!(noise_sigma >= 0.0)) throw ConfigError("attack.sigma must be non-negative");
  if (!(gan.c > 0.0)) throw ConfigError("attack.c must be positive");
  if (!(gan.generator_output_gain > 0.0 && std::isfinite(gan.generator_output_gain)))
    throw ConfigError("attack.generator_init_gain must be positive");
  if (!(gan_lr > 0.0)) throw ConfigError("attack.gan_lr must be positive");
  if (!(attacker_lr > 0.0)) throw ConfigError("attack.attacker_lr must be positive");
  if (!(train_scale >= 0.0)) throw ConfigError("attack.train_scale must be non-negative");
  if (attacker_iterations < 0) throw ConfigError("attack.attacker_iterations must be non-negative");
  if (regimes.empty()) throw ConfigError("trainers.regimes must not be empty");
  for (std::size_t i = 0; i < regimes.size(); ++i)
    for (std::size_t j = i + 1; j < regimes.size(); ++j)
      if (regimes[i] == regimes[j]) throw ConfigError("trainers.regimes lists a regime twice");
  if (total_iterations < 0) throw ConfigError("trainers.total_iterations must be non-negative");
  if (noise_start_iteration < 0 || noise_start_iteration > total_iterations)
    throw ConfigError("trainers.noise_start_iteration must lie in [0, total_iterations]");
  if (log_every <= 0) throw ConfigError("trainers.log_every must be positive");
  if (eval_tasks <= 0) throw ConfigError("eval.n_tasks must be positive");
  if (workers == 0) throw ConfigError("run.workers must be positive");
  if (gan_source == GanSource::AdMrl &&
      std::find(attack_kinds.begin(), attack_kinds.end(), attacks::AttackKind::AdGan) != attack_kinds.end() &&
      std::find(regimes.begin(), regimes.end(), trainers::Regime::AdMrl) == regimes.end())
    throw ConfigError("attack.gan_source = admrl needs the admrl regime");
}

rollout::PolicyArch ExperimentConfig::policy_arch() const {
  rollout::PolicyArch arch;
  arch.obs_dim = family.state_dim();
  arch.act_dim = family.action_dim();
  arch.hidden = policy_hidden;
  arch.init_log_std = init_log_std;
  return arch;
}

trainers::TrainRun ExperimentConfig::train_run(trainers::Regime regime) const {
  trainers::TrainRun run;
  run.regime = regime;
  run.total_iterations = total_iterations;
  run.noise_start_iteration = noise_start_iteration;
  run.log_every = log_every;
  run.seed = seed;
  run.workers = workers;
  run.family = family;
  run.policy = policy_arch();
  run.meta = meta;
  run.train_attack = {attacks::AttackKind::Identity, train_scale, noise_mu, noise_sigma};
  run.gan = gan;
  run.gan_optimizer.lr = gan_lr;
  return run;
}

std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : registry()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.name);
  return out;
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value, int line) {
  const Key* k = find_key(key);
  if (!k) throw ConfigError("unknown config key '" + std::string(key) + "'", line);
  try {
    k->set(cfg, value, line);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("bad value for '" + std::string(key) + "': " + e.what(), line);
  }
}

ExperimentConfig parse_config(std::string_view text) {
  struct Entry {
    std::string key, value;
    int line;
  };
  std::vector<Entry> entries;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    // Comments start a line or follow whitespace; list brackets are not comments.
    std::string_view line = raw;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if ((line[i] == '#' || line[i] == ';') && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.find('=') == std::string_view::npos) {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError("empty section name", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("missing key before '='", line_no);
    // A dotted key is already fully qualified, even inside a section.
    const bool qualified = section.empty() || key.find('.') != std::string_view::npos;
    std::string full = qualified ? std::string(key) : section + "." + std::string(key);
    if (!find_key(full)) throw ConfigError("unknown config key '" + full + "'", line_no);
    entries.push_back({std::move(full), std::string(trim(line.substr(eq + 1))), line_no});
  }

  ExperimentConfig cfg;
  // The family resets family-dependent defaults, so it is applied first.
  for (const auto& e : entries)
    if (e.key == "env.family") set_config_value(cfg, e.key, e.value, e.line);
  for (const auto& e : entries)
    if (e.key != "env.family") set_config_value(cfg, e.key, e.value, e.line);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string env_var_name(std::string_view key) {
  std::string name(kEnvPrefix);
  for (char ch : key) name += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return name;
}

void apply_env_overrides(ExperimentConfig& cfg,
                         const std::function<std::optional<std::string>(const std::string&)>& getenv) {
  auto lookup = [&](const std::string& name) -> std::optional<std::string> {
    if (getenv) return getenv(name);
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
  if (auto v = lookup(env_var_name("env.family"))) set_config_value(cfg, "env.family", *v);
  for (const auto& k : registry()) {
    if (k.name == "env.family") continue;
    if (auto v = lookup(env_var_name(k.name))) {
      try {
        k.set(cfg, *v, 0);
      } catch (const ConfigError& e) {
        throw ConfigError(env_var_name(k.name) + ": " + e.what());
      }
    }
  }
  cfg.validate();
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::string canonical;
  for (const auto& [k, v] : config_entries(cfg)) {
    if (k == "run.out" || k == "run.workers") continue;
    canonical += k + "=" + v + "\n";
  }
  return fnv1a(canonical);
}

}  // namespace admrl::harness
