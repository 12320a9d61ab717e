#include "ictd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace ictd::cli {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering the key path for diagnostics and
// rejecting keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) fail(join(key), "unknown key");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(join(key), std::string("wrong type (") + e.what() + ")");
    }
  }

  void read_positive(const std::string& key, int& out) {
    read(key, out);
    if (out < 1) fail(join(key), "must be >= 1");
  }

  void read_kernel(const std::string& key, KernelSpec& out) {
    if (!has(key)) return;
    ObjectReader r(obj_.at(key), join(key));
    std::string family(to_string(out.family));
    r.read("family", family);
    r.read("temperature", out.temperature);
    try {
      out.family = kernel_family_from_string(family);
      out.validate();
    } catch (const std::invalid_argument& e) {
      fail(join(key), e.what());
    }
  }

  void read_grid(const std::string& key, train::AlphaGrid& out) {
    if (!has(key)) return;
    ObjectReader r(obj_.at(key), join(key));
    r.read("lo", out.lo);
    r.read("hi", out.hi);
    r.read_positive("points", out.points);
    if (!(out.lo > 0.0 && out.hi >= out.lo)) fail(join(key), "need 0 < lo <= hi");
  }

  void read_alpha(const std::string& key, AlphaChoice& out) {
    if (!has(key)) return;
    const json& v = obj_.at(key);
    if (v.is_number()) {
      out.alpha = v.get<double>();
      return;
    }
    if (v.is_string() && v.get<std::string>() == "tuned") {
      out.alpha.reset();
      return;
    }
    ObjectReader r(v, join(key));
    if (r.has("value")) {
      double a = 0.0;
      r.read("value", a);
      out.alpha = a;
    }
    r.read_grid("grid", out.grid);
    r.read_positive("tune_prompts", out.tune_prompts);
    r.read_positive("eval_transitions", out.eval_transitions);
  }

  void read_optimizer(const std::string& key, train::Optimizer& out) {
    if (!has(key)) return;
    std::string name;
    read(key, name);
    try {
      out = train::optimizer_from_string(name);
    } catch (const std::invalid_argument& e) {
      fail(join(key), e.what());
    }
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config: " + where + ": " + what);
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

SyntheticDomain parse_domain(const json& j, const std::string& path, const std::string& name,
                             const std::map<std::string, SyntheticDomain>& known) {
  ObjectReader r(j, path);
  SyntheticDomain d = SyntheticDomain::appendix_f();
  if (r.has("base")) {
    std::string base;
    r.read("base", base);
    const auto it = known.find(base);
    if (it == known.end()) ObjectReader::fail(r.join("base"), "unknown preset '" + base + "'");
    d = it->second;
  }
  d.name = name;
  r.read("rho", d.rho);
  r.read("sigma", d.sigma);
  r.read("delta", d.delta);
  r.read("m", d.m);
  r.read("gamma", d.gamma);
  r.read("reward_scale", d.reward_scale);
  if (r.has("value_model")) {
    std::string model;
    r.read("value_model", model);
    if (model == "kernel_mixture") {
      d.value_model = ValueModel::KernelMixture;
    } else if (model == "linear") {
      d.value_model = ValueModel::Linear;
    } else {
      ObjectReader::fail(r.join("value_model"), "expected kernel_mixture or linear");
    }
  }
  if (r.has("linear_weights")) {
    std::vector<double> w;
    r.read("linear_weights", w);
    if (w.size() != 2) ObjectReader::fail(r.join("linear_weights"), "expected two numbers");
    d.linear_w0 = w[0];
    d.linear_w1 = w[1];
  }
  try {
    d.validate();
  } catch (const std::invalid_argument& e) {
    ObjectReader::fail(path, e.what());
  }
  return d;
}

void parse_verify(ObjectReader& r, VerifyConfig& c) {
  r.read_positive("instances", c.instances);
  r.read_positive("state_dim", c.state_dim);
  r.read("context_lengths", c.context_lengths);
  r.read("layer_counts", c.layer_counts);
  r.read("gammas", c.gammas);
  r.read("temperatures", c.temperatures);
  r.read("include_linear", c.include_linear);
  r.read("tolerance", c.tolerance);
  r.read("oracle_state_dims", c.oracle_state_dims);
  r.read("oracle_context_lengths", c.oracle_context_lengths);
  r.read("oracle_layer_counts", c.oracle_layer_counts);
  r.read_positive("oracle_repeats", c.oracle_repeats);
  r.read("oracle_tolerance", c.oracle_tolerance);
  for (const auto* list : {&c.context_lengths, &c.layer_counts, &c.oracle_state_dims,
                           &c.oracle_context_lengths, &c.oracle_layer_counts}) {
    if (list->empty()) ObjectReader::fail(r.join("verify"), "sweep lists must be nonempty");
    for (int v : *list) {
      if (v < 1) ObjectReader::fail(r.join("verify"), "sweep entries must be >= 1");
    }
  }
  for (double g : c.gammas) {
    if (!(g >= 0.0 && g < 1.0)) ObjectReader::fail(r.join("gammas"), "gamma must lie in [0, 1)");
  }
  if (c.temperatures.empty() && !c.include_linear) {
    ObjectReader::fail(r.join("temperatures"), "no kernel left to verify");
  }
  if (c.tolerance < 0.0 || c.oracle_tolerance < 0.0) {
    ObjectReader::fail(r.join("tolerance"), "must be >= 0");
  }
}

void parse_surface(ObjectReader& r, SurfaceConfig& c) {
  r.read("domain", c.domain);
  r.read_positive("n_context", c.n_context);
  r.read_positive("layers", c.layers);
  r.read("grid_size", c.grid_size);
  if (c.grid_size < 2) ObjectReader::fail(r.join("grid_size"), "must be >= 2");
  r.read_kernel("kernel", c.kernel);
  r.read_alpha("alpha", c.alpha);
}

void parse_train(ObjectReader& r, TrainConfig& c, bool nested = false) {
  r.read("train_domains", c.train_domains);
  r.read("eval_domains", c.eval_domains);
  r.read("alpha_init", c.alpha_init);
  r.read_optimizer("optimizer", c.optimizer);
  r.read("learning_rate", c.learning_rate);
  r.read_positive("steps", c.steps);
  r.read_positive("batch_size", c.batch_size);
  r.read_positive("eval_transitions", c.eval_transitions);
  r.read_positive("eval_prompts", c.eval_prompts);
  r.read("checkpoint_every", c.checkpoint_every);
  r.read_positive("n_context", c.n_context);
  r.read_positive("layers", c.layers);
  r.read_kernel("kernel", c.kernel);
  r.read_grid("grid", c.grid);
  r.read("weight_decay", c.weight_decay);
  // Nested blocks get their domains from the enclosing command.
  if (!nested && c.train_domains.empty()) {
    ObjectReader::fail(r.join("train_domains"), "must be nonempty");
  }
  if (c.checkpoint_every < 0) ObjectReader::fail(r.join("checkpoint_every"), "must be >= 0");
  if (c.optimizer != train::Optimizer::GridSearch && !(c.learning_rate > 0.0)) {
    ObjectReader::fail(r.join("learning_rate"), "must be > 0");
  }
}

void parse_ablate(ObjectReader& r, AblateConfig& c) {
  r.read("domain", c.domain);
  r.read("axes", c.axes);
  r.read("values", c.values);
  r.read_positive("fixed_other", c.fixed_other);
  r.read("grid_size", c.grid_size);
  r.read_positive("seeds", c.seeds);
  r.read_kernel("kernel", c.kernel);
  r.read_alpha("alpha", c.alpha);
  r.read_positive("tune_layers", c.tune_layers);
  if (c.axes.empty()) ObjectReader::fail(r.join("axes"), "must be nonempty");
  for (const auto& a : c.axes) {
    try {
      (void)train::ablation_axis_from_string(a);
    } catch (const std::invalid_argument& e) {
      ObjectReader::fail(r.join("axes"), e.what());
    }
  }
  if (c.values.empty()) ObjectReader::fail(r.join("values"), "must be nonempty");
  for (int v : c.values) {
    if (v < 1) ObjectReader::fail(r.join("values"), "entries must be >= 1");
  }
  if (c.grid_size < 2) ObjectReader::fail(r.join("grid_size"), "must be >= 2");
}

void parse_transfer(ObjectReader& r, TransferConfig& c) {
  r.read("train_family", c.train_family);
  r.read("eval_family", c.eval_family);
  if (r.has("training")) {
    ObjectReader t(r.at("training"), r.join("training"));
    parse_train(t, c.training, true);
  }
  if (c.train_family.empty() || c.eval_family.empty()) {
    ObjectReader::fail(r.join("transfer"), "families must be nonempty");
  }
}

void parse_baseline(ObjectReader& r, BaselineConfig& c) {
  r.read("domain", c.domain);
  r.read("grid_size", c.grid_size);
  if (c.grid_size < 2) ObjectReader::fail(r.join("grid_size"), "must be >= 2");
  if (r.has("training")) {
    ObjectReader t(r.at("training"), r.join("training"));
    parse_train(t, c.training, true);
  }
}

json kernel_json(const KernelSpec& k) {
  return json{{"family", std::string(to_string(k.family))}, {"temperature", k.temperature}};
}

json grid_json(const train::AlphaGrid& g) {
  return json{{"lo", g.lo}, {"hi", g.hi}, {"points", g.points}};
}

json alpha_json(const AlphaChoice& a) {
  json j{{"grid", grid_json(a.grid)},
         {"tune_prompts", a.tune_prompts},
         {"eval_transitions", a.eval_transitions}};
  if (a.alpha) j["value"] = *a.alpha;
  return j;
}

json train_json(const TrainConfig& c) {
  return json{{"train_domains", c.train_domains},
              {"eval_domains", c.eval_domains},
              {"alpha_init", c.alpha_init},
              {"optimizer", std::string(train::to_string(c.optimizer))},
              {"learning_rate", c.learning_rate},
              {"steps", c.steps},
              {"batch_size", c.batch_size},
              {"eval_transitions", c.eval_transitions},
              {"eval_prompts", c.eval_prompts},
              {"checkpoint_every", c.checkpoint_every},
              {"n_context", c.n_context},
              {"layers", c.layers},
              {"kernel", kernel_json(c.kernel)},
              {"grid", grid_json(c.grid)},
              {"weight_decay", c.weight_decay}};
}

json domain_json(const SyntheticDomain& d) {
  return json{{"rho", d.rho},
              {"sigma", d.sigma},
              {"delta", d.delta},
              {"m", d.m},
              {"gamma", d.gamma},
              {"reward_scale", d.reward_scale},
              {"value_model", d.value_model == ValueModel::Linear ? "linear" : "kernel_mixture"},
              {"linear_weights", {d.linear_w0, d.linear_w1}}};
}

TrainConfig transfer_training_defaults() {
  TrainConfig t;
  t.train_domains.clear();
  t.steps = 100;
  return t;
}

TrainConfig baseline_training_defaults() {
  TrainConfig t;
  t.train_domains.clear();
  t.optimizer = train::Optimizer::GridSearch;
  return t;
}

}  // namespace

std::string_view to_string(Command command) {
  switch (command) {
    case Command::Verify:
      return "verify";
    case Command::Surface:
      return "surface";
    case Command::Train:
      return "train";
    case Command::Ablate:
      return "ablate";
    case Command::Transfer:
      return "transfer";
    case Command::Baseline:
      return "baseline";
  }
  return "unknown";
}

Command command_from_string(std::string_view name) {
  for (Command c : {Command::Verify, Command::Surface, Command::Train, Command::Ablate,
                    Command::Transfer, Command::Baseline}) {
    if (to_string(c) == name) return c;
  }
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

const std::map<std::string, SyntheticDomain>& builtin_domains() {
  static const std::map<std::string, SyntheticDomain> presets = [] {
    std::map<std::string, SyntheticDomain> p;
    auto add = [&](const std::string& name, SyntheticDomain d) {
      d.name = name;
      p[name] = d;
    };
    const SyntheticDomain base = SyntheticDomain::appendix_f();
    add("appendixF", base);
    add("matched_m8", base);

    SyntheticDomain m4 = base;
    m4.m = 4;
    m4.reward_scale = 2.0;
    add("matched_m4_scale2", m4);

    SyntheticDomain narrow = base;
    narrow.delta = 0.2;
    add("mismatched_delta02", narrow);

    SyntheticDomain lin = base;
    lin.value_model = ValueModel::Linear;
    add("linear_value", lin);

    SyntheticDomain zero = base;
    zero.reward_scale = 0.0;
    add("zero_reward", zero);
    return p;
  }();
  return presets;
}

SyntheticDomain RunConfig::domain(const std::string& name) const {
  if (auto it = domains.find(name); it != domains.end()) return it->second;
  const auto& builtin = builtin_domains();
  if (auto it = builtin.find(name); it != builtin.end()) return it->second;
  throw ConfigError("config: unknown domain preset '" + name + "'");
}

RunConfig default_config(Command command) {
  RunConfig c;
  c.command = command;
  c.transfer.training = transfer_training_defaults();
  c.baseline.training = baseline_training_defaults();
  return c;
}

RunConfig parse_config(const json& doc, Command command) {
  RunConfig cfg = default_config(command);
  ObjectReader root(doc, "");
  root.read("seed", cfg.seed);
  root.read("output_dir", cfg.output_dir);
  root.read("precision_report", cfg.precision_report);
  if (root.has("command")) {
    std::string named;
    root.read("command", named);
    if (named != to_string(command)) {
      ObjectReader::fail("command", "config is for '" + named + "' but '" +
                                        std::string(to_string(command)) + "' was invoked");
    }
  }

  if (root.has("domains")) {
    const json& ds = root.at("domains");
    if (!ds.is_object()) ObjectReader::fail("domains", "expected an object");
    std::map<std::string, SyntheticDomain> known = builtin_domains();
    for (const auto& [name, body] : ds.items()) {
      SyntheticDomain d = parse_domain(body, "domains." + name, name, known);
      known[name] = d;
      cfg.domains[name] = d;
    }
  }

  // Every block present is validated; only the invoked one is kept.
  RunConfig scratch = default_config(command);
  auto block = [&](Command which, auto parse, auto& target, auto& spare) {
    const std::string key(to_string(which));
    if (!root.has(key)) return;
    ObjectReader r(root.at(key), key);
    if (which == command) {
      parse(r, target);
    } else {
      parse(r, spare);
    }
  };
  block(Command::Verify, parse_verify, cfg.verify, scratch.verify);
  block(Command::Surface, parse_surface, cfg.surface, scratch.surface);
  block(
      Command::Train, [](ObjectReader& r, TrainConfig& c) { parse_train(r, c); }, cfg.train,
      scratch.train);
  block(Command::Ablate, parse_ablate, cfg.ablate, scratch.ablate);
  block(Command::Transfer, parse_transfer, cfg.transfer, scratch.transfer);
  block(Command::Baseline, parse_baseline, cfg.baseline, scratch.baseline);

  // Domain references of the active block must resolve.
  std::vector<std::string> refs;
  switch (command) {
    case Command::Surface:
      refs = {cfg.surface.domain};
      break;
    case Command::Train:
      refs = cfg.train.train_domains;
      refs.insert(refs.end(), cfg.train.eval_domains.begin(), cfg.train.eval_domains.end());
      break;
    case Command::Ablate:
      refs = {cfg.ablate.domain};
      break;
    case Command::Transfer:
      refs = cfg.transfer.train_family;
      refs.insert(refs.end(), cfg.transfer.eval_family.begin(), cfg.transfer.eval_family.end());
      break;
    case Command::Baseline:
      refs = {cfg.baseline.domain};
      break;
    case Command::Verify:
      break;
  }
  for (const auto& name : refs) (void)cfg.domain(name);
  return cfg;
}

RunConfig parse_config_text(const std::string& text, Command command) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number.
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ConfigError("config: line " + std::to_string(line) + ": " + e.what());
  }
  return parse_config(doc, command);
}

RunConfig load_config(const std::string& path, Command command) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), command);
}

json to_json(const RunConfig& c) {
  json j{{"command", std::string(to_string(c.command))},
         {"seed", c.seed},
         {"output_dir", c.output_dir},
         {"precision_report", c.precision_report}};
  if (!c.domains.empty()) {
    json ds = json::object();
    for (const auto& [name, d] : c.domains) ds[name] = domain_json(d);
    j["domains"] = ds;
  }
  switch (c.command) {
    case Command::Verify: {
      const VerifyConfig& v = c.verify;
      j["verify"] = json{{"instances", v.instances},
                         {"state_dim", v.state_dim},
                         {"context_lengths", v.context_lengths},
                         {"layer_counts", v.layer_counts},
                         {"gammas", v.gammas},
                         {"temperatures", v.temperatures},
                         {"include_linear", v.include_linear},
                         {"tolerance", v.tolerance},
                         {"oracle_state_dims", v.oracle_state_dims},
                         {"oracle_context_lengths", v.oracle_context_lengths},
                         {"oracle_layer_counts", v.oracle_layer_counts},
                         {"oracle_repeats", v.oracle_repeats},
                         {"oracle_tolerance", v.oracle_tolerance}};
      break;
    }
    case Command::Surface: {
      const SurfaceConfig& s = c.surface;
      j["surface"] = json{{"domain", s.domain},
                          {"n_context", s.n_context},
                          {"layers", s.layers},
                          {"grid_size", s.grid_size},
                          {"kernel", kernel_json(s.kernel)},
                          {"alpha", alpha_json(s.alpha)}};
      break;
    }
    case Command::Train:
      j["train"] = train_json(c.train);
      break;
    case Command::Ablate: {
      const AblateConfig& a = c.ablate;
      j["ablate"] = json{{"domain", a.domain},
                         {"axes", a.axes},
                         {"values", a.values},
                         {"fixed_other", a.fixed_other},
                         {"grid_size", a.grid_size},
                         {"seeds", a.seeds},
                         {"kernel", kernel_json(a.kernel)},
                         {"alpha", alpha_json(a.alpha)},
                         {"tune_layers", a.tune_layers}};
      break;
    }
    case Command::Transfer:
      j["transfer"] = json{{"train_family", c.transfer.train_family},
                           {"eval_family", c.transfer.eval_family},
                           {"training", train_json(c.transfer.training)}};
      break;
    case Command::Baseline:
      j["baseline"] = json{{"domain", c.baseline.domain},
                           {"grid_size", c.baseline.grid_size},
                           {"training", train_json(c.baseline.training)}};
      break;
  }
  return j;
}

train::TrainSpec to_train_spec(const TrainConfig& cfg, const RunConfig& run, std::uint64_t seed) {
  train::TrainSpec spec;
  spec.alpha_init = cfg.alpha_init;
  spec.optimizer = cfg.optimizer;
  spec.learning_rate = cfg.learning_rate;
  spec.steps = cfg.steps;
  spec.batch_size = cfg.batch_size;
  spec.eval_transitions = cfg.eval_transitions;
  spec.eval_prompts = cfg.eval_prompts;
  spec.checkpoint_every = cfg.checkpoint_every;
  spec.train_domains.clear();
  for (const auto& name : cfg.train_domains) spec.train_domains.push_back(run.domain(name));
  for (const auto& name : cfg.eval_domains) spec.eval_domains.push_back(run.domain(name));
  spec.n_context = cfg.n_context;
  spec.layers = cfg.layers;
  spec.kernel = cfg.kernel;
  spec.grid = cfg.grid;
  spec.weight_decay = cfg.weight_decay;
  spec.seed = seed;
  return spec;
}

}  // namespace ictd::cli
