#include "skycatch/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "skycatch/csv.hpp"

namespace skycatch {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& text) {
  const std::string s = trim(text);
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw InputError("invalid number '" + s + "'");
  return v;
}

bool parse_bool(const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw InputError("invalid boolean '" + s + "'");
}

std::string fmt(double v) { return csv::num(v); }
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string& v) { return v; }

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <class T, class Acc>
Field scalar(std::string section, std::string key, Acc acc) {
  return {std::move(section), std::move(key),
          [acc](const ExperimentConfig& c) { return fmt(acc(const_cast<ExperimentConfig&>(c))); },
          [acc](ExperimentConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>)
              acc(c) = parse_bool(v);
            else if constexpr (std::is_same_v<T, std::string>)
              acc(c) = trim(v);
            else
              acc(c) = parse_number<T>(v);
          }};
}

template <class T, class Acc>
Field optional(std::string section, std::string key, Acc acc) {
  return {std::move(section), std::move(key),
          [acc](const ExperimentConfig& c) {
            const auto& o = acc(const_cast<ExperimentConfig&>(c));
            return o ? fmt(*o) : std::string("auto");
          },
          [acc](ExperimentConfig& c, const std::string& v) {
            if (trim(v) == "auto")
              acc(c).reset();
            else
              acc(c) = parse_number<T>(v);
          }};
}

template <class Acc>
Field string_list(std::string section, std::string key, Acc acc) {
  return {std::move(section), std::move(key),
          [acc](const ExperimentConfig& c) { return join(acc(const_cast<ExperimentConfig&>(c))); },
          [acc](ExperimentConfig& c, const std::string& v) { acc(c) = split_list(v); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      scalar<std::string>("paths", "dataset", [](C& c) -> auto& { return c.paths.dataset; }),
      scalar<std::string>("paths", "catalog", [](C& c) -> auto& { return c.paths.catalog; }),
      scalar<std::string>("paths", "checkpoint", [](C& c) -> auto& { return c.paths.checkpoint; }),
      scalar<std::string>("paths", "out_dir", [](C& c) -> auto& { return c.paths.out_dir; }),
      string_list("paths", "models", [](C& c) -> auto& { return c.paths.models; }),

      scalar<int>("data", "history_steps", [](C& c) -> auto& { return c.data.history_steps; }),
      scalar<double>("data", "plane_height", [](C& c) -> auto& { return c.data.plane_height; }),
      scalar<int>("data", "objects", [](C& c) -> auto& { return c.data.objects; }),
      scalar<int>("data", "trials", [](C& c) -> auto& { return c.data.trials; }),
      scalar<int>("data", "augment_factor", [](C& c) -> auto& { return c.data.augment_factor; }),
      scalar<bool>("data", "smooth", [](C& c) -> auto& { return c.data.smooth; }),
      optional<std::uint64_t>("data", "seed", [](C& c) -> auto& { return c.data.seed; }),

      string_list("split", "seen", [](C& c) -> auto& { return c.split.seen; }),
      string_list("split", "unseen", [](C& c) -> auto& { return c.split.unseen; }),
      optional<std::uint64_t>("split", "seed", [](C& c) -> auto& { return c.split.seed; }),

      scalar<std::string>("train", "arch", [](C& c) -> auto& { return c.train.arch; }),
      scalar<int>("train", "hidden", [](C& c) -> auto& { return c.train.hidden; }),
      optional<double>("train", "lr", [](C& c) -> auto& { return c.train.lr; }),
      scalar<int>("train", "batch", [](C& c) -> auto& { return c.train.batch; }),
      scalar<int>("train", "epochs", [](C& c) -> auto& { return c.train.epochs; }),
      scalar<double>("train", "clip", [](C& c) -> auto& { return c.train.clip; }),
      scalar<int>("train", "eval_interval", [](C& c) -> auto& { return c.train.eval_interval; }),
      scalar<int>("train", "patience", [](C& c) -> auto& { return c.train.patience; }),
      scalar<int>("train", "window_stride", [](C& c) -> auto& { return c.train.window_stride; }),
      scalar<int>("train", "val_window_stride", [](C& c) -> auto& { return c.train.val_window_stride; }),
      scalar<double>("train", "val_failure_penalty", [](C& c) -> auto& { return c.train.val_failure_penalty; }),
      scalar<int>("train", "shards", [](C& c) -> auto& { return c.train.shards; }),
      optional<double>("train", "w_teacher_forcing", [](C& c) -> auto& { return c.train.w_teacher_forcing; }),
      optional<double>("train", "w_reconstruction", [](C& c) -> auto& { return c.train.w_reconstruction; }),
      optional<double>("train", "w_alignment", [](C& c) -> auto& { return c.train.w_alignment; }),
      optional<double>("train", "w_impact", [](C& c) -> auto& { return c.train.w_impact; }),
      optional<std::uint64_t>("train", "seed", [](C& c) -> auto& { return c.train.seed; }),

      scalar<double>("svr", "epsilon", [](C& c) -> auto& { return c.svr.epsilon; }),
      scalar<double>("svr", "lambda", [](C& c) -> auto& { return c.svr.lambda; }),
      scalar<int>("svr", "epochs", [](C& c) -> auto& { return c.svr.epochs; }),
      scalar<int>("svr", "batch", [](C& c) -> auto& { return c.svr.batch; }),
      scalar<double>("svr", "step", [](C& c) -> auto& { return c.svr.step; }),

      scalar<int>("ransac", "iterations", [](C& c) -> auto& { return c.ransac.iterations; }),
      scalar<double>("ransac", "threshold", [](C& c) -> auto& { return c.ransac.threshold; }),
      scalar<int>("ransac", "min_inliers", [](C& c) -> auto& { return c.ransac.min_inliers; }),

      scalar<bool>("eval", "exclude_failures", [](C& c) -> auto& { return c.eval.exclude_failures; }),
      scalar<double>("eval", "penalty", [](C& c) -> auto& { return c.eval.penalty; }),
      scalar<int>("eval", "window_stride", [](C& c) -> auto& { return c.eval.window_stride; }),

      scalar<double>("sim", "v_max", [](C& c) -> auto& { return c.sim.v_max; }),
      scalar<double>("sim", "kp", [](C& c) -> auto& { return c.sim.kp; }),
      scalar<double>("sim", "ki", [](C& c) -> auto& { return c.sim.ki; }),
      scalar<double>("sim", "kd", [](C& c) -> auto& { return c.sim.kd; }),
      scalar<double>("sim", "init_radius", [](C& c) -> auto& { return c.sim.init_radius; }),
      {"sim", "basket_radii", [](const C& c) { return join(c.sim.basket_radii); },
       [](C& c, const std::string& v) {
         c.sim.basket_radii.clear();
         for (const auto& item : split_list(v)) c.sim.basket_radii.push_back(parse_number<double>(item));
       }},
      scalar<int>("sim", "update_interval", [](C& c) -> auto& { return c.sim.update_interval; }),
      scalar<std::string>("sim", "on_failure", [](C& c) -> auto& { return c.sim.on_failure; }),
      scalar<int>("sim", "seen_objects", [](C& c) -> auto& { return c.sim.seen_objects; }),
      scalar<int>("sim", "unseen_objects", [](C& c) -> auto& { return c.sim.unseen_objects; }),
      scalar<int>("sim", "trials_per_object", [](C& c) -> auto& { return c.sim.trials_per_object; }),
      optional<std::uint64_t>("sim", "seed", [](C& c) -> auto& { return c.sim.seed; }),

      scalar<std::uint64_t>("run", "seed", [](C& c) -> auto& { return c.run.seed; }),
      scalar<int>("run", "threads", [](C& c) -> auto& { return c.run.threads; }),
  };
  return table;
}

const Field& find_field(const std::string& dotted) {
  for (const auto& f : fields())
    if (f.section + "." + f.key == dotted) return f;
  throw InputError("unknown configuration key '" + dotted + "'");
}

}  // namespace

std::uint64_t ExperimentConfig::seed_for(const std::optional<std::uint64_t>& s, std::uint64_t tag) const {
  return s ? *s : derive_seed(run.seed, tag);
}

ArchitectureSpec ExperimentConfig::architecture() const {
  ArchitectureSpec a;
  a.kind = parse_arch_kind(train.arch);
  a.hidden = train.hidden;
  a.history_steps = data.history_steps;
  return a;
}

TrainHyper ExperimentConfig::train_hyper() const {
  const ArchKind kind = parse_arch_kind(train.arch);
  TrainHyper h = default_hyper(kind);
  if (train.lr) h.lr = *train.lr;
  h.batch = train.batch;
  h.epochs = train.epochs;
  h.seed = seed_for(train.seed, 3);
  h.clip = train.clip;
  h.eval_interval = train.eval_interval;
  h.patience = train.patience;
  h.window_stride = train.window_stride;
  h.val_window_stride = train.val_window_stride;
  h.val_failure_penalty = train.val_failure_penalty;
  h.shards = train.shards;
  h.threads = run.threads;
  if (train.w_teacher_forcing) h.weights.teacher_forcing = *train.w_teacher_forcing;
  if (train.w_reconstruction) h.weights.reconstruction = *train.w_reconstruction;
  if (train.w_alignment) h.weights.alignment = *train.w_alignment;
  if (train.w_impact) h.weights.impact = *train.w_impact;
  return h;
}

SvrTrainOptions ExperimentConfig::svr_options() const {
  SvrTrainOptions o;
  o.epsilon = svr.epsilon;
  o.lambda = svr.lambda;
  o.epochs = svr.epochs;
  o.batch = svr.batch;
  o.step = svr.step;
  o.seed = seed_for(train.seed, 3);
  return o;
}

RansacConfig ExperimentConfig::ransac_config() const {
  RansacConfig r;
  r.iterations = ransac.iterations;
  r.inlier_threshold = ransac.threshold;
  r.min_inliers = ransac.min_inliers;
  r.seed = derive_seed(run.seed, 5);
  return r;
}

SimConfig ExperimentConfig::sim_config() const {
  SimConfig s;
  s.v_max = sim.v_max;
  s.pid = {sim.kp, sim.ki, sim.kd};
  s.init_radius = sim.init_radius;
  s.basket_radii = sim.basket_radii;
  s.update_interval = sim.update_interval;
  s.seed = seed_for(sim.seed, 4);
  s.threads = run.threads;
  if (sim.on_failure == "hold_target")
    s.on_failure = PredictionFailurePolicy::hold_target;
  else if (sim.on_failure == "fail_episode")
    s.on_failure = PredictionFailurePolicy::fail_episode;
  else
    throw InputError("sim.on_failure must be hold_target or fail_episode");
  validate(s);
  return s;
}

IePolicy ExperimentConfig::ie_policy() const { return {eval.exclude_failures, eval.penalty, run.threads}; }

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  if (const char* env = std::getenv("SKYCATCH_SEED"); env != nullptr && *env != '\0') {
    try {
      cfg.run.seed = parse_number<std::uint64_t>(env);
    } catch (const InputError&) {
      throw InputError("SKYCATCH_SEED must be a non-negative integer, got '" + std::string(env) + "'");
    }
  }
  return cfg;
}

void set_config_value(ExperimentConfig& cfg, const std::string& dotted_key, const std::string& value) {
  const Field& f = find_field(dotted_key);
  try {
    f.set(cfg, value);
  } catch (const InputError& e) {
    throw InputError(dotted_key + ": " + e.what());
  }
}

std::string get_config_value(const ExperimentConfig& cfg, const std::string& dotted_key) {
  return find_field(dotted_key).get(cfg);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.section + "." + f.key);
  return keys;
}

void load_config(std::istream& in, ExperimentConfig& cfg) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.line(), e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw InputError("configuration key '" + section + "' must sit inside a [section]");
    for (const auto& [key, node] : body) set_config_value(cfg, section + "." + key, node.get_value<std::string>());
  }
}

void load_config_file(const std::string& path, ExperimentConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  try {
    load_config(in, cfg);
  } catch (const ParseError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void dump_config(std::ostream& out, const ExperimentConfig& cfg) {
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      out << (section.empty() ? "" : "\n") << '[' << f.section << "]\n";
      section = f.section;
    }
    out << f.key << " = " << f.get(cfg) << '\n';
  }
}

}  // namespace skycatch
