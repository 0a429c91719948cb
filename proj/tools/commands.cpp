#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <list>
#include <memory>
#include <set>
#include <sstream>

#include "skycatch/analysis.hpp"
#include "skycatch/baselines.hpp"
#include "skycatch/catchsim.hpp"
#include "skycatch/checks.hpp"
#include "skycatch/config.hpp"
#include "skycatch/evalkit.hpp"
#include "skycatch/predictors.hpp"
#include "skycatch/synthgen.hpp"
#include "skycatch/trajkit.hpp"

namespace skycatch::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDataTag = 1;
constexpr std::uint64_t kSplitTag = 2;
constexpr std::uint64_t kAugmentTag = 6;

// Flag bound to a config key. The option stores text; values given on the
// command line are applied on top of the file-loaded config after parsing.
struct Binding {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
  const CLI::App* owner = nullptr;
};

class Flags {
 public:
  explicit Flags(const ExperimentConfig& defaults) : defaults_(defaults) {}

  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    Binding& b = bindings_.emplace_back();
    b.key = key;
    b.owner = app;
    b.value = get_config_value(defaults_, key);
    b.option = app->add_option(flag, b.value, help + " [" + key + "]")->capture_default_str()->type_name("VALUE");
  }

  void apply(ExperimentConfig& cfg, const CLI::App* app) const {
    for (const auto& b : bindings_)
      if (b.option->count() > 0 && b.owner == app) set_config_value(cfg, b.key, b.value);
  }

 private:
  const ExperimentConfig& defaults_;
  std::list<Binding> bindings_;
};

struct Context {
  ExperimentConfig cfg;
  std::ostream& out;
  std::ostream& err;
};

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_config_beside(const std::string& path, const ExperimentConfig& cfg) {
  ensure_parent(path);
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path);
  dump_config(f, cfg);
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::vector<Trajectory> load_data(const ExperimentConfig& cfg) {
  DeriveOptions opt;
  opt.smooth = cfg.data.smooth;
  return read_dataset(cfg.paths.dataset, opt);
}

DatasetSplit resolve_split(const ExperimentConfig& cfg, const std::vector<Trajectory>& data) {
  const auto present = object_ids(data);
  std::vector<std::string> seen = cfg.split.seen, unseen = cfg.split.unseen;
  if (unseen.empty()) {
    const auto defaults = default_unseen_ids();
    for (const auto& id : present)
      if (std::find(defaults.begin(), defaults.end(), id) != defaults.end() &&
          std::find(seen.begin(), seen.end(), id) == seen.end())
        unseen.push_back(id);
  }
  if (seen.empty())
    for (const auto& id : present)
      if (std::find(unseen.begin(), unseen.end(), id) == unseen.end()) seen.push_back(id);
  return split_dataset(data, seen, unseen, cfg.seed_for(cfg.split.seed, kSplitTag));
}

struct LoadedModel {
  std::string name;
  std::unique_ptr<ImpactPredictor> predictor;
  std::optional<Network> net;
};

std::vector<LoadedModel> load_models(const ExperimentConfig& cfg) {
  std::vector<LoadedModel> out;
  std::set<std::string> names;
  for (const auto& entry : cfg.paths.models) {
    std::string name, path = entry;
    if (const auto eq = entry.find('='); eq != std::string::npos) {
      name = entry.substr(0, eq);
      path = entry.substr(eq + 1);
    }
    LoadedModel m;
    if (checkpoint_kind(path) == "svr") {
      auto svr = load_svr_checkpoint(path);
      if (name.empty()) name = "svr";
      m.predictor = std::make_unique<SvrPredictor>(std::move(svr));
    } else {
      ModelCheckpoint ck = load_checkpoint(path);
      if (name.empty()) name = to_string(ck.net.arch.kind);
      m.net = ck.net;
      m.predictor = std::make_unique<NeuralPredictor>(std::move(ck.net), name);
    }
    if (m.predictor->history_length() != cfg.data.history_steps + 1)
      throw InputError("model '" + name + "' uses " + std::to_string(m.predictor->history_length() - 1) +
                       " history steps but data.history_steps is " + std::to_string(cfg.data.history_steps));
    if (!names.insert(name).second) throw InputError("duplicate model name '" + name + "'");
    m.name = name;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<const ImpactPredictor*> method_list(const NewtonPredictor& newton, const std::vector<LoadedModel>& models) {
  std::vector<const ImpactPredictor*> v{&newton};
  for (const auto& m : models) v.push_back(m.predictor.get());
  return v;
}

std::vector<IeCurve> compute_curves(const ExperimentConfig& cfg, const std::vector<Trajectory>& data,
                                    const DatasetSplit& split, std::span<const ImpactPredictor* const> methods) {
  const PlaneSpec plane = cfg.plane();
  const EvalSet seen = eval_windows(data, split.test, cfg.data.history_steps, plane, cfg.eval.window_stride);
  const EvalSet unseen = eval_windows(data, split.unseen, cfg.data.history_steps, plane, cfg.eval.window_stride);
  std::vector<IeCurve> curves;
  for (const auto* m : methods) curves.push_back(ie_curve(*m, seen, plane, "seen_test", cfg.ie_policy()));
  if (!unseen.windows.empty())
    for (const auto* m : methods) curves.push_back(ie_curve(*m, unseen, plane, "unseen", cfg.ie_policy()));
  return curves;
}

SrTable compute_sr(const ExperimentConfig& cfg, const std::vector<Trajectory>& data, const DatasetSplit& split,
                   std::span<const ImpactPredictor* const> methods) {
  const auto seen = episode_slice(data, split.test, cfg.sim.seen_objects, cfg.sim.trials_per_object);
  const auto unseen = episode_slice(data, split.unseen, cfg.sim.unseen_objects, cfg.sim.trials_per_object);
  return success_table(data, seen, unseen, methods, cfg.plane(), cfg.sim_config());
}

void print_curve_summary(std::ostream& out, const std::vector<IeCurve>& curves) {
  for (const auto& c : curves) {
    out << c.partition << " " << c.method << ": " << c.evaluated << " windows, " << c.failures
        << " failures, mean IE (K>=30) ";
    if (c.errors_from(30).empty())
      out << "n/a\n";
    else
      out << c.mean_from(30) << " m\n";
  }
}

// ---- subcommands ----------------------------------------------------------------

int cmd_synth(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.data.objects < 1 || cfg.data.objects > 20) throw InputError("--objects must be in [1, 20]");
  if (cfg.data.trials < 1) throw InputError("--trials must be positive");
  const std::uint64_t seed = cfg.seed_for(cfg.data.seed, kDataTag);
  auto profiles = catalog(seed);
  profiles.resize(static_cast<std::size_t>(cfg.data.objects));
  const auto data = generate_dataset(profiles, cfg.data.trials, seed, cfg.plane());
  ensure_parent(cfg.paths.catalog);
  write_catalog(cfg.paths.catalog, profiles, seed);
  ensure_parent(cfg.paths.dataset);
  write_dataset(cfg.paths.dataset, data);
  write_config_beside(cfg.paths.dataset + ".config.ini", cfg);
  ctx.out << data.size() << " trajectories written to " << cfg.paths.dataset << "\n";
  return kExitOk;
}

int cmd_augment(Context& ctx, const std::string& output) {
  const auto& cfg = ctx.cfg;
  const auto data = load_data(cfg);
  const auto expanded = expand_dataset(data, cfg.data.augment_factor, cfg.seed_for(cfg.data.seed, kAugmentTag));
  std::string path = output;
  if (path == "auto") {
    fs::path p(cfg.paths.dataset);
    path = (p.parent_path() / (p.stem().string() + ".x" + std::to_string(cfg.data.augment_factor) + ".jsonl")).string();
  }
  ensure_parent(path);
  write_dataset(path, expanded);
  write_config_beside(path + ".config.ini", cfg);
  ctx.out << expanded.size() << " trajectories written to " << path << "\n";
  return kExitOk;
}

int cmd_pds(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto report = dataset_report(load_data(cfg));
  fs::create_directories(cfg.paths.out_dir);
  write_pds_csv(in_dir(cfg.paths.out_dir, "pds.csv"), report);
  write_config_beside(in_dir(cfg.paths.out_dir, "effective_config.ini"), cfg);
  for (const auto& r : report.rows)
    ctx.out << r.object_id << "  n=" << r.n_trajectories << "  PDS " << r.mean << " +/- " << r.stddev << " m\n";
  return kExitOk;
}

int cmd_train(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto data = load_data(cfg);
  const DatasetSplit split = resolve_split(cfg, data);
  ensure_parent(cfg.paths.checkpoint);
  if (cfg.train.arch == "svr") {
    ArchitectureSpec direct;
    direct.kind = ArchKind::dipp_dpe;
    direct.history_steps = cfg.data.history_steps;
    const auto windows = training_windows(data, split.train, direct, cfg.plane(), cfg.train.window_stride);
    const auto opt = cfg.svr_options();
    const SvrModel model = svr_fit(windows, opt);
    save_svr_checkpoint(cfg.paths.checkpoint, model, opt);
    ctx.out << "svr trained on " << windows.size() << " windows, checkpoint " << cfg.paths.checkpoint << "\n";
  } else {
    const ArchitectureSpec arch = cfg.architecture();
    const TrainHyper hyper = cfg.train_hyper();
    ctx.out << "training " << to_string(arch.kind) << " (hidden " << arch.hidden << ", lr " << hyper.lr << ", batch "
            << hyper.batch << ") on " << split.train.size() << " trajectories\n";
    const ModelCheckpoint ck = train(arch, data, split, hyper, cfg.plane(), [&](const EpochLog& e) {
      ctx.out << "epoch " << e.epoch << " loss " << e.train_loss;
      if (e.val_ie) ctx.out << " val_ie " << *e.val_ie;
      ctx.out << "\n";
    });
    save_checkpoint(cfg.paths.checkpoint, ck);
    ctx.out << "best epoch " << ck.best_epoch << ", checkpoint " << cfg.paths.checkpoint << "\n";
    if (ck.aborted) ctx.err << "warning: training aborted: " << ck.diagnostic << "\n";
  }
  write_config_beside(cfg.paths.checkpoint + ".config.ini", cfg);
  return kExitOk;
}

int cmd_eval_ie(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto data = load_data(cfg);
  const DatasetSplit split = resolve_split(cfg, data);
  const auto models = load_models(cfg);
  const NewtonPredictor newton(cfg.data.history_steps + 1, cfg.ransac_config());
  const auto methods = method_list(newton, models);
  const auto curves = compute_curves(cfg, data, split, methods);
  fs::create_directories(cfg.paths.out_dir);
  {
    std::ofstream f(in_dir(cfg.paths.out_dir, "ie_curve.csv"));
    write_ie_csv(f, curves);
  }
  {
    std::ofstream f(in_dir(cfg.paths.out_dir, "significance.csv"));
    write_significance_csv(f, significance_table(curves));
  }
  write_config_beside(in_dir(cfg.paths.out_dir, "effective_config.ini"), cfg);
  print_curve_summary(ctx.out, curves);
  return kExitOk;
}

int cmd_simulate(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto data = load_data(cfg);
  const DatasetSplit split = resolve_split(cfg, data);
  const auto models = load_models(cfg);
  const NewtonPredictor newton(cfg.data.history_steps + 1, cfg.ransac_config());
  const auto methods = method_list(newton, models);
  const SrTable table = compute_sr(cfg, data, split, methods);
  fs::create_directories(cfg.paths.out_dir);
  {
    std::ofstream f(in_dir(cfg.paths.out_dir, "sr_table.csv"));
    write_sr_csv(f, table);
  }
  {
    std::ofstream f(in_dir(cfg.paths.out_dir, "episodes.jsonl"));
    write_episode_log(f, table.episodes);
  }
  write_config_beside(in_dir(cfg.paths.out_dir, "effective_config.ini"), cfg);
  for (const auto& r : table.rows)
    ctx.out << r.method << " r=" << r.radius << ": seen " << r.seen_sr << " (" << r.seen_n << "), unseen "
            << r.unseen_sr << " (" << r.unseen_n << ")\n";
  return kExitOk;
}

std::vector<CheckOutcome> quick_checks(std::ostream& out, bool with_scale) {
  const checks::Log log = [&](const std::string& s) { out << s << "\n"; };
  std::vector<CheckOutcome> v;
  v.push_back(checks::gradient_fidelity(log));
  v.push_back(checks::pds_correctness(log));
  v.push_back(checks::newton_oracle(log));
  if (with_scale) v.push_back(checks::dataset_scale(log));
  v.push_back(checks::catching_kinematics(log));
  v.push_back(checks::determinism(log));
  return v;
}

int cmd_report(Context& ctx, bool run_checks) {
  const auto& cfg = ctx.cfg;
  const auto data = load_data(cfg);
  const DatasetSplit split = resolve_split(cfg, data);
  const auto models = load_models(cfg);
  const NewtonPredictor newton(cfg.data.history_steps + 1, cfg.ransac_config());
  const auto methods = method_list(newton, models);

  ReportInputs in;
  in.pds = dataset_report(data);
  in.curves = compute_curves(cfg, data, split, methods);
  in.significance = significance_table(in.curves);
  in.sr = compute_sr(cfg, data, split, methods);
  if (run_checks) in.checks = quick_checks(ctx.out, false);

  const auto written = emit_report(cfg.paths.out_dir, in);
  std::vector<std::size_t> emb_idx = split.test;
  emb_idx.insert(emb_idx.end(), split.unseen.begin(), split.unseen.end());
  const EvalSet emb_set = eval_windows(data, emb_idx, cfg.data.history_steps, cfg.plane(), cfg.eval.window_stride);
  for (const auto& m : models) {
    if (!m.net) continue;
    const auto rows = export_embeddings(*m.net, emb_set.windows);
    std::ofstream f(in_dir(cfg.paths.out_dir, "embeddings_" + m.name + ".csv"));
    write_embeddings_csv(f, rows);
    ctx.out << m.name << " embedding separation ratio " << embedding_separation_ratio(rows) << "\n";
  }
  write_config_beside(in_dir(cfg.paths.out_dir, "effective_config.ini"), cfg);
  print_curve_summary(ctx.out, in.curves);
  for (const auto& w : written) ctx.out << "wrote " << w << "\n";
  return kExitOk;
}

int cmd_selftest(Context& ctx, bool full) {
  const checks::Log log = [&](const std::string& s) { ctx.out << s << "\n"; };
  std::vector<CheckOutcome> results = checks::property_suites(log);
  for (auto& c : quick_checks(ctx.out, full)) results.push_back(c);
  if (full) {
    checks::DeskConfig desk;
    desk.threads = ctx.cfg.run.threads;
    const checks::DeskRun run = checks::run_desk(desk, log);
    results.push_back(checks::ie_trend(run, log));
    results.push_back(checks::sr_trend(run, log));
    results.push_back(checks::embedding_separation(run, log));
  }
  bool ok = true;
  for (const auto& r : results) {
    ctx.out << to_string(r.status) << "  " << (r.id > 0 ? std::to_string(r.id) + ". " : std::string()) << r.title
            << " (" << r.detail << ")\n";
    ok = ok && r.status == CheckStatus::pass;
  }
  return ok ? kExitOk : kExitInternal;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  ExperimentConfig defaults;
  try {
    defaults = default_config();
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  }

  CLI::App app{"Impact-point prediction experiments: data synthesis, training, evaluation and catching simulation.",
               "skycatch"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  Flags flags(defaults);

  std::string config_path;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI config file; flags given here override its values");
    flags.bind(sub, "--seed", "run.seed", "Global seed; per-module seeds derive from it");
    flags.bind(sub, "--threads", "run.threads", "Worker threads");
  };
  auto data_flags = [&](CLI::App* sub) {
    flags.bind(sub, "--dataset", "paths.dataset", "Trajectory dataset (JSON Lines)");
    flags.bind(sub, "--history-steps", "data.history_steps", "History steps T");
    flags.bind(sub, "--plane-height", "data.plane_height", "Catching plane height, m");
    flags.bind(sub, "--smooth", "data.smooth", "Moving-average positions before differencing");
  };
  auto split_flags = [&](CLI::App* sub) {
    flags.bind(sub, "--seen", "split.seen", "Comma-separated seen object ids (empty: catalog default)");
    flags.bind(sub, "--unseen", "split.unseen", "Comma-separated unseen object ids (empty: catalog default)");
    flags.bind(sub, "--split-seed", "split.seed", "Split seed");
  };
  auto model_flags = [&](CLI::App* sub) {
    flags.bind(sub, "--models", "paths.models", "Comma-separated checkpoints, each path or name=path");
    flags.bind(sub, "--out-dir", "paths.out_dir", "Output directory");
    flags.bind(sub, "--ransac-iterations", "ransac.iterations", "RANSAC iterations for the Newton baseline");
    flags.bind(sub, "--ransac-threshold", "ransac.threshold", "RANSAC inlier threshold, m");
    flags.bind(sub, "--ransac-min-inliers", "ransac.min_inliers", "RANSAC minimum inliers (0: 60% of history)");
  };
  auto eval_flags = [&](CLI::App* sub) {
    flags.bind(sub, "--exclude-failures", "eval.exclude_failures", "Drop failed predictions from IE statistics");
    flags.bind(sub, "--penalty", "eval.penalty", "IE charged per failure when not excluded, m");
    flags.bind(sub, "--eval-window-stride", "eval.window_stride", "Keep every n-th evaluation window");
  };
  auto sim_flags = [&](CLI::App* sub) {
    flags.bind(sub, "--v-max", "sim.v_max", "Robot speed limit, m/s");
    flags.bind(sub, "--kp", "sim.kp", "PID proportional gain");
    flags.bind(sub, "--ki", "sim.ki", "PID integral gain");
    flags.bind(sub, "--kd", "sim.kd", "PID derivative gain");
    flags.bind(sub, "--init-radius", "sim.init_radius", "Initial robot offset radius, m");
    flags.bind(sub, "--basket-radii", "sim.basket_radii", "Comma-separated basket radii, m");
    flags.bind(sub, "--update-interval", "sim.update_interval", "Capture steps between predictions");
    flags.bind(sub, "--on-failure", "sim.on_failure", "hold_target or fail_episode");
    flags.bind(sub, "--seen-objects", "sim.seen_objects", "Seen objects in the episode slice");
    flags.bind(sub, "--unseen-objects", "sim.unseen_objects", "Unseen objects in the episode slice");
    flags.bind(sub, "--trials-per-object", "sim.trials_per_object", "Episodes per object");
    flags.bind(sub, "--sim-seed", "sim.seed", "Simulation seed");
  };

  auto* synth = app.add_subcommand("synth", "Generate the object catalog and simulated trajectories");
  common(synth);
  flags.bind(synth, "--objects", "data.objects", "Catalog objects to simulate (first n)");
  flags.bind(synth, "--trials", "data.trials", "Throws per object");
  flags.bind(synth, "--data-seed", "data.seed", "Data seed");
  flags.bind(synth, "--dataset", "paths.dataset", "Output dataset");
  flags.bind(synth, "--catalog", "paths.catalog", "Output catalog");
  flags.bind(synth, "--plane-height", "data.plane_height", "Catching plane height, m");

  std::string augment_out = "auto";
  auto* augment_cmd = app.add_subcommand("augment", "Expand a dataset with yaw and translation copies");
  common(augment_cmd);
  flags.bind(augment_cmd, "--dataset", "paths.dataset", "Input dataset");
  flags.bind(augment_cmd, "--factor", "data.augment_factor", "Copies per trajectory, original included");
  flags.bind(augment_cmd, "--data-seed", "data.seed", "Data seed");
  augment_cmd->add_option("--output", augment_out, "Output dataset (auto: <dataset>.x<factor>.jsonl)")
      ->capture_default_str();

  auto* pds_cmd = app.add_subcommand("pds", "Parabola deviation score per object");
  common(pds_cmd);
  data_flags(pds_cmd);
  flags.bind(pds_cmd, "--out-dir", "paths.out_dir", "Output directory");

  auto* train_cmd = app.add_subcommand("train", "Train one architecture (or the SVR baseline)");
  common(train_cmd);
  data_flags(train_cmd);
  split_flags(train_cmd);
  flags.bind(train_cmd, "--checkpoint", "paths.checkpoint", "Output checkpoint");
  flags.bind(train_cmd, "--arch", "train.arch", "nae, dpe, dipp_nae, dipp_dpe, dipp_nae_fc or svr");
  flags.bind(train_cmd, "--hidden", "train.hidden", "Hidden size");
  flags.bind(train_cmd, "--lr", "train.lr", "Learning rate (auto: architecture default)");
  flags.bind(train_cmd, "--batch", "train.batch", "Windows per minibatch");
  flags.bind(train_cmd, "--epochs", "train.epochs", "Maximum epochs");
  flags.bind(train_cmd, "--clip", "train.clip", "Gradient norm clip");
  flags.bind(train_cmd, "--eval-interval", "train.eval_interval", "Epochs between validation passes");
  flags.bind(train_cmd, "--patience", "train.patience", "Validation passes without improvement before stopping");
  flags.bind(train_cmd, "--window-stride", "train.window_stride", "Keep every n-th training window");
  flags.bind(train_cmd, "--val-window-stride", "train.val_window_stride", "Keep every n-th validation window");
  flags.bind(train_cmd, "--val-failure-penalty", "train.val_failure_penalty", "Validation IE per failed prediction, m");
  flags.bind(train_cmd, "--shards", "train.shards", "Gradient shards per batch");
  flags.bind(train_cmd, "--w-teacher-forcing", "train.w_teacher_forcing", "Teacher-forcing loss weight");
  flags.bind(train_cmd, "--w-reconstruction", "train.w_reconstruction", "Reconstruction loss weight");
  flags.bind(train_cmd, "--w-alignment", "train.w_alignment", "Alignment loss weight");
  flags.bind(train_cmd, "--w-impact", "train.w_impact", "Impact loss weight");
  flags.bind(train_cmd, "--train-seed", "train.seed", "Initialisation and shuffling seed");
  flags.bind(train_cmd, "--svr-epsilon", "svr.epsilon", "SVR insensitive-zone width, m");
  flags.bind(train_cmd, "--svr-lambda", "svr.lambda", "SVR L2 weight");
  flags.bind(train_cmd, "--svr-epochs", "svr.epochs", "SVR subgradient epochs");
  flags.bind(train_cmd, "--svr-batch", "svr.batch", "SVR minibatch (0: full batch)");
  flags.bind(train_cmd, "--svr-step", "svr.step", "SVR initial step size");

  auto* eval_cmd = app.add_subcommand("eval-ie", "Impact error curves and significance against Newton");
  common(eval_cmd);
  data_flags(eval_cmd);
  split_flags(eval_cmd);
  model_flags(eval_cmd);
  eval_flags(eval_cmd);

  auto* sim_cmd = app.add_subcommand("simulate", "Catching simulation success-rate table");
  common(sim_cmd);
  data_flags(sim_cmd);
  split_flags(sim_cmd);
  model_flags(sim_cmd);
  sim_flags(sim_cmd);

  bool report_checks = false;
  auto* report_cmd = app.add_subcommand("report", "PDS, IE, significance and SR outputs plus summary");
  common(report_cmd);
  data_flags(report_cmd);
  split_flags(report_cmd);
  model_flags(report_cmd);
  eval_flags(report_cmd);
  sim_flags(report_cmd);
  report_cmd->add_flag("--checks", report_checks, "Also run the quick acceptance checks into the summary")
      ->capture_default_str();

  bool full = false;
  auto* selftest_cmd = app.add_subcommand("selftest", "Run the oracle checks and invariant suites");
  common(selftest_cmd);
  selftest_cmd->add_flag("--full", full, "Include the dataset-scale check and the desk training run")
      ->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    Context ctx{defaults, out, err};
    if (!config_path.empty()) load_config_file(config_path, ctx.cfg);
    CLI::App* sub = app.get_subcommands().front();
    flags.apply(ctx.cfg, sub);
    const std::string name = sub->get_name();
    if (name == "synth") return cmd_synth(ctx);
    if (name == "augment") return cmd_augment(ctx, augment_out);
    if (name == "pds") return cmd_pds(ctx);
    if (name == "train") return cmd_train(ctx);
    if (name == "eval-ie") return cmd_eval_ie(ctx);
    if (name == "simulate") return cmd_simulate(ctx);
    if (name == "report") return cmd_report(ctx, report_checks);
    if (name == "selftest") return cmd_selftest(ctx, full);
    err << "error: unknown subcommand " << name << "\n";
    return kExitUser;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace skycatch::cli
