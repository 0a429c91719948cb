#include "skycatch/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <sstream>

#include <unistd.h>

#include "skycatch/analysis.hpp"
#include "skycatch/baselines.hpp"
#include "skycatch/synthgen.hpp"

namespace skycatch::checks {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void say(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

CheckOutcome outcome(int id, bool pass, std::string detail, double seconds) {
  return {id, acceptance_titles()[static_cast<std::size_t>(id - 1)], pass ? CheckStatus::pass : CheckStatus::fail,
          std::move(detail), seconds};
}

const ObjectProfile& profile_named(const std::vector<ObjectProfile>& cat, const std::string& id) {
  for (const auto& p : cat)
    if (p.object_id == id) return p;
  throw InputError("no catalog object named '" + id + "'");
}

std::vector<Sample> parabola_samples(const Vec3& p0, const Vec3& v0, double t0, int n, double dt) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    const double t = t0 + i * dt;
    out.push_back({t, p0 + v0 * t + 0.5 * kGravity * t * t});
  }
  return out;
}

}  // namespace

GradCheckReport gradient_check(const Network& net, const TrainingWindow& window, const LossWeights& weights,
                               double step, double rel_tol, double floor, double abs_tol) {
  GradCheckReport rep;
  rep.kind = to_string(net.arch.kind);
  rep.loss = net.arch.predicts_trajectory() ? "trajectory" : "direct";
  const LossResult analytic = window_loss(net, window, weights, true);
  Network probe = net;
  auto params = probe.blocks();
  const auto grads = analytic.grads.blocks();
  rep.pass = true;
  for (std::size_t b = 0; b < params.size(); ++b) {
    double* value = params[b].value->data();
    const double* g = grads[b].value->data();
    for (std::size_t i = 0; i < params[b].value->size(); ++i) {
      const double saved = value[i];
      value[i] = saved + step;
      const double plus = window_loss(probe, window, weights, false).total;
      value[i] = saved - step;
      const double minus = window_loss(probe, window, weights, false).total;
      value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double scale = std::max(std::abs(numeric), std::abs(g[i]));
      const double diff = std::abs(numeric - g[i]);
      ++rep.parameters;
      if (scale >= floor) {
        const double rel = diff / scale;
        if (rel > rep.max_rel_error) {
          rep.max_rel_error = rel;
          rep.worst_block = params[b].name;
        }
        if (rel >= rel_tol) rep.pass = false;
      } else {
        rep.max_abs_small = std::max(rep.max_abs_small, diff);
        if (diff >= abs_tol) rep.pass = false;
      }
    }
  }
  return rep;
}

TrainingWindow reference_window(int history_steps, int steps_to_impact, std::uint64_t seed) {
  const auto cat = catalog(seed);
  const ObjectProfile& profile = profile_named(cat, "cap");
  const PlaneSpec plane{};
  const Trajectory traj = simulate(profile, sample_launch(seed, profile, plane), plane);
  for (auto& w : make_windows(traj, history_steps, plane))
    if (w.steps_to_impact == steps_to_impact) return w;
  throw Error("reference throw has no window with K=" + std::to_string(steps_to_impact));
}

CheckOutcome gradient_fidelity(const Log& log) {
  const auto t0 = Clock::now();
  const TrainingWindow window = reference_window(3, 5, 11);
  bool pass = true;
  double worst = 0.0;
  std::string worst_at;
  int index = 0;
  for (ArchKind kind : all_arch_kinds()) {
    ArchitectureSpec arch;
    arch.kind = kind;
    arch.hidden = 8;
    arch.history_steps = 3;
    Network net = Network::create(arch, derive_seed(17, static_cast<std::uint64_t>(index++)));
    net.norm = fit_normalization({window});
    std::vector<std::pair<std::string, LossWeights>> variants = {{"default", default_loss_weights(kind)}};
    if (kind == ArchKind::nae) variants.push_back({"all-terms", LossWeights{}});
    for (const auto& [label, weights] : variants) {
      const GradCheckReport rep = gradient_check(net, window, weights);
      say(log, "  gradient " + rep.kind + " (" + label + " " + rep.loss + " loss): " + std::to_string(rep.parameters) +
                   " params, max rel err " + fmt(rep.max_rel_error, 3) + ", max abs err near zero " +
                   fmt(rep.max_abs_small, 3) + (rep.pass ? "" : " FAIL"));
      pass = pass && rep.pass;
      if (rep.max_rel_error >= worst) {
        worst = rep.max_rel_error;
        worst_at = rep.kind + ":" + rep.worst_block;
      }
    }
  }
  const double secs = since(t0);
  return outcome(1, pass && secs < 60.0, "max rel err " + fmt(worst, 3) + " at " + worst_at, secs);
}

CheckOutcome pds_correctness(const Log& log) {
  const auto t0 = Clock::now();
  Rng rng(5);
  bool pass = true;

  double worst_exact = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Vec3 p0(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 2));
    const Vec3 v0(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(1, 8));
    worst_exact = std::max(worst_exact, pds(parabola_samples(p0, v0, rng.uniform(0, 2), 120, kCaptureDt)));
  }
  pass = pass && worst_exact < 1e-9;
  say(log, "  exact parabolas: max PDS " + fmt(worst_exact, 3) + " m");

  // Compass search on the least-squares objective, independent of the closed form.
  const auto cat = catalog(3);
  double worst_fit = 0.0;
  for (const char* id : {"cap", "frisbee", "ball-tennis"}) {
    const ObjectProfile& prof = profile_named(cat, id);
    const Trajectory traj = simulate(prof, sample_launch(9, prof), PlaneSpec{});
    const auto& s = traj.samples;
    auto objective = [&](const Vec3& v) {
      double J = 0.0;
      for (const auto& smp : s) {
        const double tau = smp.t - s.front().t;
        J += (smp.position - s.front().position - v * tau - 0.5 * kGravity * tau * tau).squaredNorm();
      }
      return J;
    };
    Vec3 v = Vec3::Zero();
    double best = objective(v);
    for (double h = 16.0; h > 1e-10; h *= 0.5) {
      bool improved = true;
      while (improved) {
        improved = false;
        for (int axis = 0; axis < 3; ++axis) {
          for (double sign : {1.0, -1.0}) {
            Vec3 cand = v;
            cand[axis] += sign * h;
            const double J = objective(cand);
            if (J < best) {
              best = J;
              v = cand;
              improved = true;
            }
          }
        }
      }
    }
    worst_fit = std::max(worst_fit, (v - fit_parabola_v0(s)).norm());
  }
  pass = pass && worst_fit < 1e-6;
  say(log, "  closed-form v0 vs compass search: max gap " + fmt(worst_fit, 3) + " m/s");

  double worst_aug = 0.0;
  for (const char* id : {"cap", "glider", "ball-pingpong"}) {
    const ObjectProfile& prof = profile_named(cat, id);
    const Trajectory traj = simulate(prof, sample_launch(4, prof), PlaneSpec{});
    const double base = pds(traj);
    for (int k = 0; k < 5; ++k) {
      const Trajectory aug =
          augment(traj, rng.uniform(-std::numbers::pi, std::numbers::pi), Vec2(rng.uniform(-1, 1), rng.uniform(-1, 1)));
      worst_aug = std::max(worst_aug, std::abs(pds(aug) - base));
    }
  }
  pass = pass && worst_aug < 1e-9;
  say(log, "  augmentation invariance: max change " + fmt(worst_aug, 3) + " m");

  const double secs = since(t0);
  return outcome(2, pass && secs < 10.0,
                 "parabola " + fmt(worst_exact, 2) + " m, v0 gap " + fmt(worst_fit, 2) + ", augment " +
                     fmt(worst_aug, 2) + " m",
                 secs);
}

CheckOutcome newton_oracle(const Log& log) {
  const auto t0 = Clock::now();
  Rng rng(8);
  const PlaneSpec plane{};
  const double g = -kGravity.z();
  double worst_clean = 0.0, worst_outlier = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Vec3 p0(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1.4, 1.6));
    const Vec3 v0(rng.uniform(1, 4), rng.uniform(-1, 1), rng.uniform(2, 6));
    const double t_start = rng.uniform(0.0, 0.3);
    // Descending root of z0 + vz t - g t^2 / 2 = h.
    const double t_hit = (v0.z() + std::sqrt(v0.z() * v0.z() + 2.0 * g * (p0.z() - plane.height))) / g;
    Vec3 expected = p0 + v0 * t_hit + 0.5 * kGravity * t_hit * t_hit;
    expected.z() = plane.height;

    const auto clean = parabola_samples(p0, v0, t_start, 6, kCaptureDt);
    worst_clean = std::max(worst_clean, (newton_predict(clean, plane) - expected).norm());

    auto noisy = parabola_samples(p0, v0, t_start, 20, kCaptureDt);
    std::vector<std::size_t> idx(noisy.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t i = 0; i < noisy.size() / 5; ++i) {
      Vec3 dir(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      noisy[idx[i]].position += 0.5 * dir.normalized();
    }
    RansacConfig cfg;
    cfg.inlier_threshold = 0.01;
    cfg.seed = static_cast<std::uint64_t>(k);
    worst_outlier = std::max(worst_outlier, (newton_predict(noisy, plane, cfg) - expected).norm());
  }
  say(log, "  noise-free max error " + fmt(worst_clean, 3) + " m, 20% outliers max error " + fmt(worst_outlier, 3) +
               " m");
  const double secs = since(t0);
  return outcome(3, worst_clean < 1e-6 && worst_outlier < 1e-3 && secs < 10.0,
                 "clean " + fmt(worst_clean, 2) + " m, outliers " + fmt(worst_outlier, 2) + " m", secs);
}

CheckOutcome dataset_scale(const Log& log) {
  const auto t0 = Clock::now();
  const auto cat = catalog(7);
  const PlaneSpec plane{};
  const std::vector<Trajectory> base = generate_dataset(cat, 100, 7, plane);
  const std::vector<Trajectory> all = expand_dataset(base, 4, 7);
  std::map<std::string, int> per_object;
  int violations = 0;
  for (const auto& traj : all) {
    ++per_object[traj.object_id];
    const ThrowExtent e = measure_extent(traj, plane);
    if (e.range < 2.9 || e.range > 4.2 || e.apex < 2.5 || e.apex > 2.8) ++violations;
  }
  bool counts_ok = per_object.size() == 20;
  for (const auto& [id, n] : per_object) counts_ok = counts_ok && n == 400;
  const double secs = since(t0);
  say(log, "  " + std::to_string(all.size()) + " trajectories over " + std::to_string(per_object.size()) +
               " objects, " + std::to_string(violations) + " envelope violations, " + fmt(secs, 3) + " s");
  return outcome(4, all.size() == 8000 && counts_ok && violations == 0 && secs < 120.0,
                 std::to_string(all.size()) + " trajectories, " + std::to_string(violations) + " violations", secs);
}

CheckOutcome catching_kinematics(const Log& log) {
  const auto t0 = Clock::now();
  const auto cat = catalog(21);
  const PlaneSpec plane{};
  std::vector<Trajectory> throws;
  for (std::size_t k = 0; k < cat.size(); ++k)
    for (int i = 0; i < 5; ++i) {
      const std::uint64_t s = derive_seed(21, k, static_cast<std::uint64_t>(i));
      throws.push_back(simulate(cat[k], sample_launch(s, cat[k], plane), plane, {}, "t" + std::to_string(i)));
    }
  std::vector<std::size_t> idx(throws.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  const FunctionPredictor oracle = oracle_predictor(kDefaultHistorySteps + 1);
  const NewtonPredictor newton(kDefaultHistorySteps + 1);
  const FunctionPredictor biased = biased_predictor(oracle, Vec3(1.0, 0.0, 0.0));
  const std::vector<const ImpactPredictor*> methods{&oracle, &newton, &biased};
  SimConfig cfg;
  cfg.seed = 21;
  const SrTable table = success_table(throws, idx, {}, methods, plane, cfg);

  bool monotone = true;
  for (const auto* m : methods)
    for (std::size_t r = 1; r < cfg.basket_radii.size(); ++r)
      monotone = monotone && table.sr(m->name(), cfg.basket_radii[r], true) >=
                                 table.sr(m->name(), cfg.basket_radii[r - 1], true);
  bool bias_zero = true;
  for (double r : cfg.basket_radii)
    if (r <= 0.20 + 1e-12) bias_zero = bias_zero && table.sr(biased.name(), r, true) == 0.0;
  double max_speed = 0.0;
  for (const auto& e : table.episodes) max_speed = std::max(max_speed, e.max_speed);
  const double oracle_sr = table.sr(oracle.name(), 0.05, true);
  say(log, "  oracle SR@0.05 " + fmt(oracle_sr) + ", newton SR@0.05 " + fmt(table.sr("newton", 0.05, true)) +
               ", biased SR@0.20 " + fmt(table.sr(biased.name(), 0.20, true)) + ", max speed " + fmt(max_speed, 6));
  const double secs = since(t0);
  return outcome(6, oracle_sr == 1.0 && monotone && bias_zero && max_speed <= cfg.v_max + 1e-9 && secs < 120.0,
                 "oracle SR@0.05 " + fmt(oracle_sr) + ", monotone " + (monotone ? "yes" : "no") + ", bias SR 0 " +
                     (bias_zero ? "yes" : "no"),
                 secs);
}

CheckOutcome determinism(const Log& log) {
  const auto t0 = Clock::now();
  const auto cat = catalog(5);
  const std::vector<ObjectProfile> profiles{profile_named(cat, "cap"), profile_named(cat, "ball-tennis")};
  const std::vector<Trajectory> data = generate_dataset(profiles, 10, 5);
  const DatasetSplit split = split_dataset(data, {"cap", "ball-tennis"}, {}, 5);

  ArchitectureSpec arch;
  arch.kind = ArchKind::dipp_nae;
  arch.hidden = 8;
  TrainHyper hyper = default_hyper(arch.kind);
  hyper.lr = 1e-3;
  hyper.batch = 8;
  hyper.epochs = 3;
  hyper.window_stride = 6;
  hyper.val_window_stride = 6;
  hyper.seed = 99;
  const ModelCheckpoint a = train(arch, data, split, hyper);
  const ModelCheckpoint b = train(arch, data, split, hyper);
  const bool same_loss = a.train_loss.size() == b.train_loss.size() &&
                         std::memcmp(a.train_loss.data(), b.train_loss.data(), a.train_loss.size() * sizeof(double)) == 0;

  const EvalSet set = eval_windows(data, split.test, arch.history_steps, PlaneSpec{}, 3);
  auto report_bytes = [&](const Network& net) {
    const NeuralPredictor np(net);
    const NewtonPredictor newton(arch.history_length());
    std::vector<IeCurve> curves{ie_curve(np, set, PlaneSpec{}, "seen_test"),
                                ie_curve(newton, set, PlaneSpec{}, "seen_test")};
    std::ostringstream out;
    write_ie_csv(out, curves);
    write_significance_csv(out, significance_table(curves));
    const std::vector<const ImpactPredictor*> methods{&np, &newton};
    SimConfig sim;
    write_sr_csv(out, success_table(data, std::span<const std::size_t>(split.test).first(std::min<std::size_t>(
                                              3, split.test.size())),
                                    {}, methods, PlaneSpec{}, sim));
    return out.str();
  };
  const bool same_csv = report_bytes(a.net) == report_bytes(b.net);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("skycatch-determinism-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();
  save_checkpoint(path, a);
  const ModelCheckpoint loaded = load_checkpoint(path);
  bool same_pred = loaded.train_loss == a.train_loss;
  for (const auto& w : set.windows) {
    const PredictionResult p = predict_impact(a.net, w.history, PlaneSpec{});
    const PredictionResult q = predict_impact(loaded.net, w.history, PlaneSpec{});
    same_pred = same_pred && p.ok == q.ok && std::memcmp(p.impact_point.data(), q.impact_point.data(), 3 * sizeof(double)) == 0;
  }
  fs::remove_all(dir);

  say(log, std::string("  loss history ") + (same_loss ? "identical" : "DIFFERS") + ", report CSVs " +
               (same_csv ? "identical" : "DIFFER") + ", checkpoint predictions " + (same_pred ? "bitwise equal" : "DIFFER"));
  const double secs = since(t0);
  return outcome(8, same_loss && same_csv && same_pred,
                 std::string("loss ") + (same_loss ? "same" : "differs") + ", csv " + (same_csv ? "same" : "differs") +
                     ", reload " + (same_pred ? "same" : "differs"),
                 secs);
}

DeskRun run_desk(const DeskConfig& cfg, const Log& log) {
  DeskRun run;
  run.cfg = cfg;
  const PlaneSpec plane{cfg.plane_height};
  const auto cat = catalog(cfg.seed);
  std::vector<ObjectProfile> seen, unseen;
  for (const auto& id : cfg.seen) seen.push_back(profile_named(cat, id));
  for (const auto& id : cfg.unseen) unseen.push_back(profile_named(cat, id));
  std::vector<ObjectProfile> all = seen;
  all.insert(all.end(), unseen.begin(), unseen.end());

  auto t0 = Clock::now();
  run.data = generate_dataset(all, cfg.trials, derive_seed(cfg.seed, 1), plane);
  run.split = split_dataset(run.data, cfg.seen, cfg.unseen, derive_seed(cfg.seed, 2));
  run.sim_seen = generate_dataset(seen, cfg.sim_trials_per_object, derive_seed(cfg.seed, 3), plane);
  run.sim_unseen = generate_dataset(unseen, cfg.sim_trials_per_object, derive_seed(cfg.seed, 4), plane);
  run.seconds["data"] = since(t0);
  say(log, "  desk data: " + std::to_string(run.data.size()) + " trajectories, " +
               std::to_string(run.split.train.size()) + " train / " + std::to_string(run.split.val.size()) + " val / " +
               std::to_string(run.split.test.size()) + " test / " + std::to_string(run.split.unseen.size()) + " unseen");

  for (ArchKind kind : {ArchKind::dipp_dpe, ArchKind::dipp_nae, ArchKind::nae}) {
    t0 = Clock::now();
    ArchitectureSpec arch;
    arch.kind = kind;
    arch.hidden = cfg.hidden;
    arch.history_steps = cfg.history_steps;
    TrainHyper h = default_hyper(kind);
    h.lr = cfg.lr;
    h.batch = cfg.batch;
    h.epochs = arch.predicts_trajectory() ? cfg.epochs_trajectory : cfg.epochs_direct;
    h.window_stride = cfg.window_stride;
    h.val_window_stride = cfg.val_window_stride;
    h.patience = cfg.patience;
    h.seed = derive_seed(cfg.seed, 10 + static_cast<std::uint64_t>(kind));
    h.threads = cfg.threads;
    h.shards = cfg.threads;
    const std::string name = to_string(kind);
    run.models[name] = train(arch, run.data, run.split, h, plane);
    const auto& m = run.models[name];
    run.seconds["train_" + name] = since(t0);
    say(log, "  trained " + name + ": " + std::to_string(m.train_loss.size()) + " epochs, best val IE " +
                 (m.val_ie.empty() ? std::string("n/a") : fmt(*std::min_element(m.val_ie.begin(), m.val_ie.end()))) +
                 " m, " + fmt(run.seconds["train_" + name], 3) + " s");
  }

  t0 = Clock::now();
  const int hist = cfg.history_steps + 1;
  SvrTrainOptions svr_opt;
  svr_opt.epochs = 500;
  svr_opt.seed = derive_seed(cfg.seed, 20);
  ArchitectureSpec direct;
  direct.kind = ArchKind::dipp_dpe;
  direct.history_steps = cfg.history_steps;
  const SvrModel svr = svr_fit(training_windows(run.data, run.split.train, direct, plane, cfg.window_stride), svr_opt);
  run.seconds["train_svr"] = since(t0);

  const NeuralPredictor dipp_dpe(run.models.at("dipp_dpe").net);
  const NeuralPredictor dipp_nae(run.models.at("dipp_nae").net);
  const NeuralPredictor nae(run.models.at("nae").net);
  const NewtonPredictor newton(hist);
  const SvrPredictor svr_pred(svr);
  const std::vector<const ImpactPredictor*> methods{&newton, &svr_pred, &nae, &dipp_nae, &dipp_dpe};

  t0 = Clock::now();
  IePolicy policy;
  policy.threads = cfg.threads;
  const EvalSet seen_test = eval_windows(run.data, run.split.test, cfg.history_steps, plane, 1);
  const EvalSet unseen_set = eval_windows(run.data, run.split.unseen, cfg.history_steps, plane, 2);
  for (const auto* m : methods) run.curves.push_back(ie_curve(*m, seen_test, plane, "seen_test", policy));
  for (const auto* m : methods) run.curves.push_back(ie_curve(*m, unseen_set, plane, "unseen", policy));
  run.seconds["eval_ie"] = since(t0);

  t0 = Clock::now();
  std::vector<Trajectory> sim_all = run.sim_seen;
  sim_all.insert(sim_all.end(), run.sim_unseen.begin(), run.sim_unseen.end());
  std::vector<std::size_t> seen_idx, unseen_idx;
  for (std::size_t i = 0; i < run.sim_seen.size(); ++i) seen_idx.push_back(i);
  for (std::size_t i = run.sim_seen.size(); i < sim_all.size(); ++i) unseen_idx.push_back(i);
  SimConfig sim;
  sim.seed = derive_seed(cfg.seed, 30);
  sim.threads = cfg.threads;
  run.sr = success_table(sim_all, seen_idx, unseen_idx, methods, plane, sim);
  run.seconds["simulate"] = since(t0);
  say(log, "  evaluation " + fmt(run.seconds["eval_ie"], 3) + " s, simulation " + fmt(run.seconds["simulate"], 3) +
               " s");
  return run;
}

namespace {

const IeCurve& find_curve(const DeskRun& run, const std::string& method, const std::string& partition) {
  for (const auto& c : run.curves)
    if (c.method == method && c.partition == partition) return c;
  throw Error("no IE curve for " + method + "/" + partition);
}

}  // namespace

CheckOutcome ie_trend(const DeskRun& run, const Log& log) {
  constexpr int kMin = 30;
  const IeCurve& newton = find_curve(run, "newton", "seen_test");
  const IeCurve& nae = find_curve(run, "nae", "seen_test");
  const double m_newton = newton.mean_from(kMin);
  const double m_nae = nae.mean_from(kMin);
  bool pass = true;
  std::string detail = "K>=30 newton " + fmt(m_newton) + ", nae " + fmt(m_nae);
  for (const char* name : {"dipp_dpe", "dipp_nae"}) {
    const IeCurve& c = find_curve(run, name, "seen_test");
    const double m = c.mean_from(kMin);
    const double p = significance(c.errors_from(kMin), newton.errors_from(kMin));
    const bool ok = m < m_newton && m <= m_nae && p < 0.05;
    pass = pass && ok;
    detail += std::string(", ") + name + " " + fmt(m) + " (p=" + fmt(p, 3) + ")";
  }
  for (const auto& c : run.curves)
    if (c.partition == "seen_test")
      say(log, "  " + c.method + ": K>=30 mean IE " + fmt(c.mean_from(kMin)) + " m over " +
                   std::to_string(c.errors_from(kMin).size()) + " windows, " + std::to_string(c.failures) +
                   " failed predictions");
  double total = 0.0;
  for (const auto& [k, s] : run.seconds) total += s;
  return outcome(5, pass && total < 1800.0, detail, total);
}

CheckOutcome sr_trend(const DeskRun& run, const Log& log) {
  const double a = run.sr.sr("dipp_nae", 0.15, true);
  const double b = run.sr.sr("nae", 0.15, true);
  for (const auto& row : run.sr.rows)
    say(log, "  SR " + row.method + " r=" + fmt(row.radius) + ": seen " + fmt(row.seen_sr) + ", unseen " +
                 fmt(row.unseen_sr));
  return outcome(7, a >= b, "seen SR@0.15 dipp_nae " + fmt(a) + ", nae " + fmt(b), run.seconds.count("simulate") ? run.seconds.at("simulate") : 0.0);
}

CheckOutcome embedding_separation(const DeskRun& run, const Log& log) {
  const auto t0 = Clock::now();
  std::vector<std::size_t> idx = run.split.test;
  idx.insert(idx.end(), run.split.unseen.begin(), run.split.unseen.end());
  const EvalSet set = eval_windows(run.data, idx, run.cfg.history_steps, PlaneSpec{run.cfg.plane_height}, 1);
  const auto rows = export_embeddings(run.models.at("dipp_nae").net, set.windows, 5);
  const double ratio = embedding_separation_ratio(rows);
  const double secs = since(t0);
  say(log, "  " + std::to_string(rows.size()) + " early-stage embeddings, within/across distance ratio " + fmt(ratio));
  return outcome(9, ratio < 0.9 && secs < 300.0, "ratio " + fmt(ratio), secs);
}

std::vector<CheckOutcome> property_suites(const Log& log) {
  std::vector<CheckOutcome> out;
  auto add = [&](const std::string& title, bool pass, const std::string& detail) {
    say(log, "  " + title + ": " + (pass ? "PASS" : "FAIL") + " (" + detail + ")");
    out.push_back({0, title, pass ? CheckStatus::pass : CheckStatus::fail, detail, 0.0});
  };

  {
    const std::vector<double> a{1, 2, 3}, b{10, 11, 12};
    const MannWhitney mw = mann_whitney(a, b);
    const double swapped = significance(b, a);
    add("Mann-Whitney exact 3x3", mw.exact && std::abs(mw.p_value - 0.1) < 1e-12 && swapped == mw.p_value,
        "p=" + fmt(mw.p_value));
  }
  {
    const auto cat = catalog(2);
    const Trajectory traj = simulate(cat[6], sample_launch(2, cat[6]), PlaneSpec{});
    const Vec3 gt = ground_truth_impact(traj, PlaneSpec{}).point;
    const Vec3 shared = impact_from_trajectory(traj.states, PlaneSpec{});
    add("shared crossing rule", std::memcmp(gt.data(), shared.data(), 3 * sizeof(double)) == 0, "bitwise");
  }
  {
    SimConfig cfg;
    RobotState s = make_robot(Vec2::Zero());
    double vmax = 0.0;
    for (int i = 0; i < 200; ++i) {
      const RobotState next = robot_step(s, Vec2(5.0, -3.0), cfg);
      vmax = std::max(vmax, (next.position - s.position).norm() / cfg.dt);
      s = next;
    }
    add("robot speed clamp", vmax <= cfg.v_max + 1e-12, "max " + fmt(vmax, 8));
  }
  {
    Rng rng(4);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
      std::vector<double> a(8), b(8);
      for (auto& x : a) x = rng.uniform();
      for (auto& x : b) x = rng.uniform() + 0.1;
      std::vector<double> a9 = a;
      a9.push_back(rng.uniform());
      // 8x8 runs exact; the same data with one extra point switches to the approximation.
      const double exact = significance(a, b);
      const double approx = significance(a9, b);
      worst = std::max(worst, std::abs(exact - approx));
    }
    add("Mann-Whitney branch continuity", worst < 0.2, "max |exact-approx| " + fmt(worst, 3));
  }
  return out;
}

}  // namespace skycatch::checks
