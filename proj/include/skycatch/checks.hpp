#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "skycatch/catchsim.hpp"
#include "skycatch/evalkit.hpp"
#include "skycatch/predictors.hpp"
#include "skycatch/trajkit.hpp"

// Executable versions of the acceptance criteria, shared by the acceptance
// test binary, `skycatch selftest` and `skycatch report`.
namespace skycatch::checks {

using Log = std::function<void(const std::string&)>;

struct GradCheckReport {
  std::string kind;
  std::string loss;
  std::size_t parameters = 0;
  double max_rel_error = 0.0;    // over entries with max(|analytic|, |numeric|) >= floor
  double max_abs_small = 0.0;    // over the remaining near-zero entries
  std::string worst_block;
  bool pass = false;
};

// Central differences against analytic gradients for every parameter entry.
GradCheckReport gradient_check(const Network& net, const TrainingWindow& window, const LossWeights& weights,
                               double step = 1e-5, double rel_tol = 1e-4, double floor = 1e-6,
                               double abs_tol = 1e-8);

// Window with T history steps and exactly K steps to impact from a simulated throw.
TrainingWindow reference_window(int history_steps, int steps_to_impact, std::uint64_t seed);

CheckOutcome gradient_fidelity(const Log& log = {});
CheckOutcome pds_correctness(const Log& log = {});
CheckOutcome newton_oracle(const Log& log = {});
CheckOutcome dataset_scale(const Log& log = {});
CheckOutcome catching_kinematics(const Log& log = {});
CheckOutcome determinism(const Log& log = {});

// Desk-scale experiment behind the trend criteria.
struct DeskConfig {
  std::vector<std::string> seen{"ball-tennis", "ball-sponge", "shuttlecock", "frisbee", "boomerang"};
  std::vector<std::string> unseen{"ball-foam", "cone"};
  int trials = 60;
  std::uint64_t seed = 2024;
  int hidden = 32;
  int history_steps = kDefaultHistorySteps;
  double plane_height = kDefaultPlaneHeight;
  double lr = 1e-3;
  int batch = 16;
  int window_stride = 8;
  int val_window_stride = 8;
  int patience = 8;
  int epochs_trajectory = 20;  // NAE family
  int epochs_direct = 20;      // DPE family
  int sim_trials_per_object = 20;
  int threads = 1;
};

struct DeskRun {
  DeskConfig cfg;
  std::vector<Trajectory> data;
  DatasetSplit split;
  std::vector<Trajectory> sim_seen;    // fresh throws of the seen objects
  std::vector<Trajectory> sim_unseen;  // fresh throws of the unseen objects
  std::map<std::string, ModelCheckpoint> models;
  std::vector<IeCurve> curves;
  SrTable sr;
  std::map<std::string, double> seconds;
};

DeskRun run_desk(const DeskConfig& cfg, const Log& log = {});

CheckOutcome ie_trend(const DeskRun& run, const Log& log = {});
CheckOutcome sr_trend(const DeskRun& run, const Log& log = {});
CheckOutcome embedding_separation(const DeskRun& run, const Log& log = {});

// Module-level invariant suites beyond the numbered criteria.
std::vector<CheckOutcome> property_suites(const Log& log = {});

}  // namespace skycatch::checks
