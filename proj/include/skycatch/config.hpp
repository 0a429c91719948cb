#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "skycatch/baselines.hpp"
#include "skycatch/catchsim.hpp"
#include "skycatch/evalkit.hpp"
#include "skycatch/predictors.hpp"

namespace skycatch {

// Every knob of an experiment, grouped by module. Unset optionals resolve to
// architecture defaults or to seeds derived from run.seed.
struct ExperimentConfig {
  struct Paths {
    std::string dataset = "data/trajectories.jsonl";
    std::string catalog = "data/catalog.json";
    std::string checkpoint = "out/model.ckpt";
    std::string out_dir = "out";
    std::vector<std::string> models;  // name=path pairs for evaluation
  } paths;

  struct Data {
    int history_steps = kDefaultHistorySteps;
    double plane_height = kDefaultPlaneHeight;
    int objects = 20;
    int trials = 100;
    int augment_factor = 4;
    bool smooth = false;
    std::optional<std::uint64_t> seed;
  } data;

  struct Split {
    std::vector<std::string> seen;    // empty: catalog default
    std::vector<std::string> unseen;  // empty: catalog default
    std::optional<std::uint64_t> seed;
  } split;

  struct Train {
    std::string arch = "dipp_nae";
    int hidden = 128;
    std::optional<double> lr;
    int batch = 512;
    int epochs = 30000;
    double clip = 5.0;
    int eval_interval = 1;
    int patience = 500;
    int window_stride = 1;
    int val_window_stride = 1;
    double val_failure_penalty = 1.0;
    int shards = 1;
    std::optional<double> w_teacher_forcing, w_reconstruction, w_alignment, w_impact;
    std::optional<std::uint64_t> seed;
  } train;

  struct Svr {
    double epsilon = 0.0;
    double lambda = 1e-6;
    int epochs = 2000;
    int batch = 0;
    double step = 0.1;
  } svr;

  struct Ransac {
    int iterations = 200;
    double threshold = 0.01;
    int min_inliers = 0;
  } ransac;

  struct Eval {
    bool exclude_failures = true;
    double penalty = 1.0;
    int window_stride = 1;
  } eval;

  struct Sim {
    double v_max = 2.5;
    double kp = 6.0, ki = 0.0, kd = 0.5;
    double init_radius = 0.3;
    std::vector<double> basket_radii{0.05, 0.10, 0.15, 0.20};
    int update_interval = 1;
    std::string on_failure = "hold_target";
    int seen_objects = 5;
    int unseen_objects = 5;
    int trials_per_object = 100;
    std::optional<std::uint64_t> seed;
  } sim;

  struct Run {
    std::uint64_t seed = 0;
    int threads = 1;
  } run;

  // Resolved views.
  std::uint64_t seed_for(const std::optional<std::uint64_t>& s, std::uint64_t tag) const;
  PlaneSpec plane() const { return PlaneSpec{data.plane_height}; }
  ArchitectureSpec architecture() const;
  TrainHyper train_hyper() const;
  SvrTrainOptions svr_options() const;
  RansacConfig ransac_config() const;
  SimConfig sim_config() const;
  IePolicy ie_policy() const;
};

// Defaults, with run.seed taken from SKYCATCH_SEED when that is set.
ExperimentConfig default_config();

// INI text: [section] then key = value; '#' or ';' start comments. Unknown
// sections or keys and malformed values raise ParseError.
void load_config(std::istream& in, ExperimentConfig& cfg);
void load_config_file(const std::string& path, ExperimentConfig& cfg);

// Sets one field from its "section.key" name.
void set_config_value(ExperimentConfig& cfg, const std::string& dotted_key, const std::string& value);
std::string get_config_value(const ExperimentConfig& cfg, const std::string& dotted_key);
std::vector<std::string> config_keys();

// Effective configuration in the same INI format load_config reads.
void dump_config(std::ostream& out, const ExperimentConfig& cfg);

}  // namespace skycatch
