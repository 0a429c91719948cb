#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skycatch/baselines.hpp"
#include "skycatch/neurnet.hpp"
#include "skycatch/predictor.hpp"
#include "skycatch/trajkit.hpp"

namespace skycatch {

enum class ArchKind { nae, dpe, dipp_nae, dipp_dpe, dipp_nae_fc };
enum class EncoderKind { lstm_1layer, fc_1layer };
// What the core consumes once the observed history is exhausted.
enum class Feedback { hidden, state };

std::string to_string(ArchKind kind);
std::string to_string(EncoderKind kind);
ArchKind parse_arch_kind(const std::string& name);
std::span<const ArchKind> all_arch_kinds();

struct LossWeights {
  double teacher_forcing = 1.0;
  double reconstruction = 1.0;
  double alignment = 1.0;
  double impact = 1.0;
};

struct ArchitectureSpec {
  ArchKind kind = ArchKind::dipp_nae;
  int hidden = 128;
  int history_steps = kDefaultHistorySteps;  // T
  int state_dim = StateVec::kDim;
  int core_layers = 2;
  int max_rollout_steps = 600;

  EncoderKind encoder() const;
  bool predicts_trajectory() const;  // NAE family
  Feedback feedback() const;
  int history_length() const { return history_steps + 1; }
};

// Fixed affine map between raw states and network space: u = (s - mean) / scale.
struct Normalization {
  std::array<double, StateVec::kDim> mean{};
  std::array<double, StateVec::kDim> scale{1, 1, 1, 1, 1, 1, 1, 1, 1};
};

struct Network {
  ArchitectureSpec arch;
  Normalization norm;
  nn::LstmLayer encoder_lstm;  // lstm_1layer encoders
  nn::DenseLayer encoder_fc;   // fc_1layer encoders, tanh activation
  std::vector<nn::LstmLayer> core;
  nn::DenseLayer decoder;  // hidden -> 9 (NAE family) or 3 (DPE family)

  static Network create(const ArchitectureSpec& arch, std::uint64_t seed);
  Network zeros_like() const;
  // Active parameter blocks in declaration order.
  std::vector<nn::ParamRef> blocks();
  std::vector<nn::ParamRef> blocks() const;
};

// ---- forward building blocks ------------------------------------------------

std::vector<nn::Vector> encode(const Network& net, std::span<const StateVec> history);

struct RolloutResult {
  std::vector<nn::Vector> hidden;        // top-layer hidden after each core step
  std::vector<StateVec> predicted;       // decoded s_{t+1}, s_{t+2}, ...
  int steps_to_impact = 0;               // self-fed steps taken (K)
  int core_steps = 0;
};

// Throws NoCrossingError when the decoded height never drops below the plane.
RolloutResult rollout(const Network& net, std::span<const nn::Vector> features, const PlaneSpec& plane);

StateVec decode_state(const Network& net, std::span<const double> hidden);
Vec3 decode_impact(const Network& net, std::span<const double> hidden);

// Shared crossing rule (same as ground_truth_impact) on a state sequence.
Vec3 impact_from_trajectory(std::span<const StateVec> states, const PlaneSpec& plane);

// ---- losses -------------------------------------------------------------------

struct LossResult {
  double total = 0.0;
  double teacher_forcing = 0.0;
  double reconstruction = 0.0;
  double alignment = 0.0;
  double impact = 0.0;
  Network grads;
  // Forward intermediates, raw units.
  std::vector<StateVec> teacher_forced;  // predictions of s_{t-T+1..t+1}
  std::vector<StateVec> reconstructed;   // D(E(s_{t-T..t})); position only for DPE
  std::vector<StateVec> free_running;    // predictions of s_{t+2..}
  Vec3 predicted_impact = Vec3::Zero();
};

// Requires K >= 2; throws InputError otherwise.
LossResult loss_nae(const Network& net, const TrainingWindow& window, const LossWeights& weights = {},
                    bool with_gradients = true);
LossResult loss_dpe(const Network& net, const TrainingWindow& window, const LossWeights& weights = {},
                    bool with_gradients = true);
// Dispatches on the network kind.
LossResult window_loss(const Network& net, const TrainingWindow& window, const LossWeights& weights,
                       bool with_gradients = true);

// ---- training -----------------------------------------------------------------

struct TrainHyper {
  double lr = 3e-5;
  int batch = 512;
  int epochs = 30000;
  std::uint64_t seed = 0;
  double clip = 5.0;
  int eval_interval = 1;  // epochs between validation passes
  int patience = 500;     // validation passes without improvement before stopping
  int window_stride = 1;  // keep every n-th training window per trajectory
  int val_window_stride = 1;
  double val_failure_penalty = 1.0;  // IE charged for a failed validation prediction, m
  int shards = 1;                    // gradient shards per batch, reduced in order
  int threads = 1;
  LossWeights weights;
};

double default_learning_rate(ArchKind kind);
LossWeights default_loss_weights(ArchKind kind);
TrainHyper default_hyper(ArchKind kind);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_ie;
};

struct ModelCheckpoint {
  int schema_version = 1;
  Network net;
  TrainHyper hyper;
  std::vector<double> train_loss;  // mean window loss per epoch
  std::vector<double> val_ie;      // per validation pass
  int best_epoch = -1;
  bool aborted = false;
  std::string diagnostic;
};

Normalization fit_normalization(const std::vector<TrainingWindow>& windows);

// Windows admissible for training `kind` (NAE family needs K >= 2).
std::vector<TrainingWindow> training_windows(const std::vector<Trajectory>& trajs, std::span<const std::size_t> indices,
                                             const ArchitectureSpec& arch, const PlaneSpec& plane, int stride);

ModelCheckpoint train(const ArchitectureSpec& arch, const std::vector<Trajectory>& trajs, const DatasetSplit& split,
                      const TrainHyper& hyper, const PlaneSpec& plane = {},
                      const std::function<void(const EpochLog&)>& progress = {});

// ---- inference ----------------------------------------------------------------

struct PredictionResult {
  bool ok = false;
  Vec3 impact_point = Vec3::Zero();
  std::optional<std::vector<StateVec>> predicted_trajectory;  // NAE family only
  int steps_to_impact_used = 0;
  int core_steps = 0;
  double inference_time = 0.0;  // s
  std::string diagnostic;
};

PredictionResult predict_impact(const Network& net, std::span<const StateVec> history, const PlaneSpec& plane);

class NeuralPredictor final : public ImpactPredictor {
 public:
  explicit NeuralPredictor(Network net, std::string name = {});
  std::string name() const override { return name_; }
  int history_length() const override { return net_.arch.history_length(); }
  ImpactEstimate predict(const History& h, const PlaneSpec& plane) const override;
  const Network& network() const { return net_; }

 private:
  Network net_;
  std::string name_;
};

// ---- embeddings ---------------------------------------------------------------

struct EmbeddingRow {
  std::string object_id;
  std::string trial_id;
  int t_index = 0;
  nn::Vector features;
};

// Final-step encoder feature per window. early_segments > 0 keeps only the first
// that many windows of each trajectory.
std::vector<EmbeddingRow> export_embeddings(const Network& net, const std::vector<TrainingWindow>& windows,
                                            int early_segments = 5);
void write_embeddings_csv(std::ostream& out, const std::vector<EmbeddingRow>& rows);

// Mean within-object over mean across-object pairwise feature distance.
double embedding_separation_ratio(const std::vector<EmbeddingRow>& rows);

// ---- persistence --------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'S', 'K', 'Y', 'C', 'K', 'P', 'T', '1'};

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt);
ModelCheckpoint load_checkpoint(const std::string& path);
void save_svr_checkpoint(const std::string& path, const SvrModel& model, const SvrTrainOptions& options);
SvrModel load_svr_checkpoint(const std::string& path);
// Kind tag stored in a checkpoint header ("svr" or an architecture kind).
std::string checkpoint_kind(const std::string& path);

}  // namespace skycatch
