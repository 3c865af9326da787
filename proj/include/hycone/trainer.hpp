#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hycone/data.hpp"
#include "hycone/losses.hpp"
#include "hycone/model.hpp"

namespace hycone::train {

struct TrainConfig {
  // model shape (input dim comes from the dataset)
  std::vector<std::size_t> hidden_dims = {64};
  std::size_t embed_dim = 32;
  net::Activation activation = net::Activation::tanh;

  // loop
  std::size_t batch_size = 64;  // desk-scale default
  std::uint64_t total_steps = 2000;
  std::uint64_t warmup_steps = 200;
  double max_lr = 5e-4;

  // loss
  double gamma = 0.1;
  double eta_inter = 0.7;
  double eta_intra = 1.2;
  double boundary_k = 0.1;
  bool exclusive_denominator = false;
  losses::TermMask mask;

  // scalars
  double tau_init = 0.07;
  double kappa_init = 1.0;
  bool kappa_learnable = true;

  net::AdamWConfig adamw;

  std::uint64_t seed = 0;
  std::uint64_t eval_every = 50;       // 0 = record only the final step
  std::uint64_t checkpoint_every = 500;  // 0 = save only the final checkpoint

  void validate() const;
  losses::LossOptions loss_options() const;
};

struct ModelState {
  model::EmbeddingModel model;
  net::AdamWState opt;
  std::uint64_t step = 0;  // completed optimization steps
};

// Metrics record for one step: the loss is measured on the step's batch
// before its update; lr is the rate that update applied.
struct LossReport {
  std::uint64_t step = 0;
  double hcc = 0.0, hce = 0.0, total = 0.0;
  double tau = 0.0, kappa = 0.0;
  // Mean spatial norm per role over the batch.
  double radius_img = 0.0, radius_txt = 0.0, radius_img_box = 0.0, radius_txt_box = 0.0;
  double lr = 0.0;
};

ModelState init_state(const TrainConfig& cfg, std::size_t feature_dim);

// Per-role input matrices for one batch, box pair picked per sample by the
// given stream seed.
struct BatchTensors {
  net::Tensor img, txt, img_box, txt_box;  // [B, feature_dim] each
};

BatchTensors make_batch_tensors(std::span<const data::Quadruple> batch,
                                std::size_t feature_dim, std::uint64_t box_seed);

// One forward (and optionally backward) pass of the full training graph.
// Gradients are keyed by parameter name ("img.w0", ..., "scalar.log_tau");
// log_kappa appears only when kappa is learnable. The branch signature
// fingerprints every hinge/clamp/guard decision the forward took; the
// finite-difference audit uses it to discard probes that crossed a kink.
struct GraphEval {
  LossReport report;  // step and lr left zero
  std::uint64_t branch_signature = 0;
  std::map<std::string, net::Tensor> grads;
};

GraphEval eval_training_graph(const model::EmbeddingModel& m, bool kappa_learnable,
                              const BatchTensors& x, const losses::LossOptions& opts,
                              bool with_grads);

// One optimization step. The box pair used for each sample is drawn from
// (cfg.seed, state.step), so a resumed run draws the same boxes. Throws
// numeric_error on a non-finite loss or gradient.
LossReport train_step(ModelState& state, std::span<const data::Quadruple> batch,
                      const TrainConfig& cfg);

// Mean hc loss over full batches of the dataset in file order, nothing
// updated. Boxes: always pair 0, so the number is deterministic for a given
// state. max_batches 0 means all.
double evaluate_loss(const ModelState& state, const data::Dataset& ds,
                     const TrainConfig& cfg, std::size_t max_batches = 0);

struct TrainResult {
  ModelState state;
  std::vector<LossReport> reports;  // eval-cadence records, final step included
  std::filesystem::path metrics_path;     // empty when out_dir was empty
  std::filesystem::path final_checkpoint; // ditto
  std::filesystem::path best_checkpoint;  // ditto
};

// Deterministic loop: the batch for step s is slot s % batches_per_epoch of
// the permutation seeded by (cfg.seed, s / batches_per_epoch), partial tail
// batch dropped. With out_dir set, writes config.json, metrics.jsonl, and
// checkpoints (last 3 kept, plus best.hycn by total loss). On a non-finite
// failure rethrows numeric_error naming the last good checkpoint.
TrainResult train_run(const TrainConfig& cfg, const data::Dataset& ds,
                      const std::filesystem::path& out_dir = {},
                      std::optional<ModelState> resume = std::nullopt);

// Checkpoint container: "HYCN" magic, format version, config echo, named
// parameter and moment blobs, crc32 trailer. Loading verifies all three of
// magic, version, and checksum.
void save_checkpoint(const ModelState& state, const TrainConfig& cfg,
                     std::size_t feature_dim, const std::filesystem::path& path);

struct LoadedCheckpoint {
  ModelState state;
  TrainConfig cfg;
  std::size_t feature_dim = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// JSON text of the effective configuration, embedded in checkpoints and
// written next to metrics logs.
std::string config_echo_json(const TrainConfig& cfg, std::size_t feature_dim);

}  // namespace hycone::train
