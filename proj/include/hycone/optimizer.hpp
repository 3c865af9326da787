#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hycone/tape.hpp"

namespace hycone::net {

// Learnable scalars are stored and updated in log space. project() re-applies
// the range constraints after an optimizer step; the forward pass additionally
// clamps the exponentiated values, so in-range parameters see a pure
// straight-through gradient and out-of-range values never leak into a loss.
struct ScalarParams {
  double log_tau = 0.0;
  double log_c_img = 0.0;
  double log_c_txt = 0.0;
  double log_kappa = 0.0;

  static constexpr double kTauMin = 0.01;
  static constexpr double kKappaMin = 0.1;
  static constexpr double kKappaMax = 10.0;

  static ScalarParams init(std::size_t embed_dim, double tau_init, double kappa_init);
  void project();

  double tau() const;
  double c_img() const;
  double c_txt() const;
  double kappa() const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 0.2;
};

struct MomentPair {
  Tensor m, v;
};

struct AdamWState {
  std::uint64_t t = 0;  // completed steps (bias correction uses t+1)
  std::map<std::string, MomentPair> moments;
};

// A named parameter tensor; decay selects decoupled weight decay (off for the
// learnable scalars).
struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
  bool decay = true;
};

// One decoupled-decay Adam step at the given rate. Gradients are looked up by
// parameter name; a missing entry means zero gradient (decay still applies).
// Non-finite gradients raise numeric_error naming the parameter.
void adamw_step(std::vector<ParamRef>& params, const std::map<std::string, Tensor>& grads,
                AdamWState& state, double lr, const AdamWConfig& cfg);

// Linear warmup from zero to max_lr over warmup steps, then cosine decay to
// zero at total: lr_at(0) = 0, lr_at(warmup) = max_lr, lr_at(total) = 0.
// Requires warmup <= total.
double lr_at(std::uint64_t step, std::uint64_t total, std::uint64_t warmup, double max_lr);

}  // namespace hycone::net
