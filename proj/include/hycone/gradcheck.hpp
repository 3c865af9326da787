#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hycone/trainer.hpp"

namespace hycone::train {

// Central finite-difference audit of the full training-graph gradient on a
// random model and batch. Probes that flip any forward branch (a hinge,
// clamp, or guard) between theta-h and theta+h are excluded; the analytic
// gradient has a one-sided derivative there that the symmetric difference
// cannot see.
struct GradCheckConfig {
  std::size_t feature_dim = 8;
  std::size_t batch = 4;
  std::vector<std::size_t> hidden_dims = {16};
  std::size_t embed_dim = 8;
  std::uint64_t seed = 0;
  double h = 1e-4;
  double tolerance = 1e-3;
  bool kappa_learnable = true;
  losses::LossOptions loss_options;  // Appendix-style defaults
};

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t excluded = 0;  // kink crossings
  double max_rel_err = 0.0;
  GradCheckEntry worst;
  bool pass = false;
};

// rel_err = |analytic - numeric| / max(|analytic|, |numeric|, 1e-4); the
// floor keeps near-zero coordinates from amplifying finite-difference
// roundoff (~1e-8 absolute at h = 1e-4) past the tolerance.
GradCheckReport grad_check(const GradCheckConfig& cfg);

}  // namespace hycone::train
