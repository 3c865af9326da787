#include "hycone/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace hycone::net {

ScalarParams ScalarParams::init(std::size_t embed_dim, double tau_init, double kappa_init) {
  if (embed_dim == 0) throw config_error("ScalarParams: embed_dim must be >= 1");
  if (!(tau_init >= kTauMin))
    throw config_error("ScalarParams: tau_init must be >= 0.01");
  if (!(kappa_init >= kKappaMin && kappa_init <= kKappaMax))
    throw config_error("ScalarParams: kappa_init must lie in [0.1, 10.0]");
  ScalarParams s;
  s.log_tau = std::log(tau_init);
  // Embedding scales start at 1/sqrt(embed_dim).
  s.log_c_img = -0.5 * std::log(static_cast<double>(embed_dim));
  s.log_c_txt = s.log_c_img;
  s.log_kappa = std::log(kappa_init);
  return s;
}

void ScalarParams::project() {
  log_tau = std::max(log_tau, std::log(kTauMin));
  log_kappa = std::clamp(log_kappa, std::log(kKappaMin), std::log(kKappaMax));
}

double ScalarParams::tau() const { return std::max(std::exp(log_tau), kTauMin); }
double ScalarParams::c_img() const { return std::exp(log_c_img); }
double ScalarParams::c_txt() const { return std::exp(log_c_txt); }
double ScalarParams::kappa() const {
  return std::clamp(std::exp(log_kappa), kKappaMin, kKappaMax);
}

void adamw_step(std::vector<ParamRef>& params, const std::map<std::string, Tensor>& grads,
                AdamWState& state, double lr, const AdamWConfig& cfg) {
  std::uint64_t t = state.t + 1;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (ParamRef& p : params) {
    Tensor& w = *p.tensor;
    auto [it, inserted] = state.moments.try_emplace(p.name);
    MomentPair& mom = it->second;
    if (inserted) {
      mom.m = Tensor::zeros(w.shape);
      mom.v = Tensor::zeros(w.shape);
    } else if (mom.m.shape != w.shape) {
      throw contract_violation("adamw_step: moment shape mismatch for " + p.name);
    }
    const Tensor* g = nullptr;
    if (auto git = grads.find(p.name); git != grads.end()) {
      if (git->second.shape != w.shape)
        throw contract_violation("adamw_step: gradient shape mismatch for " + p.name);
      g = &git->second;
    }
    for (std::size_t i = 0; i < w.numel(); ++i) {
      double gv = g ? g->data[i] : 0.0;
      if (!std::isfinite(gv))
        throw numeric_error("adamw_step: non-finite gradient for " + p.name);
      if (p.decay) w.data[i] -= lr * cfg.weight_decay * w.data[i];
      mom.m.data[i] = cfg.beta1 * mom.m.data[i] + (1.0 - cfg.beta1) * gv;
      mom.v.data[i] = cfg.beta2 * mom.v.data[i] + (1.0 - cfg.beta2) * gv * gv;
      double mhat = mom.m.data[i] / bc1;
      double vhat = mom.v.data[i] / bc2;
      w.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  state.t = t;
}

double lr_at(std::uint64_t step, std::uint64_t total, std::uint64_t warmup, double max_lr) {
  if (warmup > total) throw config_error("lr_at: warmup must be <= total");
  if (step < warmup)
    return max_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (total == warmup) return max_lr;
  if (step >= total) return 0.0;
  double t = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
  return max_lr * 0.5 * (1.0 + std::cos(M_PI * t));
}

}  // namespace hycone::net
