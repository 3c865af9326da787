#include "hycone/encoder.hpp"

#include <cmath>

namespace hycone::net {

std::vector<std::pair<std::size_t, std::size_t>> layer_shapes(const EncoderConfig& cfg) {
  if (cfg.input_dim == 0 || cfg.embed_dim == 0)
    throw config_error("encoder: input_dim and embed_dim must be >= 1");
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  std::size_t in = cfg.input_dim;
  for (std::size_t h : cfg.hidden_dims) {
    if (h == 0) throw config_error("encoder: hidden dims must be >= 1");
    shapes.emplace_back(in, h);
    in = h;
  }
  shapes.emplace_back(in, cfg.embed_dim);
  return shapes;
}

MlpParams init_mlp(const EncoderConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  MlpParams p;
  for (auto [in, out] : layer_shapes(cfg)) {
    double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w = Tensor::zeros({in, out});
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Tensor::zeros({out}));
  }
  return p;
}

namespace {

double activate(Activation a, double v) {
  switch (a) {
    case Activation::tanh:
      return std::tanh(v);
    case Activation::softplus:
      return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  }
  throw contract_violation("encoder: unknown activation");
}

}  // namespace

std::vector<double> forward_encoder(const EncoderConfig& cfg, const MlpParams& params,
                                    std::span<const double> x) {
  auto shapes = layer_shapes(cfg);
  if (params.weights.size() != shapes.size() || params.biases.size() != shapes.size())
    throw contract_violation("forward_encoder: parameter count mismatch");
  if (x.size() != cfg.input_dim)
    throw contract_violation("forward_encoder: input dimension mismatch");
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    auto [in, out] = shapes[l];
    const Tensor& w = params.weights[l];
    const Tensor& b = params.biases[l];
    if (w.shape != std::vector<std::size_t>{in, out} || b.numel() != out)
      throw contract_violation("forward_encoder: parameter shape mismatch");
    std::vector<double> next(out, 0.0);
    // Accumulation order matches Tape::affine so both paths agree bitwise.
    for (std::size_t k = 0; k < in; ++k) {
      double xv = cur[k];
      for (std::size_t j = 0; j < out; ++j) next[j] += xv * w.at(k, j);
    }
    for (std::size_t j = 0; j < out; ++j) next[j] += b.data[j];
    if (l + 1 < shapes.size())
      for (double& v : next) v = activate(cfg.activation, v);
    cur = std::move(next);
  }
  return cur;
}

NodeId encoder_graph(Tape& tape, const EncoderConfig& cfg, std::span<const NodeId> w_ids,
                     std::span<const NodeId> b_ids, NodeId x) {
  auto shapes = layer_shapes(cfg);
  if (w_ids.size() != shapes.size() || b_ids.size() != shapes.size())
    throw contract_violation("encoder_graph: parameter count mismatch");
  NodeId cur = x;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    cur = tape.affine(cur, w_ids[l], b_ids[l]);
    if (l + 1 < shapes.size())
      cur = cfg.activation == Activation::tanh ? tape.tanh_act(cur)
                                               : tape.softplus_act(cur);
  }
  return cur;
}

std::string activation_name(Activation a) {
  return a == Activation::tanh ? "tanh" : "softplus";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "softplus") return Activation::softplus;
  throw config_error("unknown activation: " + name);
}

}  // namespace hycone::net
