#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hycone/tape.hpp"

namespace hycone::net {

enum class Activation { tanh, softplus };

struct EncoderConfig {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden_dims;  // empty -> single affine layer
  std::size_t embed_dim = 32;
  Activation activation = Activation::tanh;
};

// Dense MLP parameters; weights[l] has shape [in_l, out_l].
struct MlpParams {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
};

// Uniform Glorot init, biases zero. Deterministic in (config, seed).
MlpParams init_mlp(const EncoderConfig& cfg, std::uint64_t seed);

// Plain (tape-free) forward for one input vector. Bitwise identical to the
// graph forward below given the same parameters.
std::vector<double> forward_encoder(const EncoderConfig& cfg, const MlpParams& params,
                                    std::span<const double> x);

// Builds the same network on a tape. w_ids/b_ids are the per-layer parameter
// leaves, x is a [B, input_dim] node; returns a [B, embed_dim] node.
NodeId encoder_graph(Tape& tape, const EncoderConfig& cfg, std::span<const NodeId> w_ids,
                     std::span<const NodeId> b_ids, NodeId x);

// Layer shape list [in_0, out_0], [in_1, out_1], ... for a config.
std::vector<std::pair<std::size_t, std::size_t>> layer_shapes(const EncoderConfig& cfg);

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

}  // namespace hycone::net
