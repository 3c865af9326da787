#include "doctest.h"

#include <cmath>
#include <vector>

#include "hycone/common.hpp"
#include "hycone/encoder.hpp"

using namespace hycone;
using namespace hycone::net;

TEST_CASE("layer shapes chain input, hidden, and embed dims") {
  EncoderConfig cfg;
  cfg.input_dim = 8;
  cfg.hidden_dims = {16};
  cfg.embed_dim = 4;
  auto shapes = layer_shapes(cfg);
  REQUIRE(shapes.size() == 2);
  CHECK(shapes[0] == std::pair<std::size_t, std::size_t>{8, 16});
  CHECK(shapes[1] == std::pair<std::size_t, std::size_t>{16, 4});

  cfg.hidden_dims.clear();
  shapes = layer_shapes(cfg);
  REQUIRE(shapes.size() == 1);
  CHECK(shapes[0] == std::pair<std::size_t, std::size_t>{8, 4});
}

TEST_CASE("init is deterministic, zero-biased, and Glorot-bounded") {
  EncoderConfig cfg;
  cfg.input_dim = 6;
  cfg.hidden_dims = {10, 5};
  cfg.embed_dim = 3;

  MlpParams a = init_mlp(cfg, 42);
  MlpParams b = init_mlp(cfg, 42);
  MlpParams c = init_mlp(cfg, 43);

  REQUIRE(a.weights.size() == 3);
  REQUIRE(a.biases.size() == 3);

  bool identical = true, differs = false;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    identical = identical && (a.weights[l].data == b.weights[l].data);
    differs = differs || (a.weights[l].data != c.weights[l].data);
    for (double bias : a.biases[l].data) CHECK(bias == 0.0);
    auto [in, out] = std::pair{a.weights[l].shape[0], a.weights[l].shape[1]};
    double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double w : a.weights[l].data) CHECK(std::abs(w) <= bound);
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("a hand-built identity layer passes inputs through") {
  EncoderConfig cfg;
  cfg.input_dim = 3;
  cfg.embed_dim = 3;  // no hidden layers: single affine, no activation

  MlpParams params;
  Tensor w = Tensor::zeros({3, 3});
  for (std::size_t i = 0; i < 3; ++i) w.at(i, i) = 1.0;
  params.weights.push_back(w);
  params.biases.push_back(Tensor::zeros({3}));

  std::vector<double> x = {0.3, -1.7, 2.5};
  CHECK(forward_encoder(cfg, params, x) == x);
}

TEST_CASE("the final layer applies no activation") {
  EncoderConfig cfg;
  cfg.input_dim = 2;
  cfg.embed_dim = 2;
  MlpParams params;
  Tensor w = Tensor::zeros({2, 2});
  w.at(0, 0) = 5.0;  // tanh would squash this below 1
  w.at(1, 1) = 5.0;
  params.weights.push_back(w);
  params.biases.push_back(Tensor{{2}, {0.0, 100.0}});

  auto y = forward_encoder(cfg, params, std::vector<double>{1.0, 1.0});
  CHECK(y == std::vector<double>{5.0, 105.0});
}

TEST_CASE("plain forward and graph forward agree bitwise") {
  for (Activation act : {Activation::tanh, Activation::softplus}) {
    EncoderConfig cfg;
    cfg.input_dim = 5;
    cfg.hidden_dims = {7, 4};
    cfg.embed_dim = 6;
    cfg.activation = act;
    MlpParams params = init_mlp(cfg, 7);

    Rng rng(99);
    const std::size_t B = 3;
    Tensor x = Tensor::zeros({B, cfg.input_dim});
    for (auto& v : x.data) v = rng.normal();

    Tape tape;
    std::vector<NodeId> w_ids, b_ids;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      w_ids.push_back(tape.leaf(params.weights[l]));
      b_ids.push_back(tape.leaf(params.biases[l]));
    }
    NodeId xn = tape.leaf(x);
    NodeId out = encoder_graph(tape, cfg, w_ids, b_ids, xn);
    const Tensor& Y = tape.value(out);
    REQUIRE(Y.shape == std::vector<std::size_t>{B, cfg.embed_dim});

    for (std::size_t r = 0; r < B; ++r) {
      std::vector<double> row(cfg.input_dim);
      for (std::size_t cidx = 0; cidx < cfg.input_dim; ++cidx)
        row[cidx] = x.at(r, cidx);
      std::vector<double> want = forward_encoder(cfg, params, row);
      for (std::size_t cidx = 0; cidx < cfg.embed_dim; ++cidx)
        CHECK(Y.at(r, cidx) == want[cidx]);
    }
  }
}

TEST_CASE("activation names round-trip and reject unknowns") {
  CHECK(activation_name(Activation::tanh) == "tanh");
  CHECK(activation_name(Activation::softplus) == "softplus");
  CHECK(activation_from_name("tanh") == Activation::tanh);
  CHECK(activation_from_name("softplus") == Activation::softplus);
  CHECK_THROWS_AS(activation_from_name("gelu"), config_error);
}

TEST_CASE("forward rejects mismatched input width") {
  EncoderConfig cfg;
  cfg.input_dim = 4;
  cfg.embed_dim = 2;
  MlpParams params = init_mlp(cfg, 1);
  CHECK_THROWS_AS(forward_encoder(cfg, params, std::vector<double>{1.0, 2.0}),
                  contract_violation);
}
