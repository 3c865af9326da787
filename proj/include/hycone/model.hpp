#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hycone/encoder.hpp"
#include "hycone/manifold.hpp"
#include "hycone/optimizer.hpp"

namespace hycone::model {

// Two encoder towers plus the learnable scalars. Boxes go through the same
// tower as their modality's full item.
struct EmbeddingModel {
  net::EncoderConfig img_cfg, txt_cfg;
  net::MlpParams img, txt;
  net::ScalarParams scalars;
};

// Fresh model with Glorot towers and Appendix-style scalar inits. Towers
// must agree on embed_dim.
EmbeddingModel make_model(const net::EncoderConfig& img_cfg,
                          const net::EncoderConfig& txt_cfg, std::uint64_t seed,
                          double tau_init = 0.07, double kappa_init = 1.0);

// Raw tangent-space encoder outputs, before scaling and projection.
std::vector<double> encode_image_raw(const EmbeddingModel& m, std::span<const double> x);
std::vector<double> encode_text_raw(const EmbeddingModel& m, std::span<const double> x);

// Lifts an already-encoded raw vector onto the manifold with the modality
// scale (used for averaged prompt embeddings).
manifold::HyperPoint project_image_raw(const EmbeddingModel& m, std::span<const double> raw);
manifold::HyperPoint project_text_raw(const EmbeddingModel& m, std::span<const double> raw);

// encode + scale + project in one step.
manifold::HyperPoint embed_image(const EmbeddingModel& m, std::span<const double> x);
manifold::HyperPoint embed_text(const EmbeddingModel& m, std::span<const double> x);

}  // namespace hycone::model
