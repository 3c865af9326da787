#include "hycone/model.hpp"

namespace hycone::model {

EmbeddingModel make_model(const net::EncoderConfig& img_cfg,
                          const net::EncoderConfig& txt_cfg, std::uint64_t seed,
                          double tau_init, double kappa_init) {
  if (img_cfg.embed_dim != txt_cfg.embed_dim)
    throw config_error("encoder towers must share embed_dim");
  EmbeddingModel m;
  m.img_cfg = img_cfg;
  m.txt_cfg = txt_cfg;
  m.img = net::init_mlp(img_cfg, mix_seed(seed, 10));
  m.txt = net::init_mlp(txt_cfg, mix_seed(seed, 11));
  m.scalars = net::ScalarParams::init(img_cfg.embed_dim, tau_init, kappa_init);
  return m;
}

std::vector<double> encode_image_raw(const EmbeddingModel& m, std::span<const double> x) {
  return net::forward_encoder(m.img_cfg, m.img, x);
}

std::vector<double> encode_text_raw(const EmbeddingModel& m, std::span<const double> x) {
  return net::forward_encoder(m.txt_cfg, m.txt, x);
}

manifold::HyperPoint project_image_raw(const EmbeddingModel& m,
                                       std::span<const double> raw) {
  return manifold::project_to_manifold(raw, m.scalars.c_img(),
                                       manifold::Curvature(m.scalars.kappa()));
}

manifold::HyperPoint project_text_raw(const EmbeddingModel& m,
                                      std::span<const double> raw) {
  return manifold::project_to_manifold(raw, m.scalars.c_txt(),
                                       manifold::Curvature(m.scalars.kappa()));
}

manifold::HyperPoint embed_image(const EmbeddingModel& m, std::span<const double> x) {
  return project_image_raw(m, encode_image_raw(m, x));
}

manifold::HyperPoint embed_text(const EmbeddingModel& m, std::span<const double> x) {
  return project_text_raw(m, encode_text_raw(m, x));
}

}  // namespace hycone::model
