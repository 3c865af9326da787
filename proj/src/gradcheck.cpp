#include "hycone/gradcheck.hpp"

#include <cmath>

namespace hycone::train {

namespace {

// Mutable coordinate views over every learnable number in a model.
struct Coord {
  std::string name;
  double* value;
  std::size_t index;
};

std::vector<Coord> coordinates(model::EmbeddingModel& m, bool kappa_learnable) {
  std::vector<Coord> coords;
  auto tower = [&](const char* name, net::MlpParams& p) {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      std::string wn = std::string(name) + ".w" + std::to_string(l);
      for (std::size_t i = 0; i < p.weights[l].numel(); ++i)
        coords.push_back({wn, &p.weights[l].data[i], i});
      std::string bn = std::string(name) + ".b" + std::to_string(l);
      for (std::size_t i = 0; i < p.biases[l].numel(); ++i)
        coords.push_back({bn, &p.biases[l].data[i], i});
    }
  };
  tower("img", m.img);
  tower("txt", m.txt);
  coords.push_back({"scalar.log_tau", &m.scalars.log_tau, 0});
  coords.push_back({"scalar.log_c_img", &m.scalars.log_c_img, 0});
  coords.push_back({"scalar.log_c_txt", &m.scalars.log_c_txt, 0});
  if (kappa_learnable) coords.push_back({"scalar.log_kappa", &m.scalars.log_kappa, 0});
  return coords;
}

}  // namespace

GradCheckReport grad_check(const GradCheckConfig& cfg) {
  if (cfg.batch < 2) throw config_error("grad_check: batch must be >= 2");
  if (!(cfg.h > 0.0)) throw config_error("grad_check: h must be > 0");

  net::EncoderConfig tower;
  tower.input_dim = cfg.feature_dim;
  tower.hidden_dims = cfg.hidden_dims;
  tower.embed_dim = cfg.embed_dim;
  model::EmbeddingModel m =
      model::make_model(tower, tower, mix_seed(cfg.seed, 7), 0.07, 1.0);

  // Random standard-normal batch; boxes reuse the same distribution.
  Rng rng(mix_seed(cfg.seed, 8));
  auto randvec = [&] {
    std::vector<double> v(cfg.feature_dim);
    for (double& x : v) x = rng.normal();
    return v;
  };
  std::vector<data::Quadruple> batch(cfg.batch);
  for (std::size_t i = 0; i < cfg.batch; ++i) {
    batch[i].id = i;
    batch[i].image = randvec();
    batch[i].text = randvec();
    batch[i].image_boxes = {randvec()};
    batch[i].text_boxes = {randvec()};
  }
  BatchTensors x = make_batch_tensors(batch, cfg.feature_dim, mix_seed(cfg.seed, 9));

  GraphEval base = eval_training_graph(m, cfg.kappa_learnable, x, cfg.loss_options, true);

  GradCheckReport report;
  for (Coord& c : coordinates(m, cfg.kappa_learnable)) {
    double saved = *c.value;
    *c.value = saved + cfg.h;
    GraphEval plus = eval_training_graph(m, cfg.kappa_learnable, x, cfg.loss_options, false);
    *c.value = saved - cfg.h;
    GraphEval minus = eval_training_graph(m, cfg.kappa_learnable, x, cfg.loss_options, false);
    *c.value = saved;

    if (plus.branch_signature != base.branch_signature ||
        minus.branch_signature != base.branch_signature) {
      ++report.excluded;
      continue;
    }
    double numeric = (plus.report.total - minus.report.total) / (2.0 * cfg.h);
    double analytic = base.grads.at(c.name).data[c.index];
    double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-4});
    double rel = std::fabs(analytic - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst = {c.name, c.index, analytic, numeric, rel};
    }
  }
  if (report.checked == 0) throw numeric_error("grad_check: every probe crossed a kink");
  report.pass = report.max_rel_err < cfg.tolerance;
  return report;
}

}  // namespace hycone::train
