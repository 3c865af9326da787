#include "hycone/losses.hpp"

#include <array>

namespace hycone::losses {

void TermMask::set(const std::string& term, bool enabled) {
  if (term == "cont_IT") cont_it = enabled;
  else if (term == "cont_TI") cont_ti = enabled;
  else if (term == "cont_IboxT") cont_ibox_t = enabled;
  else if (term == "cont_TboxI") cont_tbox_i = enabled;
  else if (term == "ent_IboxTbox") ent_ibox_tbox = enabled;
  else if (term == "ent_IT") ent_it = enabled;
  else if (term == "ent_IIbox") ent_i_ibox = enabled;
  else if (term == "ent_TTbox") ent_t_tbox = enabled;
  else throw config_error("unknown loss term: " + term);
}

bool TermMask::get(const std::string& term) const {
  if (term == "cont_IT") return cont_it;
  if (term == "cont_TI") return cont_ti;
  if (term == "cont_IboxT") return cont_ibox_t;
  if (term == "cont_TboxI") return cont_tbox_i;
  if (term == "ent_IboxTbox") return ent_ibox_tbox;
  if (term == "ent_IT") return ent_it;
  if (term == "ent_IIbox") return ent_i_ibox;
  if (term == "ent_TTbox") return ent_t_tbox;
  throw config_error("unknown loss term: " + term);
}

const std::vector<std::string>& TermMask::names() {
  static const std::vector<std::string> kNames = {
      "cont_IT",      "cont_TI", "cont_IboxT", "cont_TboxI",
      "ent_IboxTbox", "ent_IT",  "ent_IIbox",  "ent_TTbox"};
  return kNames;
}

net::NodeId contrastive_term_node(net::Tape& tape, net::NodeId anchors_spatial,
                                  net::NodeId cands_spatial, net::NodeId tau,
                                  net::NodeId kappa, bool exclusive_denominator) {
  const net::Tensor& A = tape.value(anchors_spatial);
  const net::Tensor& C = tape.value(cands_spatial);
  if (A.rank() != 2 || C.rank() != 2 || A.rows() != C.rows() || A.rows() < 2)
    throw contract_violation("contrastive_term: needs aligned batches with B >= 2");
  net::NodeId d = tape.pairwise_distance(anchors_spatial, cands_spatial, kappa);
  net::NodeId logits = tape.scale_const(tape.scale_by(d, tape.recip_scalar(tau)), -1.0);
  net::NodeId lse = tape.logsumexp_rows(logits, exclusive_denominator);
  net::NodeId pos = tape.diagonal(logits);
  return tape.mean_all(tape.sub(lse, pos));
}

namespace {

net::NodeId zero_scalar(net::Tape& tape) { return tape.constant(0.0); }

net::NodeId masked_sum(net::Tape& tape, const std::vector<net::NodeId>& terms,
                       const std::vector<double>& weights) {
  if (terms.empty()) return zero_scalar(tape);
  return tape.weighted_sum(terms, weights);
}

// mean over the batch of max(0, angle(specific, general) - eta * aperture(general))
net::NodeId penalty_term(net::Tape& tape, net::NodeId spec_full, net::NodeId gen_full,
                         net::NodeId gen_spatial, net::NodeId kappa, double eta,
                         double boundary_k) {
  net::NodeId phi = tape.exterior_angle(spec_full, gen_full, kappa);
  net::NodeId omega = tape.half_aperture(gen_spatial, kappa, boundary_k);
  net::NodeId margin = tape.sub(phi, tape.scale_const(omega, eta));
  return tape.mean_all(tape.relu(margin));
}

}  // namespace

net::NodeId hcc_node(net::Tape& tape, const BatchNodes& batch, const LossOptions& opts) {
  std::vector<net::NodeId> terms;
  std::vector<double> weights;
  auto add = [&](bool on, net::NodeId anchors, net::NodeId cands) {
    if (!on) return;
    terms.push_back(contrastive_term_node(tape, anchors, cands, batch.tau, batch.kappa,
                                          opts.exclusive_denominator));
    weights.push_back(0.25);
  };
  add(opts.mask.cont_it, batch.img, batch.txt);
  add(opts.mask.cont_ti, batch.txt, batch.img);
  add(opts.mask.cont_ibox_t, batch.img_box, batch.txt);
  add(opts.mask.cont_tbox_i, batch.txt_box, batch.img);
  return masked_sum(tape, terms, weights);
}

net::NodeId hce_node(net::Tape& tape, const BatchNodes& batch, const LossOptions& opts) {
  const TermMask& m = opts.mask;
  if (!m.ent_ibox_tbox && !m.ent_it && !m.ent_i_ibox && !m.ent_t_tbox)
    return zero_scalar(tape);
  net::NodeId img_full = tape.time_lift(batch.img, batch.kappa);
  net::NodeId txt_full = tape.time_lift(batch.txt, batch.kappa);
  net::NodeId ibox_full = tape.time_lift(batch.img_box, batch.kappa);
  net::NodeId tbox_full = tape.time_lift(batch.txt_box, batch.kappa);
  const double k = opts.boundary_k;
  const LossWeights& w = opts.weights;
  std::vector<net::NodeId> terms;
  std::vector<double> weights;
  auto add = [&](bool on, net::NodeId spec, net::NodeId gen, net::NodeId gen_spat,
                 double eta) {
    if (!on) return;
    terms.push_back(penalty_term(tape, spec, gen, gen_spat, batch.kappa, eta, k));
    weights.push_back(1.0);
  };
  add(m.ent_ibox_tbox, ibox_full, tbox_full, batch.txt_box, w.eta_inter);
  add(m.ent_it, img_full, txt_full, batch.txt, w.eta_inter);
  add(m.ent_i_ibox, img_full, ibox_full, batch.img_box, w.eta_intra);
  add(m.ent_t_tbox, txt_full, tbox_full, batch.txt_box, w.eta_intra);
  return masked_sum(tape, terms, weights);
}

HcNodes hc_node(net::Tape& tape, const BatchNodes& batch, const LossOptions& opts) {
  HcNodes out;
  out.hcc = hcc_node(tape, batch, opts);
  out.hce = hce_node(tape, batch, opts);
  std::array<net::NodeId, 2> parts = {out.hcc, out.hce};
  std::array<double, 2> weights = {1.0, opts.weights.gamma};
  out.total = tape.weighted_sum(parts, weights);
  return out;
}

namespace {

net::Tensor spatial_matrix(std::span<const manifold::HyperPoint> pts, double kappa,
                           const char* what) {
  if (pts.empty()) throw contract_violation(std::string(what) + ": empty batch");
  std::size_t n = pts[0].dim();
  net::Tensor t = net::Tensor::zeros({pts.size(), n});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].dim() != n)
      throw contract_violation(std::string(what) + ": dimension mismatch in batch");
    if (pts[i].kappa != kappa)
      throw contract_violation(std::string(what) + ": curvature mismatch in batch");
    for (std::size_t j = 0; j < n; ++j) t.at(i, j) = pts[i].spatial[j];
  }
  return t;
}

struct BatchGraph {
  net::Tape tape;
  BatchNodes nodes;
};

void build_batch(BatchGraph& g, const EmbeddedBatch& batch) {
  std::size_t b = batch.img.size();
  if (batch.txt.size() != b || batch.img_box.size() != b || batch.txt_box.size() != b)
    throw contract_violation("EmbeddedBatch: role lists must have equal length");
  if (b < 2) throw contract_violation("EmbeddedBatch: batch size must be >= 2");
  if (!(batch.tau > 0.0)) throw contract_violation("EmbeddedBatch: tau must be > 0");
  double kappa = batch.img[0].kappa;
  g.nodes.img = g.tape.leaf(spatial_matrix(batch.img, kappa, "img"));
  g.nodes.txt = g.tape.leaf(spatial_matrix(batch.txt, kappa, "txt"));
  g.nodes.img_box = g.tape.leaf(spatial_matrix(batch.img_box, kappa, "img_box"));
  g.nodes.txt_box = g.tape.leaf(spatial_matrix(batch.txt_box, kappa, "txt_box"));
  g.nodes.tau = g.tape.constant(batch.tau);
  g.nodes.kappa = g.tape.constant(kappa);
}

}  // namespace

double contrastive_term(std::span<const manifold::HyperPoint> anchors,
                        std::span<const manifold::HyperPoint> cands, double tau,
                        bool exclusive_denominator) {
  if (anchors.size() != cands.size() || anchors.size() < 2)
    throw contract_violation("contrastive_term: needs aligned batches with B >= 2");
  if (!(tau > 0.0)) throw contract_violation("contrastive_term: tau must be > 0");
  double kappa = anchors[0].kappa;
  net::Tape tape;
  net::NodeId a = tape.leaf(spatial_matrix(anchors, kappa, "anchors"));
  net::NodeId c = tape.leaf(spatial_matrix(cands, kappa, "cands"));
  net::NodeId out = contrastive_term_node(tape, a, c, tape.constant(tau),
                                          tape.constant(kappa), exclusive_denominator);
  return tape.scalar_value(out);
}

double hcc_loss(const EmbeddedBatch& batch, const LossOptions& opts) {
  BatchGraph g;
  build_batch(g, batch);
  return g.tape.scalar_value(hcc_node(g.tape, g.nodes, opts));
}

double hce_loss(const EmbeddedBatch& batch, const LossOptions& opts) {
  BatchGraph g;
  build_batch(g, batch);
  return g.tape.scalar_value(hce_node(g.tape, g.nodes, opts));
}

double hc_loss(const EmbeddedBatch& batch, const LossOptions& opts) {
  BatchGraph g;
  build_batch(g, batch);
  return g.tape.scalar_value(hc_node(g.tape, g.nodes, opts).total);
}

}  // namespace hycone::losses
