#pragma once

#include <span>
#include <string>
#include <vector>

#include "hycone/manifold.hpp"
#include "hycone/tape.hpp"

// Batch losses over quadruples of embedded points: a contrastive part that
// aligns images with texts (boxes are contrasted against whole items of the
// other modality, never against other boxes) and an entailment part that
// pushes specific points into the cones of general ones.
namespace hycone::losses {

struct LossWeights {
  double gamma = 0.1;      // entailment weight in the total
  double eta_inter = 0.7;  // aperture threshold across modalities
  double eta_intra = 1.2;  // aperture threshold within a modality
};

// One flag per loss term; flags zero their term exactly.
struct TermMask {
  bool cont_it = true;        // contrastive(img, txt)
  bool cont_ti = true;        // contrastive(txt, img)
  bool cont_ibox_t = true;    // contrastive(img_box, txt)
  bool cont_tbox_i = true;    // contrastive(txt_box, img)
  bool ent_ibox_tbox = true;  // penalty(img_box under txt_box cone)
  bool ent_it = true;         // penalty(img under txt cone)
  bool ent_i_ibox = true;     // penalty(img under img_box cone)
  bool ent_t_tbox = true;     // penalty(txt under txt_box cone)

  void set(const std::string& term, bool enabled);
  bool get(const std::string& term) const;
  static const std::vector<std::string>& names();
};

struct LossOptions {
  LossWeights weights;
  double boundary_k = 0.1;
  // Score the positive pair only against the other candidates (the softmax
  // denominator excludes the matching index) instead of the default that
  // includes it.
  bool exclusive_denominator = false;
  TermMask mask;
};

// Evaluation-side batch: four aligned lists of points plus the temperature.
struct EmbeddedBatch {
  std::vector<manifold::HyperPoint> img, txt, img_box, txt_box;
  double tau = 0.07;
};

// Graph-side batch: projected spatial coordinate nodes [B, n] per role and
// scalar nodes for tau and kappa (already clamped upstream).
struct BatchNodes {
  net::NodeId img, txt, img_box, txt_box;
  net::NodeId tau, kappa;
};

struct HcNodes {
  net::NodeId hcc, hce, total;
};

// Mean InfoNCE over rows of the anchor/candidate distance matrix with logits
// -d/tau; row i's positive is candidate i. Requires B == C >= 2.
net::NodeId contrastive_term_node(net::Tape& tape, net::NodeId anchors_spatial,
                                  net::NodeId cands_spatial, net::NodeId tau,
                                  net::NodeId kappa, bool exclusive_denominator);

net::NodeId hcc_node(net::Tape& tape, const BatchNodes& batch, const LossOptions& opts);
net::NodeId hce_node(net::Tape& tape, const BatchNodes& batch, const LossOptions& opts);
HcNodes hc_node(net::Tape& tape, const BatchNodes& batch, const LossOptions& opts);

// Plain evaluation on stored points (wraps the graph ops on a scratch tape).
double contrastive_term(std::span<const manifold::HyperPoint> anchors,
                        std::span<const manifold::HyperPoint> cands, double tau,
                        bool exclusive_denominator = false);
double hcc_loss(const EmbeddedBatch& batch, const LossOptions& opts = {});
double hce_loss(const EmbeddedBatch& batch, const LossOptions& opts = {});
double hc_loss(const EmbeddedBatch& batch, const LossOptions& opts = {});

}  // namespace hycone::losses
