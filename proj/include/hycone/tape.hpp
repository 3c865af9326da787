#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "hycone/common.hpp"

// Reverse-mode automatic differentiation over dense tensors. Execution is
// eager: each op computes its value at construction and records a closure
// that scatters upstream gradients to its inputs. Node ids are creation
// order, which is a topological order, so backward() is a reverse sweep.
namespace hycone::net {

struct Tensor {
  std::vector<std::size_t> shape;  // rank 0 (scalar), 1, or 2
  std::vector<double> data;

  static Tensor scalar(double v) { return Tensor{{}, {v}}; }
  static Tensor zeros(std::vector<std::size_t> shape);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return rank() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return rank() == 2 ? shape[1] : numel(); }
  double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }
};

using NodeId = std::uint32_t;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  NodeId leaf(Tensor value, bool requires_grad = false);
  NodeId constant(double v) { return leaf(Tensor::scalar(v), false); }

  // -- dense network ops ----------------------------------------------------
  NodeId affine(NodeId x, NodeId w, NodeId b);   // [B,k]x[k,m]+[m] -> [B,m]
  NodeId tanh_act(NodeId x);
  NodeId softplus_act(NodeId x);
  NodeId relu(NodeId x);

  // -- scalar ops -----------------------------------------------------------
  NodeId exp_scalar(NodeId s);
  NodeId recip_scalar(NodeId s);
  // Forward clamps into [lo, hi]; gradient passes when the input is within
  // the closed interval and is zeroed when strictly outside (the clamp binds).
  NodeId clamp_scalar(NodeId s, double lo, double hi);

  // -- elementwise / shaping ------------------------------------------------
  NodeId add(NodeId a, NodeId b);                // same shape
  NodeId sub(NodeId a, NodeId b);                // same shape
  NodeId scale_const(NodeId x, double c);
  NodeId scale_by(NodeId x, NodeId s);           // tensor * scalar node
  NodeId diagonal(NodeId x);                     // [B,B] -> [B]
  NodeId mean_all(NodeId x);                     // -> scalar
  NodeId weighted_sum(std::span<const NodeId> xs, std::span<const double> ws);

  // -- manifold ops ---------------------------------------------------------
  // Spatial part of the origin exp map applied row-wise: v -> sinhc(u) * v
  // with u = sqrt(kappa) * |v|.
  NodeId project_origin(NodeId v, NodeId kappa);
  // Rows gain a derived leading time coordinate: [B,n] -> [B,n+1].
  NodeId time_lift(NodeId spatial, NodeId kappa);
  // Geodesic distance for every (row of p) x (row of q) pair from spatial
  // coordinates: [B,n] x [C,n] -> [B,C]. Uses the cancellation-free residual
  // form of the acosh argument; pairs with residual < 1e-14 produce d = 0
  // with zero gradient.
  NodeId pairwise_distance(NodeId p_spatial, NodeId q_spatial, NodeId kappa);

  // -- cone ops -------------------------------------------------------------
  // Row-aligned exterior angle from full (time-lifted) coordinates:
  // [B,n+1] x [B,n+1] -> [B]. Guards mirror the scalar implementation and
  // zero the gradient where they bind.
  NodeId exterior_angle(NodeId p_full, NodeId q_full, NodeId kappa);
  // Row-wise half-aperture from spatial coordinates: [B,n] -> [B].
  NodeId half_aperture(NodeId q_spatial, NodeId kappa, double boundary_k);

  // -- reductions -----------------------------------------------------------
  // Row-wise log(sum(exp)), stabilized by the row max. With exclude_diag the
  // diagonal entry of a square input is left out of its row's sum.
  NodeId logsumexp_rows(NodeId x, bool exclude_diag = false);

  // -- engine ---------------------------------------------------------------
  // Seeds d(root)/d(root) = 1 and sweeps the tape in reverse creation order.
  // root must be scalar.
  void backward(NodeId root);

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  const Tensor& grad(NodeId id) const;
  double scalar_value(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  // Hash over every branch decision (hinges, clamps, guards) taken during
  // forward construction. Two evaluations of the same graph shape taking the
  // same branches hash equal; finite-difference probes use this to detect
  // kink crossings.
  std::uint64_t branch_signature() const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated iff requires_grad
    bool requires_grad = false;
    std::function<void(Tape&)> backward_fn;
  };

  NodeId push(Tensor value, bool requires_grad);
  bool needs_grad(NodeId id) const { return nodes_[id].requires_grad; }
  Tensor& grad_buf(NodeId id) { return nodes_[id].grad; }
  void record_branch(std::uint8_t b) { branches_.push_back(b); }
  void check_exists(NodeId id, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<std::uint8_t> branches_;
};

}  // namespace hycone::net
