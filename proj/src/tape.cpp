#include "hycone/tape.hpp"

#include <algorithm>
#include <cmath>

namespace hycone::net {

namespace {

constexpr double kSeriesCutoff = 1e-4;      // small-argument series switch
constexpr double kResidualGuard = 1e-14;    // distance kink at coincidence
constexpr double kAngleGuard = 1e-14;       // on (kappa*<p,q>)^2 - 1
constexpr double kMinSpatialNorm = 1e-8;

double sinhc(double x) {
  if (std::abs(x) < kSeriesCutoff) {
    double x2 = x * x;
    return 1.0 + x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sinh(x) / x;
}

// (cosh(u) - sinhc(u)) / u^2, smooth through 0; equals sinhc'(u)/u.
double dsinhc_over_u(double u) {
  if (std::abs(u) < kSeriesCutoff) {
    double u2 = u * u;
    return 1.0 / 3.0 + u2 / 30.0;
  }
  return (std::cosh(u) - sinhc(u)) / (u * u);
}

double acosh1p(double d) { return std::log1p(d + std::sqrt(d * (d + 2.0))); }

void require_shape(bool ok, const char* op) {
  if (!ok) throw contract_violation(std::string(op) + ": shape mismatch");
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(n, 0.0);
  return t;
}

NodeId Tape::push(Tensor value, bool requires_grad) {
  Node n;
  n.requires_grad = requires_grad;
  if (requires_grad) n.grad = Tensor::zeros(value.shape);
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check_exists(NodeId id, const char* op) const {
  if (id >= nodes_.size())
    throw contract_violation(std::string(op) + ": unknown node id");
}

NodeId Tape::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad);
}

const Tensor& Tape::grad(NodeId id) const {
  const Node& n = nodes_.at(id);
  if (!n.requires_grad)
    throw contract_violation("Tape::grad: node does not track gradients");
  return n.grad;
}

double Tape::scalar_value(NodeId id) const {
  const Tensor& t = value(id);
  if (t.numel() != 1)
    throw contract_violation("Tape::scalar_value: node is not scalar");
  return t.data[0];
}

std::uint64_t Tape::branch_signature() const {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a over branch bytes
  for (std::uint8_t b : branches_) {
    h ^= b;
    h *= 1099511628211ull;
  }
  // Fold in the count so prefixes do not collide.
  h ^= branches_.size();
  h *= 1099511628211ull;
  return h;
}

void Tape::backward(NodeId root) {
  check_exists(root, "backward");
  Node& r = nodes_[root];
  if (r.value.numel() != 1)
    throw contract_violation("backward: root must be scalar");
  if (!r.requires_grad)
    throw contract_violation("backward: root does not track gradients");
  r.grad.data[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backward_fn) n.backward_fn(*this);
  }
}

// ---------------------------------------------------------------------------

NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
  const Tensor& X = value(x);
  const Tensor& W = value(w);
  const Tensor& Bv = value(b);
  require_shape(X.rank() == 2 && W.rank() == 2 && Bv.rank() == 1, "affine");
  std::size_t B = X.rows(), K = X.cols(), M = W.cols();
  require_shape(W.rows() == K && Bv.numel() == M, "affine");
  Tensor out = Tensor::zeros({B, M});
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t k = 0; k < K; ++k) {
      double xv = X.at(i, k);
      for (std::size_t j = 0; j < M; ++j) out.at(i, j) += xv * W.at(k, j);
    }
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < M; ++j) out.at(i, j) += Bv.data[j];
  bool req = needs_grad(x) || needs_grad(w) || needs_grad(b);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, x, w, b, B, K, M](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      const Tensor& Xv = t.value(x);
      const Tensor& Wv = t.value(w);
      if (t.needs_grad(x)) {
        Tensor& gx = t.grad_buf(x);
        for (std::size_t i = 0; i < B; ++i)
          for (std::size_t j = 0; j < M; ++j) {
            double g = G.at(i, j);
            for (std::size_t k = 0; k < K; ++k) gx.at(i, k) += g * Wv.at(k, j);
          }
      }
      if (t.needs_grad(w)) {
        Tensor& gw = t.grad_buf(w);
        for (std::size_t i = 0; i < B; ++i)
          for (std::size_t k = 0; k < K; ++k) {
            double xv = Xv.at(i, k);
            for (std::size_t j = 0; j < M; ++j) gw.at(k, j) += xv * G.at(i, j);
          }
      }
      if (t.needs_grad(b)) {
        Tensor& gb = t.grad_buf(b);
        for (std::size_t i = 0; i < B; ++i)
          for (std::size_t j = 0; j < M; ++j) gb.data[j] += G.at(i, j);
      }
    };
  }
  return id;
}

NodeId Tape::tanh_act(NodeId x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::tanh(v);
  bool req = needs_grad(x);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, x](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      const Tensor& Y = t.value(id);
      Tensor& gx = t.grad_buf(x);
      for (std::size_t i = 0; i < G.numel(); ++i)
        gx.data[i] += G.data[i] * (1.0 - Y.data[i] * Y.data[i]);
    };
  }
  return id;
}

NodeId Tape::softplus_act(NodeId x) {
  Tensor out = value(x);
  for (double& v : out.data)
    v = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  bool req = needs_grad(x);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, x](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      const Tensor& X = t.value(x);
      Tensor& gx = t.grad_buf(x);
      for (std::size_t i = 0; i < G.numel(); ++i)
        gx.data[i] += G.data[i] / (1.0 + std::exp(-X.data[i]));
    };
  }
  return id;
}

NodeId Tape::relu(NodeId x) {
  const Tensor& X = value(x);
  Tensor out = X;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    bool active = out.data[i] > 0.0;
    record_branch(active ? 1 : 0);
    if (!active) out.data[i] = 0.0;
  }
  bool req = needs_grad(x);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, x](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      const Tensor& X2 = t.value(x);
      Tensor& gx = t.grad_buf(x);
      for (std::size_t i = 0; i < G.numel(); ++i)
        if (X2.data[i] > 0.0) gx.data[i] += G.data[i];
    };
  }
  return id;
}

NodeId Tape::exp_scalar(NodeId s) {
  double v = std::exp(scalar_value(s));
  bool req = needs_grad(s);
  NodeId id = push(Tensor::scalar(v), req);
  if (req) {
    nodes_[id].backward_fn = [id, s](Tape& t) {
      t.grad_buf(s).data[0] += t.grad_buf(id).data[0] * t.value(id).data[0];
    };
  }
  return id;
}

NodeId Tape::recip_scalar(NodeId s) {
  double v = scalar_value(s);
  bool req = needs_grad(s);
  NodeId id = push(Tensor::scalar(1.0 / v), req);
  if (req) {
    nodes_[id].backward_fn = [id, s, v](Tape& t) {
      t.grad_buf(s).data[0] += -t.grad_buf(id).data[0] / (v * v);
    };
  }
  return id;
}

NodeId Tape::clamp_scalar(NodeId s, double lo, double hi) {
  double v = scalar_value(s);
  std::uint8_t side = v < lo ? 1 : (v > hi ? 2 : 0);
  record_branch(side);
  bool req = needs_grad(s);
  NodeId id = push(Tensor::scalar(std::clamp(v, lo, hi)), req);
  if (req && side == 0) {
    nodes_[id].backward_fn = [id, s](Tape& t) {
      t.grad_buf(s).data[0] += t.grad_buf(id).data[0];
    };
  }
  return id;
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_shape(A.shape == B.shape, "add");
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += B.data[i];
  bool req = needs_grad(a) || needs_grad(b);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, a, b](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      for (NodeId in : {a, b})
        if (t.needs_grad(in)) {
          Tensor& g = t.grad_buf(in);
          for (std::size_t i = 0; i < G.numel(); ++i) g.data[i] += G.data[i];
        }
    };
  }
  return id;
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_shape(A.shape == B.shape, "sub");
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] -= B.data[i];
  bool req = needs_grad(a) || needs_grad(b);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, a, b](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      if (t.needs_grad(a)) {
        Tensor& g = t.grad_buf(a);
        for (std::size_t i = 0; i < G.numel(); ++i) g.data[i] += G.data[i];
      }
      if (t.needs_grad(b)) {
        Tensor& g = t.grad_buf(b);
        for (std::size_t i = 0; i < G.numel(); ++i) g.data[i] -= G.data[i];
      }
    };
  }
  return id;
}

NodeId Tape::scale_const(NodeId x, double c) {
  Tensor out = value(x);
  for (double& v : out.data) v *= c;
  bool req = needs_grad(x);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, x, c](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      Tensor& g = t.grad_buf(x);
      for (std::size_t i = 0; i < G.numel(); ++i) g.data[i] += c * G.data[i];
    };
  }
  return id;
}

NodeId Tape::scale_by(NodeId x, NodeId s) {
  double sv = scalar_value(s);
  Tensor out = value(x);
  for (double& v : out.data) v *= sv;
  bool req = needs_grad(x) || needs_grad(s);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, x, s, sv](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      if (t.needs_grad(x)) {
        Tensor& g = t.grad_buf(x);
        for (std::size_t i = 0; i < G.numel(); ++i) g.data[i] += sv * G.data[i];
      }
      if (t.needs_grad(s)) {
        const Tensor& X = t.value(x);
        double acc = 0.0;
        for (std::size_t i = 0; i < G.numel(); ++i) acc += G.data[i] * X.data[i];
        t.grad_buf(s).data[0] += acc;
      }
    };
  }
  return id;
}

NodeId Tape::diagonal(NodeId x) {
  const Tensor& X = value(x);
  require_shape(X.rank() == 2 && X.rows() == X.cols(), "diagonal");
  std::size_t B = X.rows();
  Tensor out = Tensor::zeros({B});
  for (std::size_t i = 0; i < B; ++i) out.data[i] = X.at(i, i);
  bool req = needs_grad(x);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, x, B](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      Tensor& g = t.grad_buf(x);
      for (std::size_t i = 0; i < B; ++i) g.at(i, i) += G.data[i];
    };
  }
  return id;
}

NodeId Tape::mean_all(NodeId x) {
  const Tensor& X = value(x);
  if (X.numel() == 0) throw contract_violation("mean_all: empty tensor");
  double acc = 0.0;
  for (double v : X.data) acc += v;
  double inv = 1.0 / static_cast<double>(X.numel());
  bool req = needs_grad(x);
  NodeId id = push(Tensor::scalar(acc * inv), req);
  if (req) {
    nodes_[id].backward_fn = [id, x, inv](Tape& t) {
      double g = t.grad_buf(id).data[0] * inv;
      Tensor& gx = t.grad_buf(x);
      for (double& v : gx.data) v += g;
    };
  }
  return id;
}

NodeId Tape::weighted_sum(std::span<const NodeId> xs, std::span<const double> ws) {
  require_shape(xs.size() == ws.size() && !xs.empty(), "weighted_sum");
  double acc = 0.0;
  bool req = false;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += ws[i] * scalar_value(xs[i]);
    req = req || needs_grad(xs[i]);
  }
  NodeId id = push(Tensor::scalar(acc), req);
  if (req) {
    std::vector<NodeId> ids(xs.begin(), xs.end());
    std::vector<double> wts(ws.begin(), ws.end());
    nodes_[id].backward_fn = [id, ids = std::move(ids), wts = std::move(wts)](Tape& t) {
      double g = t.grad_buf(id).data[0];
      for (std::size_t i = 0; i < ids.size(); ++i)
        if (t.needs_grad(ids[i])) t.grad_buf(ids[i]).data[0] += g * wts[i];
    };
  }
  return id;
}

// ---------------------------------------------------------------------------

NodeId Tape::project_origin(NodeId v, NodeId kappa) {
  const Tensor& V = value(v);
  require_shape(V.rank() == 2, "project_origin");
  double k = scalar_value(kappa);
  std::size_t B = V.rows(), N = V.cols();
  Tensor out = Tensor::zeros({B, N});
  std::vector<double> radius(B);
  for (std::size_t i = 0; i < B; ++i) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < N; ++j) r2 += V.at(i, j) * V.at(i, j);
    double r = std::sqrt(r2);
    radius[i] = r;
    double a = sinhc(std::sqrt(k) * r);
    for (std::size_t j = 0; j < N; ++j) out.at(i, j) = a * V.at(i, j);
  }
  bool req = needs_grad(v) || needs_grad(kappa);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, v, kappa, k, B, N, radius = std::move(radius)](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      const Tensor& V2 = t.value(v);
      double sk = std::sqrt(k);
      double gk = 0.0;
      for (std::size_t i = 0; i < B; ++i) {
        double r = radius[i];
        double u = sk * r;
        double a = sinhc(u);
        double dsu = dsinhc_over_u(u);  // sinhc'(u)/u
        double gv_dot = 0.0;
        for (std::size_t j = 0; j < N; ++j) gv_dot += G.at(i, j) * V2.at(i, j);
        if (t.needs_grad(v)) {
          Tensor& gv = t.grad_buf(v);
          double coef = k * dsu * gv_dot;  // sinhc'(u) * sqrt(k)/r * <g,v>
          for (std::size_t j = 0; j < N; ++j)
            gv.at(i, j) += a * G.at(i, j) + coef * V2.at(i, j);
        }
        // d(out)/d(kappa) = sinhc'(u) * r/(2*sqrt(k)) * v; with r = u/sqrt(k)
        // this collapses to dsu * u^2 / (2k) per unit of <g, v>.
        gk += gv_dot * dsu * u * u / (2.0 * k);
        (void)r;
      }
      if (t.needs_grad(kappa)) t.grad_buf(kappa).data[0] += gk;
    };
  }
  return id;
}

NodeId Tape::time_lift(NodeId spatial, NodeId kappa) {
  const Tensor& X = value(spatial);
  require_shape(X.rank() == 2, "time_lift");
  double k = scalar_value(kappa);
  std::size_t B = X.rows(), N = X.cols();
  Tensor out = Tensor::zeros({B, N + 1});
  for (std::size_t i = 0; i < B; ++i) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < N; ++j) r2 += X.at(i, j) * X.at(i, j);
    out.at(i, 0) = std::sqrt(1.0 / k + r2);
    for (std::size_t j = 0; j < N; ++j) out.at(i, j + 1) = X.at(i, j);
  }
  bool req = needs_grad(spatial) || needs_grad(kappa);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, spatial, kappa, k, B, N](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      const Tensor& Y = t.value(id);
      const Tensor& X2 = t.value(spatial);
      double gk = 0.0;
      for (std::size_t i = 0; i < B; ++i) {
        double t0 = Y.at(i, 0);
        double gt = G.at(i, 0);
        if (t.needs_grad(spatial)) {
          Tensor& gx = t.grad_buf(spatial);
          for (std::size_t j = 0; j < N; ++j)
            gx.at(i, j) += G.at(i, j + 1) + gt * X2.at(i, j) / t0;
        }
        gk += gt * (-1.0 / (2.0 * k * k * t0));
      }
      if (t.needs_grad(kappa)) t.grad_buf(kappa).data[0] += gk;
    };
  }
  return id;
}

NodeId Tape::pairwise_distance(NodeId p_spatial, NodeId q_spatial, NodeId kappa) {
  const Tensor& P = value(p_spatial);
  const Tensor& Q = value(q_spatial);
  require_shape(P.rank() == 2 && Q.rank() == 2 && P.cols() == Q.cols(),
                "pairwise_distance");
  double k = scalar_value(kappa);
  double sk = std::sqrt(k);
  std::size_t B = P.rows(), C = Q.rows(), N = P.cols();
  std::vector<double> a(B), b(C), kp0(B), kq0(C);
  for (std::size_t i = 0; i < B; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < N; ++j) s += P.at(i, j) * P.at(i, j);
    a[i] = s;
    kp0[i] = std::sqrt(1.0 + k * s);  // sqrt(kappa) * time coordinate
  }
  for (std::size_t i = 0; i < C; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < N; ++j) s += Q.at(i, j) * Q.at(i, j);
    b[i] = s;
    kq0[i] = std::sqrt(1.0 + k * s);
  }
  std::vector<double> cross(B * C), delta(B * C);
  Tensor out = Tensor::zeros({B, C});
  parallel_for(B, [&](std::size_t i) {
    for (std::size_t j = 0; j < C; ++j) {
      double c = 0.0, dd = 0.0;
      for (std::size_t d = 0; d < N; ++d) {
        double pv = P.at(i, d), qv = Q.at(j, d);
        c += pv * qv;
        double df = pv - qv;
        dd += df * df;
      }
      double denom = 1.0 + k * c + kp0[i] * kq0[j];
      double del = (k * dd + k * k * (a[i] * b[j] - c * c)) / denom;
      if (del < 0.0) del = 0.0;
      cross[i * C + j] = c;
      delta[i * C + j] = del;
      out.at(i, j) = acosh1p(del) / sk;
    }
  });
  // Branch bytes are recorded serially so the signature is deterministic.
  for (std::size_t i = 0; i < B * C; ++i)
    record_branch(delta[i] < kResidualGuard ? 1 : 0);
  bool req = needs_grad(p_spatial) || needs_grad(q_spatial) || needs_grad(kappa);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, p_spatial, q_spatial, kappa, k, sk, B, C, N,
                              a = std::move(a), b = std::move(b), kp0 = std::move(kp0),
                              kq0 = std::move(kq0), cross = std::move(cross),
                              delta = std::move(delta)](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      const Tensor& D = t.value(id);
      const Tensor& P2 = t.value(p_spatial);
      const Tensor& Q2 = t.value(q_spatial);
      bool need_p = t.needs_grad(p_spatial);
      bool need_q = t.needs_grad(q_spatial);
      bool need_k = t.needs_grad(kappa);
      double gk = 0.0;
      for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < C; ++j) {
          double g = G.at(i, j);
          if (g == 0.0) continue;
          double del = delta[i * C + j];
          if (del < kResidualGuard) continue;  // kink at coincidence
          double w = std::sqrt(del * (del + 2.0));  // sqrt(x^2 - 1)
          double dd_dm = -sk / w;                   // d(dist)/d<p,q>_L
          double ratio_pq = kq0[j] / kp0[i];        // q0/p0
          if (need_p) {
            Tensor& gp = t.grad_buf(p_spatial);
            double coef = g * dd_dm;
            for (std::size_t d = 0; d < N; ++d)
              gp.at(i, d) += coef * (Q2.at(j, d) - ratio_pq * P2.at(i, d));
          }
          if (need_q) {
            Tensor& gq = t.grad_buf(q_spatial);
            double coef = g * dd_dm;
            for (std::size_t d = 0; d < N; ++d)
              gq.at(j, d) += coef * (P2.at(i, d) - Q2.at(j, d) / ratio_pq);
          }
          if (need_k) {
            double c = cross[i * C + j];
            double A = sk * D.at(i, j);  // acosh argument's acosh value
            double dx_dk = -c + a[i] * kq0[j] / (2.0 * kp0[i]) +
                           b[j] * kp0[i] / (2.0 * kq0[j]);
            gk += g * (-A / (2.0 * k * sk) + dx_dk / (sk * w));
          }
        }
      }
      if (need_k) t.grad_buf(kappa).data[0] += gk;
    };
  }
  return id;
}

NodeId Tape::exterior_angle(NodeId p_full, NodeId q_full, NodeId kappa) {
  const Tensor& P = value(p_full);
  const Tensor& Q = value(q_full);
  require_shape(P.rank() == 2 && P.shape == Q.shape && P.cols() >= 2,
                "exterior_angle");
  double k = scalar_value(kappa);
  std::size_t B = P.rows(), M = P.cols();  // M = n + 1
  Tensor out = Tensor::zeros({B});
  // Cache per-row intermediates for the backward pass.
  std::vector<double> mv(B), nqv(B), cv(B);
  std::vector<std::uint8_t> state(B);  // 0 ok, 1 coincident, 2 acos clamped, 3 norm floored
  for (std::size_t i = 0; i < B; ++i) {
    double m = -P.at(i, 0) * Q.at(i, 0);
    for (std::size_t j = 1; j < M; ++j) m += P.at(i, j) * Q.at(i, j);
    double s = k * m;
    double w2 = s * s - 1.0;
    double nq2 = 0.0;
    for (std::size_t j = 1; j < M; ++j) nq2 += Q.at(i, j) * Q.at(i, j);
    double nq = std::sqrt(nq2);
    bool floored = nq < kMinSpatialNorm;
    if (floored) nq = kMinSpatialNorm;
    mv[i] = m;
    nqv[i] = nq;
    if (w2 < kAngleGuard) {
      state[i] = 1;
      out.data[i] = 0.0;
      cv[i] = 1.0;
    } else {
      double c = (P.at(i, 0) + Q.at(i, 0) * s) / (nq * std::sqrt(w2));
      if (c <= -1.0 || c >= 1.0) {
        state[i] = 2;
        c = std::clamp(c, -1.0, 1.0);
      } else {
        state[i] = floored ? 3 : 0;
      }
      cv[i] = c;
      out.data[i] = std::acos(c);
    }
    record_branch(state[i]);
  }
  bool req = needs_grad(p_full) || needs_grad(q_full) || needs_grad(kappa);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, p_full, q_full, kappa, k, B, M, mv = std::move(mv),
                              nqv = std::move(nqv), cv = std::move(cv),
                              state = std::move(state)](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      const Tensor& P2 = t.value(p_full);
      const Tensor& Q2 = t.value(q_full);
      bool need_p = t.needs_grad(p_full);
      bool need_q = t.needs_grad(q_full);
      bool need_k = t.needs_grad(kappa);
      double gk = 0.0;
      for (std::size_t i = 0; i < B; ++i) {
        double g = G.data[i];
        if (g == 0.0 || state[i] == 1 || state[i] == 2) continue;
        double m = mv[i], nq = nqv[i], c = cv[i];
        double s = k * m;
        double w = std::sqrt(s * s - 1.0);
        double den = nq * w;
        double g_c = g * (-1.0 / std::sqrt(1.0 - c * c));
        double g_num = g_c / den;
        double g_den = -g_c * c / den;
        double g_w = g_den * nq;
        double q0 = Q2.at(i, 0), p0 = P2.at(i, 0);
        // num and w both depend on p and q only through s = kappa*<p,q>_L and
        // the bare time coordinates, so (J q) and (J p), J = diag(-1,1,...,1),
        // share one coefficient.
        double coef_j = g_num * q0 * k + g_w * (s / w) * k;
        if (need_p) {
          Tensor& gp = t.grad_buf(p_full);
          gp.at(i, 0) += g_num + coef_j * (-q0);
          for (std::size_t j = 1; j < M; ++j)
            gp.at(i, j) += coef_j * Q2.at(i, j);
        }
        if (need_q) {
          Tensor& gq = t.grad_buf(q_full);
          gq.at(i, 0) += g_num * s + coef_j * (-p0);
          double g_nq = g_den * w;
          bool floored = state[i] == 3;
          for (std::size_t j = 1; j < M; ++j) {
            double v = coef_j * P2.at(i, j);
            if (!floored) v += g_nq * Q2.at(i, j) / nq;
            gq.at(i, j) += v;
          }
        }
        if (need_k) gk += g_num * q0 * m + g_w * (s / w) * m;
      }
      if (need_k) t.grad_buf(kappa).data[0] += gk;
    };
  }
  return id;
}

NodeId Tape::half_aperture(NodeId q_spatial, NodeId kappa, double boundary_k) {
  const Tensor& Q = value(q_spatial);
  require_shape(Q.rank() == 2, "half_aperture");
  if (!(boundary_k > 0.0))
    throw contract_violation("half_aperture: boundary constant must be > 0");
  double k = scalar_value(kappa);
  std::size_t B = Q.rows(), N = Q.cols();
  Tensor out = Tensor::zeros({B});
  std::vector<double> nqv(B), argv(B);
  std::vector<std::uint8_t> state(B);  // 0 ok, 1 clamped, 2 floored
  for (std::size_t i = 0; i < B; ++i) {
    double nq2 = 0.0;
    for (std::size_t j = 0; j < N; ++j) nq2 += Q.at(i, j) * Q.at(i, j);
    double nq = std::sqrt(nq2);
    bool floored = nq < kMinSpatialNorm;
    if (floored) nq = kMinSpatialNorm;
    double arg = 2.0 * boundary_k / (std::sqrt(k) * nq);
    if (arg >= 1.0) {
      state[i] = 1;
      arg = 1.0;
    } else {
      state[i] = floored ? 2 : 0;
    }
    nqv[i] = nq;
    argv[i] = arg;
    out.data[i] = std::asin(arg);
    record_branch(state[i]);
  }
  bool req = needs_grad(q_spatial) || needs_grad(kappa);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, q_spatial, kappa, k, B, N, nqv = std::move(nqv),
                              argv = std::move(argv), state = std::move(state)](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      const Tensor& Q2 = t.value(q_spatial);
      bool need_q = t.needs_grad(q_spatial);
      bool need_k = t.needs_grad(kappa);
      double gk = 0.0;
      for (std::size_t i = 0; i < B; ++i) {
        double g = G.data[i];
        if (g == 0.0 || state[i] == 1) continue;
        double arg = argv[i], nq = nqv[i];
        double g_arg = g / std::sqrt(1.0 - arg * arg);
        if (need_q && state[i] != 2) {
          Tensor& gq = t.grad_buf(q_spatial);
          double coef = g_arg * (-arg / nq) / nq;
          for (std::size_t j = 0; j < N; ++j) gq.at(i, j) += coef * Q2.at(i, j);
        }
        if (need_k) gk += g_arg * (-arg / (2.0 * k));
      }
      if (need_k) t.grad_buf(kappa).data[0] += gk;
    };
  }
  return id;
}

NodeId Tape::logsumexp_rows(NodeId x, bool exclude_diag) {
  const Tensor& X = value(x);
  require_shape(X.rank() == 2, "logsumexp_rows");
  std::size_t B = X.rows(), C = X.cols();
  if (exclude_diag) {
    require_shape(B == C && B >= 2, "logsumexp_rows(exclude_diag)");
  }
  Tensor out = Tensor::zeros({B});
  for (std::size_t i = 0; i < B; ++i) {
    double mx = -HUGE_VAL;
    for (std::size_t j = 0; j < C; ++j) {
      if (exclude_diag && j == i) continue;
      mx = std::max(mx, X.at(i, j));
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      if (exclude_diag && j == i) continue;
      acc += std::exp(X.at(i, j) - mx);
    }
    out.data[i] = mx + std::log(acc);
  }
  bool req = needs_grad(x);
  NodeId id = push(std::move(out), req);
  if (req) {
    nodes_[id].backward_fn = [id, x, B, C, exclude_diag](Tape& t) {
      const Tensor& G = t.grad_buf(id);
      const Tensor& X2 = t.value(x);
      const Tensor& Y = t.value(id);
      Tensor& gx = t.grad_buf(x);
      for (std::size_t i = 0; i < B; ++i) {
        double g = G.data[i];
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < C; ++j) {
          if (exclude_diag && j == i) continue;
          gx.at(i, j) += g * std::exp(X2.at(i, j) - Y.data[i]);
        }
      }
    };
  }
  return id;
}

}  // namespace hycone::net
