#include "hycone/trainer.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace hycone::train {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Stream tags keep the box-pick and shuffle RNG streams apart.
constexpr std::uint64_t kBoxStream = 101;
constexpr std::uint64_t kShuffleStream = 202;

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(p[i], p[rng.index(i + 1)]);
  return p;
}

double mean_row_norm(const net::Tensor& rows) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < rows.cols(); ++j) sq += rows.at(i, j) * rows.at(i, j);
    sum += std::sqrt(sq);
  }
  return rows.rows() ? sum / static_cast<double>(rows.rows()) : 0.0;
}

ordered_json report_json(const LossReport& r) {
  ordered_json j;
  j["step"] = r.step;
  j["hcc"] = r.hcc;
  j["hce"] = r.hce;
  j["total"] = r.total;
  j["tau"] = r.tau;
  j["kappa"] = r.kappa;
  j["radius_img"] = r.radius_img;
  j["radius_txt"] = r.radius_txt;
  j["radius_img_box"] = r.radius_img_box;
  j["radius_txt_box"] = r.radius_txt_box;
  j["lr"] = r.lr;
  return j;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2) throw config_error("train: batch_size must be >= 2");
  if (embed_dim < 1) throw config_error("train: embed_dim must be >= 1");
  for (std::size_t h : hidden_dims)
    if (h < 1) throw config_error("train: hidden dims must be >= 1");
  if (warmup_steps > total_steps)
    throw config_error("train: warmup_steps must be <= total_steps");
  if (!(max_lr > 0.0)) throw config_error("train: max_lr must be > 0");
  if (!(gamma >= 0.0)) throw config_error("train: gamma must be >= 0");
  if (!(eta_inter >= 0.0) || !(eta_intra >= 0.0))
    throw config_error("train: eta thresholds must be >= 0");
  if (!(boundary_k > 0.0)) throw config_error("train: K must be > 0");
  if (!(tau_init >= net::ScalarParams::kTauMin))
    throw config_error("train: tau_init must be >= 0.01");
  if (!(kappa_init >= net::ScalarParams::kKappaMin &&
        kappa_init <= net::ScalarParams::kKappaMax))
    throw config_error("train: kappa_init must lie in [0.1, 10.0]");
}

losses::LossOptions TrainConfig::loss_options() const {
  losses::LossOptions opts;
  opts.weights = {gamma, eta_inter, eta_intra};
  opts.boundary_k = boundary_k;
  opts.exclusive_denominator = exclusive_denominator;
  opts.mask = mask;
  return opts;
}

ModelState init_state(const TrainConfig& cfg, std::size_t feature_dim) {
  cfg.validate();
  if (feature_dim < 1) throw config_error("train: feature_dim must be >= 1");
  net::EncoderConfig tower;
  tower.input_dim = feature_dim;
  tower.hidden_dims = cfg.hidden_dims;
  tower.embed_dim = cfg.embed_dim;
  tower.activation = cfg.activation;
  ModelState s;
  s.model = model::make_model(tower, tower, cfg.seed, cfg.tau_init, cfg.kappa_init);
  return s;
}

BatchTensors make_batch_tensors(std::span<const data::Quadruple> batch,
                                std::size_t feature_dim, std::uint64_t box_seed) {
  if (batch.size() < 2)
    throw contract_violation("make_batch_tensors: batch size must be >= 2");
  const std::size_t b = batch.size();
  const std::size_t f = feature_dim;
  Rng box_rng(box_seed);
  BatchTensors x;
  x.img = net::Tensor::zeros({b, f});
  x.txt = net::Tensor::zeros({b, f});
  x.img_box = net::Tensor::zeros({b, f});
  x.txt_box = net::Tensor::zeros({b, f});
  for (std::size_t i = 0; i < b; ++i) {
    const data::Quadruple& q = batch[i];
    if (q.image.size() != f || q.text.size() != f)
      throw data_error("batch sample " + std::to_string(q.id) + ": feature dim mismatch");
    if (q.image_boxes.empty() || q.image_boxes.size() != q.text_boxes.size())
      throw data_error("batch sample " + std::to_string(q.id) +
                       ": needs aligned, nonempty boxes");
    std::size_t pick = box_rng.index(q.image_boxes.size());
    if (q.image_boxes[pick].size() != f || q.text_boxes[pick].size() != f)
      throw data_error("batch sample " + std::to_string(q.id) +
                       ": box feature dim mismatch");
    for (std::size_t d = 0; d < f; ++d) {
      x.img.at(i, d) = q.image[d];
      x.txt.at(i, d) = q.text[d];
      x.img_box.at(i, d) = q.image_boxes[pick][d];
      x.txt_box.at(i, d) = q.text_boxes[pick][d];
    }
  }
  return x;
}

GraphEval eval_training_graph(const model::EmbeddingModel& m, bool kappa_learnable,
                              const BatchTensors& x, const losses::LossOptions& opts,
                              bool with_grads) {
  net::Tape tape;
  net::NodeId lt = tape.leaf(net::Tensor::scalar(m.scalars.log_tau), with_grads);
  net::NodeId lci = tape.leaf(net::Tensor::scalar(m.scalars.log_c_img), with_grads);
  net::NodeId lct = tape.leaf(net::Tensor::scalar(m.scalars.log_c_txt), with_grads);
  net::NodeId lk = tape.leaf(net::Tensor::scalar(m.scalars.log_kappa),
                             with_grads && kappa_learnable);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  net::NodeId tau = tape.clamp_scalar(tape.exp_scalar(lt), net::ScalarParams::kTauMin, kInf);
  net::NodeId c_img = tape.exp_scalar(lci);
  net::NodeId c_txt = tape.exp_scalar(lct);
  net::NodeId kappa = tape.clamp_scalar(tape.exp_scalar(lk), net::ScalarParams::kKappaMin,
                                        net::ScalarParams::kKappaMax);

  auto tower_leaves = [&](const net::MlpParams& p, std::vector<net::NodeId>& ws,
                          std::vector<net::NodeId>& bs) {
    for (const net::Tensor& w : p.weights) ws.push_back(tape.leaf(w, with_grads));
    for (const net::Tensor& bias : p.biases) bs.push_back(tape.leaf(bias, with_grads));
  };
  std::vector<net::NodeId> iw, ib, tw, tb;
  tower_leaves(m.img, iw, ib);
  tower_leaves(m.txt, tw, tb);

  auto embed = [&](const net::Tensor& feats, std::span<const net::NodeId> ws,
                   std::span<const net::NodeId> bs, const net::EncoderConfig& tower,
                   net::NodeId scale) {
    net::NodeId raw = net::encoder_graph(tape, tower, ws, bs, tape.leaf(feats));
    return tape.project_origin(tape.scale_by(raw, scale), kappa);
  };
  losses::BatchNodes nodes;
  nodes.img = embed(x.img, iw, ib, m.img_cfg, c_img);
  nodes.txt = embed(x.txt, tw, tb, m.txt_cfg, c_txt);
  nodes.img_box = embed(x.img_box, iw, ib, m.img_cfg, c_img);
  nodes.txt_box = embed(x.txt_box, tw, tb, m.txt_cfg, c_txt);
  nodes.tau = tau;
  nodes.kappa = kappa;

  losses::HcNodes hc = losses::hc_node(tape, nodes, opts);

  GraphEval eval;
  LossReport& rep = eval.report;
  rep.hcc = tape.scalar_value(hc.hcc);
  rep.hce = tape.scalar_value(hc.hce);
  rep.total = tape.scalar_value(hc.total);
  rep.tau = tape.scalar_value(tau);
  rep.kappa = tape.scalar_value(kappa);
  rep.radius_img = mean_row_norm(tape.value(nodes.img));
  rep.radius_txt = mean_row_norm(tape.value(nodes.txt));
  rep.radius_img_box = mean_row_norm(tape.value(nodes.img_box));
  rep.radius_txt_box = mean_row_norm(tape.value(nodes.txt_box));
  eval.branch_signature = tape.branch_signature();
  if (!with_grads) return eval;

  if (!std::isfinite(rep.total)) throw numeric_error("non-finite loss");
  tape.backward(hc.total);

  auto layer_name = [](const char* tower, const char* kind, std::size_t l) {
    return std::string(tower) + "." + kind + std::to_string(l);
  };
  auto tower_grads = [&](const char* name, const std::vector<net::NodeId>& ws,
                         const std::vector<net::NodeId>& bs) {
    for (std::size_t l = 0; l < ws.size(); ++l) {
      eval.grads[layer_name(name, "w", l)] = tape.grad(ws[l]);
      eval.grads[layer_name(name, "b", l)] = tape.grad(bs[l]);
    }
  };
  tower_grads("img", iw, ib);
  tower_grads("txt", tw, tb);
  eval.grads["scalar.log_tau"] = tape.grad(lt);
  eval.grads["scalar.log_c_img"] = tape.grad(lci);
  eval.grads["scalar.log_c_txt"] = tape.grad(lct);
  if (kappa_learnable) eval.grads["scalar.log_kappa"] = tape.grad(lk);
  return eval;
}

LossReport train_step(ModelState& state, std::span<const data::Quadruple> batch,
                      const TrainConfig& cfg) {
  model::EmbeddingModel& m = state.model;
  BatchTensors x = make_batch_tensors(batch, m.img_cfg.input_dim,
                                      mix_seed(mix_seed(cfg.seed, kBoxStream), state.step));
  GraphEval eval;
  try {
    eval = eval_training_graph(m, cfg.kappa_learnable, x, cfg.loss_options(), true);
  } catch (const numeric_error& e) {
    throw numeric_error(std::string(e.what()) + " at step " +
                        std::to_string(state.step + 1));
  }

  std::vector<net::ParamRef> params;
  auto tower_params = [&](const char* name, net::MlpParams& p) {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      params.push_back({std::string(name) + ".w" + std::to_string(l), &p.weights[l], true});
      params.push_back({std::string(name) + ".b" + std::to_string(l), &p.biases[l], true});
    }
  };
  tower_params("img", m.img);
  tower_params("txt", m.txt);
  net::Tensor t_lt = net::Tensor::scalar(m.scalars.log_tau);
  net::Tensor t_lci = net::Tensor::scalar(m.scalars.log_c_img);
  net::Tensor t_lct = net::Tensor::scalar(m.scalars.log_c_txt);
  net::Tensor t_lk = net::Tensor::scalar(m.scalars.log_kappa);
  params.push_back({"scalar.log_tau", &t_lt, false});
  params.push_back({"scalar.log_c_img", &t_lci, false});
  params.push_back({"scalar.log_c_txt", &t_lct, false});
  if (cfg.kappa_learnable) params.push_back({"scalar.log_kappa", &t_lk, false});

  double lr = net::lr_at(state.step, cfg.total_steps, cfg.warmup_steps, cfg.max_lr);
  net::adamw_step(params, eval.grads, state.opt, lr, cfg.adamw);

  m.scalars.log_tau = t_lt.data[0];
  m.scalars.log_c_img = t_lci.data[0];
  m.scalars.log_c_txt = t_lct.data[0];
  m.scalars.log_kappa = t_lk.data[0];
  m.scalars.project();

  state.step += 1;
  LossReport rep = eval.report;
  rep.step = state.step;
  rep.lr = lr;
  return rep;
}

double evaluate_loss(const ModelState& state, const data::Dataset& ds,
                     const TrainConfig& cfg, std::size_t max_batches) {
  const std::size_t b = std::min<std::size_t>(cfg.batch_size, ds.items.size());
  if (b < 2) throw contract_violation("evaluate_loss: need at least 2 samples");
  const model::EmbeddingModel& m = state.model;
  losses::LossOptions opts = cfg.loss_options();
  double sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start + b <= ds.items.size(); start += b) {
    losses::EmbeddedBatch eb;
    eb.tau = m.scalars.tau();
    for (std::size_t i = start; i < start + b; ++i) {
      const data::Quadruple& q = ds.items[i];
      if (q.image_boxes.empty())
        throw data_error("evaluate_loss: sample " + std::to_string(q.id) + " has no boxes");
      eb.img.push_back(model::embed_image(m, q.image));
      eb.txt.push_back(model::embed_text(m, q.text));
      eb.img_box.push_back(model::embed_image(m, q.image_boxes[0]));
      eb.txt_box.push_back(model::embed_text(m, q.text_boxes[0]));
    }
    sum += losses::hc_loss(eb, opts);
    ++batches;
    if (max_batches != 0 && batches == max_batches) break;
  }
  return sum / static_cast<double>(batches);
}

TrainResult train_run(const TrainConfig& cfg, const data::Dataset& ds,
                      const std::filesystem::path& out_dir,
                      std::optional<ModelState> resume) {
  cfg.validate();
  if (ds.items.empty()) throw data_error("train_run: dataset is empty");
  TrainResult result;
  result.state = resume ? std::move(*resume) : init_state(cfg, ds.feature_dim);
  ModelState& state = result.state;
  if (state.model.img_cfg.input_dim != ds.feature_dim)
    throw config_error("train_run: model input dim " +
                       std::to_string(state.model.img_cfg.input_dim) +
                       " does not match dataset feature dim " +
                       std::to_string(ds.feature_dim));

  const std::size_t bpe = ds.items.size() / cfg.batch_size;
  if (state.step < cfg.total_steps && bpe == 0)
    throw config_error("train_run: dataset smaller than one batch");

  const bool files = !out_dir.empty();
  std::ofstream metrics;
  if (files) {
    fs::create_directories(out_dir);
    std::ofstream echo(out_dir / "config.json");
    echo << config_echo_json(cfg, ds.feature_dim) << "\n";
    if (!echo) throw io_error("cannot write " + (out_dir / "config.json").string());
    result.metrics_path = out_dir / "metrics.jsonl";
    metrics.open(result.metrics_path,
                 state.step > 0 ? std::ios::app : std::ios::trunc);
    if (!metrics) throw io_error("cannot write " + result.metrics_path.string());
  }

  std::deque<fs::path> kept;
  double best_total = std::numeric_limits<double>::infinity();
  fs::path last_good;
  std::vector<std::size_t> perm;
  std::uint64_t perm_epoch = std::numeric_limits<std::uint64_t>::max();
  std::vector<data::Quadruple> batch(cfg.batch_size);

  while (state.step < cfg.total_steps) {
    std::uint64_t s = state.step;
    std::uint64_t epoch = s / bpe;
    if (epoch != perm_epoch) {
      perm = permutation(ds.items.size(), mix_seed(mix_seed(cfg.seed, kShuffleStream), epoch));
      perm_epoch = epoch;
    }
    std::size_t slot = static_cast<std::size_t>(s % bpe);
    for (std::size_t j = 0; j < cfg.batch_size; ++j)
      batch[j] = ds.items[perm[slot * cfg.batch_size + j]];

    LossReport rep;
    try {
      rep = train_step(state, batch, cfg);
    } catch (const numeric_error& e) {
      std::string ref = last_good.empty() ? "no checkpoint saved yet"
                                          : "last good checkpoint: " + last_good.string();
      throw numeric_error(std::string(e.what()) + " (" + ref + ")");
    }

    bool record = (cfg.eval_every != 0 && rep.step % cfg.eval_every == 0) ||
                  rep.step == cfg.total_steps;
    if (record) {
      result.reports.push_back(rep);
      if (files) metrics << report_json(rep).dump() << "\n" << std::flush;
    }
    bool save = files && ((cfg.checkpoint_every != 0 && rep.step % cfg.checkpoint_every == 0) ||
                          rep.step == cfg.total_steps);
    if (save) {
      std::ostringstream name;
      name << "ckpt_step" << rep.step << ".hycn";
      fs::path path = out_dir / name.str();
      save_checkpoint(state, cfg, ds.feature_dim, path);
      last_good = path;
      result.final_checkpoint = path;
      kept.push_back(path);
      if (kept.size() > 3) {
        fs::remove(kept.front());
        kept.pop_front();
      }
      if (rep.total < best_total) {
        best_total = rep.total;
        result.best_checkpoint = out_dir / "best.hycn";
        save_checkpoint(state, cfg, ds.feature_dim, result.best_checkpoint);
      }
    }
  }
  return result;
}

std::string config_echo_json(const TrainConfig& cfg, std::size_t feature_dim) {
  ordered_json j;
  j["feature_dim"] = feature_dim;
  j["hidden_dims"] = cfg.hidden_dims;
  j["embed_dim"] = cfg.embed_dim;
  j["activation"] = net::activation_name(cfg.activation);
  j["batch_size"] = cfg.batch_size;
  j["total_steps"] = cfg.total_steps;
  j["warmup_steps"] = cfg.warmup_steps;
  j["max_lr"] = cfg.max_lr;
  j["gamma"] = cfg.gamma;
  j["eta_inter"] = cfg.eta_inter;
  j["eta_intra"] = cfg.eta_intra;
  j["boundary_k"] = cfg.boundary_k;
  j["exclusive_denominator"] = cfg.exclusive_denominator;
  ordered_json mask;
  for (const std::string& name : losses::TermMask::names()) mask[name] = cfg.mask.get(name);
  j["mask"] = mask;
  j["tau_init"] = cfg.tau_init;
  j["kappa_init"] = cfg.kappa_init;
  j["kappa_learnable"] = cfg.kappa_learnable;
  j["adamw"] = {{"beta1", cfg.adamw.beta1},
                {"beta2", cfg.adamw.beta2},
                {"eps", cfg.adamw.eps},
                {"weight_decay", cfg.adamw.weight_decay}};
  j["seed"] = cfg.seed;
  j["eval_every"] = cfg.eval_every;
  j["checkpoint_every"] = cfg.checkpoint_every;
  return j.dump(2);
}

}  // namespace hycone::train
