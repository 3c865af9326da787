#include "hycone/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hycone/common.hpp"
#include "hycone/data.hpp"
#include "hycone/encoder.hpp"
#include "hycone/geo.hpp"
#include "hycone/gradcheck.hpp"
#include "hycone/hiereval.hpp"
#include "hycone/manifold.hpp"
#include "hycone/model.hpp"
#include "hycone/taxonomy.hpp"
#include "hycone/trainer.hpp"

namespace hycone::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::vector<double> linspace_edges(double lo, double hi, std::size_t bins) {
  if (bins == 0) throw config_error("--bins must be positive");
  if (!(hi > lo)) hi = lo + 1.0;
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  return edges;
}

// Accepts "learnable" or "fixed:<value>".
void apply_kappa_arg(const std::string& s, train::TrainConfig& cfg) {
  if (s == "learnable") {
    cfg.kappa_learnable = true;
    return;
  }
  const std::string prefix = "fixed:";
  if (s.rfind(prefix, 0) == 0) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s.substr(prefix.size()), &used);
    } catch (const std::exception&) {
      throw config_error("--kappa: cannot parse '" + s + "'");
    }
    if (used != s.size() - prefix.size())
      throw config_error("--kappa: cannot parse '" + s + "'");
    cfg.kappa_learnable = false;
    cfg.kappa_init = v;
    return;
  }
  throw config_error("--kappa expects 'learnable' or 'fixed:<value>', got '" + s + "'");
}

ordered_json config_echo(const train::TrainConfig& cfg, std::size_t feature_dim) {
  return ordered_json::parse(train::config_echo_json(cfg, feature_dim));
}

void emit(const ordered_json& j) { std::cout << j.dump(2) << '\n'; }

data::Dataset load_checked(const fs::path& path, std::size_t expect_dim,
                           std::size_t* rejected = nullptr) {
  data::LoadReport rep = data::load_dataset(path);
  if (rejected) *rejected = rep.rejected_no_boxes;
  if (expect_dim != 0 && rep.dataset.feature_dim != expect_dim)
    throw data_error(path.string() + ": feature_dim " +
                     std::to_string(rep.dataset.feature_dim) +
                     " does not match the checkpoint's " + std::to_string(expect_dim));
  return std::move(rep.dataset);
}

struct PromptGroups {
  std::vector<std::string> labels;  // sorted
  std::vector<std::vector<std::vector<double>>> prompts;  // aligned with labels
};

// Groups text features by leaf label; `only` restricts (and must all exist).
PromptGroups group_prompts(const data::Dataset& ds,
                           const std::vector<std::string>& only) {
  std::map<std::string, std::vector<std::vector<double>>> by_label;
  for (const auto& q : ds.items) {
    if (q.leaf_label.empty())
      throw data_error("record " + std::to_string(q.id) +
                       " has no leaf label; prompt grouping needs labels");
    by_label[q.leaf_label].push_back(q.text);
  }
  if (!only.empty()) {
    std::map<std::string, std::vector<std::vector<double>>> kept;
    for (const auto& label : only) {
      auto it = by_label.find(label);
      if (it == by_label.end())
        throw data_error("--classes: no prompts labeled '" + label + "'");
      kept.insert(*it);
    }
    by_label = std::move(kept);
  }
  if (by_label.empty()) throw data_error("prompt set is empty");
  PromptGroups out;
  for (auto& [label, texts] : by_label) {
    out.labels.push_back(label);
    out.prompts.push_back(std::move(texts));
  }
  return out;
}

std::size_t index_of_id(const data::Dataset& ds, std::uint64_t id) {
  for (std::size_t i = 0; i < ds.items.size(); ++i)
    if (ds.items[i].id == id) return i;
  throw data_error("no item with id " + std::to_string(id));
}

std::string ratio_csv(const data::RatioStats& rs) {
  std::ostringstream os;
  os.precision(17);
  os << "lo,hi,count\n";
  for (std::size_t i = 0; i + 1 < rs.edges.size(); ++i)
    os << rs.edges[i] << ',' << rs.edges[i + 1] << ',' << rs.counts[i] << '\n';
  return os.str();
}

std::string radius_csv(const hiereval::RadiusReport& rr) {
  static const char* kRoles[4] = {"img", "txt", "img_box", "txt_box"};
  std::ostringstream os;
  os.precision(17);
  os << "role,lo,hi,count\n";
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t i = 0; i + 1 < rr.edges.size(); ++i)
      os << kRoles[r] << ',' << rr.edges[i] << ',' << rr.edges[i + 1] << ','
         << rr.counts[r][i] << '\n';
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw io_error("write failed: " + path.string());
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"hyperbolic compositional embeddings"};
  app.require_subcommand(1);
  int exit_code = 0;

  // gen-data ---------------------------------------------------------------
  auto* gen = app.add_subcommand(
      "gen-data", "Sample a synthetic compositional dataset and its taxonomy");
  data::SynthSpec spec;
  std::string gen_out, gen_tax;
  gen->add_option("--out", gen_out, "Dataset JSONL path")->required();
  gen->add_option("--taxonomy-out", gen_tax,
                  "Taxonomy TSV path (default: <out>.taxonomy.tsv)");
  gen->add_option("--depth", spec.depth, "Tree levels below the root")
      ->capture_default_str();
  gen->add_option("--branching", spec.branching, "Children per internal node")
      ->capture_default_str();
  gen->add_option("--feature-dim", spec.feature_dim, "Raw feature dimension")
      ->capture_default_str();
  gen->add_option("--concept-scale", spec.concept_scale,
                  "Parent-to-child concept drift scale")
      ->capture_default_str();
  gen->add_option("--offset-scale", spec.offset_scale, "Per-modality shift scale")
      ->capture_default_str();
  gen->add_option("--instance-scale", spec.instance_scale,
                  "Per-sample content scale shared by all four views")
      ->capture_default_str();
  gen->add_option("--noise-sigma", spec.noise_sigma, "Per-view feature noise")
      ->capture_default_str();
  gen->add_option("--samples-per-leaf", spec.samples_per_leaf, "Samples per leaf")
      ->capture_default_str();
  gen->add_option("--max-boxes", spec.max_boxes, "Upper bound on boxes per sample")
      ->capture_default_str();
  gen->add_option("--ratio-shape", spec.ratio_shape,
                  "Box area-ratio shape (ratio = u^shape)")
      ->capture_default_str();
  gen->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  gen->add_option("--sample-stream", spec.sample_stream,
                  "Sample stream id; streams share the seed's tree and offsets")
      ->capture_default_str();
  gen->callback([&] {
    spec.validate();
    data::SynthResult res = data::generate_synthetic(spec);
    data::save_dataset(res.dataset, gen_out);
    fs::path tax_path = gen_tax.empty() ? fs::path(gen_out + ".taxonomy.tsv")
                                        : fs::path(gen_tax);
    res.taxonomy.save(tax_path);
    ordered_json j;
    j["command"] = "gen-data";
    j["dataset"] = gen_out;
    j["taxonomy"] = tax_path.string();
    j["items"] = res.dataset.items.size();
    j["leaves"] = spec.leaf_count();
    ordered_json c;
    c["depth"] = spec.depth;
    c["branching"] = spec.branching;
    c["feature_dim"] = spec.feature_dim;
    c["concept_scale"] = spec.concept_scale;
    c["offset_scale"] = spec.offset_scale;
    c["instance_scale"] = spec.instance_scale;
    c["noise_sigma"] = spec.noise_sigma;
    c["samples_per_leaf"] = spec.samples_per_leaf;
    c["max_boxes"] = spec.max_boxes;
    c["ratio_shape"] = spec.ratio_shape;
    c["seed"] = spec.seed;
    c["sample_stream"] = spec.sample_stream;
    j["config"] = std::move(c);
    emit(j);
  });

  // train ------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Fit the two-tower embedding model");
  train::TrainConfig cfg;
  std::string tr_data, tr_out, tr_kappa = "learnable", tr_act = "tanh", tr_resume,
              tr_config;
  std::vector<std::string> tr_ablate;
  std::map<std::string, CLI::Option*> tr_opts;
  tr->add_option("--data", tr_data, "Training dataset JSONL")->required();
  tr->add_option("--out", tr_out, "Run directory for metrics and checkpoints")
      ->required();
  tr->add_option("--config", tr_config,
                 "JSON config file (same schema as the echoed config); explicit "
                 "flags override it");
  auto* steps_opt =
      tr->add_option("--steps", cfg.total_steps, "Total optimization steps")
          ->capture_default_str();
  tr_opts["total_steps"] = steps_opt;
  tr_opts["warmup_steps"] = tr->add_option("--warmup", cfg.warmup_steps,
                                           "Linear warmup steps")
                                ->capture_default_str();
  tr_opts["batch_size"] =
      tr->add_option("--batch-size", cfg.batch_size, "Batch size")
          ->capture_default_str();
  tr_opts["max_lr"] =
      tr->add_option("--lr", cfg.max_lr, "Peak learning rate")->capture_default_str();
  tr_opts["gamma"] = tr->add_option("--gamma", cfg.gamma,
                                    "Entailment weight in the total loss")
                         ->capture_default_str();
  tr_opts["eta_inter"] = tr->add_option("--eta-inter", cfg.eta_inter,
                                        "Cross-modal aperture threshold")
                             ->capture_default_str();
  tr_opts["eta_intra"] = tr->add_option("--eta-intra", cfg.eta_intra,
                                        "Within-modal aperture threshold")
                             ->capture_default_str();
  tr_opts["boundary_k"] = tr->add_option("--K", cfg.boundary_k,
                                         "Cone boundary constant")
                              ->capture_default_str();
  tr_opts["tau_init"] = tr->add_option("--tau-init", cfg.tau_init,
                                       "Initial temperature")
                            ->capture_default_str();
  auto* kappa_opt = tr->add_option("--kappa", tr_kappa,
                                   "'learnable' or 'fixed:<value>'")
                        ->capture_default_str();
  tr_opts["hidden_dims"] = tr->add_option("--hidden", cfg.hidden_dims,
                                          "Hidden layer widths")
                               ->delimiter(',')
                               ->capture_default_str();
  tr_opts["embed_dim"] = tr->add_option("--embed-dim", cfg.embed_dim,
                                        "Embedding dimension")
                             ->capture_default_str();
  auto* act_opt =
      tr->add_option("--activation", tr_act, "tanh or softplus")->capture_default_str();
  tr_opts["seed"] = tr->add_option("--seed", cfg.seed, "Run seed")
                        ->capture_default_str();
  tr_opts["eval_every"] = tr->add_option("--eval-every", cfg.eval_every,
                                         "Metrics cadence in steps (0 = final "
                                         "step only)")
                              ->capture_default_str();
  tr_opts["checkpoint_every"] =
      tr->add_option("--checkpoint-every", cfg.checkpoint_every,
                     "Checkpoint cadence in steps (0 = final only)")
          ->capture_default_str();
  tr_opts["weight_decay"] = tr->add_option("--weight-decay",
                                           cfg.adamw.weight_decay,
                                           "AdamW weight decay (towers only)")
                                ->capture_default_str();
  tr->add_option("--ablate-term", tr_ablate,
                 "Loss term to zero; repeatable. One of: cont_IT, cont_TI, "
                 "cont_IboxT, cont_TboxI, ent_IboxTbox, ent_IT, ent_IIbox, ent_TTbox")
      ->delimiter(',');
  auto* excl_opt =
      tr->add_flag("--exclusive-denominator", cfg.exclusive_denominator,
                   "Score each positive only against the other candidates (the "
                   "softmax denominator excludes the matching pair)");
  tr->add_option("--resume", tr_resume,
                 "Checkpoint to continue from; its stored configuration wins "
                 "over other flags, --steps may still extend the run");
  // Flag > config file > defaults: file values fill in only fields whose flag
  // was not given on this invocation.
  auto apply_config_file = [&](const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open config file " + path);
    ordered_json j;
    try {
      j = ordered_json::parse(is);
    } catch (const std::exception& e) {
      throw data_error(path + ": " + e.what());
    }
    auto unset = [&](const char* key) {
      auto it = tr_opts.find(key);
      return j.contains(key) && (it == tr_opts.end() || it->second->count() == 0);
    };
    try {
      if (unset("hidden_dims"))
        cfg.hidden_dims = j["hidden_dims"].get<std::vector<std::size_t>>();
      if (unset("embed_dim")) cfg.embed_dim = j["embed_dim"].get<std::size_t>();
      if (j.contains("activation") && act_opt->count() == 0)
        cfg.activation = net::activation_from_name(j["activation"].get<std::string>());
      if (unset("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
      if (unset("total_steps")) cfg.total_steps = j["total_steps"].get<std::uint64_t>();
      if (unset("warmup_steps"))
        cfg.warmup_steps = j["warmup_steps"].get<std::uint64_t>();
      if (unset("max_lr")) cfg.max_lr = j["max_lr"].get<double>();
      if (unset("gamma")) cfg.gamma = j["gamma"].get<double>();
      if (unset("eta_inter")) cfg.eta_inter = j["eta_inter"].get<double>();
      if (unset("eta_intra")) cfg.eta_intra = j["eta_intra"].get<double>();
      if (unset("boundary_k")) cfg.boundary_k = j["boundary_k"].get<double>();
      if (j.contains("exclusive_denominator") && excl_opt->count() == 0)
        cfg.exclusive_denominator = j["exclusive_denominator"].get<bool>();
      if (j.contains("mask"))
        for (const std::string& name : losses::TermMask::names())
          if (j["mask"].contains(name))
            cfg.mask.set(name, j["mask"][name].get<bool>());
      if (unset("tau_init")) cfg.tau_init = j["tau_init"].get<double>();
      if (kappa_opt->count() == 0) {
        if (j.contains("kappa_init")) cfg.kappa_init = j["kappa_init"].get<double>();
        if (j.contains("kappa_learnable"))
          cfg.kappa_learnable = j["kappa_learnable"].get<bool>();
      }
      if (j.contains("adamw")) {
        const auto& a = j["adamw"];
        if (a.contains("beta1")) cfg.adamw.beta1 = a["beta1"].get<double>();
        if (a.contains("beta2")) cfg.adamw.beta2 = a["beta2"].get<double>();
        if (a.contains("eps")) cfg.adamw.eps = a["eps"].get<double>();
        if (a.contains("weight_decay") && tr_opts["weight_decay"]->count() == 0)
          cfg.adamw.weight_decay = a["weight_decay"].get<double>();
      }
      if (unset("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
      if (unset("eval_every")) cfg.eval_every = j["eval_every"].get<std::uint64_t>();
      if (unset("checkpoint_every"))
        cfg.checkpoint_every = j["checkpoint_every"].get<std::uint64_t>();
    } catch (const ordered_json::exception& e) {
      throw data_error(path + ": " + e.what());
    }
  };
  tr->callback([&] {
    std::size_t rejected = 0;
    data::Dataset ds = load_checked(tr_data, 0, &rejected);
    std::optional<train::ModelState> resume_state;
    if (!tr_resume.empty()) {
      std::uint64_t flag_steps = cfg.total_steps;
      train::LoadedCheckpoint lc = train::load_checkpoint(tr_resume);
      cfg = lc.cfg;
      if (steps_opt->count() > 0) cfg.total_steps = flag_steps;
      resume_state = std::move(lc.state);
      if (ds.feature_dim != lc.feature_dim)
        throw data_error(tr_data + ": feature_dim " + std::to_string(ds.feature_dim) +
                         " does not match the checkpoint's " +
                         std::to_string(lc.feature_dim));
    } else {
      cfg.activation = net::activation_from_name(tr_act);
      apply_kappa_arg(tr_kappa, cfg);
      if (!tr_config.empty()) apply_config_file(tr_config);
      for (const auto& term : tr_ablate) cfg.mask.set(term, false);
    }
    train::TrainResult res = train::train_run(cfg, ds, tr_out, std::move(resume_state));
    ordered_json j;
    j["command"] = "train";
    j["data"] = tr_data;
    j["out"] = tr_out;
    j["rejected_no_boxes"] = rejected;
    j["steps_completed"] = res.state.step;
    if (!res.reports.empty()) {
      const train::LossReport& r = res.reports.back();
      ordered_json f;
      f["step"] = r.step;
      f["hcc"] = r.hcc;
      f["hce"] = r.hce;
      f["total"] = r.total;
      f["tau"] = r.tau;
      f["kappa"] = r.kappa;
      f["radius_img"] = r.radius_img;
      f["radius_txt"] = r.radius_txt;
      f["radius_img_box"] = r.radius_img_box;
      f["radius_txt_box"] = r.radius_txt_box;
      f["lr"] = r.lr;
      j["final"] = std::move(f);
    } else {
      j["final"] = nullptr;
    }
    j["metrics"] = res.metrics_path.string();
    j["final_checkpoint"] = res.final_checkpoint.string();
    j["best_checkpoint"] = res.best_checkpoint.string();
    j["config"] = config_echo(cfg, ds.feature_dim);
    emit(j);
  });

  // eval-hier --------------------------------------------------------------
  auto* eh = app.add_subcommand(
      "eval-hier", "Hierarchical error metrics for zero-shot predictions");
  std::string eh_ckpt, eh_data, eh_tax, eh_prompts;
  bool eh_include_root = false;
  std::size_t eh_max = 0;
  eh->add_option("--ckpt", eh_ckpt, "Model checkpoint")->required();
  eh->add_option("--data", eh_data, "Labeled evaluation dataset JSONL")->required();
  eh->add_option("--taxonomy", eh_tax, "Taxonomy TSV")->required();
  eh->add_option("--prompts", eh_prompts,
                 "Prompt dataset JSONL (default: the evaluation dataset)");
  eh->add_flag("--include-root", eh_include_root,
               "Keep the root inside ancestor sets");
  eh->add_option("--max-samples", eh_max, "Cap on evaluated items (0 = all)");
  eh->callback([&] {
    train::LoadedCheckpoint lc = train::load_checkpoint(eh_ckpt);
    data::Dataset ds = load_checked(eh_data, lc.feature_dim);
    data::Dataset prompt_ds =
        eh_prompts.empty() || eh_prompts == eh_data
            ? ds
            : load_checked(eh_prompts, lc.feature_dim);
    hiereval::TaxonomyGraph tax = hiereval::TaxonomyGraph::load(eh_tax);
    PromptGroups groups = group_prompts(prompt_ds, {});
    std::vector<manifold::HyperPoint> class_embs =
        hiereval::embed_class_prompts(lc.state.model, groups.prompts);
    std::size_t n = ds.items.size();
    if (eh_max > 0) n = std::min(n, eh_max);
    if (n == 0) throw data_error("no evaluation samples");
    double acc = 0, s_tie = 0, s_lca = 0, s_j = 0, s_p = 0, s_r = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const data::Quadruple& q = ds.items[i];
      if (q.leaf_label.empty())
        throw data_error("record " + std::to_string(q.id) + " has no leaf label");
      std::size_t pred =
          hiereval::classify(model::embed_image(lc.state.model, q.image), class_embs);
      const std::string& y_pred = groups.labels[pred];
      hiereval::MetricReport rep =
          hiereval::metric_report(tax, y_pred, q.leaf_label, eh_include_root);
      acc += (y_pred == q.leaf_label) ? 1.0 : 0.0;
      s_tie += rep.tie;
      s_lca += rep.lca;
      s_j += rep.jaccard;
      s_p += rep.p_h;
      s_r += rep.r_h;
    }
    double dn = static_cast<double>(n);
    ordered_json j;
    j["command"] = "eval-hier";
    j["n"] = n;
    j["classes"] = groups.labels.size();
    j["include_root"] = eh_include_root;
    j["accuracy"] = acc / dn;
    j["tie"] = s_tie / dn;
    j["lca"] = s_lca / dn;
    j["jaccard"] = s_j / dn;
    j["p_h"] = s_p / dn;
    j["r_h"] = s_r / dn;
    j["config"] = config_echo(lc.cfg, lc.feature_dim);
    emit(j);
  });

  // eval-zeroshot ----------------------------------------------------------
  auto* ez = app.add_subcommand("eval-zeroshot",
                                "Zero-shot classification accuracy by leaf label");
  std::string ez_ckpt, ez_data, ez_prompts;
  std::vector<std::string> ez_classes;
  std::size_t ez_max = 0;
  ez->add_option("--ckpt", ez_ckpt, "Model checkpoint")->required();
  ez->add_option("--data", ez_data, "Labeled evaluation dataset JSONL")->required();
  ez->add_option("--prompts", ez_prompts,
                 "Prompt dataset JSONL (default: the evaluation dataset)");
  ez->add_option("--classes", ez_classes,
                 "Restrict to these leaf labels; repeatable or comma-separated")
      ->delimiter(',');
  ez->add_option("--max-samples", ez_max, "Cap on evaluated items (0 = all)");
  ez->callback([&] {
    train::LoadedCheckpoint lc = train::load_checkpoint(ez_ckpt);
    data::Dataset ds = load_checked(ez_data, lc.feature_dim);
    data::Dataset prompt_ds =
        ez_prompts.empty() || ez_prompts == ez_data
            ? ds
            : load_checked(ez_prompts, lc.feature_dim);
    PromptGroups groups = group_prompts(prompt_ds, ez_classes);
    std::vector<manifold::HyperPoint> class_embs =
        hiereval::embed_class_prompts(lc.state.model, groups.prompts);
    struct Tally {
      std::size_t n = 0, correct = 0;
    };
    std::map<std::string, Tally> per_class;
    std::size_t n = 0, correct = 0;
    for (const data::Quadruple& q : ds.items) {
      if (q.leaf_label.empty())
        throw data_error("record " + std::to_string(q.id) + " has no leaf label");
      if (!ez_classes.empty() &&
          std::find(groups.labels.begin(), groups.labels.end(), q.leaf_label) ==
              groups.labels.end())
        continue;
      std::size_t pred =
          hiereval::classify(model::embed_image(lc.state.model, q.image), class_embs);
      bool hit = groups.labels[pred] == q.leaf_label;
      ++n;
      correct += hit ? 1 : 0;
      Tally& t = per_class[q.leaf_label];
      ++t.n;
      t.correct += hit ? 1 : 0;
      if (ez_max > 0 && n >= ez_max) break;
    }
    if (n == 0) throw data_error("no evaluation samples matched");
    ordered_json j;
    j["command"] = "eval-zeroshot";
    j["n"] = n;
    j["classes"] = groups.labels;
    j["accuracy"] = static_cast<double>(correct) / static_cast<double>(n);
    ordered_json pc;
    for (const auto& [label, t] : per_class) {
      ordered_json c;
      c["n"] = t.n;
      c["correct"] = t.correct;
      c["accuracy"] = static_cast<double>(t.correct) / static_cast<double>(t.n);
      pc[label] = std::move(c);
    }
    j["per_class"] = std::move(pc);
    j["config"] = config_echo(lc.cfg, lc.feature_dim);
    emit(j);
  });

  // interpolate ------------------------------------------------------------
  auto* ip = app.add_subcommand(
      "interpolate", "Walk the geodesic chart between two items, listing the "
                     "nearest item at each step");
  std::string ip_ckpt, ip_data, ip_modality = "img";
  std::uint64_t ip_from = 0, ip_to = 0;
  bool ip_to_root = false, ip_global = false, ip_include_source = false;
  std::size_t ip_n = 10;
  ip->add_option("--ckpt", ip_ckpt, "Model checkpoint")->required();
  ip->add_option("--data", ip_data, "Gallery dataset JSONL")->required();
  ip->add_option("--from", ip_from, "Source item id")->required();
  auto* to_opt = ip->add_option("--to", ip_to, "Target item id");
  ip->add_flag("--to-root", ip_to_root, "Walk toward the hierarchy origin instead");
  ip->add_option("--n", ip_n, "Interpolation points")->capture_default_str();
  ip->add_flag("--global-dedup", ip_global,
               "Report each gallery item at most once along the path");
  ip->add_flag("--include-source", ip_include_source, "Include the t = 0 endpoint");
  ip->add_option("--modality", ip_modality, "img or txt")->capture_default_str();
  ip->callback([&] {
    if (ip_to_root == (to_opt->count() > 0))
      throw config_error("pass exactly one of --to and --to-root");
    if (ip_modality != "img" && ip_modality != "txt")
      throw config_error("--modality expects img or txt");
    train::LoadedCheckpoint lc = train::load_checkpoint(ip_ckpt);
    data::Dataset ds = load_checked(ip_data, lc.feature_dim);
    const model::EmbeddingModel& m = lc.state.model;
    std::vector<manifold::HyperPoint> gallery;
    gallery.reserve(ds.items.size());
    for (const data::Quadruple& q : ds.items)
      gallery.push_back(ip_modality == "img" ? model::embed_image(m, q.image)
                                             : model::embed_text(m, q.text));
    std::size_t from_pos = index_of_id(ds, ip_from);
    manifold::HyperPoint target =
        ip_to_root ? geo::root_point(m.scalars.kappa(), lc.cfg.embed_dim)
                   : gallery[index_of_id(ds, ip_to)];
    std::vector<geo::TraversalHit> hits = geo::traverse(
        gallery[from_pos], target, gallery, ip_n, ip_global, ip_include_source);
    ordered_json j;
    j["command"] = "interpolate";
    j["from"] = ip_from;
    if (ip_to_root)
      j["to"] = "root";
    else
      j["to"] = ip_to;
    j["modality"] = ip_modality;
    j["n"] = ip_n;
    ordered_json points = ordered_json::array();
    for (const geo::TraversalHit& h : hits) {
      const data::Quadruple& q = ds.items[h.item_id];
      ordered_json p;
      p["t"] = h.t;
      p["id"] = q.id;
      p["label"] = q.leaf_label;
      p["distance"] = h.distance;
      points.push_back(std::move(p));
    }
    j["points"] = std::move(points);
    j["config"] = config_echo(lc.cfg, lc.feature_dim);
    emit(j);
  });

  // stats ------------------------------------------------------------------
  auto* st = app.add_subcommand(
      "stats", "Box-ratio histogram and, with a checkpoint, embedding radius "
               "histograms as CSV");
  std::string st_data, st_ckpt, st_out;
  std::size_t st_bins = 20;
  st->add_option("--data", st_data, "Dataset JSONL")->required();
  st->add_option("--ckpt", st_ckpt, "Checkpoint; enables the radius histogram");
  st->add_option("--bins", st_bins, "Histogram bins")->capture_default_str();
  st->add_option("--out", st_out,
                 "Directory for CSV files; omitted, CSV goes to stdout");
  st->callback([&] {
    data::Dataset ds = load_checked(st_data, 0);
    std::vector<double> redges = linspace_edges(0.0, 1.0, st_bins);
    data::RatioStats rs = data::box_ratio_stats(ds, redges);
    std::string rcsv = ratio_csv(rs);

    std::optional<hiereval::RadiusReport> rr;
    std::string dcsv;
    if (!st_ckpt.empty()) {
      train::LoadedCheckpoint lc = train::load_checkpoint(st_ckpt);
      if (ds.feature_dim != lc.feature_dim)
        throw data_error(st_data + ": feature_dim mismatch with the checkpoint");
      const model::EmbeddingModel& m = lc.state.model;
      hiereval::RoleEmbeddings roles;
      for (const data::Quadruple& q : ds.items) {
        roles.img.push_back(model::embed_image(m, q.image));
        roles.txt.push_back(model::embed_text(m, q.text));
        for (const auto& b : q.image_boxes)
          roles.img_box.push_back(model::embed_image(m, b));
        for (const auto& b : q.text_boxes)
          roles.txt_box.push_back(model::embed_text(m, b));
      }
      manifold::HyperPoint o =
          geo::root_point(m.scalars.kappa(), lc.cfg.embed_dim);
      double maxd = 0.0;
      for (const auto* role : {&roles.img, &roles.txt, &roles.img_box, &roles.txt_box})
        for (const manifold::HyperPoint& p : *role)
          maxd = std::max(maxd, manifold::geodesic_distance(o, p));
      rr = hiereval::radius_histogram(roles, linspace_edges(0.0, maxd, st_bins));
      dcsv = radius_csv(*rr);
    }

    if (st_out.empty()) {
      std::cout << "# box_ratio_histogram\n" << rcsv;
      if (!dcsv.empty()) std::cout << "# radius_histogram\n" << dcsv;
      return;
    }
    fs::create_directories(st_out);
    fs::path rpath = fs::path(st_out) / "ratio_hist.csv";
    write_text(rpath, rcsv);
    ordered_json j;
    j["command"] = "stats";
    j["items"] = ds.items.size();
    ordered_json jr;
    jr["has_ratios"] = rs.has_ratios;
    jr["total"] = rs.total;
    jr["mean"] = rs.mean;
    jr["median"] = rs.median;
    jr["frac_above_0.9"] = rs.frac_above_09;
    jr["csv"] = rpath.string();
    j["ratio"] = std::move(jr);
    if (rr) {
      fs::path dpath = fs::path(st_out) / "radius_hist.csv";
      write_text(dpath, dcsv);
      ordered_json jd;
      jd["mean_img"] = rr->means[0];
      jd["mean_txt"] = rr->means[1];
      jd["mean_img_box"] = rr->means[2];
      jd["mean_txt_box"] = rr->means[3];
      jd["csv"] = dpath.string();
      j["radius"] = std::move(jd);
    }
    emit(j);
  });

  // grad-check -------------------------------------------------------------
  auto* gc = app.add_subcommand(
      "grad-check", "Finite-difference audit of the training-graph gradient");
  train::GradCheckConfig gcc;
  bool gc_fixed_kappa = false;
  gc->add_option("--feature-dim", gcc.feature_dim, "Raw feature dimension")
      ->capture_default_str();
  gc->add_option("--batch", gcc.batch, "Batch size")->capture_default_str();
  gc->add_option("--hidden", gcc.hidden_dims, "Hidden layer widths")
      ->delimiter(',')
      ->capture_default_str();
  gc->add_option("--embed-dim", gcc.embed_dim, "Embedding dimension")
      ->capture_default_str();
  gc->add_option("--seed", gcc.seed, "Seed for the model and batch")
      ->capture_default_str();
  gc->add_option("--fd-step", gcc.h, "Central-difference step")->capture_default_str();
  gc->add_option("--tolerance", gcc.tolerance, "Max allowed relative error")
      ->capture_default_str();
  gc->add_flag("--fixed-kappa", gc_fixed_kappa, "Audit with curvature frozen");
  gc->callback([&] {
    gcc.kappa_learnable = !gc_fixed_kappa;
    train::GradCheckReport rep = train::grad_check(gcc);
    ordered_json j;
    j["command"] = "grad-check";
    j["checked"] = rep.checked;
    j["excluded"] = rep.excluded;
    j["max_rel_err"] = rep.max_rel_err;
    ordered_json w;
    w["param"] = rep.worst.param;
    w["index"] = rep.worst.index;
    w["analytic"] = rep.worst.analytic;
    w["numeric"] = rep.worst.numeric;
    w["rel_err"] = rep.worst.rel_err;
    j["worst"] = std::move(w);
    j["pass"] = rep.pass;
    ordered_json c;
    c["feature_dim"] = gcc.feature_dim;
    c["batch"] = gcc.batch;
    c["hidden_dims"] = gcc.hidden_dims;
    c["embed_dim"] = gcc.embed_dim;
    c["seed"] = gcc.seed;
    c["h"] = gcc.h;
    c["tolerance"] = gcc.tolerance;
    c["kappa_learnable"] = gcc.kappa_learnable;
    j["config"] = std::move(c);
    emit(j);
    if (!rep.pass) exit_code = 3;
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const io_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return exit_code;
}

}  // namespace hycone::cli
