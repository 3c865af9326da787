#include "hycone/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include "json.hpp"

namespace hycone::data {

using ordered_json = nlohmann::ordered_json;

void SynthSpec::validate() const {
  if (depth < 2)
    throw config_error("synth: depth must be >= 2 (boxes need a non-root ancestor)");
  if (branching < 1) throw config_error("synth: branching must be >= 1");
  if (feature_dim < 1) throw config_error("synth: feature_dim must be >= 1");
  if (!(concept_scale > 0.0)) throw config_error("synth: concept_scale must be > 0");
  if (!(offset_scale > 0.0)) throw config_error("synth: offset_scale must be > 0");
  if (!(instance_scale >= 0.0)) throw config_error("synth: instance_scale must be >= 0");
  if (!(noise_sigma >= 0.0)) throw config_error("synth: noise_sigma must be >= 0");
  if (samples_per_leaf < 1) throw config_error("synth: samples_per_leaf must be >= 1");
  if (max_boxes < 1) throw config_error("synth: max_boxes must be >= 1");
  if (!(ratio_shape > 0.0)) throw config_error("synth: ratio_shape must be > 0");
}

std::size_t SynthSpec::leaf_count() const {
  std::size_t n = 1;
  for (std::size_t d = 0; d < depth; ++d) n *= branching;
  return n;
}

namespace {

std::vector<double> make_view(std::span<const double> base, std::span<const double> offset,
                              std::span<const double> instance, double sigma, Rng& rng) {
  std::vector<double> out(base.size());
  for (std::size_t d = 0; d < base.size(); ++d)
    out[d] = base[d] + offset[d] + instance[d] + sigma * rng.normal();
  return out;
}

}  // namespace

SynthResult generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const std::size_t f = spec.feature_dim;
  const double level_sigma = spec.concept_scale / std::sqrt(static_cast<double>(f));

  // Concept tree, breadth-first. path[i] for a node lists its chain from the
  // root so box sampling can index proper ancestors directly.
  struct Node {
    std::string label;
    std::vector<double> concept_vec;
    std::vector<std::size_t> chain;  // indices of root..self
  };
  std::vector<Node> nodes;
  nodes.push_back({"root", std::vector<double>(f, 0.0), {0}});
  hiereval::TaxonomyGraph taxonomy("root");

  Rng concept_rng(mix_seed(spec.seed, 1));
  std::size_t level_begin = 0, level_end = 1;
  for (std::size_t level = 0; level < spec.depth; ++level) {
    std::size_t next_begin = nodes.size();
    for (std::size_t p = level_begin; p < level_end; ++p) {
      for (std::size_t b = 0; b < spec.branching; ++b) {
        Node child;
        child.label = nodes[p].label + "." + std::to_string(b);
        child.concept_vec.resize(f);
        for (std::size_t d = 0; d < f; ++d)
          child.concept_vec[d] = nodes[p].concept_vec[d] + level_sigma * concept_rng.normal();
        child.chain = nodes[p].chain;
        child.chain.push_back(nodes.size());
        taxonomy.add_edge(nodes[p].label, child.label);
        nodes.push_back(std::move(child));
      }
    }
    level_begin = next_begin;
    level_end = nodes.size();
  }
  // [level_begin, level_end) now spans the leaves.

  Rng offset_rng(mix_seed(spec.seed, 2));
  const double offset_sigma = spec.offset_scale / std::sqrt(static_cast<double>(f));
  std::vector<double> img_offset(f), txt_offset(f);
  for (std::size_t d = 0; d < f; ++d) img_offset[d] = offset_sigma * offset_rng.normal();
  for (std::size_t d = 0; d < f; ++d) txt_offset[d] = offset_sigma * offset_rng.normal();

  SynthResult out{Dataset{f, {}}, std::move(taxonomy)};
  out.dataset.items.reserve((level_end - level_begin) * spec.samples_per_leaf);

  Rng sample_rng(mix_seed(mix_seed(spec.seed, 3), spec.sample_stream));
  std::uint64_t next_id = 0;
  for (std::size_t leaf = level_begin; leaf < level_end; ++leaf) {
    const Node& ln = nodes[leaf];
    // chain = root, level-1 ancestor, ..., self; proper non-root ancestors
    // are chain[1..depth-1].
    const std::size_t ancestor_count = ln.chain.size() - 2;
    const double inst_sigma = spec.instance_scale / std::sqrt(static_cast<double>(f));
    std::vector<double> instance(f);
    for (std::size_t s = 0; s < spec.samples_per_leaf; ++s) {
      Quadruple q;
      q.id = next_id++;
      q.class_id = static_cast<std::uint32_t>(leaf - level_begin);
      q.leaf_label = ln.label;
      // All four views share the sample's instance vector, the way a crop and
      // a noun phrase both describe the one object in front of the camera.
      for (std::size_t d = 0; d < f; ++d) instance[d] = inst_sigma * sample_rng.normal();
      q.image = make_view(ln.concept_vec, img_offset, instance, spec.noise_sigma, sample_rng);
      q.text = make_view(ln.concept_vec, txt_offset, instance, spec.noise_sigma, sample_rng);
      std::size_t n_boxes = 1 + sample_rng.index(spec.max_boxes);
      for (std::size_t b = 0; b < n_boxes; ++b) {
        const Node& anc = nodes[ln.chain[1 + sample_rng.index(ancestor_count)]];
        q.image_boxes.push_back(
            make_view(anc.concept_vec, img_offset, instance, spec.noise_sigma, sample_rng));
        q.text_boxes.push_back(
            make_view(anc.concept_vec, txt_offset, instance, spec.noise_sigma, sample_rng));
        q.box_ratios.push_back(std::pow(1.0 - sample_rng.uniform(), spec.ratio_shape));
        q.box_labels.push_back(anc.label);
      }
      out.dataset.items.push_back(std::move(q));
    }
  }
  return out;
}

namespace {

constexpr int kFormatVersion = 1;

std::vector<double> parse_vector(const ordered_json& j, std::size_t dim,
                                 const std::string& where) {
  if (!j.is_array() || j.size() != dim)
    throw data_error(where + ": expected array of " + std::to_string(dim) + " numbers");
  std::vector<double> out;
  out.reserve(dim);
  for (const auto& v : j) {
    if (!v.is_number()) throw data_error(where + ": non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

ordered_json dump_quadruple(const Quadruple& q) {
  ordered_json j;
  j["id"] = q.id;
  j["image"] = q.image;
  j["text"] = q.text;
  j["image_boxes"] = q.image_boxes;
  j["text_boxes"] = q.text_boxes;
  if (q.class_id) j["class_id"] = *q.class_id;
  if (!q.box_ratios.empty()) j["box_ratios"] = q.box_ratios;
  if (!q.leaf_label.empty()) j["leaf"] = q.leaf_label;
  if (!q.box_labels.empty()) j["box_labels"] = q.box_labels;
  return j;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write dataset file: " + path.string());
  ordered_json header;
  header["format_version"] = kFormatVersion;
  header["feature_dim"] = ds.feature_dim;
  out << header.dump() << "\n";
  for (const Quadruple& q : ds.items) out << dump_quadruple(q).dump() << "\n";
  if (!out) throw io_error("failed writing dataset file: " + path.string());
}

LoadReport load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open dataset file: " + path.string());
  LoadReport report;
  std::string line;
  if (!std::getline(in, line)) {
    std::cerr << "warning: dataset file is empty: " << path.string() << "\n";
    return report;
  }
  ordered_json header;
  try {
    header = ordered_json::parse(line);
  } catch (const ordered_json::parse_error& e) {
    throw data_error("dataset line 1: bad header JSON: " + std::string(e.what()));
  }
  if (!header.contains("format_version") || !header.contains("feature_dim"))
    throw data_error("dataset line 1: header needs format_version and feature_dim");
  if (header["format_version"].get<int>() != kFormatVersion)
    throw data_error("dataset format version " + header["format_version"].dump() +
                     " not supported (expected " + std::to_string(kFormatVersion) + ")");
  const std::size_t dim = header["feature_dim"].get<std::size_t>();
  if (dim < 1) throw data_error("dataset line 1: feature_dim must be >= 1");
  report.dataset.feature_dim = dim;

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = "dataset line " + std::to_string(lineno);
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const ordered_json::parse_error& e) {
      throw data_error(where + ": bad JSON: " + std::string(e.what()));
    }
    Quadruple q;
    try {
      q.id = j.at("id").get<std::uint64_t>();
      q.image = parse_vector(j.at("image"), dim, where + " image");
      q.text = parse_vector(j.at("text"), dim, where + " text");
      const auto& ib = j.at("image_boxes");
      const auto& tb = j.at("text_boxes");
      if (!ib.is_array() || !tb.is_array() || ib.size() != tb.size())
        throw data_error(where + ": image_boxes and text_boxes must align");
      for (std::size_t b = 0; b < ib.size(); ++b) {
        q.image_boxes.push_back(
            parse_vector(ib[b], dim, where + " image_boxes[" + std::to_string(b) + "]"));
        q.text_boxes.push_back(
            parse_vector(tb[b], dim, where + " text_boxes[" + std::to_string(b) + "]"));
      }
      if (j.contains("class_id")) q.class_id = j["class_id"].get<std::uint32_t>();
      if (j.contains("box_ratios")) {
        q.box_ratios = parse_vector(j["box_ratios"], q.image_boxes.size(),
                                    where + " box_ratios");
        for (double r : q.box_ratios)
          if (!(r > 0.0 && r <= 1.0))
            throw data_error(where + ": box_ratios entries must lie in (0, 1]");
      }
      if (j.contains("leaf")) q.leaf_label = j["leaf"].get<std::string>();
      if (j.contains("box_labels")) {
        const auto& bl = j["box_labels"];
        if (!bl.is_array() || bl.size() != q.image_boxes.size())
          throw data_error(where + ": box_labels must align with image_boxes");
        for (const auto& l : bl) q.box_labels.push_back(l.get<std::string>());
      }
    } catch (const ordered_json::exception& e) {
      throw data_error(where + ": " + std::string(e.what()));
    }
    if (q.image_boxes.empty()) {
      ++report.rejected_no_boxes;
      continue;
    }
    report.dataset.items.push_back(std::move(q));
  }
  if (report.dataset.items.empty())
    std::cerr << "warning: dataset has no usable records: " << path.string() << "\n";
  return report;
}

RatioStats box_ratio_stats(const Dataset& ds, std::span<const double> edges) {
  std::vector<double> ratios;
  for (const Quadruple& q : ds.items)
    ratios.insert(ratios.end(), q.box_ratios.begin(), q.box_ratios.end());
  RatioStats stats;
  stats.edges.assign(edges.begin(), edges.end());
  if (ratios.empty()) {
    stats.counts.assign(edges.size() >= 2 ? edges.size() - 1 : 0, 0);
    return stats;
  }
  stats.has_ratios = true;
  stats.total = ratios.size();
  stats.counts = histogram_counts(ratios, edges);
  double sum = 0.0;
  std::size_t above = 0;
  for (double r : ratios) {
    sum += r;
    if (r > 0.9) ++above;
  }
  stats.mean = sum / static_cast<double>(ratios.size());
  stats.frac_above_09 = static_cast<double>(above) / static_cast<double>(ratios.size());
  std::sort(ratios.begin(), ratios.end());
  std::size_t n = ratios.size();
  stats.median = (n % 2 == 1) ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
  return stats;
}

}  // namespace hycone::data
