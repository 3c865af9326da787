#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hycone/common.hpp"
#include "hycone/taxonomy.hpp"

namespace hycone::data {

// One training sample: a full image/text feature pair plus one or more
// aligned box pairs, where boxes carry the semantically more general
// content. Feature vectors are raw encoder inputs, not embeddings.
struct Quadruple {
  std::uint64_t id = 0;
  std::vector<double> image;
  std::vector<double> text;
  std::vector<std::vector<double>> image_boxes;
  std::vector<std::vector<double>> text_boxes;  // index-aligned with image_boxes
  std::optional<std::uint32_t> class_id;
  std::vector<double> box_ratios;  // empty = absent; else aligned, values in (0,1]

  // Generator ground truth; optional in files.
  std::string leaf_label;
  std::vector<std::string> box_labels;  // aligned with image_boxes when present
};

struct Dataset {
  std::size_t feature_dim = 0;
  std::vector<Quadruple> items;
};

// Concept-tree sampling plan. Each tree node carries a concept vector; a
// child's concept is its parent's plus per-entry noise of scale
// concept_scale/sqrt(feature_dim). Leaves emit samples; boxes are sampled
// from a proper ancestor below the root, so depth >= 2 is required.
struct SynthSpec {
  std::size_t depth = 3;      // levels below the root
  std::size_t branching = 4;  // children per internal node
  std::size_t feature_dim = 32;
  double concept_scale = 1.0;
  double offset_scale = 1.0;  // global per-modality shift
  // Per-sample content shared by all four views; what lets a box or caption
  // identify its own sample among same-concept neighbors.
  double instance_scale = 0.4;
  double noise_sigma = 0.05;  // per-view feature noise; 0 is allowed
  std::size_t samples_per_leaf = 64;
  std::size_t max_boxes = 3;  // box count per sample drawn uniformly from [1, max]
  double ratio_shape = 0.5;   // box ratio = u^ratio_shape with u ~ U(0,1]
  std::uint64_t seed = 0;
  // Distinct streams share the seed's concept tree and offsets but draw
  // fresh samples: stream 0 for training, another for a held-out split.
  std::uint64_t sample_stream = 0;

  void validate() const;  // config_error on violation
  std::size_t leaf_count() const;
};

struct SynthResult {
  Dataset dataset;
  hiereval::TaxonomyGraph taxonomy;
};

// The same SynthSpec always yields the same result. Node labels are "root", "root.0", "root.0.1",
// ...; class_id is the leaf's index in label order.
SynthResult generate_synthetic(const SynthSpec& spec);

struct LoadReport {
  Dataset dataset;
  std::size_t rejected_no_boxes = 0;  // records dropped for having no boxes
};

// Newline-delimited JSON: a {format_version, feature_dim} header line, then
// one record per line. load validates every Quadruple invariant and reports
// errors with line numbers; save(load(x)) is byte-identical for files this
// writer produced.
LoadReport load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

struct RatioStats {
  bool has_ratios = false;
  std::size_t total = 0;
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  double mean = 0.0;
  double median = 0.0;
  double frac_above_09 = 0.0;  // share strictly above 0.9
};

RatioStats box_ratio_stats(const Dataset& ds, std::span<const double> edges);

}  // namespace hycone::data
