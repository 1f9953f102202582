#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mnagt/graph.hpp"

namespace mnagt {

enum class FeatureMode {
  /// One-hot node labels when NAME_node_labels.txt exists, else Degree.
  Auto,
  /// Scalar node degree.
  Degree,
  /// One-hot degree, degrees >= cap share the last bucket.
  DegreeOneHot,
};

struct LoadOptions {
  FeatureMode features = FeatureMode::Auto;
  std::size_t degree_cap = 64;
};

/// Reads a dataset in the TUDataset text format from `dir`:
///   NAME_A.txt               "i, j" per line, 1-based global node ids
///   NAME_graph_indicator.txt 1-based graph id per node
///   NAME_graph_labels.txt    one integer per graph
///   NAME_node_labels.txt     optional, one integer per node
/// Graph labels are remapped to contiguous [0, C) in ascending order of the
/// raw values. Throws DataError naming the file (and line) on any problem.
std::vector<Graph> load_tudataset(const std::filesystem::path& dir, const std::string& name,
                                  const LoadOptions& options = {});

/// Writes graphs back in the same format (edges in both directions).
void save_tudataset(const std::filesystem::path& dir, const std::string& name,
                    std::span<const Graph> graphs);

struct DatasetStats {
  std::size_t graphs = 0;
  double avg_nodes = 0;
  double avg_edges = 0;
  std::size_t feature_dim = 0;
  /// class index -> graph count
  std::map<int, std::size_t> class_histogram;
  std::size_t num_classes() const { return class_histogram.size(); }
};

DatasetStats dataset_stats(std::span<const Graph> graphs);

/// Number of classes as max label + 1.
int count_classes(std::span<const Graph> graphs);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// Seeded shuffle followed by a floor split: val and test get
/// floor(n * ratio), train takes the remainder.
SplitIndices split_indices(std::size_t n, std::array<double, 3> ratios, std::uint64_t seed);

struct DatasetSplit {
  std::vector<Graph> train, val, test;
};

DatasetSplit split_dataset(std::span<const Graph> graphs,
                           std::array<double, 3> ratios = {0.8, 0.1, 0.1},
                           std::uint64_t seed = 0);

}  // namespace mnagt
