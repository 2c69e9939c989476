#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "asap/tensor.hpp"

namespace asap {

enum class DatasetKind { kBlobs, kMoons, kXorGrid };

DatasetKind parse_dataset_kind(std::string_view s);
std::string_view to_string(DatasetKind k);

struct Dataset {
  Tensor features;          // samples x d
  std::vector<int> labels;  // in [0, classes)
  std::size_t classes = 0;
  std::string generator;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dims() const { return features.cols(); }
  /// Rows `idx` in that order.
  Dataset subset(const std::vector<std::size_t>& idx) const;
  std::vector<std::size_t> class_counts() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kBlobs;
  std::size_t n = 1000;
  std::size_t dims = 2;
  std::size_t classes = 2;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

/// Class-balanced synthetic data, standardized per dimension.
///
/// blobs: Gaussian clusters around centers at distance 4 from the origin.
/// moons: two interleaved half circles (classes must be 2).
/// xor_grid: 4x4 checkerboard over the first two dims, label (ix + iy) mod classes.
/// Dimensions beyond the second carry pure noise for moons and xor_grid.
Dataset make_dataset(DatasetKind kind, std::size_t n, std::size_t dims, std::size_t classes,
                     double noise, std::uint64_t seed);
Dataset make_dataset(const DatasetSpec& spec);

/// Two disjoint halves, each class-balanced within one sample. Rejects odd n.
std::pair<Dataset, Dataset> split_half(const Dataset& data, std::uint64_t seed);

/// CSV with header `f0,...,f{d-1},label`; values printed with 17 significant digits.
void write_dataset_csv(const std::string& path, const Dataset& data);
Dataset read_dataset_csv(const std::string& path);

}  // namespace asap
