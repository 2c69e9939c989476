#include "asap/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace asap {

namespace {

using Engine = std::mt19937_64;

constexpr std::size_t kGridCells = 4;
constexpr double kBlobRadius = 4.0;

void standardize(Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = x.at(i, j) - mean;
      var += c * c;
    }
    var /= static_cast<double>(n);
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    for (std::size_t i = 0; i < n; ++i) x.at(i, j) = (x.at(i, j) - mean) / sd;
  }
}

}  // namespace

DatasetKind parse_dataset_kind(std::string_view s) {
  if (s == "blobs") return DatasetKind::kBlobs;
  if (s == "moons") return DatasetKind::kMoons;
  if (s == "xor_grid") return DatasetKind::kXorGrid;
  throw std::invalid_argument(fmt::format("unknown dataset kind '{}'", s));
}

std::string_view to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::kBlobs: return "blobs";
    case DatasetKind::kMoons: return "moons";
    case DatasetKind::kXorGrid: return "xor_grid";
  }
  return "?";
}

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
  Dataset out;
  out.classes = classes;
  out.generator = generator;
  out.seed = seed;
  const std::size_t d = dims();
  Tensor f({std::max<std::size_t>(idx.size(), 1), d});
  out.labels.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= size()) throw std::out_of_range("dataset: subset index out of range");
    for (std::size_t j = 0; j < d; ++j) f.at(r, j) = features.at(idx[r], j);
    out.labels.push_back(labels[idx[r]]);
  }
  if (idx.empty()) throw std::invalid_argument("dataset: empty subset");
  out.features = std::move(f);
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(classes, 0);
  for (int l : labels) ++counts.at(static_cast<std::size_t>(l));
  return counts;
}

Dataset make_dataset(DatasetKind kind, std::size_t n, std::size_t dims, std::size_t classes,
                     double noise, std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("make_dataset: needs at least two classes");
  if (n < 4 * classes) {
    throw std::invalid_argument(fmt::format("make_dataset: n={} must be >= 4 * classes = {}", n, 4 * classes));
  }
  if (dims < 2) throw std::invalid_argument("make_dataset: dims must be >= 2");
  if (!(noise >= 0.0)) throw std::invalid_argument("make_dataset: noise must be >= 0");
  if (kind == DatasetKind::kMoons && classes != 2) {
    throw std::invalid_argument("make_dataset: moons has exactly two classes");
  }
  if (kind == DatasetKind::kXorGrid && classes > kGridCells * kGridCells) {
    throw std::invalid_argument("make_dataset: too many classes for xor_grid");
  }

  Engine rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Dataset data;
  data.classes = classes;
  data.generator = std::string(to_string(kind));
  data.seed = seed;
  data.features = Tensor({n, dims});
  data.labels.resize(n);

  std::vector<std::vector<double>> centers;
  if (kind == DatasetKind::kBlobs) {
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<double> dir(dims);
      double norm = 0.0;
      do {
        norm = 0.0;
        for (double& v : dir) {
          v = gauss(rng);
          norm += v * v;
        }
      } while (norm < 1e-12);
      for (double& v : dir) v *= kBlobRadius / std::sqrt(norm);
      centers.push_back(std::move(dir));
    }
  }
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> cells(classes);
  if (kind == DatasetKind::kXorGrid) {
    for (std::size_t ix = 0; ix < kGridCells; ++ix) {
      for (std::size_t iy = 0; iy < kGridCells; ++iy) cells[(ix + iy) % classes].emplace_back(ix, iy);
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row = order[i];
    const std::size_t c = i % classes;
    data.labels[row] = static_cast<int>(c);
    auto x = [&](std::size_t j) -> double& { return data.features.at(row, j); };
    switch (kind) {
      case DatasetKind::kBlobs:
        for (std::size_t j = 0; j < dims; ++j) x(j) = centers[c][j] + noise * gauss(rng);
        break;
      case DatasetKind::kMoons: {
        const double theta = std::numbers::pi * unit(rng);
        if (c == 0) {
          x(0) = std::cos(theta);
          x(1) = std::sin(theta);
        } else {
          x(0) = 1.0 - std::cos(theta);
          x(1) = 0.5 - std::sin(theta);
        }
        x(0) += noise * gauss(rng);
        x(1) += noise * gauss(rng);
        for (std::size_t j = 2; j < dims; ++j) x(j) = gauss(rng);
        break;
      }
      case DatasetKind::kXorGrid: {
        const auto& choices = cells[c];
        const auto [ix, iy] = choices[static_cast<std::size_t>(unit(rng) * static_cast<double>(choices.size())) %
                                      choices.size()];
        x(0) = static_cast<double>(ix) + unit(rng) + noise * gauss(rng);
        x(1) = static_cast<double>(iy) + unit(rng) + noise * gauss(rng);
        for (std::size_t j = 2; j < dims; ++j) x(j) = gauss(rng);
        break;
      }
    }
  }
  standardize(data.features);
  return data;
}

Dataset make_dataset(const DatasetSpec& spec) {
  return make_dataset(spec.kind, spec.n, spec.dims, spec.classes, spec.noise, spec.seed);
}

std::pair<Dataset, Dataset> split_half(const Dataset& data, std::uint64_t seed) {
  if (data.size() % 2 != 0) {
    throw std::invalid_argument(fmt::format("split_half: n={} is odd", data.size()));
  }
  Engine rng(seed);
  std::vector<std::vector<std::size_t>> by_class(data.classes);
  for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);

  std::vector<std::size_t> first, second;
  bool extra_first = true;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t take = members.size() / 2;
    if (members.size() % 2 == 1) {
      if (extra_first) ++take;
      extra_first = !extra_first;
    }
    first.insert(first.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    second.insert(second.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::shuffle(first.begin(), first.end(), rng);
  std::shuffle(second.begin(), second.end(), rng);
  return {data.subset(first), data.subset(second)};
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file " + path);
  const std::size_t d = data.dims();
  for (std::size_t j = 0; j < d; ++j) out << 'f' << j << ',';
  out << "label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) out << fmt::format("{:.17g},", data.features.at(i, j));
    out << data.labels[i] << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
  const std::size_t columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 3) throw std::invalid_argument(path + ": expected at least two feature columns and a label");
  const std::size_t d = columns - 1;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ls, cell, ',')) {
      try {
        if (col < d) {
          values.push_back(std::stod(cell));
        } else if (col == d) {
          labels.push_back(std::stoi(cell));
        }
      } catch (const std::exception&) {
        throw std::invalid_argument(fmt::format("{}:{}: bad value '{}'", path, lineno, cell));
      }
      ++col;
    }
    if (col != columns) throw std::invalid_argument(fmt::format("{}:{}: expected {} columns", path, lineno, columns));
  }
  if (labels.empty()) throw std::invalid_argument(path + ": no rows");
  Dataset data;
  data.features = Tensor({labels.size(), d}, std::move(values));
  int mx = 0;
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument(path + ": negative label");
    mx = std::max(mx, l);
  }
  data.labels = std::move(labels);
  data.classes = static_cast<std::size_t>(mx) + 1;
  data.generator = "csv";
  return data;
}

}  // namespace asap
