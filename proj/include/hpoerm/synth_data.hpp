#pragma once

// Synthetic, linearly separable binary classification data.
//
// Each class is a mixture of two Gaussian clusters in the informative
// subspace. Cluster centers sit at y * (margin/2 + 3*sigma) along a unit
// direction w, shifted orthogonally to w by `cluster_offset`. Draws are
// rejected until y * <w, x> >= margin/2, so the class supports are separated
// by at least `margin` and sign(<w, x>) classifies every point correctly
// (Bayes risk zero). Non-informative coordinates are N(0, noise_scale^2).

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace hpoerm {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct DataSpec {
  int n_features = 20;
  int n_informative = 10;
  double margin = 1.0;
  double sigma = 0.25;
  double class_balance = 0.5;
  double cluster_offset = 1.0;
  double noise_scale = 1.0;
  std::uint64_t seed = 0;

  // Throws ConfigError on out-of-domain fields.
  void validate() const;
};

struct Dataset {
  Matrix features;  // count x n_features
  Vector labels;    // entries in {-1, +1}

  std::size_t count() const noexcept { return static_cast<std::size_t>(labels.size()); }
  std::size_t n_features() const noexcept { return static_cast<std::size_t>(features.cols()); }

  Dataset rows(std::span<const std::size_t> indices) const;
};

// Separating direction and cluster centers, fixed by DataSpec::seed.
struct Geometry {
  Vector direction;                          // unit norm, zero outside informative coordinates
  std::array<std::array<Vector, 2>, 2> centers;  // [class: 0 -> -1, 1 -> +1][cluster]
};

Geometry make_geometry(const DataSpec& spec);

Dataset generate(const DataSpec& spec, std::size_t count, std::uint64_t draw_seed);

// The generator's own classification rule: +1 iff <w, x> > 0.
double separating_score(const Geometry& geometry, const Eigen::Ref<const Vector>& x);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Seeded permutation split: first m permuted rows train, next mu validate.
SplitIndices split_indices(std::size_t count, std::size_t m, std::size_t mu, std::uint64_t split_seed);

std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t m, std::size_t mu,
                                  std::uint64_t split_seed);

// Header row f0..f{d-1},label.
void write_csv(const Dataset& data, std::ostream& out);

void to_json(nlohmann::json& j, const DataSpec& spec);
void from_json(const nlohmann::json& j, DataSpec& spec);

}  // namespace hpoerm
