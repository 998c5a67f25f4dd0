#include "hpoerm/synth_data.hpp"

#include <cmath>
#include <ostream>

#include "hpoerm/csv.hpp"
#include "hpoerm/errors.hpp"
#include "hpoerm/random.hpp"

namespace hpoerm {

namespace {

constexpr std::uint64_t kDirectionTag = 1;
constexpr std::uint64_t kClusterTag = 2;

Vector random_unit(Rng& rng, int dim, int active) {
  Vector v = Vector::Zero(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    for (int i = 0; i < active; ++i) v[i] = rng.normal();
    norm = v.norm();
  }
  return v / norm;
}

}  // namespace

void DataSpec::validate() const {
  if (n_features < 1) throw ConfigError("DataSpec: n_features must be positive");
  if (n_informative < 1 || n_informative > n_features)
    throw ConfigError("DataSpec: n_informative must be in [1, n_features]");
  if (!(margin > 0.0) || !std::isfinite(margin)) throw ConfigError("DataSpec: margin must be positive");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("DataSpec: sigma must be positive");
  if (!(class_balance > 0.0 && class_balance < 1.0))
    throw ConfigError("DataSpec: class_balance must be in (0, 1)");
  if (!(cluster_offset >= 0.0) || !std::isfinite(cluster_offset))
    throw ConfigError("DataSpec: cluster_offset must be non-negative");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale))
    throw ConfigError("DataSpec: noise_scale must be non-negative");
}

Dataset Dataset::rows(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.resize(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = static_cast<Eigen::Index>(indices[r]);
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(src);
    out.labels[static_cast<Eigen::Index>(r)] = labels[src];
  }
  return out;
}

Geometry make_geometry(const DataSpec& spec) {
  spec.validate();
  Geometry g;
  Rng dir_rng(derive_seed(spec.seed, {kDirectionTag}));
  g.direction = random_unit(dir_rng, spec.n_features, spec.n_informative);

  const double distance = spec.margin / 2.0 + 3.0 * spec.sigma;
  Rng cluster_rng(derive_seed(spec.seed, {kClusterTag}));
  for (int cls = 0; cls < 2; ++cls) {
    const double y = cls == 0 ? -1.0 : 1.0;
    for (int c = 0; c < 2; ++c) {
      Vector offset = Vector::Zero(spec.n_features);
      if (spec.n_informative > 1) {
        // Project out the separating direction so the offset keeps the margin.
        Vector u = random_unit(cluster_rng, spec.n_features, spec.n_informative);
        u -= u.dot(g.direction) * g.direction;
        if (u.norm() > 0.0) offset = spec.cluster_offset * u / u.norm();
      }
      g.centers[cls][c] = y * distance * g.direction + offset;
    }
  }
  return g;
}

double separating_score(const Geometry& geometry, const Eigen::Ref<const Vector>& x) {
  return geometry.direction.dot(x);
}

Dataset generate(const DataSpec& spec, std::size_t count, std::uint64_t draw_seed) {
  const Geometry g = make_geometry(spec);
  const int d = spec.n_features;
  const int k = spec.n_informative;
  const double half_margin = spec.margin / 2.0;

  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(count), d);
  out.labels.resize(static_cast<Eigen::Index>(count));

  Rng rng(draw_seed);
  Vector x(d);
  for (std::size_t i = 0; i < count; ++i) {
    const bool positive = rng.uniform01() < spec.class_balance;
    const int cls = positive ? 1 : 0;
    const double y = positive ? 1.0 : -1.0;
    const int cluster = rng.uniform01() < 0.5 ? 0 : 1;
    const Vector& center = g.centers[cls][cluster];
    do {
      for (int j = 0; j < k; ++j) x[j] = center[j] + spec.sigma * rng.normal();
    } while (y * g.direction.head(k).dot(x.head(k)) < half_margin);
    for (int j = k; j < d; ++j) x[j] = spec.noise_scale * rng.normal();
    const auto row = static_cast<Eigen::Index>(i);
    out.features.row(row) = x.transpose();
    out.labels[row] = y;
  }
  return out;
}

SplitIndices split_indices(std::size_t count, std::size_t m, std::size_t mu, std::uint64_t split_seed) {
  if (m == 0 || mu == 0) throw SizeError("split: m and mu must be positive");
  if (m + mu > count) {
    throw SizeError("split: m + mu = " + std::to_string(m + mu) + " exceeds sample count " +
                    std::to_string(count));
  }
  Rng rng(split_seed);
  const auto perm = random_permutation(count, rng);
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
  out.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(m),
                        perm.begin() + static_cast<std::ptrdiff_t>(m + mu));
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t m, std::size_t mu,
                                  std::uint64_t split_seed) {
  const auto idx = split_indices(data.count(), m, mu, split_seed);
  return {data.rows(idx.train), data.rows(idx.validation)};
}

void write_csv(const Dataset& data, std::ostream& out) {
  for (std::size_t j = 0; j < data.n_features(); ++j) out << 'f' << j << ',';
  out << "label\n";
  for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) out << format_double(data.features(i, j)) << ',';
    out << static_cast<int>(data.labels[i]) << '\n';
  }
}

void to_json(nlohmann::json& j, const DataSpec& spec) {
  j = nlohmann::json{{"n_features", spec.n_features},       {"n_informative", spec.n_informative},
                     {"margin", spec.margin},               {"sigma", spec.sigma},
                     {"class_balance", spec.class_balance}, {"cluster_offset", spec.cluster_offset},
                     {"noise_scale", spec.noise_scale},     {"seed", spec.seed}};
}

void from_json(const nlohmann::json& j, DataSpec& spec) {
  const DataSpec defaults;
  spec.n_features = j.value("n_features", defaults.n_features);
  spec.n_informative = j.value("n_informative", defaults.n_informative);
  spec.margin = j.value("margin", defaults.margin);
  spec.sigma = j.value("sigma", defaults.sigma);
  spec.class_balance = j.value("class_balance", defaults.class_balance);
  spec.cluster_offset = j.value("cluster_offset", defaults.cluster_offset);
  spec.noise_scale = j.value("noise_scale", defaults.noise_scale);
  spec.seed = j.value("seed", defaults.seed);
  spec.validate();
}

}  // namespace hpoerm
