#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "hpoerm/csv.hpp"
#include "hpoerm/errors.hpp"
#include "hpoerm/synth_data.hpp"

using namespace hpoerm;

TEST_CASE("empty and reproducible draws") {
  const DataSpec spec;
  const Dataset empty = generate(spec, 0, 1);
  CHECK(empty.count() == 0);
  CHECK(empty.n_features() == 20);

  const Dataset a = generate(spec, 500, 11);
  const Dataset b = generate(spec, 500, 11);
  const Dataset c = generate(spec, 500, 12);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  CHECK(a.features != c.features);
}

TEST_CASE("labels are +-1 with the requested balance") {
  DataSpec spec;
  spec.class_balance = 0.3;
  const Dataset d = generate(spec, 20000, 5);
  int pos = 0;
  for (Eigen::Index i = 0; i < d.labels.size(); ++i) {
    REQUIRE((d.labels[i] == 1.0 || d.labels[i] == -1.0));
    pos += d.labels[i] > 0;
  }
  CHECK(pos / 20000.0 == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("the generator's rule makes no mistakes and keeps the margin") {
  const DataSpec spec;
  const Geometry g = make_geometry(spec);
  CHECK(g.direction.norm() == doctest::Approx(1.0));
  for (int j = spec.n_informative; j < spec.n_features; ++j) CHECK(g.direction[j] == 0.0);

  const Dataset d = generate(spec, 100000, 21);
  int wrong = 0;
  double min_margin = INFINITY;
  for (Eigen::Index i = 0; i < d.features.rows(); ++i) {
    const double s = separating_score(g, d.features.row(i).transpose());
    wrong += s * d.labels[i] <= 0.0;
    min_margin = std::min(min_margin, s * d.labels[i]);
  }
  CHECK(wrong == 0);
  CHECK(min_margin >= spec.margin / 2.0);
}

TEST_CASE("separable up to a million points") {
  DataSpec spec;
  spec.seed = 3;
  const Geometry g = make_geometry(spec);
  const Dataset d = generate(spec, 1000000, 99);
  int wrong = 0;
  const Vector s = d.features * g.direction;
  for (Eigen::Index i = 0; i < s.size(); ++i) wrong += s[i] * d.labels[i] <= 0.0;
  CHECK(wrong == 0);
}

TEST_CASE("splits") {
  const auto idx = split_indices(10, 7, 3, 4);
  CHECK(idx.train.size() == 7);
  CHECK(idx.validation.size() == 3);
  std::set<std::size_t> all(idx.train.begin(), idx.train.end());
  all.insert(idx.validation.begin(), idx.validation.end());
  CHECK(all.size() == 10);

  const auto again = split_indices(10, 7, 3, 4);
  CHECK(again.train == idx.train);
  CHECK(again.validation == idx.validation);

  CHECK_THROWS_AS(split_indices(10, 7, 4, 4), SizeError);
  CHECK_THROWS_AS(split_indices(10, 0, 4, 4), SizeError);

  const Dataset d = generate(DataSpec{}, 10, 1);
  const auto [tr, va] = split(d, 7, 3, 4);
  CHECK(tr.count() == 7);
  CHECK(va.count() == 3);
  CHECK(tr.features.row(0) == d.features.row(static_cast<Eigen::Index>(idx.train[0])));
}

TEST_CASE("spec validation") {
  auto bad = [](auto mutate) {
    DataSpec s;
    mutate(s);
    return s;
  };
  CHECK_THROWS_AS(bad([](DataSpec& s) { s.n_features = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](DataSpec& s) { s.n_informative = 21; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](DataSpec& s) { s.margin = 0.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](DataSpec& s) { s.sigma = -1.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](DataSpec& s) { s.class_balance = 1.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](DataSpec& s) { s.noise_scale = NAN; }).validate(), ConfigError);
  CHECK_THROWS_AS(generate(bad([](DataSpec& s) { s.sigma = 0.0; }), 5, 1), ConfigError);
  CHECK_NOTHROW(DataSpec{}.validate());
}

TEST_CASE("csv and json") {
  const Dataset d = generate(DataSpec{}, 4, 2);
  std::ostringstream out;
  write_csv(d, out);
  std::istringstream in(out.str());
  const CsvTable t = read_csv(in);
  REQUIRE(t.header.size() == 21);
  CHECK(t.header.front() == "f0");
  CHECK(t.header.back() == "label");
  REQUIRE(t.rows.size() == 4);
  CHECK(t.number(2, "f5") == d.features(2, 5));
  CHECK(t.number(3, "label") == d.labels[3]);

  DataSpec s;
  s.margin = 2.0;
  s.seed = 77;
  const DataSpec back = nlohmann::json(s).get<DataSpec>();
  CHECK(back.margin == 2.0);
  CHECK(back.seed == 77);
  CHECK(nlohmann::json(back) == nlohmann::json(s));
  CHECK_THROWS_AS(nlohmann::json({{"margin", -1.0}}).get<DataSpec>(), ConfigError);
}
