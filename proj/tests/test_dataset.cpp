#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "vcplab/dataset.hpp"
#include "vcplab/error.hpp"
#include "vcplab/rng.hpp"

using namespace vcplab;
using dataset::MissingPolicy;

namespace {

struct TempCsv {
  std::filesystem::path path;
  explicit TempCsv(const std::string& contents) {
    path = std::filesystem::temp_directory_path() /
           ("vcplab_test_" + std::to_string(rng::mix64(reinterpret_cast<std::uintptr_t>(this))) +
            ".csv");
    std::ofstream out(path);
    out << contents;
  }
  ~TempCsv() { std::filesystem::remove(path); }
};

long long binomial(int n, int k) {
  long long result = 1;
  for (int i = 1; i <= k; ++i) result = result * (n - k + i) / i;
  return result;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("load_csv missing-value policies") {
    TempCsv csv("a,b,label\n1,2,0\n3,,1\n5,6,0\n7,8,1\n");
    const dataset::Dataset dropped = dataset::load_csv(csv.path.string(), "label",
                                                       MissingPolicy::Drop);
    CHECK(dropped.size() == 3);
    CHECK(dropped.dim() == 2);

    const dataset::Dataset imputed = dataset::load_csv(csv.path.string(), "label",
                                                       MissingPolicy::MeanImpute);
    CHECK(imputed.size() == 4);
    // Column b observed values: 2, 6, 8 -> mean 16/3.
    CHECK(imputed.features(1, 1) == doctest::Approx(16.0 / 3.0).epsilon(1e-15));
    CHECK(imputed.feature_names == std::vector<std::string>{"a", "b"});
  }

  TEST_CASE("load_csv rejects bad input") {
    TempCsv non_binary("a,label\n1,0\n2,2\n3,1\n");
    CHECK_THROWS_AS(dataset::load_csv(non_binary.path.string(), "label", MissingPolicy::Drop),
                    DataError);
    TempCsv bad_cell("a,label\n1,0\nfoo,1\n");
    CHECK_THROWS_AS(dataset::load_csv(bad_cell.path.string(), "label", MissingPolicy::Drop),
                    DataError);
    TempCsv csv("a,label\n1,0\n2,1\n");
    CHECK_THROWS_AS(dataset::load_csv(csv.path.string(), "nope", MissingPolicy::Drop), DataError);
    CHECK_THROWS_AS(dataset::load_csv("/nonexistent/file.csv", "label", MissingPolicy::Drop),
                    DataError);
  }

  TEST_CASE("fit_standardizer two-point and degenerate columns") {
    dataset::Dataset data;
    data.features.resize(3, 2);
    data.features << 1.0, 5.0, 3.0, 5.0, 2.0, 5.0;
    data.labels.setZero(3);

    const dataset::StandardizationStats stats = dataset::fit_standardizer(data);
    CHECK(stats.means[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(stats.means[1] == doctest::Approx(5.0).epsilon(1e-15));
    // Population std of {1, 3, 2} is sqrt(2/3); the constant column floors.
    CHECK(stats.std_devs[0] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));
    CHECK(stats.std_devs[1] == dataset::kStdFloor);

    const Matrix standardized = dataset::apply_standardizer(data.features, stats);
    CHECK(std::fabs(standardized.col(0).mean()) <= 1e-12);
    const double col_std = std::sqrt(standardized.col(0).array().square().mean());
    CHECK(col_std == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(standardized.col(1).cwiseAbs().maxCoeff() <= 1e-12);

    // Two-point column: mean 2, std 1.
    dataset::Dataset two;
    two.features.resize(2, 1);
    two.features << 1.0, 3.0;
    two.labels.setZero(2);
    const dataset::StandardizationStats two_stats = dataset::fit_standardizer(two);
    CHECK(two_stats.means[0] == 2.0);
    CHECK(two_stats.std_devs[0] == 1.0);
  }

  TEST_CASE("standardize then unstandardize is the identity") {
    rng::Engine engine = rng::make_engine(21);
    dataset::Dataset data;
    data.features.resize(50, 4);
    for (Index i = 0; i < 50; ++i)
      for (Index j = 0; j < 4; ++j)
        data.features(i, j) = 10.0 * rng::standard_normal(engine) + static_cast<double>(j);
    data.labels.setZero(50);
    const dataset::StandardizationStats stats = dataset::fit_standardizer(data);
    const Matrix round_trip =
        dataset::unapply_standardizer(dataset::apply_standardizer(data.features, stats), stats);
    CHECK((round_trip - data.features).cwiseAbs().maxCoeff() <= 1e-9);
  }

  TEST_CASE("expand_polynomial graded lexicographic order") {
    const dataset::ExpansionSpec spec = dataset::make_expansion_spec(2, 2, true);
    CHECK(spec.output_dim == 6);
    Vector x(2);
    x << 2.0, 3.0;
    const Vector expanded = dataset::expand_polynomial(x, spec);
    // 1, x1, x2, x1^2, x1 x2, x2^2
    CHECK(expanded[0] == 1.0);
    CHECK(expanded[1] == 2.0);
    CHECK(expanded[2] == 3.0);
    CHECK(expanded[3] == 4.0);
    CHECK(expanded[4] == 6.0);
    CHECK(expanded[5] == 9.0);

    const Vector zero = dataset::expand_polynomial(Vector::Zero(2), spec);
    CHECK(zero[0] == 1.0);
    CHECK(zero.tail(5).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(dataset::expand_polynomial(Vector::Zero(3), spec), DomainError);
  }

  TEST_CASE("expand_polynomial dimension counts") {
    // C(n + d, d), bias included.
    for (int n = 1; n <= 10; ++n)
      for (int d = 1; d <= 6; ++d)
        CHECK(dataset::make_expansion_spec(n, d, true).output_dim == binomial(n + d, d));
    CHECK(dataset::make_expansion_spec(9, 6, true).output_dim == 5005);
    CHECK(dataset::make_expansion_spec(9, 6, false).output_dim == 5004);
  }

  TEST_CASE("split sizes, determinism, and partition property") {
    rng::Engine engine = rng::make_engine(22);
    dataset::Dataset data;
    data.features.resize(10, 1);
    for (Index i = 0; i < 10; ++i) data.features(i, 0) = static_cast<double>(i);
    data.labels.resize(10);
    for (Index i = 0; i < 10; ++i) data.labels[i] = static_cast<int>(i % 2);

    const auto [train, test] = dataset::split(data, 0.2, 7);
    CHECK(train.size() == 8);
    CHECK(test.size() == 2);

    const auto [train2, test2] = dataset::split(data, 0.2, 7);
    CHECK(train.features == train2.features);
    CHECK(test.features == test2.features);

    // Union is the original multiset, intersection empty.
    std::multiset<double> seen;
    for (Index i = 0; i < train.size(); ++i) seen.insert(train.features(i, 0));
    for (Index i = 0; i < test.size(); ++i) seen.insert(test.features(i, 0));
    std::multiset<double> expected;
    for (Index i = 0; i < 10; ++i) expected.insert(static_cast<double>(i));
    CHECK(seen == expected);

    bool any_difference = false;
    for (std::uint64_t seed = 0; seed < 10 && !any_difference; ++seed) {
      const auto [other_train, other_test] = dataset::split(data, 0.2, 100 + seed);
      any_difference = other_train.features != train.features;
    }
    CHECK(any_difference);

    CHECK_THROWS_AS(dataset::split(data, 0.0, 1), DomainError);
    dataset::Dataset tiny;
    tiny.features.resize(1, 1);
    tiny.features(0, 0) = 1.0;
    tiny.labels.resize(1);
    tiny.labels[0] = 0;
    CHECK_THROWS_AS(dataset::split(tiny, 0.5, 1), DataError);
  }

  TEST_CASE("make_synthetic_gaussians layout and determinism") {
    const dataset::Dataset data = dataset::make_synthetic_gaussians(400, 2, 8.0, 5);
    CHECK(data.size() == 400);
    CHECK(data.labels.head(200).sum() == 0);
    CHECK(data.labels.tail(200).sum() == 200);
    // Class means near -/+ separation/2 on the first axis.
    const double mean0 = data.features.topRows(200).col(0).mean();
    const double mean1 = data.features.bottomRows(200).col(0).mean();
    CHECK(std::fabs(mean0 + 4.0) <= 3.0 / std::sqrt(200.0));
    CHECK(std::fabs(mean1 - 4.0) <= 3.0 / std::sqrt(200.0));

    const dataset::Dataset again = dataset::make_synthetic_gaussians(400, 2, 8.0, 5);
    CHECK(data.features == again.features);

    CHECK_THROWS_AS(dataset::make_synthetic_gaussians(5, 2, 1.0, 0), DomainError);
    CHECK_THROWS_AS(dataset::make_synthetic_gaussians(2, 2, 1.0, 0), DomainError);
  }

  TEST_CASE("flip_labels flips the requested fraction") {
    dataset::Dataset data = dataset::make_synthetic_gaussians(100, 2, 4.0, 6);
    const IntVector before = data.labels;
    dataset::flip_labels(data, 0.1, 7);
    Index flipped = 0;
    for (Index i = 0; i < data.size(); ++i)
      if (before[i] != data.labels[i]) ++flipped;
    CHECK(flipped == 10);
  }
}
