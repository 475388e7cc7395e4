#ifndef VCPLAB_DATASET_HPP
#define VCPLAB_DATASET_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vcplab/types.hpp"

// Ingestion and preprocessing for binary classification experiments:
// CSV loading, standardization, polynomial basis expansion, splitting, and
// synthetic two-Gaussian generation. Dataset values are immutable in spirit:
// every operation returns a new value or mutates only its explicit target.

namespace vcplab::dataset {

enum class MissingPolicy { Drop, MeanImpute };

struct Dataset {
  Matrix features;  // one row per sample
  IntVector labels;  // entries in {0, 1}
  std::vector<std::string> feature_names;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
};

/// Per-feature location/scale fit on a training split. Scales are floored at
/// kStdFloor so constant columns standardize to zero instead of NaN.
struct StandardizationStats {
  Vector means;
  Vector std_devs;
};

inline constexpr double kStdFloor = 1e-12;

/// Monomial basis of all terms with total degree <= degree, in graded
/// lexicographic order (the constant term first when include_bias is set).
/// exponents(k, j) is the power of feature j in output monomial k.
struct ExpansionSpec {
  int degree = 1;
  bool include_bias = true;
  Index input_dim = 0;
  Index output_dim = 0;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> exponents;
};

ExpansionSpec make_expansion_spec(Index input_dim, int degree, bool include_bias);

Vector expand_polynomial(const VectorRef& x, const ExpansionSpec& spec);
Matrix expand_polynomial_rows(const MatrixRef& rows, const ExpansionSpec& spec);

/// Header row required; empty cells and "NaN"/"nan" are missing values.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 MissingPolicy missing_policy);

/// Population mean/standard deviation per feature; requires >= 2 rows.
StandardizationStats fit_standardizer(const Dataset& train);

Matrix apply_standardizer(const MatrixRef& features, const StandardizationStats& stats);
Matrix unapply_standardizer(const MatrixRef& standardized, const StandardizationStats& stats);
void standardize_in_place(Dataset& data, const StandardizationStats& stats);

/// Deterministic shuffled split; train gets ceil(m * (1 - test_fraction)).
std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed);

/// Two isotropic unit-variance Gaussians with means at -/+ (separation/2)
/// along the first axis; the first count/2 rows are class 0.
Dataset make_synthetic_gaussians(Index count, Index dim, double separation, std::uint64_t seed);

/// Flips round(count * fraction) labels chosen without replacement.
void flip_labels(Dataset& data, double fraction, std::uint64_t seed);

}  // namespace vcplab::dataset

#endif
