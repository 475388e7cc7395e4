#include "vcplab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "vcplab/error.hpp"
#include "vcplab/rng.hpp"

namespace vcplab::dataset {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

bool is_missing(const std::string& cell) {
  const std::string t = trim(cell);
  return t.empty() || t == "NaN" || t == "nan";
}

double parse_number(const std::string& cell, Index row, const std::string& column) {
  try {
    std::size_t consumed = 0;
    const double value = std::stod(trim(cell), &consumed);
    if (consumed != trim(cell).size()) throw std::invalid_argument("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw DataError("cannot parse '" + cell + "' as a number (row " + std::to_string(row) +
                    ", column '" + column + "')");
  }
}

}  // namespace

ExpansionSpec make_expansion_spec(Index input_dim, int degree, bool include_bias) {
  if (input_dim < 1) throw DomainError("expansion requires input_dim >= 1");
  if (degree < 1) throw DomainError("expansion requires degree >= 1");

  ExpansionSpec spec;
  spec.degree = degree;
  spec.include_bias = include_bias;
  spec.input_dim = input_dim;

  // Enumerate exponent tuples grade by grade; within a grade, tuples are
  // visited in lexicographically decreasing order so that e.g. for n = 2,
  // d = 2 the order is 1, x1, x2, x1^2, x1 x2, x2^2.
  std::vector<std::vector<int>> tuples;
  std::vector<int> current(static_cast<std::size_t>(input_dim), 0);
  const auto enumerate_grade = [&](auto&& self, Index position, int remaining) -> void {
    if (position == input_dim - 1) {
      current[static_cast<std::size_t>(position)] = remaining;
      tuples.push_back(current);
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      current[static_cast<std::size_t>(position)] = k;
      self(self, position + 1, remaining - k);
    }
  };
  for (int grade = include_bias ? 0 : 1; grade <= degree; ++grade)
    enumerate_grade(enumerate_grade, 0, grade);

  spec.output_dim = static_cast<Index>(tuples.size());
  spec.exponents.resize(spec.output_dim, input_dim);
  for (Index k = 0; k < spec.output_dim; ++k)
    for (Index j = 0; j < input_dim; ++j)
      spec.exponents(k, j) = tuples[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
  return spec;
}

Vector expand_polynomial(const VectorRef& x, const ExpansionSpec& spec) {
  if (x.size() != spec.input_dim)
    throw DomainError("expand_polynomial: input has dimension " + std::to_string(x.size()) +
                      ", spec expects " + std::to_string(spec.input_dim));

  // Power table: powers(j, k) = x_j^k.
  Matrix powers(spec.input_dim, spec.degree + 1);
  powers.col(0).setOnes();
  for (int k = 1; k <= spec.degree; ++k)
    powers.col(k) = powers.col(k - 1).cwiseProduct(x);

  Vector out(spec.output_dim);
  for (Index m = 0; m < spec.output_dim; ++m) {
    double value = 1.0;
    for (Index j = 0; j < spec.input_dim; ++j) {
      const int e = spec.exponents(m, j);
      if (e != 0) value *= powers(j, e);
    }
    out[m] = value;
  }
  return out;
}

Matrix expand_polynomial_rows(const MatrixRef& rows, const ExpansionSpec& spec) {
  Matrix out(rows.rows(), spec.output_dim);
  for (Index i = 0; i < rows.rows(); ++i)
    out.row(i) = expand_polynomial(rows.row(i).transpose(), spec).transpose();
  return out;
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 MissingPolicy missing_policy) {
  std::ifstream file(path);
  if (!file) throw DataError("cannot open CSV file '" + path + "'");

  std::string line;
  if (!std::getline(file, line)) throw DataError("CSV file '" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);

  Index label_index = -1;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (trim(header[j]) == label_column) label_index = static_cast<Index>(j);
  if (label_index < 0)
    throw DataError("label column '" + label_column + "' not found in '" + path + "'");

  const Index dim = static_cast<Index>(header.size()) - 1;
  if (dim < 1) throw DataError("CSV file '" + path + "' has no feature columns");

  std::vector<std::vector<double>> rows;           // missing cells stored as NaN
  std::vector<int> labels;
  Index row_number = 0;                            // 1-based data row, for messages
  while (std::getline(file, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("row " + std::to_string(row_number) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()) + " ('" + path + "')");

    const std::string& label_cell = cells[static_cast<std::size_t>(label_index)];
    if (is_missing(label_cell))
      throw DataError("missing label at row " + std::to_string(row_number) + " ('" + path + "')");
    const double label_value = parse_number(label_cell, row_number, label_column);
    if (label_value != 0.0 && label_value != 1.0)
      throw DataError("non-binary label '" + trim(label_cell) + "' at row " +
                      std::to_string(row_number) + " (labels must be 0 or 1)");

    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(dim));
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (static_cast<Index>(j) == label_index) continue;
      if (is_missing(cells[j])) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        row.push_back(parse_number(cells[j], row_number, header[j]));
      }
    }
    rows.push_back(std::move(row));
    labels.push_back(static_cast<int>(label_value));
  }

  // Column means over observed values, for imputation.
  std::vector<double> column_mean(static_cast<std::size_t>(dim), 0.0);
  std::vector<Index> column_count(static_cast<std::size_t>(dim), 0);
  for (const auto& row : rows)
    for (std::size_t j = 0; j < row.size(); ++j)
      if (!std::isnan(row[j])) {
        column_mean[j] += row[j];
        ++column_count[j];
      }
  for (std::size_t j = 0; j < column_mean.size(); ++j)
    if (column_count[j] > 0) column_mean[j] /= static_cast<double>(column_count[j]);

  std::vector<Index> keep;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool has_missing =
        std::any_of(rows[i].begin(), rows[i].end(), [](double v) { return std::isnan(v); });
    if (has_missing && missing_policy == MissingPolicy::Drop) continue;
    keep.push_back(static_cast<Index>(i));
  }
  if (keep.size() < 2)
    throw DataError("fewer than 2 usable rows in '" + path + "' after missing-value handling");

  Dataset data;
  data.features.resize(static_cast<Index>(keep.size()), dim);
  data.labels.resize(static_cast<Index>(keep.size()));
  for (Index out = 0; out < static_cast<Index>(keep.size()); ++out) {
    const auto& row = rows[static_cast<std::size_t>(keep[static_cast<std::size_t>(out)])];
    for (Index j = 0; j < dim; ++j) {
      const double v = row[static_cast<std::size_t>(j)];
      data.features(out, j) = std::isnan(v) ? column_mean[static_cast<std::size_t>(j)] : v;
    }
    data.labels[out] = labels[static_cast<std::size_t>(keep[static_cast<std::size_t>(out)])];
  }
  for (std::size_t j = 0; j < header.size(); ++j)
    if (static_cast<Index>(j) != label_index) data.feature_names.push_back(trim(header[j]));
  return data;
}

StandardizationStats fit_standardizer(const Dataset& train) {
  if (train.size() < 2) throw DataError("fit_standardizer requires at least 2 rows");
  StandardizationStats stats;
  stats.means = train.features.colwise().mean();
  const Matrix centered = train.features.rowwise() - stats.means.transpose();
  stats.std_devs = (centered.array().square().colwise().mean()).sqrt().matrix();
  stats.std_devs = stats.std_devs.cwiseMax(kStdFloor);
  return stats;
}

Matrix apply_standardizer(const MatrixRef& features, const StandardizationStats& stats) {
  return ((features.rowwise() - stats.means.transpose()).array().rowwise() /
          stats.std_devs.transpose().array())
      .matrix();
}

Matrix unapply_standardizer(const MatrixRef& standardized, const StandardizationStats& stats) {
  return (standardized.array().rowwise() * stats.std_devs.transpose().array()).matrix().rowwise() +
         stats.means.transpose();
}

void standardize_in_place(Dataset& data, const StandardizationStats& stats) {
  data.features = apply_standardizer(data.features, stats);
}

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw DomainError("split requires test_fraction in (0, 1)");
  const Index m = data.size();
  const Index train_size = static_cast<Index>(std::ceil(static_cast<double>(m) * (1.0 - test_fraction)));
  const Index test_size = m - train_size;
  if (train_size < 1 || test_size < 1)
    throw DataError("split would leave an empty part (m=" + std::to_string(m) +
                    ", test_fraction=" + std::to_string(test_fraction) + ")");

  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  rng::Engine engine = rng::make_engine(seed);
  rng::shuffle(order, engine);

  const auto take = [&](Index begin, Index count) {
    Dataset part;
    part.features.resize(count, data.dim());
    part.labels.resize(count);
    part.feature_names = data.feature_names;
    for (Index i = 0; i < count; ++i) {
      const Index src = order[static_cast<std::size_t>(begin + i)];
      part.features.row(i) = data.features.row(src);
      part.labels[i] = data.labels[src];
    }
    return part;
  };
  return {take(0, train_size), take(train_size, test_size)};
}

Dataset make_synthetic_gaussians(Index count, Index dim, double separation, std::uint64_t seed) {
  if (count < 4 || count % 2 != 0)
    throw DomainError("make_synthetic_gaussians requires an even count >= 4");
  if (dim < 1) throw DomainError("make_synthetic_gaussians requires dim >= 1");
  if (!(separation >= 0.0)) throw DomainError("make_synthetic_gaussians requires separation >= 0");

  rng::Engine engine = rng::make_engine(seed);
  Dataset data;
  data.features.resize(count, dim);
  data.labels.resize(count);
  const Index half = count / 2;
  for (Index i = 0; i < count; ++i) {
    const int label = i < half ? 0 : 1;
    const double shift = (label == 0 ? -0.5 : 0.5) * separation;
    for (Index j = 0; j < dim; ++j)
      data.features(i, j) = rng::standard_normal(engine) + (j == 0 ? shift : 0.0);
    data.labels[i] = label;
  }
  for (Index j = 0; j < dim; ++j) data.feature_names.push_back("x" + std::to_string(j + 1));
  return data;
}

void flip_labels(Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw DomainError("flip_labels requires fraction in [0, 1]");
  const Index flips = static_cast<Index>(std::llround(static_cast<double>(data.size()) * fraction));
  if (flips == 0) return;
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  rng::Engine engine = rng::make_engine(seed);
  rng::shuffle(order, engine);
  for (Index k = 0; k < flips; ++k) {
    const Index i = order[static_cast<std::size_t>(k)];
    data.labels[i] = 1 - data.labels[i];
  }
}

}  // namespace vcplab::dataset
