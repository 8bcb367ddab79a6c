#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fpc {

/// Row-major dense matrix of doubles. Rows are voxels (or samples), columns
/// are feature channels throughout the library.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
/// Horizontal concatenation: [a | b]. Row counts must match.
Matrix hconcat(const Matrix& a, const Matrix& b);
/// Columns [first, first + count) of `a`.
Matrix column_slice(const Matrix& a, std::size_t first, std::size_t count);

enum class Activation { none, relu, leaky_relu, sigmoid, silu };

inline constexpr double kLeakySlope = 0.01;

std::string_view to_string(Activation a) noexcept;
Activation activation_from_string(std::string_view name);

double activate(Activation a, double z) noexcept;
/// d activate / dz evaluated at pre-activation z.
double activate_grad(Activation a, double z) noexcept;

/// Fully connected layer y = act(x W + b) with W stored c_in x c_out.
struct LinearLayer {
  Matrix weight;
  std::vector<double> bias;
  Activation activation = Activation::none;

  LinearLayer() = default;
  LinearLayer(Matrix w, std::vector<double> b, Activation act);

  std::size_t in_features() const noexcept { return weight.rows(); }
  std::size_t out_features() const noexcept { return weight.cols(); }
};

Matrix fc_forward(const LinearLayer& layer, const Matrix& input);

struct LinearGrads {
  Matrix grad_input;
  Matrix grad_weight;
  std::vector<double> grad_bias;
};

/// Analytic gradients of fc_forward's output (through the activation) given
/// the upstream gradient `grad_out`.
LinearGrads fc_backward(const LinearLayer& layer, const Matrix& input, const Matrix& grad_out);

/// Per-column mean. Throws EmptyInputError on a matrix without rows.
std::vector<double> global_average_pool(const Matrix& attrs);

/// Frozen (eval-mode) batch normalization: out = x * scale + shift.
struct AffineNorm {
  std::vector<double> scale;
  std::vector<double> shift;

  static AffineNorm identity(std::size_t channels);
  std::size_t channels() const noexcept { return scale.size(); }
};

Matrix affine_norm(const AffineNorm& norm, const Matrix& attrs);

/// Scales every row of `attrs` elementwise by `gains` (length cols).
Matrix scale_columns(const Matrix& attrs, std::span<const double> gains);

// Parameter initialization -------------------------------------------------

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_to_string(const Shape& shape);

/// Deterministic parameter values. Schemes:
///   "fan_in_uniform": U(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = product
///                     of every dimension but the last
///   "zeros", "ones"
std::vector<double> seeded_init(const Shape& shape, std::uint64_t seed, std::string_view scheme);

}  // namespace fpc
