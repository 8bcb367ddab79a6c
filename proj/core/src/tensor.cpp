#include "fpc/tensor.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "fpc/error.hpp"
#include "fpc/rng.hpp"

namespace fpc {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw ShapeError("ragged rows in Matrix::from_rows");
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  return t;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("hconcat: row count mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto o = out.row(r);
    auto ar = a.row(r);
    auto br = b.row(r);
    std::copy(ar.begin(), ar.end(), o.begin());
    std::copy(br.begin(), br.end(), o.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

Matrix column_slice(const Matrix& a, std::size_t first, std::size_t count) {
  if (first + count > a.cols()) throw ShapeError("column_slice out of range");
  Matrix out(a.rows(), count);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = a(r, first + c);
  return out;
}

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::silu: return "silu";
  }
  return "none";
}

Activation activation_from_string(std::string_view name) {
  if (name == "none") return Activation::none;
  if (name == "relu") return Activation::relu;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "silu") return Activation::silu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

namespace {
double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace

double activate(Activation a, double z) noexcept {
  switch (a) {
    case Activation::none: return z;
    case Activation::relu: return z > 0 ? z : 0.0;
    case Activation::leaky_relu: return z > 0 ? z : kLeakySlope * z;
    case Activation::sigmoid: return sigmoid(z);
    case Activation::silu: return z * sigmoid(z);
  }
  return z;
}

double activate_grad(Activation a, double z) noexcept {
  switch (a) {
    case Activation::none: return 1.0;
    case Activation::relu: return z > 0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return z > 0 ? 1.0 : kLeakySlope;
    case Activation::sigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case Activation::silu: {
      const double s = sigmoid(z);
      return s + z * s * (1.0 - s);
    }
  }
  return 1.0;
}

LinearLayer::LinearLayer(Matrix w, std::vector<double> b, Activation act)
    : weight(std::move(w)), bias(std::move(b)), activation(act) {
  if (bias.size() != weight.cols()) {
    throw ShapeError("linear layer bias length " + std::to_string(bias.size()) +
                     " != weight cols " + std::to_string(weight.cols()));
  }
}

namespace {
Matrix pre_activation(const LinearLayer& layer, const Matrix& input) {
  if (input.cols() != layer.weight.rows()) {
    throw ShapeError("fc: input has " + std::to_string(input.cols()) + " columns, layer expects " +
                     std::to_string(layer.weight.rows()));
  }
  if (layer.bias.size() != layer.weight.cols()) throw ShapeError("fc: bias/weight mismatch");
  Matrix z = matmul(input, layer.weight);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto zr = z.row(r);
    for (std::size_t c = 0; c < z.cols(); ++c) zr[c] += layer.bias[c];
  }
  return z;
}
}  // namespace

Matrix fc_forward(const LinearLayer& layer, const Matrix& input) {
  Matrix z = pre_activation(layer, input);
  if (layer.activation != Activation::none)
    for (double& v : z.data()) v = activate(layer.activation, v);
  return z;
}

LinearGrads fc_backward(const LinearLayer& layer, const Matrix& input, const Matrix& grad_out) {
  Matrix z = pre_activation(layer, input);
  if (grad_out.rows() != z.rows() || grad_out.cols() != z.cols())
    throw ShapeError("fc_backward: grad_out shape mismatch");

  // dL/dz = grad_out * act'(z)
  Matrix dz = grad_out;
  if (layer.activation != Activation::none) {
    for (std::size_t i = 0; i < dz.size(); ++i)
      dz.data()[i] *= activate_grad(layer.activation, z.data()[i]);
  }

  LinearGrads g;
  g.grad_input = matmul(dz, transpose(layer.weight));
  g.grad_weight = matmul(transpose(input), dz);
  g.grad_bias.assign(dz.cols(), 0.0);
  for (std::size_t r = 0; r < dz.rows(); ++r)
    for (std::size_t c = 0; c < dz.cols(); ++c) g.grad_bias[c] += dz(r, c);
  return g;
}

std::vector<double> global_average_pool(const Matrix& attrs) {
  if (attrs.rows() == 0) throw EmptyInputError("global_average_pool: no rows");
  std::vector<double> mean(attrs.cols(), 0.0);
  for (std::size_t r = 0; r < attrs.rows(); ++r) {
    auto row = attrs.row(r);
    for (std::size_t c = 0; c < attrs.cols(); ++c) mean[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(attrs.rows());
  for (double& m : mean) m *= inv;
  return mean;
}

AffineNorm AffineNorm::identity(std::size_t channels) {
  return AffineNorm{std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0)};
}

Matrix affine_norm(const AffineNorm& norm, const Matrix& attrs) {
  if (norm.scale.size() != attrs.cols() || norm.shift.size() != attrs.cols())
    throw ShapeError("affine_norm: channel count mismatch");
  for (double s : norm.scale)
    if (!(s > 0.0)) throw InvariantError("affine_norm: scale must be strictly positive");
  Matrix out = attrs;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < out.cols(); ++c) row[c] = row[c] * norm.scale[c] + norm.shift[c];
  }
  return out;
}

Matrix scale_columns(const Matrix& attrs, std::span<const double> gains) {
  if (gains.size() != attrs.cols()) throw ShapeError("scale_columns: gain length mismatch");
  Matrix out = attrs;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < out.cols(); ++c) row[c] *= gains[c];
  }
  return out;
}

std::size_t shape_numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::vector<double> seeded_init(const Shape& shape, std::uint64_t seed, std::string_view scheme) {
  if (shape.empty()) throw ConfigError("seeded_init: empty shape");
  for (auto d : shape)
    if (d == 0) throw ConfigError("seeded_init: zero dimension in " + shape_to_string(shape));
  const std::size_t n = shape_numel(shape);
  if (scheme == "zeros") return std::vector<double>(n, 0.0);
  if (scheme == "ones") return std::vector<double>(n, 1.0);
  if (scheme == "fan_in_uniform") {
    std::size_t fan_in = 1;
    for (std::size_t i = 0; i + 1 < shape.size(); ++i) fan_in *= shape[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::mt19937_64 rng(mix_seed({seed, static_cast<std::uint64_t>(StreamTag::weights)}));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> out(n);
    for (double& v : out) v = dist(rng);
    return out;
  }
  throw ConfigError("seeded_init: unknown scheme '" + std::string(scheme) + "'");
}

}  // namespace fpc
