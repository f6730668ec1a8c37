#include "imfvqa/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "imfvqa/errors.hpp"

namespace imfvqa::num {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    std::ostringstream msg;
    msg << "matrix data length " << data_.size() << " does not match shape (" << rows << "x" << cols << ")";
    throw ShapeError(msg.str());
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged rows in Matrix::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string Matrix::shape_string() const {
  std::ostringstream s;
  s << "(" << rows_ << "x" << cols_ << ")";
  return s.str();
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (!same_shape(other)) {
    throw ShapeError("cannot add " + other.shape_string() + " into " + shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double scale) {
  for (double& x : data_) x *= scale;
  return *this;
}

bool Matrix::operator==(const Matrix& other) const {
  return same_shape(other) &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

void require_finite(const Matrix& m, const char* what) {
  if (!all_finite(m.data())) throw NumericError(std::string("non-finite value in ") + what);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul shape mismatch: " + a.shape_string() + " x " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  require_finite(out, "matmul result");
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_tn shape mismatch: " + a.shape_string() + "^T x " + b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt shape mismatch: " + a.shape_string() + " x " + b.shape_string() + "^T");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(j, k);
      out(i, j) = acc;
    }
  }
  return out;
}

const char* to_string(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw ValidationError("unknown activation '" + name + "' (allowed: tanh, identity)");
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.value.rows() != 1 || l.bias.value.cols() != l.output_dim()) {
      throw ShapeError("layer " + std::to_string(i) + " bias " + l.bias.value.shape_string() +
                       " does not match weight " + l.weight.value.shape_string());
    }
    if (i > 0 && layers_[i - 1].output_dim() != l.input_dim()) {
      throw ShapeError("layer " + std::to_string(i) + " input dim " + std::to_string(l.input_dim()) +
                       " does not chain with previous output dim " +
                       std::to_string(layers_[i - 1].output_dim()));
    }
  }
}

Mlp Mlp::create(std::span<const std::size_t> dims, std::span<const Activation> activations, Rng& rng) {
  if (dims.size() < 2 || activations.size() != dims.size() - 1) {
    throw ShapeError("Mlp::create needs n+1 dims for n activations");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t fan_in = dims[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    Matrix w(fan_in, dims[i + 1]);
    for (double& x : w.data()) x = rng.uniform(-bound, bound);
    layers.push_back(DenseLayer{Parameter(std::move(w)), Parameter(Matrix(1, dims[i + 1])), activations[i]});
  }
  return Mlp(std::move(layers));
}

Mlp Mlp::create(std::initializer_list<std::size_t> dims, std::initializer_list<Activation> activations,
                Rng& rng) {
  return create(std::span<const std::size_t>(dims.begin(), dims.size()),
                std::span<const Activation>(activations.begin(), activations.size()), rng);
}

std::size_t Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().input_dim(); }
std::size_t Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().output_dim(); }

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

namespace {

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  Matrix y = matmul(x, layer.weight.value);
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += layer.bias.value(0, c);
  if (layer.activation == Activation::tanh) {
    for (double& v : y.data()) v = std::tanh(v);
  }
  require_finite(y, "dense layer output");
  return y;
}

void check_input(const Mlp& m, const Matrix& x) {
  if (m.depth() == 0) throw StateError("mlp has no layers");
  if (x.cols() != m.input_dim()) {
    throw ShapeError("mlp input " + x.shape_string() + " does not match input dim " +
                     std::to_string(m.input_dim()));
  }
}

}  // namespace

MlpOutput mlp_forward(const Mlp& m, const Matrix& x) {
  check_input(m, x);
  MlpOutput out;
  Matrix current = x;
  for (const auto& layer : m.layers()) {
    Matrix next = dense_forward(layer, current);
    out.tape.inputs.push_back(std::move(current));
    out.tape.outputs.push_back(next);
    current = std::move(next);
  }
  out.y = std::move(current);
  return out;
}

Matrix mlp_apply(const Mlp& m, const Matrix& x) {
  check_input(m, x);
  Matrix current = x;
  for (const auto& layer : m.layers()) current = dense_forward(layer, current);
  return current;
}

Matrix mlp_backward(Mlp& m, const MlpTape& tape, const Matrix& dy) {
  if (!tape.valid() || tape.inputs.size() != m.depth()) {
    throw StateError("mlp_backward called without a matching forward tape");
  }
  if (!dy.same_shape(tape.outputs.back())) {
    throw ShapeError("mlp_backward upstream gradient " + dy.shape_string() + " does not match output " +
                     tape.outputs.back().shape_string());
  }
  Matrix grad = dy;
  for (std::size_t i = m.depth(); i-- > 0;) {
    DenseLayer& layer = m.layers()[i];
    if (layer.activation == Activation::tanh) {
      const Matrix& y = tape.outputs[i];
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] *= 1.0 - y[k] * y[k];
    }
    layer.weight.grad += matmul_tn(tape.inputs[i], grad);
    for (std::size_t r = 0; r < grad.rows(); ++r)
      for (std::size_t c = 0; c < grad.cols(); ++c) layer.bias.grad(0, c) += grad(r, c);
    grad = matmul_nt(grad, layer.weight.value);
  }
  return grad;
}

void adam_step(AdamState& state, std::span<Parameter* const> params) {
  if (params.empty()) return;
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.emplace_back(p->value.rows(), p->value.cols());
      state.v.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (state.m.size() != params.size()) {
    throw StateError("adam_step parameter count changed from " + std::to_string(state.m.size()) + " to " +
                     std::to_string(params.size()));
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    if (!m.same_shape(p.value)) {
      throw ShapeError("adam moment " + m.shape_string() + " does not match parameter " + p.value.shape_string());
    }
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      p.value[k] -= state.lr * state.weight_decay * p.value[k];
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p.value[k] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
    p.zero_grad();
  }
}

std::vector<Matrix> finite_diff_grad(const std::function<double()>& f, std::span<Parameter* const> params,
                                     double h) {
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (Parameter* p : params) {
    Matrix g(p->value.rows(), p->value.cols());
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double original = p->value[k];
      p->value[k] = original + h;
      const double plus = f();
      p->value[k] = original - h;
      const double minus = f();
      p->value[k] = original;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericError("finite_diff_grad: objective is not finite at coordinate " + std::to_string(k));
      }
      g[k] = (plus - minus) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
  if (analytic.size() != numeric.size()) throw ShapeError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace imfvqa::num
