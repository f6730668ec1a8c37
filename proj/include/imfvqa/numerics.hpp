#pragma once

// Dense row-major matrices, hand-written MLP forward/backward, Adam with
// decoupled weight decay, and a central-difference gradient checker.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "imfvqa/rng.hpp"

namespace imfvqa::num {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix row_vector(std::span<const double> values);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }
  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }

  Matrix transposed() const;
  void fill(double value);
  bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
  std::string shape_string() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator*=(double scale);

  /// Bitwise equality of shape and every entry.
  bool operator==(const Matrix& other) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// a · b. Throws ShapeError naming both shapes when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ · b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a · bᵀ without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

bool all_finite(std::span<const double> values);
void require_finite(const Matrix& m, const char* what);

struct Parameter {
  Matrix value;
  Matrix grad;

  Parameter() = default;
  explicit Parameter(Matrix v) : value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

enum class Activation { tanh, identity };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// y = act(x · W + b) with W of shape (in, out) and b of shape (1, out).
struct DenseLayer {
  Parameter weight;
  Parameter bias;
  Activation activation = Activation::identity;

  std::size_t input_dim() const { return weight.value.rows(); }
  std::size_t output_dim() const { return weight.value.cols(); }
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  /// dims = {in, h1, ..., out}; activations has dims.size() - 1 entries.
  /// Weights uniform in ±1/sqrt(fan_in), biases zero.
  static Mlp create(std::span<const std::size_t> dims, std::span<const Activation> activations, Rng& rng);
  static Mlp create(std::initializer_list<std::size_t> dims, std::initializer_list<Activation> activations,
                    Rng& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t depth() const { return layers_.size(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Weight and bias of every layer, in layer order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  std::vector<DenseLayer> layers_;
};

/// Activations cached by mlp_forward; one (input, output) pair per layer.
struct MlpTape {
  std::vector<Matrix> inputs;
  std::vector<Matrix> outputs;
  bool valid() const { return !inputs.empty() && inputs.size() == outputs.size(); }
};

struct MlpOutput {
  Matrix y;
  MlpTape tape;
};

MlpOutput mlp_forward(const Mlp& m, const Matrix& x);

/// Forward pass that skips recording a tape.
Matrix mlp_apply(const Mlp& m, const Matrix& x);

/// Accumulates parameter gradients into m and returns dL/dx.
Matrix mlp_backward(Mlp& m, const MlpTape& tape, const Matrix& dy);

struct AdamState {
  double lr = 1e-3;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// value ← value − lr·wd·value, then bias-corrected Adam on grad; grads are
/// zeroed afterwards. Moments are matched to params by position.
void adam_step(AdamState& state, std::span<Parameter* const> params);

/// Central differences with step h for every coordinate of every parameter.
/// f is re-evaluated 2·N times and must be deterministic.
std::vector<Matrix> finite_diff_grad(const std::function<double()>& f, std::span<Parameter* const> params,
                                     double h = 1e-5);

/// |a − n| / max(|a|, |n|, floor), maximized over all coordinates.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor = 1e-3);

}  // namespace imfvqa::num
