#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace slu {

using Vector = std::vector<double>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  void fill(double v);
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Deterministic generator shared by initialization, shuffling and data synthesis.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi);
  double normal(double mean, double stddev);
  // Uniform integer in [lo, hi].
  std::size_t index(std::size_t lo, std::size_t hi);
  bool bernoulli(double p);
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Named parameter slots, each holding a value and a gradient of identical shape.
class ParamStore {
 public:
  struct Slot {
    Matrix value;
    Matrix grad;
  };

  // Registers a new slot with a zero gradient. Throws ShapeError on duplicate names.
  Matrix& add(const std::string& name, Matrix value);
  bool contains(const std::string& name) const { return slots_.count(name) != 0; }

  Matrix& value(const std::string& name);
  const Matrix& value(const std::string& name) const;
  Matrix& grad(const std::string& name);
  const Matrix& grad(const std::string& name) const;

  void zero_grad();
  std::size_t parameter_count() const;
  std::vector<std::string> names() const;

  std::map<std::string, Slot>& slots() noexcept { return slots_; }
  const std::map<std::string, Slot>& slots() const noexcept { return slots_; }

  // Equality of names and values; gradients are ignored.
  bool same_values(const ParamStore& other) const;

 private:
  std::map<std::string, Slot> slots_;
};

// Uniform in [-s, s] with s = 1/sqrt(fan_in).
Matrix init_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng);

// W x + b.
Vector affine(std::span<const double> x, const Matrix& w, std::span<const double> b);
// W x.
Vector matvec(const Matrix& w, std::span<const double> x);
// Accumulates W^T dy into dx.
void matvec_transpose_acc(const Matrix& w, std::span<const double> dy, std::span<double> dx);
// Accumulates dy x^T into dw.
void outer_acc(std::span<const double> dy, std::span<const double> x, Matrix& dw);

Vector softmax(std::span<const double> v);
Vector log_softmax(std::span<const double> v);
double logsumexp(std::span<const double> v);
// log(exp(a) + exp(b)) with -inf as log 0.
double log_add(double a, double b);

double sigmoid(double x);
Vector concat(std::span<const double> a, std::span<const double> b);
std::size_t argmax(std::span<const double> v);

// value <- value - lr * grad for every slot, then gradients are zeroed.
// Throws DivergenceError before touching any value when a gradient is not finite.
void sgd_step(ParamStore& store, double lr);

// Rescales all gradients so that their global L2 norm is at most max_norm.
// Returns the norm measured before clipping.
double clip_grad_norm(ParamStore& store, double max_norm);

struct GradCheckOptions {
  double eps = 1e-5;
  // Coordinates sampled per slot; 0 checks every coordinate.
  std::size_t samples_per_slot = 0;
  std::uint64_t seed = 0;
};

// loss_and_grad must return the loss and accumulate its gradient into the store.
// Returns max |analytic - numeric| / max(1, |analytic|, |numeric|) over the checked
// coordinates, using central differences.
double grad_check(const std::function<double(ParamStore&)>& loss_and_grad,
                  ParamStore& store, const GradCheckOptions& options = {});

}  // namespace slu
