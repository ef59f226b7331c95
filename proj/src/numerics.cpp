#include "slu/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slu/errors.hpp"

namespace slu {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows_) + "x" +
                     std::to_string(cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double Rng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double Rng::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

std::size_t Rng::index(std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
}

bool Rng::bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

Matrix& ParamStore::add(const std::string& name, Matrix value) {
  if (contains(name)) throw ShapeError("duplicate parameter slot '" + name + "'");
  Matrix grad(value.rows(), value.cols());
  auto [it, inserted] = slots_.emplace(name, Slot{std::move(value), std::move(grad)});
  return it->second.value;
}

namespace {

template <typename Store>
auto& find_slot(Store& slots, const std::string& name) {
  auto it = slots.find(name);
  if (it == slots.end()) throw NotFoundError("no parameter slot '" + name + "'");
  return it->second;
}

}  // namespace

Matrix& ParamStore::value(const std::string& name) { return find_slot(slots_, name).value; }
const Matrix& ParamStore::value(const std::string& name) const {
  return find_slot(slots_, name).value;
}
Matrix& ParamStore::grad(const std::string& name) { return find_slot(slots_, name).grad; }
const Matrix& ParamStore::grad(const std::string& name) const {
  return find_slot(slots_, name).grad;
}

void ParamStore::zero_grad() {
  for (auto& [name, slot] : slots_) slot.grad.fill(0.0);
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, slot] : slots_) n += slot.value.size();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& [name, slot] : slots_) out.push_back(name);
  return out;
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (slots_.size() != other.slots_.size()) return false;
  for (const auto& [name, slot] : slots_) {
    auto it = other.slots_.find(name);
    if (it == other.slots_.end() || !(it->second.value == slot.value)) return false;
  }
  return true;
}

Matrix init_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(-s, s);
  return m;
}

Vector affine(std::span<const double> x, const Matrix& w, std::span<const double> b) {
  if (x.size() != w.cols() || b.size() != w.rows()) {
    throw ShapeError("affine: W is " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()) + ", x has " + std::to_string(x.size()) +
                     ", b has " + std::to_string(b.size()));
  }
  Vector y(b.begin(), b.end());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    y[r] += std::inner_product(row.begin(), row.end(), x.begin(), 0.0);
  }
  return y;
}

Vector matvec(const Matrix& w, std::span<const double> x) {
  if (x.size() != w.cols()) {
    throw ShapeError("matvec: W has " + std::to_string(w.cols()) + " columns, x has " +
                     std::to_string(x.size()));
  }
  Vector y(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const auto row = w.row(r);
    y[r] = std::inner_product(row.begin(), row.end(), x.begin(), 0.0);
  }
  return y;
}

void matvec_transpose_acc(const Matrix& w, std::span<const double> dy, std::span<double> dx) {
  if (dy.size() != w.rows() || dx.size() != w.cols()) throw ShapeError("matvec_transpose_acc");
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    const auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) dx[c] += g * row[c];
  }
}

void outer_acc(std::span<const double> dy, std::span<const double> x, Matrix& dw) {
  if (dy.size() != dw.rows() || x.size() != dw.cols()) throw ShapeError("outer_acc");
  for (std::size_t r = 0; r < dw.rows(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    auto row = dw.row(r);
    for (std::size_t c = 0; c < dw.cols(); ++c) row[c] += g * x[c];
  }
}

Vector softmax(std::span<const double> v) {
  if (v.empty()) throw DomainError("softmax of an empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

Vector log_softmax(std::span<const double> v) {
  if (v.empty()) throw DomainError("log_softmax of an empty vector");
  const double lse = logsumexp(v);
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) return kNegInf;
  const double m = *std::max_element(v.begin(), v.end());
  if (m == kNegInf) return kNegInf;
  double total = 0.0;
  for (double x : v) total += std::exp(x - m);
  return m + std::log(total);
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector concat(std::span<const double> a, std::span<const double> b) {
  Vector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw DomainError("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void sgd_step(ParamStore& store, double lr) {
  if (!(lr > 0.0)) throw DomainError("sgd_step: learning rate must be positive");
  for (const auto& [name, slot] : store.slots()) {
    for (double g : slot.grad.data()) {
      if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in slot '" + name + "'");
    }
  }
  for (auto& [name, slot] : store.slots()) {
    auto& v = slot.value.data();
    auto& g = slot.grad.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    slot.grad.fill(0.0);
  }
}

double clip_grad_norm(ParamStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, slot] : store.slots()) {
    for (double g : slot.grad.data()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (std::isfinite(norm) && norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& [name, slot] : store.slots()) {
      for (double& g : slot.grad.data()) g *= scale;
    }
  }
  return norm;
}

double grad_check(const std::function<double(ParamStore&)>& loss_and_grad, ParamStore& store,
                  const GradCheckOptions& options) {
  store.zero_grad();
  loss_and_grad(store);
  std::map<std::string, Matrix> analytic;
  for (const auto& [name, slot] : store.slots()) analytic.emplace(name, slot.grad);

  Rng rng(options.seed);
  double worst = 0.0;
  for (auto& [name, slot] : store.slots()) {
    auto& values = slot.value.data();
    std::vector<std::size_t> coords(values.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.samples_per_slot != 0 && coords.size() > options.samples_per_slot) {
      std::shuffle(coords.begin(), coords.end(), rng.engine());
      coords.resize(options.samples_per_slot);
    }
    for (std::size_t i : coords) {
      const double saved = values[i];
      values[i] = saved + options.eps;
      const double plus = loss_and_grad(store);
      values[i] = saved - options.eps;
      const double minus = loss_and_grad(store);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double exact = analytic.at(name).data()[i];
      const double denom = std::max({1.0, std::abs(exact), std::abs(numeric)});
      worst = std::max(worst, std::abs(exact - numeric) / denom);
    }
  }
  store.zero_grad();
  return worst;
}

}  // namespace slu
