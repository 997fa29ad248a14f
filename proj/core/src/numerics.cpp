// SPDX-License-Identifier: Apache-2.0

#include "gdu/numerics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "gdu/errors.hpp"

namespace gdu {

namespace {

[[noreturn]] void shape_error(const char* op, std::size_t ar, std::size_t ac,
                              std::size_t br, std::size_t bc) {
  throw ConfigError(std::string(op) + ": shape mismatch (" + std::to_string(ar) +
                    "x" + std::to_string(ac) + " vs " + std::to_string(br) + "x" +
                    std::to_string(bc) + ")");
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = std::rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = std::rotl(s_[3], 45);
  return result;
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

std::uint64_t Rng::next_below(std::uint64_t n) {
  if (n == 0) throw ConfigError("Rng::next_below: n must be >= 1");
  const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

Rng Rng::fork() { return Rng(next_u64()); }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) shape_error("matmul", a.rows, a.cols, b.rows, b.cols);
  Matrix c(a.rows, b.cols, 0.0);
  matmul_acc(c, a, b);
  return c;
}

void matmul_acc(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    shape_error("matmul_acc", a.rows, a.cols, b.rows, b.cols);
  const std::size_t n = b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) shape_error("matmul_tn", a.rows, a.cols, b.rows, b.cols);
  Matrix c(a.cols, b.cols, 0.0);
  matmul_tn_acc(c, a, b);
  return c;
}

void matmul_tn_acc(Matrix& c, const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols)
    shape_error("matmul_tn_acc", a.rows, a.cols, b.rows, b.cols);
  const std::size_t n = b.cols;
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* arow = a.row(k);
    const double* brow = b.row(k);
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      double* crow = c.row(i);
      for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
    }
  }
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) shape_error("matmul_nt", a.rows, a.cols, b.rows, b.cols);
  Matrix c(a.rows, b.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      crow[j] = acc;
    }
  }
  return c;
}

Vector matvec(const Matrix& a, const Vector& v) {
  if (a.cols != v.size()) shape_error("matvec", a.rows, a.cols, v.size(), 1);
  Vector y(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) acc += arow[j] * v[j];
    y[i] = acc;
  }
  return y;
}

Vector tmatvec(const Matrix& a, const Vector& v) {
  if (a.rows != v.size()) shape_error("tmatvec", a.rows, a.cols, v.size(), 1);
  Vector y(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    const double vi = v[i];
    for (std::size_t j = 0; j < a.cols; ++j) y[j] += vi * arow[j];
  }
  return y;
}

double sigmoid(double x) {
  // split on sign so exp never overflows
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

void sigmoid_inplace(std::span<double> x) {
  for (auto& v : x) v = sigmoid(v);
}

void tanh_inplace(std::span<double> x) {
  for (auto& v : x) v = std::tanh(v);
}

namespace {
template <typename T>
T binary_op(const T& a, const T& b, const char* name, double (*op)(double, double));

template <>
Vector binary_op<Vector>(const Vector& a, const Vector& b, const char* name,
                         double (*op)(double, double)) {
  if (a.size() != b.size()) shape_error(name, a.size(), 1, b.size(), 1);
  Vector c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = op(a[i], b[i]);
  return c;
}

template <>
Matrix binary_op<Matrix>(const Matrix& a, const Matrix& b, const char* name,
                         double (*op)(double, double)) {
  if (!a.same_shape(b)) shape_error(name, a.rows, a.cols, b.rows, b.cols);
  Matrix c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = op(a.data[i], b.data[i]);
  return c;
}

double op_add(double x, double y) { return x + y; }
double op_sub(double x, double y) { return x - y; }
double op_mul(double x, double y) { return x * y; }
}  // namespace

Vector add(const Vector& a, const Vector& b) { return binary_op(a, b, "add", op_add); }
Vector sub(const Vector& a, const Vector& b) { return binary_op(a, b, "sub", op_sub); }
Vector hadamard(const Vector& a, const Vector& b) { return binary_op(a, b, "hadamard", op_mul); }
Matrix add(const Matrix& a, const Matrix& b) { return binary_op(a, b, "add", op_add); }
Matrix sub(const Matrix& a, const Matrix& b) { return binary_op(a, b, "sub", op_sub); }
Matrix hadamard(const Matrix& a, const Matrix& b) { return binary_op(a, b, "hadamard", op_mul); }

void add_row_inplace(Matrix& m, const Vector& v) {
  if (m.cols != v.size()) shape_error("add_row_inplace", m.rows, m.cols, v.size(), 1);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* row = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) row[j] += v[j];
  }
}

Vector colsum(const Matrix& m) {
  Vector s(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) s[j] += row[j];
  }
  return s;
}

void scale_inplace(std::span<double> x, double a) {
  for (auto& v : x) v *= a;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) shape_error("axpy", x.size(), 1, y.size(), 1);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

bool all_finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

void softmax_stable_inplace(std::span<double> logits) {
  if (logits.empty()) return;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : logits) v /= sum;
}

Vector softmax_stable(Vector logits) {
  softmax_stable_inplace(logits);
  return logits;
}

Matrix xavier_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  if (fan_in < 1 || fan_out < 1)
    throw ConfigError("xavier_uniform: fan_in and fan_out must be >= 1");
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (auto& v : m.data) v = rng.uniform(-limit, limit);
  return m;
}

}  // namespace gdu
