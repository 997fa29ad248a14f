// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace gdu {

using Vector = std::vector<double>;

// Dense row-major matrix of 64-bit floats. Hidden sizes stay <= 256 in every
// experiment, so no blocked or sparse storage.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  static Matrix identity(std::size_t n);
};

// xoshiro256++ seeded through splitmix64. A fixed, platform-independent
// generator: identical seeds reproduce identical draw sequences everywhere.
// Pinned by test vectors in tests/test_numerics.cpp.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform on [0,1), 53-bit resolution.
  double next_double();
  double uniform(double lo, double hi);
  // Unbiased integer in [0, n), n >= 1. Rejection sampling.
  std::uint64_t next_below(std::uint64_t n);
  // Independent child stream; advances this stream by one draw.
  Rng fork();

 private:
  std::uint64_t s_[4];
};

// ---- matrix products ------------------------------------------------------

Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T

void matmul_acc(Matrix& c, const Matrix& a, const Matrix& b);     // c += a * b
void matmul_tn_acc(Matrix& c, const Matrix& a, const Matrix& b);  // c += a^T * b

Vector matvec(const Matrix& a, const Vector& v);   // a * v
Vector tmatvec(const Matrix& a, const Vector& v);  // a^T * v

// ---- elementwise ----------------------------------------------------------

double sigmoid(double x);

void sigmoid_inplace(std::span<double> x);
void tanh_inplace(std::span<double> x);

Vector add(const Vector& a, const Vector& b);
Vector sub(const Vector& a, const Vector& b);
Vector hadamard(const Vector& a, const Vector& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);

// row-broadcast: every row of m gets v added
void add_row_inplace(Matrix& m, const Vector& v);
// column sums of m as a vector of length m.cols
Vector colsum(const Matrix& m);

void scale_inplace(std::span<double> x, double a);
// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

bool all_finite(std::span<const double> x);

// ---- softmax / init -------------------------------------------------------

// Max-subtracted softmax. Output sums to 1 within 1e-12 for any finite input
// and is invariant under adding a constant to all logits. Entries can round
// to exactly 0 or 1 once logit gaps exceed ~36 (double saturation).
void softmax_stable_inplace(std::span<double> logits);
Vector softmax_stable(Vector logits);

// Entries i.i.d. uniform on +-sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out);

}  // namespace gdu
