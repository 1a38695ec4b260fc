#pragma once

#include <Eigen/Dense>

#include <span>

namespace wishmix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// n x p^2 stack of vectorized matrices, one observation per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Diagonal jitter added (once) when a Cholesky factorization fails.
inline constexpr double kCholeskyJitter = 1e-6;

enum class JitterPolicy { Allow, Forbid };

struct CholeskyResult {
  Matrix lower;
  double logdet = 0.0;
  double jitter = 0.0;  // 0 or kCholeskyJitter
};

/// L L^T = m + jitter * I. Throws NotPositiveDefinite when the factorization
/// fails (after one jittered retry under JitterPolicy::Allow).
CholeskyResult cholesky_logdet(const Matrix& m, JitterPolicy policy = JitterPolicy::Allow);

/// Symmetric positive definite matrix with its Cholesky factor and
/// log-determinant computed at construction. Immutable.
class SpdMatrix {
 public:
  SpdMatrix() = default;
  explicit SpdMatrix(const Matrix& m, JitterPolicy policy = JitterPolicy::Allow);

  static SpdMatrix identity(int p);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Matrix& matrix() const { return entries_; }
  const Matrix& chol() const { return chol_; }
  double logdet() const { return logdet_; }
  /// Diagonal jitter folded into chol/logdet (0 when none was needed).
  double jitter() const { return jitter_; }
  bool jittered() const { return jitter_ > 0.0; }

  /// Inverse of the (jittered) matrix via the Cholesky factor.
  Matrix inverse() const;
  /// tr(M^{-1} S) via a triangular solve.
  double trace_inv_prod(const Matrix& s) const;
  double operator()(int i, int j) const { return entries_(i, j); }

 private:
  Matrix entries_;
  Matrix chol_;
  double logdet_ = 0.0;
  double jitter_ = 0.0;
};

/// Row i of the result is vec(S_i)^T vec(a_inv) = tr(a_inv S_i) for symmetric S_i.
Vector trace_prod_batch(const Matrix& a_inv, const RowMatrix& s_stack);

/// Row-major vec of a square matrix as a row vector of length p^2.
Eigen::RowVectorXd vec_row(const Matrix& m);

// Scalar special functions (thin wrappers, a > 0).
double log_gamma(double a);
double digamma(double a);
double trigamma(double a);

/// log Gamma_p(a) = p(p-1)/4 log(pi) + sum_{j=1..p} log Gamma(a + (1-j)/2).
double log_multigamma(int p, double a);
/// sum_{j=1..p} digamma(a + (1-j)/2)
double multidigamma(int p, double a);
/// sum_{j=1..p} trigamma(a + (1-j)/2)
double multitrigamma(int p, double a);

/// log sum exp(v_i), max-shifted; -inf for an all -inf input.
double log_sum_exp(std::span<const double> v);
double log_sum_exp(const Vector& v);

/// Fixed-order pairwise summation, used wherever a reduction must not depend
/// on how the terms were produced.
double pairwise_sum(std::span<const double> v);

}  // namespace wishmix
