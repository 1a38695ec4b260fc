#include "wishmix/numcore.hpp"

#include "wishmix/error.hpp"
#include "wishmix/kernels.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace wishmix {

namespace {

constexpr double kSymmetryTol = 1e-10;

bool try_llt(const Matrix& m, CholeskyResult& out) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) return false;
  Matrix lower = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index j = 0; j < lower.rows(); ++j) {
    const double d = lower(j, j);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    logdet += std::log(d);
  }
  out.lower = std::move(lower);
  out.logdet = 2.0 * logdet;
  return true;
}

}  // namespace

CholeskyResult cholesky_logdet(const Matrix& m, JitterPolicy policy) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    fail(ErrorKind::DimensionMismatch,
         "cholesky_logdet: expected a non-empty square matrix, got " +
             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (!m.allFinite()) fail(ErrorKind::NotPositiveDefinite, "cholesky_logdet: non-finite entries");
  CholeskyResult result;
  if (try_llt(m, result)) return result;
  if (policy == JitterPolicy::Allow) {
    Matrix jittered = m;
    jittered.diagonal().array() += kCholeskyJitter;
    if (try_llt(jittered, result)) {
      result.jitter = kCholeskyJitter;
      return result;
    }
  }
  fail(ErrorKind::NotPositiveDefinite, "cholesky_logdet: matrix is not positive definite");
}

SpdMatrix::SpdMatrix(const Matrix& m, JitterPolicy policy) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    fail(ErrorKind::DimensionMismatch, "SpdMatrix: expected a non-empty square matrix");
  }
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale) {
    fail(ErrorKind::NotSymmetric, "SpdMatrix: matrix is not symmetric (max asymmetry " +
                                      std::to_string(asym) + ")");
  }
  entries_ = 0.5 * (m + m.transpose());
  auto factor = cholesky_logdet(entries_, policy);
  chol_ = std::move(factor.lower);
  logdet_ = factor.logdet;
  jitter_ = factor.jitter;
}

SpdMatrix SpdMatrix::identity(int p) { return SpdMatrix(Matrix::Identity(p, p)); }

Matrix SpdMatrix::inverse() const {
  const int p = dim();
  Matrix linv = chol_.triangularView<Eigen::Lower>().solve(Matrix::Identity(p, p));
  Matrix inv = linv.transpose() * linv;
  return 0.5 * (inv + inv.transpose());
}

double SpdMatrix::trace_inv_prod(const Matrix& s) const {
  // tr((L L^T)^{-1} S) = tr(L^{-T} L^{-1} S)
  Matrix x = chol_.triangularView<Eigen::Lower>().solve(s);
  Matrix y = chol_.transpose().triangularView<Eigen::Upper>().solve(x);
  return y.trace();
}

Vector trace_prod_batch(const Matrix& a_inv, const RowMatrix& s_stack) {
  if (a_inv.rows() != a_inv.cols() || s_stack.cols() != a_inv.size()) {
    fail(ErrorKind::DimensionMismatch,
         "trace_prod_batch: s_stack has " + std::to_string(s_stack.cols()) +
             " columns, expected p^2 = " + std::to_string(a_inv.size()));
  }
  return kernels::parallel::trace_prod_batch(vec_row(a_inv), s_stack);
}

Eigen::RowVectorXd vec_row(const Matrix& m) {
  Eigen::RowVectorXd out(m.size());
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(idx++) = m(i, j);
  return out;
}

double log_gamma(double a) {
  if (!(a > 0.0)) fail(ErrorKind::DomainError, "log_gamma: argument must be positive");
  return boost::math::lgamma(a);
}

double digamma(double a) {
  if (!(a > 0.0)) fail(ErrorKind::DomainError, "digamma: argument must be positive");
  return boost::math::digamma(a);
}

double trigamma(double a) {
  if (!(a > 0.0)) fail(ErrorKind::DomainError, "trigamma: argument must be positive");
  return boost::math::trigamma(a);
}

namespace {

void check_multi_domain(int p, double a, const char* who) {
  if (p < 1) fail(ErrorKind::DomainError, std::string(who) + ": p must be >= 1");
  if (!(a > 0.5 * (p - 1))) {
    fail(ErrorKind::DomainError, std::string(who) + ": requires a > (p-1)/2, got a=" +
                                     std::to_string(a) + " p=" + std::to_string(p));
  }
}

}  // namespace

double log_multigamma(int p, double a) {
  check_multi_domain(p, a, "log_multigamma");
  double out = 0.25 * p * (p - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= p; ++j) out += boost::math::lgamma(a + 0.5 * (1 - j));
  return out;
}

double multidigamma(int p, double a) {
  check_multi_domain(p, a, "multidigamma");
  double out = 0.0;
  for (int j = 1; j <= p; ++j) out += boost::math::digamma(a + 0.5 * (1 - j));
  return out;
}

double multitrigamma(int p, double a) {
  check_multi_domain(p, a, "multitrigamma");
  double out = 0.0;
  for (int j = 1; j <= p; ++j) out += boost::math::trigamma(a + 0.5 * (1 - j));
  return out;
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;  // all -inf, or +inf/nan present
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

double log_sum_exp(const Vector& v) {
  return log_sum_exp(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace wishmix
