#include "wishmix/kernels.hpp"

#include "wishmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace wishmix::kernels {

ComponentTerms component_terms(double nu, const SpdMatrix& sigma) {
  const int p = sigma.dim();
  if (!(nu > p - 1)) {
    fail(ErrorKind::DomainError, "Wishart degrees of freedom must exceed p-1, got nu=" +
                                     std::to_string(nu) + " p=" + std::to_string(p));
  }
  ComponentTerms c;
  c.vec_inv_scale = vec_row(sigma.inverse());
  c.logdet_coef = 0.5 * (nu - p - 1);
  c.constant = -0.5 * nu * p * std::numbers::ln2 - 0.5 * nu * sigma.logdet() -
               log_multigamma(p, 0.5 * nu);
  return c;
}

namespace {

void check_prior(const Matrix& log_prior, Eigen::Index n, std::size_t k) {
  if (log_prior.size() == 0) return;
  if (log_prior.cols() != static_cast<Eigen::Index>(k) ||
      (log_prior.rows() != 1 && log_prior.rows() != n)) {
    fail(ErrorKind::DimensionMismatch, "log_weight_matrix: log prior has wrong shape");
  }
}

inline void fill_row(Matrix& out, const RowMatrix& vec_stack, const Vector& logdets,
                     std::span<const ComponentTerms> comps, const Matrix& log_prior,
                     Eigen::Index i) {
  const Eigen::Index prior_row = log_prior.rows() == 1 ? 0 : i;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    double v = wishart_log_density_row(vec_stack, logdets, i, comps[k]);
    if (log_prior.size() != 0) v += log_prior(prior_row, static_cast<Eigen::Index>(k));
    out(i, static_cast<Eigen::Index>(k)) = v;
  }
}

inline double row_lse(const Matrix& m, Eigen::Index i) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < m.cols(); ++k) mx = std::max(mx, m(i, k));
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < m.cols(); ++k) acc += std::exp(m(i, k) - mx);
  return mx + std::log(acc);
}

}  // namespace

namespace serial {

Vector trace_prod_batch(const Eigen::RowVectorXd& vec_a, const RowMatrix& s_stack) {
  Vector out(s_stack.rows());
  for (Eigen::Index i = 0; i < s_stack.rows(); ++i) out(i) = s_stack.row(i).dot(vec_a);
  return out;
}

Matrix log_weight_matrix(const RowMatrix& vec_stack, const Vector& logdets,
                         std::span<const ComponentTerms> comps, const Matrix& log_prior) {
  const Eigen::Index n = vec_stack.rows();
  check_prior(log_prior, n, comps.size());
  Matrix out(n, static_cast<Eigen::Index>(comps.size()));
  for (Eigen::Index i = 0; i < n; ++i) fill_row(out, vec_stack, logdets, comps, log_prior, i);
  return out;
}

Vector row_log_sum_exp(const Matrix& m) {
  Vector out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out(i) = row_lse(m, i);
  return out;
}

}  // namespace serial

namespace parallel {

Vector trace_prod_batch(const Eigen::RowVectorXd& vec_a, const RowMatrix& s_stack) {
  const Eigen::Index n = s_stack.rows();
  Vector out(n);
#pragma omp parallel for schedule(static) if (n > 256)
  for (Eigen::Index i = 0; i < n; ++i) out(i) = s_stack.row(i).dot(vec_a);
  return out;
}

Matrix log_weight_matrix(const RowMatrix& vec_stack, const Vector& logdets,
                         std::span<const ComponentTerms> comps, const Matrix& log_prior) {
  const Eigen::Index n = vec_stack.rows();
  check_prior(log_prior, n, comps.size());
  Matrix out(n, static_cast<Eigen::Index>(comps.size()));
#pragma omp parallel for schedule(static) if (n > 256)
  for (Eigen::Index i = 0; i < n; ++i) fill_row(out, vec_stack, logdets, comps, log_prior, i);
  return out;
}

Vector row_log_sum_exp(const Matrix& m) {
  const Eigen::Index n = m.rows();
  Vector out(n);
#pragma omp parallel for schedule(static) if (n > 256)
  for (Eigen::Index i = 0; i < n; ++i) out(i) = row_lse(m, i);
  return out;
}

}  // namespace parallel

}  // namespace wishmix::kernels
