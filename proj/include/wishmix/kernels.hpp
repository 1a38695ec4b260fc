#pragma once

// Data-parallel inner loops over observations. Each kernel exists twice: a
// plain serial loop kept as the reference, and an OpenMP version that
// partitions rows across threads. Both evaluate every output element with the
// same row function, so their results are bit-identical; the tests assert
// this and bench/ compares their throughput.

#include "wishmix/numcore.hpp"

#include <span>
#include <vector>

namespace wishmix::kernels {

/// Quantities of one Wishart component that do not depend on the observation.
struct ComponentTerms {
  Eigen::RowVectorXd vec_inv_scale;  // vec(Sigma^{-1})
  double logdet_coef = 0.0;          // (nu - p - 1) / 2
  double constant = 0.0;             // -nu p/2 log 2 - nu/2 log|Sigma| - log Gamma_p(nu/2)
};

ComponentTerms component_terms(double nu, const SpdMatrix& sigma);

/// One Wishart log-density from precomputed component terms:
/// logdet_coef * log|S| - tr(Sigma^{-1} S)/2 + constant.
inline double wishart_log_density_row(const RowMatrix& vec_stack, const Vector& logdets,
                                      Eigen::Index i, const ComponentTerms& c) {
  const double tr = vec_stack.row(i).dot(c.vec_inv_scale);
  return c.logdet_coef * logdets(i) - 0.5 * tr + c.constant;
}

namespace serial {

Vector trace_prod_batch(const Eigen::RowVectorXd& vec_a, const RowMatrix& s_stack);

/// out(i, k) = log_prior(i or 0, k) + log f_W(S_i | nu_k, Sigma_k).
/// log_prior has either one row (shared weights) or n rows; an empty matrix
/// means no prior term.
Matrix log_weight_matrix(const RowMatrix& vec_stack, const Vector& logdets,
                         std::span<const ComponentTerms> comps, const Matrix& log_prior);

/// Per-row log-sum-exp of an n x K matrix.
Vector row_log_sum_exp(const Matrix& m);

}  // namespace serial

namespace parallel {

Vector trace_prod_batch(const Eigen::RowVectorXd& vec_a, const RowMatrix& s_stack);
Matrix log_weight_matrix(const RowMatrix& vec_stack, const Vector& logdets,
                         std::span<const ComponentTerms> comps, const Matrix& log_prior);
Vector row_log_sum_exp(const Matrix& m);

}  // namespace parallel

}  // namespace wishmix::kernels
