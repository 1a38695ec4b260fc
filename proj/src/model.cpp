#include "wishmix/model.hpp"

#include "wishmix/error.hpp"
#include "wishmix/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace wishmix {

std::string_view to_string(Family family) {
  return family == Family::Mixture ? "mixture" : "moe";
}

Dataset::Dataset(std::vector<SpdMatrix> matrices, std::optional<Matrix> covariates,
                 std::vector<std::string> covariate_names)
    : matrices_(std::move(matrices)),
      covariates_(std::move(covariates)),
      covariate_names_(std::move(covariate_names)) {
  if (matrices_.empty()) fail(ErrorKind::DegenerateData, "Dataset: no observations");
  p_ = matrices_.front().dim();
  const auto n = static_cast<Eigen::Index>(matrices_.size());
  logdets_.resize(n);
  vec_stack_.resize(n, static_cast<Eigen::Index>(p_) * p_);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = matrices_[static_cast<std::size_t>(i)];
    if (s.dim() != p_) {
      fail(ErrorKind::DimensionMismatch, "Dataset: matrix " + std::to_string(i) + " has dimension " +
                                             std::to_string(s.dim()) + ", expected " +
                                             std::to_string(p_));
    }
    if (s.jittered()) {
      fail(ErrorKind::DegenerateData,
           "Dataset: matrix " + std::to_string(i) + " is not strictly positive definite");
    }
    logdets_(i) = s.logdet();
    vec_stack_.row(i) = vec_row(s.matrix());
  }
  if (covariates_) {
    const Matrix& x = *covariates_;
    if (x.rows() != n || x.cols() < 1) {
      fail(ErrorKind::DimensionMismatch, "Dataset: covariate matrix must be n x q with q >= 1");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x(i, 0) != 1.0) {
        fail(ErrorKind::DegenerateData,
             "Dataset: first covariate column must be the intercept (row " + std::to_string(i) + ")");
      }
    }
    if (!x.allFinite()) fail(ErrorKind::DegenerateData, "Dataset: non-finite covariates");
    Eigen::ColPivHouseholderQR<Matrix> qr(x);
    if (x.cols() > n || qr.rank() != x.cols()) {
      fail(ErrorKind::RankDeficientDesign, "Dataset: covariate matrix is not of full column rank");
    }
    if (covariate_names_.empty()) {
      covariate_names_.push_back("intercept");
      for (Eigen::Index j = 1; j < x.cols(); ++j) covariate_names_.push_back("x" + std::to_string(j));
    } else if (static_cast<Eigen::Index>(covariate_names_.size()) != x.cols()) {
      fail(ErrorKind::DimensionMismatch, "Dataset: covariate_names length differs from q");
    }
  } else if (!covariate_names_.empty()) {
    fail(ErrorKind::DimensionMismatch, "Dataset: covariate names given without covariates");
  }
}

Dataset Dataset::from_raw(const std::vector<Matrix>& matrices, std::optional<Matrix> covariates,
                          std::vector<std::string> covariate_names) {
  std::vector<SpdMatrix> spd;
  spd.reserve(matrices.size());
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    try {
      spd.emplace_back(matrices[i], JitterPolicy::Forbid);
    } catch (const Error& e) {
      fail(ErrorKind::DegenerateData, "matrices[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return Dataset(std::move(spd), std::move(covariates), std::move(covariate_names));
}

const Matrix& Dataset::covariates() const {
  if (!covariates_) fail(ErrorKind::MissingCovariates, "dataset has no covariates");
  return *covariates_;
}

Dataset Dataset::with_intercept_only() const {
  return Dataset(matrices_, Matrix::Ones(n(), 1), {"intercept"});
}

Dataset Dataset::without_covariates() const { return Dataset(matrices_); }

namespace {

void validate_components(const Vector& nu, const std::vector<SpdMatrix>& sigma, int p) {
  if (nu.size() < 1) fail(ErrorKind::DimensionMismatch, "params: K must be >= 1");
  if (static_cast<std::size_t>(nu.size()) != sigma.size()) {
    fail(ErrorKind::DimensionMismatch, "params: nu and sigma lengths differ");
  }
  for (Eigen::Index k = 0; k < nu.size(); ++k) {
    if (!(nu(k) > p - 1) || !std::isfinite(nu(k))) {
      fail(ErrorKind::DomainError, "params: nu_" + std::to_string(k + 1) + " must exceed p-1");
    }
    if (sigma[static_cast<std::size_t>(k)].dim() != p) {
      fail(ErrorKind::DimensionMismatch, "params: sigma dimension differs from data");
    }
  }
}

}  // namespace

void MixtureParams::validate(int p) const {
  validate_components(nu, sigma, p);
  if (pi.size() != nu.size()) fail(ErrorKind::DimensionMismatch, "params: pi length differs from K");
  if ((pi.array() < 0.0).any() || std::abs(pi.sum() - 1.0) > 1e-12) {
    fail(ErrorKind::DomainError, "params: pi must lie on the probability simplex");
  }
}

Matrix MoeParams::full_beta() const {
  Matrix full = Matrix::Zero(beta.rows(), beta.cols() + 1);
  full.leftCols(beta.cols()) = beta;
  return full;
}

void MoeParams::validate(int p, int q) const {
  validate_components(nu, sigma, p);
  if (beta.rows() != q || beta.cols() != nu.size() - 1) {
    fail(ErrorKind::DimensionMismatch, "params: beta must be q x (K-1)");
  }
}

Family family_of(const Params& params) {
  return std::holds_alternative<MixtureParams>(params) ? Family::Mixture : Family::Moe;
}

const Vector& nu_of(const Params& params) {
  return std::visit([](const auto& p) -> const Vector& { return p.nu; }, params);
}

const std::vector<SpdMatrix>& sigma_of(const Params& params) {
  return std::visit([](const auto& p) -> const std::vector<SpdMatrix>& { return p.sigma; }, params);
}

Hyperparams Hyperparams::defaults(int p, int K) {
  Hyperparams h;
  h.alpha = Vector::Constant(K, 1.0 / K);
  h.nu0 = p + 2.0;
  h.psi0 = SpdMatrix::identity(p);
  h.a_nu = 2.0;
  h.b_nu = 2.0 / (p + 3.0);
  h.sigma_beta2 = 10.0;
  h.prop_scale_nu = 0.1;
  h.prop_scale_beta = 0.2;
  return h;
}

void Hyperparams::validate(int p, int K) const {
  if (alpha.size() != K) fail(ErrorKind::ConfigError, "hyperparams: alpha must have K entries");
  if ((alpha.array() <= 0.0).any()) fail(ErrorKind::ConfigError, "hyperparams: alpha must be positive");
  if (!(nu0 > p - 1)) fail(ErrorKind::ConfigError, "hyperparams: nu0 must exceed p-1");
  if (psi0.dim() != p) fail(ErrorKind::ConfigError, "hyperparams: psi0 must be p x p");
  if (!(a_nu > 0.0) || !(b_nu > 0.0)) fail(ErrorKind::ConfigError, "hyperparams: a_nu, b_nu must be positive");
  if (!(a_nu / b_nu > p - 1)) fail(ErrorKind::ConfigError, "hyperparams: prior mean a_nu/b_nu must exceed p-1");
  if (!(sigma_beta2 > 0.0) || !(prop_scale_nu > 0.0) || !(prop_scale_beta > 0.0)) {
    fail(ErrorKind::ConfigError, "hyperparams: variances and proposal scales must be positive");
  }
}

double log_wishart_density(const SpdMatrix& s, double nu, const SpdMatrix& sigma) {
  const int p = s.dim();
  if (sigma.dim() != p) fail(ErrorKind::DimensionMismatch, "log_wishart_density: dimension mismatch");
  if (!(nu > p - 1)) fail(ErrorKind::DomainError, "log_wishart_density: nu must exceed p-1");
  return 0.5 * (nu - p - 1) * s.logdet() - 0.5 * sigma.trace_inv_prod(s.matrix()) -
         0.5 * nu * p * std::numbers::ln2 - 0.5 * nu * sigma.logdet() - log_multigamma(p, 0.5 * nu);
}

Vector gating_probs(const Vector& x_row, const Matrix& beta) {
  if (x_row.size() != beta.rows()) fail(ErrorKind::DimensionMismatch, "gating_probs: x and beta disagree");
  const Eigen::Index K = beta.cols() + 1;
  Vector eta(K);
  eta.head(K - 1) = beta.transpose() * x_row;
  eta(K - 1) = 0.0;
  const double lse = log_sum_exp(eta);
  return (eta.array() - lse).exp().matrix();
}

Matrix gating_log_probs(const Matrix& x, const Matrix& beta) {
  if (x.cols() != beta.rows()) fail(ErrorKind::DimensionMismatch, "gating_log_probs: X and beta disagree");
  const Eigen::Index K = beta.cols() + 1;
  Matrix eta(x.rows(), K);
  eta.leftCols(K - 1) = x * beta;
  eta.col(K - 1).setZero();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mx = eta.row(i).maxCoeff();
    const double lse = mx + std::log((eta.row(i).array() - mx).exp().sum());
    eta.row(i).array() -= lse;
  }
  return eta;
}

namespace {

std::vector<kernels::ComponentTerms> terms_for(const Vector& nu, const std::vector<SpdMatrix>& sigma) {
  std::vector<kernels::ComponentTerms> comps;
  comps.reserve(sigma.size());
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    comps.push_back(kernels::component_terms(nu(static_cast<Eigen::Index>(k)), sigma[k]));
  }
  return comps;
}

}  // namespace

Matrix log_density_matrix(const Dataset& data, const Vector& nu, const std::vector<SpdMatrix>& sigma) {
  const auto comps = terms_for(nu, sigma);
  return kernels::parallel::log_weight_matrix(data.vec_stack(), data.logdets(), comps, Matrix());
}

Matrix log_weight_matrix(const Dataset& data, const MixtureParams& params) {
  params.validate(data.p());
  const auto comps = terms_for(params.nu, params.sigma);
  Matrix log_pi = params.pi.array().log().matrix().transpose();
  return kernels::parallel::log_weight_matrix(data.vec_stack(), data.logdets(), comps, log_pi);
}

Matrix log_weight_matrix(const Dataset& data, const MoeParams& params) {
  const Matrix& x = data.covariates();
  params.validate(data.p(), data.q());
  const auto comps = terms_for(params.nu, params.sigma);
  return kernels::parallel::log_weight_matrix(data.vec_stack(), data.logdets(), comps,
                                              gating_log_probs(x, params.beta));
}

Matrix log_weight_matrix(const Dataset& data, const Params& params) {
  return std::visit([&](const auto& p) { return log_weight_matrix(data, p); }, params);
}

double loglik_from_log_weights(const Matrix& log_weights) {
  const Vector rows = kernels::parallel::row_log_sum_exp(log_weights);
  return pairwise_sum(std::span<const double>(rows.data(), static_cast<std::size_t>(rows.size())));
}

double loglik_mixture(const Dataset& data, const MixtureParams& params) {
  return loglik_from_log_weights(log_weight_matrix(data, params));
}

double loglik_moe(const Dataset& data, const MoeParams& params) {
  return loglik_from_log_weights(log_weight_matrix(data, params));
}

double loglik(const Dataset& data, const Params& params) {
  return loglik_from_log_weights(log_weight_matrix(data, params));
}

int model_dimension(int K, int p, int q, Family family) {
  if (K < 1) fail(ErrorKind::DomainError, "model_dimension: K must be >= 1");
  const int per_expert = p * (p + 1) / 2 + 1;
  // Mixture weights live on the (K-1)-simplex.
  const int gating = family == Family::Moe ? (K - 1) * q : (K - 1);
  return K * per_expert + gating;
}

}  // namespace wishmix
