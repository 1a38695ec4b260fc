#pragma once

#include "wishmix/numcore.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace wishmix {

enum class Family { Mixture, Moe };

std::string_view to_string(Family family);

/// n SPD observations with the per-observation caches every likelihood
/// evaluation needs, plus an optional n x q covariate matrix whose first
/// column is the intercept.
class Dataset {
 public:
  Dataset() = default;
  /// Matrices must be strictly SPD (a jittered SpdMatrix is rejected).
  explicit Dataset(std::vector<SpdMatrix> matrices, std::optional<Matrix> covariates = std::nullopt,
                   std::vector<std::string> covariate_names = {});

  /// Builds from raw matrices; throws DegenerateData naming the first non-SPD index.
  static Dataset from_raw(const std::vector<Matrix>& matrices,
                          std::optional<Matrix> covariates = std::nullopt,
                          std::vector<std::string> covariate_names = {});

  int n() const { return static_cast<int>(matrices_.size()); }
  int p() const { return p_; }
  /// Covariate count including the intercept; 0 when there are no covariates.
  int q() const { return covariates_ ? static_cast<int>(covariates_->cols()) : 0; }

  const std::vector<SpdMatrix>& matrices() const { return matrices_; }
  const SpdMatrix& matrix(int i) const { return matrices_[static_cast<std::size_t>(i)]; }
  const Vector& logdets() const { return logdets_; }
  const RowMatrix& vec_stack() const { return vec_stack_; }

  bool has_covariates() const { return covariates_.has_value(); }
  /// Throws MissingCovariates when absent.
  const Matrix& covariates() const;
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }

  /// Same matrices with X replaced by a single intercept column.
  Dataset with_intercept_only() const;
  Dataset without_covariates() const;

 private:
  std::vector<SpdMatrix> matrices_;
  int p_ = 0;
  Vector logdets_;
  RowMatrix vec_stack_;
  std::optional<Matrix> covariates_;
  std::vector<std::string> covariate_names_;
};

struct MixtureParams {
  Vector pi;
  Vector nu;
  std::vector<SpdMatrix> sigma;
  std::optional<std::vector<int>> labels;  // 0-based

  int K() const { return static_cast<int>(nu.size()); }
  /// Throws DomainError / DimensionMismatch on violated invariants.
  void validate(int p) const;
};

/// Gating coefficients are stored for classes 1..K-1 only; the K-th column is
/// identically zero and never materialized here.
struct MoeParams {
  Matrix beta;  // q x (K-1)
  Vector nu;
  std::vector<SpdMatrix> sigma;
  std::optional<std::vector<int>> labels;

  int K() const { return static_cast<int>(nu.size()); }
  int q() const { return static_cast<int>(beta.rows()); }
  /// q x K coefficient matrix with a trailing zero column.
  Matrix full_beta() const;
  void validate(int p, int q) const;
};

using Params = std::variant<MixtureParams, MoeParams>;

Family family_of(const Params& params);
const Vector& nu_of(const Params& params);
const std::vector<SpdMatrix>& sigma_of(const Params& params);

struct Hyperparams {
  Vector alpha;             // Dirichlet concentration per component
  double nu0 = 0.0;         // inverse-Wishart degrees of freedom
  SpdMatrix psi0;           // prior scale; the inverse-Wishart scale parameter is psi0^{-1}
  double a_nu = 0.0;        // gamma prior shape for nu_k
  double b_nu = 0.0;        // gamma prior rate for nu_k
  double sigma_beta2 = 0.0; // gating coefficient prior variance
  double prop_scale_nu = 0.0;
  double prop_scale_beta = 0.0;

  /// alpha_k = 1/K, nu0 = p + 2, psi0 = I, nu_k ~ Gamma(2, 2/(p+3)) (mean p+3),
  /// sigma_beta^2 = 10, initial proposal scales 0.1 (log nu) and 0.2 (beta).
  static Hyperparams defaults(int p, int K);
  void validate(int p, int K) const;
};

/// log f_W(S | nu, Sigma) under E[S] = nu Sigma.
double log_wishart_density(const SpdMatrix& s, double nu, const SpdMatrix& sigma);

/// Softmax gating probabilities for one covariate row; beta is q x (K-1).
Vector gating_probs(const Vector& x_row, const Matrix& beta);
/// n x K matrix of log gating probabilities.
Matrix gating_log_probs(const Matrix& x, const Matrix& beta);

/// n x K matrix of log f_W(S_i | nu_k, Sigma_k).
Matrix log_density_matrix(const Dataset& data, const Vector& nu, const std::vector<SpdMatrix>& sigma);

/// The shared l_ik kernel: log prior weight plus Wishart log-density.
Matrix log_weight_matrix(const Dataset& data, const MixtureParams& params);
Matrix log_weight_matrix(const Dataset& data, const MoeParams& params);
Matrix log_weight_matrix(const Dataset& data, const Params& params);

/// sum_i logsumexp_k l_ik, reduced in fixed order.
double loglik_from_log_weights(const Matrix& log_weights);

double loglik_mixture(const Dataset& data, const MixtureParams& params);
/// Throws MissingCovariates when the dataset has no covariates.
double loglik_moe(const Dataset& data, const MoeParams& params);
double loglik(const Dataset& data, const Params& params);

/// Free-parameter count: K (p(p+1)/2 + 1) plus (K-1) q gating coefficients
/// for the MoE family or K-1 simplex weights for the mixture family.
int model_dimension(int K, int p, int q, Family family);

}  // namespace wishmix
