#pragma once

#include "wishmix/model.hpp"
#include "wishmix/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wishmix {

struct SamplerConfig {
  int iterations = 20000;
  int burnin = 5000;
  int thin = 1;
  /// Labels are stored every thin * label_thin_factor iterations after burn-in.
  int label_thin_factor = 10;
  /// Robbins-Monro tuning of the proposal scales during burn-in.
  bool adapt = true;
  double target_accept = 0.3;
  /// Mixture family: collapsed (pi integrated out) or explicit label update.
  bool collapsed_labels = true;
  /// MoE family: one joint proposal for all beta blocks instead of per-block updates.
  bool joint_beta = false;
  /// Hold nu at these values and skip the nu update.
  std::optional<Vector> fixed_nu;

  /// Throws ConfigError.
  void validate() const;
  int kept_draws() const { return (iterations - burnin) / thin; }
};

/// One stored state. pi is empty for MoE chains and beta is empty for mixture chains.
struct Draw {
  Vector pi;
  Matrix beta;  // q x (K-1)
  Vector nu;
  std::vector<Matrix> sigma;
  double loglik = 0.0;
};

struct Chain {
  Family family = Family::Mixture;
  int K = 0;
  int p = 0;
  int q = 0;
  SamplerConfig config;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::vector<Draw> draws;
  /// Stored label vectors and, for each, the index of the draw taken at the same iteration.
  std::vector<std::vector<int>> labels;
  std::vector<int> label_draw_index;
  /// Observed-data log-likelihood after every iteration, burn-in included.
  Vector loglik_trace;

  /// Counts over post-burn-in iterations only.
  std::vector<long> accept_nu, attempts_nu;
  std::vector<long> accept_beta, attempts_beta;
  /// Proposal scales in force after burn-in (frozen).
  Vector scale_nu;
  Vector scale_beta;

  double acceptance_rate_nu(int k) const;
  double acceptance_rate_beta(int block) const;

  /// Column names of draws_matrix(): pi_k, beta_j_k, nu_k, sigma_k_i_j (i <= j), loglik; 1-based.
  std::vector<std::string> parameter_names() const;
  /// One row per draw, one column per parameter_names() entry.
  Matrix draws_matrix() const;
  Params draw_params(std::size_t t) const;
};

/// Per-component sufficient statistics for a label vector.
struct ClusterStats {
  Eigen::VectorXi counts;
  std::vector<Matrix> scatter;  // S_(k) = sum of S_i over the cluster
  Vector logdet_sum;            // L_(k) = sum of log|S_i| over the cluster
};

ClusterStats cluster_stats(const Dataset& data, const std::vector<int>& labels, int K);

/// Collapsed label sweep: z_i drawn in index order with weight
/// f(S_i | nu_k, Sigma_k) (alpha_k + n_{-i,k}); counts updated after each draw.
/// log_density is the n x K matrix from log_density_matrix().
void gibbs_step_labels(const Matrix& log_density, const Vector& alpha, std::vector<int>& labels,
                       Eigen::VectorXi& counts, RngState& rng);

/// Independent label draws with weights exp(l_ik); l_ik already includes the log prior weight.
void categorical_step_labels(const Matrix& log_weights, std::vector<int>& labels, RngState& rng);

/// pi ~ Dirichlet(alpha + counts).
Vector gibbs_step_weights(const Eigen::VectorXi& counts, const Vector& alpha, RngState& rng);

/// Sigma_k ~ IW(nu0 + n_k nu_k, psi0^{-1} + S_(k)); the prior IW(nu0, psi0^{-1}) when n_k = 0.
std::vector<SpdMatrix> gibbs_step_scales(const ClusterStats& stats, const Vector& nu,
                                         const Hyperparams& hyper, RngState& rng);

/// Log posterior of nu_k up to a constant, without the trace term.
double nu_log_posterior(double nu, int p, long n_k, double logdet_sum, double sigma_logdet,
                        const Hyperparams& hyper);

struct NuStep {
  double nu = 0.0;
  bool accepted = false;
  /// min(1, exp(log alpha)); 0 for proposals outside the support.
  double accept_prob = 0.0;
};

/// Random-walk MH on log nu with proposal standard deviation `scale`.
NuStep mh_step_nu(int p, long n_k, double logdet_sum, const SpdMatrix& sigma_k, double nu,
                  const Hyperparams& hyper, double scale, RngState& rng);

struct BetaStep {
  Matrix beta;
  std::vector<bool> accepted;      // per block (one entry when joint)
  std::vector<double> accept_prob;
};

/// Gaussian random-walk MH on the gating coefficients given labels. Per-block
/// updates use scales(k) for block k; the joint update uses scales(0).
BetaStep mh_step_beta(const Matrix& x, const std::vector<int>& labels, const Matrix& beta,
                      const Hyperparams& hyper, const Vector& scales, bool joint, RngState& rng);

Chain run_mixture_sampler(const Dataset& data, const Hyperparams& hyper, int K,
                          const SamplerConfig& config, RngState& rng);
Chain run_moe_sampler(const Dataset& data, const Hyperparams& hyper, int K,
                      const SamplerConfig& config, RngState& rng);

/// Effective sample size with Geyer's initial positive monotone sequence; in [1, N].
double ess(const Vector& trace);

/// Permute the components of every draw (and stored labels) to best match the
/// first draw in Frobenius distance of Sigma. MoE coefficients are re-referenced
/// so the component placed last is the zero baseline.
Chain relabel_chain(const Chain& chain);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double lower = 0.0;  // 2.5% quantile
  double upper = 0.0;  // 97.5% quantile
  double ess = 0.0;
};

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;
  /// Posterior-mean point estimate (pi renormalized; Sigma element-wise).
  Params point;
  std::vector<double> accept_nu;
  std::vector<double> accept_beta;
};

/// Mean, type-7 2.5% / 97.5% quantiles and ESS (the length itself below 10 values).
ParameterSummary summarize_trace(const std::string& name, const Vector& trace);

/// Summary of an already relabeled chain.
PosteriorSummary summarize_chain(const Chain& chain);

}  // namespace wishmix
