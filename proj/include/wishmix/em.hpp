#pragma once

#include "wishmix/model.hpp"
#include "wishmix/rng.hpp"

#include <string>
#include <vector>

namespace wishmix {

/// Posterior membership probabilities and the weighted statistics the M-step needs.
struct Responsibilities {
  Matrix r;                   // n x K, rows sum to one
  Vector nk;                  // sum_i r_ik
  std::vector<Matrix> M;      // sum_i r_ik S_i
  Vector wavg_logdet;         // (1/n_k) sum_i r_ik log|S_i|
  double loglik = 0.0;        // observed-data log-likelihood at the parameters used (e_step only)
};

/// Fills the summary statistics for a given n x K responsibility matrix.
Responsibilities make_responsibilities(const Dataset& data, Matrix r);

Responsibilities e_step(const Dataset& data, const Params& params);

struct EmConfig {
  int max_iter = 500;
  double tol_loglik = 1e-8;       // relative change
  int restarts = 5;
  double nu_upper = 1e6;
  double monotone_slack = 1e-8;
  int beta_max_iter = 100;

  static double nu_floor(int p) { return p - 1 + 1e-6; }
  void validate() const;
};

/// sum_i sum_k r_ik log pi_ik(x_i; beta) - ridge ||beta||^2.
double gating_objective(const Matrix& r, const Matrix& x, const Matrix& beta, double ridge = 1e-8);
/// Gradient of gating_objective with respect to beta (q x (K-1)).
Matrix gating_gradient(const Matrix& r, const Matrix& x, const Matrix& beta, double ridge = 1e-8);

struct BetaFit {
  Matrix beta;
  bool converged = false;
  int iterations = 0;
  double grad_max = 0.0;
};

/// Weighted multinomial logistic regression by damped Newton with Fisher
/// blocks, warm-started at beta_init. Throws RankDeficientDesign.
BetaFit m_step_beta(const Matrix& r, const Matrix& x, const Matrix& beta_init, int max_iter = 100);

/// Sigma_k = M_k / (n_k nu_k). Throws EmptyComponent when n_k < 1e-8 n.
std::vector<SpdMatrix> m_step_sigma(const Responsibilities& resp, const Vector& nu);

/// g(nu) = wavg_logdet - log|Sbar| + p log nu - p log 2 - psi_p(nu/2): the
/// derivative (times two) of the per-weight profile log-likelihood with
/// Sigma = Sbar / nu substituted. Strictly decreasing in nu.
double nu_score(double nu, int p, double wavg_logdet, double logdet_sbar);

struct NuFit {
  double nu = 0.0;
  bool no_root = false;  // clamped to a bracket end
  int iterations = 0;
};

/// Root of nu_score on (nu_floor, nu_upper) by safeguarded Newton with bisection fallback.
NuFit m_step_nu(const Responsibilities& resp, int k, int p, const EmConfig& config, double nu_start = 0.0);

struct EmRestart {
  bool failed = false;
  std::string failure;
  double final_loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct EmResult {
  Params params;
  Responsibilities resp;  // at params
  /// Observed-data log-likelihood at the initial point and after every iteration.
  std::vector<double> loglik_trace;
  int restart = 0;
  int iterations = 0;
  bool converged = false;
  int monotone_violations = 0;
  int beta_nonconverged = 0;
  int nu_no_root = 0;
  std::vector<EmRestart> restarts;

  double loglik() const { return loglik_trace.back(); }
};

/// Initial point: k-means responsibilities smoothed as 0.9 hard + 0.1 uniform,
/// nu_k = p + 2, Sigma from m_step_sigma, and the weights (pi = n_k / n or one
/// m_step_beta from zero) fitted to those responsibilities.
Params em_initial_params(const Dataset& data, int K, Family family, RngState& rng);

/// One EM trajectory from the given parameters.
EmResult run_em_from(const Dataset& data, Params init, const EmConfig& config);

/// Best of config.restarts trajectories by final log-likelihood; restart r
/// draws its initialization from rng.derive(r). Throws AllRestartsFailed.
EmResult run_em(const Dataset& data, int K, Family family, const EmConfig& config, RngState& rng);

}  // namespace wishmix
