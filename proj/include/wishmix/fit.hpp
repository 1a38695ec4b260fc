#pragma once

#include "wishmix/em.hpp"
#include "wishmix/mcmc.hpp"
#include "wishmix/selection.hpp"

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace wishmix {

enum class Method { Bayes, Em, BayesMoe, EmMoe };
std::string_view to_string(Method method);
/// "bayes", "em", "bayes-moe" or "em-moe"; throws ConfigError.
Method method_from_string(std::string_view name);
Family family_of(Method method);
bool is_bayesian(Method method);

struct FitOptions {
  SamplerConfig sampler;
  EmConfig em;
  /// Defaults to Hyperparams::defaults(p, K).
  std::optional<Hyperparams> hyper;
};

/// Everything a fit produces. EM fields are empty for Bayesian methods and
/// vice versa.
struct FitReport {
  Method method = Method::Em;
  int K = 0, p = 0, q = 0, n = 0;
  std::uint64_t seed = 0;
  /// EM: the MLE. Bayesian: posterior means of the relabeled chain.
  Params point;
  double loglik = 0.0;  // at point
  double bic = 0.0;
  double icl = 0.0;
  Matrix responsibilities;  // at point
  std::vector<int> map_labels;

  // EM
  std::vector<double> loglik_trace;
  int restart = 0;
  int iterations = 0;
  bool converged = true;
  int monotone_violations = 0;
  int nu_no_root = 0;
  int beta_nonconverged = 0;
  std::vector<EmRestart> restarts;

  // Bayesian
  std::optional<Chain> chain;  // relabeled
  std::optional<PosteriorSummary> summary;

  std::vector<std::string> warnings;
};

/// The dataset a method sees: mixture methods ignore covariates; MoE methods
/// on a covariate-free dataset get an intercept column (with a warning).
Dataset prepare_for_method(const Dataset& data, Method method, std::vector<std::string>* warnings = nullptr);

/// Fits K components with the given method. Randomness comes from rng only.
FitReport fit_model(const Dataset& data, Method method, int K, const FitOptions& options, RngState& rng);

/// Criterion values for one fit. elpd needs a Bayesian fit and is skipped otherwise.
CriterionRow criterion_row(const Dataset& data, const FitReport& fit, const std::set<Criterion>& wanted,
                           LooMethod loo_method = LooMethod::Psis);

}  // namespace wishmix
