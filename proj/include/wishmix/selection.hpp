#pragma once

#include "wishmix/mcmc.hpp"
#include "wishmix/model.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wishmix {

/// -2 loglik + model_dimension(K, p, q, family) log n.
double bic(double loglik_hat, int K, int p, int q, Family family, int n);

/// BIC plus twice the assignment entropy -sum r log r (0 log 0 = 0).
double icl(double bic_value, const Matrix& responsibilities);

enum class LooMethod { Psis, Raw };
std::string_view to_string(LooMethod method);
/// "psis" or "raw"; throws ConfigError.
LooMethod loo_method_from_string(std::string_view name);

struct ParetoFit {
  double k = 0.0;
  double sigma = 0.0;
};

/// Generalized Pareto fit to positive exceedances (sorted ascending) by the
/// Zhang-Stephens profile estimator, with the shape shrunk toward 0.5 by a
/// weak prior as in Vehtari et al.'s loo package.
ParetoFit gpd_fit(const std::vector<double>& sorted_exceedances);

/// Quantile of the generalized Pareto distribution (location 0).
double gpd_quantile(double prob, double k, double sigma);

struct SmoothedWeights {
  Vector log_weights;  // normalized to sum to one on the exp scale
  double khat = 0.0;
};

/// Pareto-smoothed importance weights for one observation's log ratios.
/// The largest ceil(min(0.2 T, 3 sqrt T)) ratios are replaced by GPD expected
/// order statistics, then all weights are truncated at the largest raw weight.
/// A tail too short (< 5) or constant is left raw and gets khat = 0.
SmoothedWeights psis_smooth(const Vector& log_ratios);

struct PsisDiagnostics {
  Vector khat;
  int n_high = 0;  // count of khat > 0.7
  bool flagged() const { return n_high > 0; }
};

struct LooResult {
  LooMethod method = LooMethod::Psis;
  double elpd = 0.0;
  double se = 0.0;
  Vector pointwise;
  PsisDiagnostics diagnostics;  // khat is empty for raw importance sampling
};

/// T x n matrix of log p(S_i | Theta^(t)) over the stored draws.
Matrix pointwise_loglik(const Dataset& data, const Chain& chain);

/// Leave-one-out elpd from a T x n pointwise log-likelihood matrix. Throws ChainTooShort (T < 100).
LooResult elpd_loo(const Matrix& pointwise, LooMethod method = LooMethod::Psis);
LooResult elpd_loo(const Dataset& data, const Chain& chain, LooMethod method = LooMethod::Psis);

enum class Criterion { Bic, Icl, Elpd };
std::string_view to_string(Criterion c);
/// "bic", "icl" or "elpd"; throws ConfigError.
Criterion criterion_from_string(std::string_view name);

/// Criterion values for one K. Absent values were not requested.
struct CriterionRow {
  int K = 0;
  double loglik = 0.0;
  std::optional<double> bic;
  std::optional<double> icl;
  std::optional<double> elpd;
  std::optional<double> elpd_se;
  int khat_high = 0;
};

struct CriterionReport {
  std::vector<CriterionRow> rows;
  std::map<Criterion, int> chosen;
  /// Modal choice over the criteria; ties go to the smallest K.
  int recommended = 0;
};

/// Smallest K minimizing BIC / ICL or maximizing elpd, for every criterion
/// present in all rows. Rows are sorted by K; throws ConfigError unless the
/// range is contiguous and non-empty.
CriterionReport select_k(std::vector<CriterionRow> rows);

/// (1/n) sum_k max_c |{i : cluster(i) = k and class(i) = c}|. Throws LengthMismatch.
double cluster_purity(const std::vector<int>& assignments, const std::vector<std::string>& classes);
double cluster_purity(const std::vector<int>& assignments, const std::vector<int>& classes);

}  // namespace wishmix
