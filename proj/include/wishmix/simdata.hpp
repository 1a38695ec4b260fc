#pragma once

#include "wishmix/fit.hpp"
#include "wishmix/model.hpp"
#include "wishmix/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wishmix {

struct SimDesign {
  std::string name;
  Family family = Family::Mixture;
  int n = 200;
  int p = 2;
  int K = 3;
  Params truth;
  /// Seed the frozen MoE coefficients were drawn from.
  std::uint64_t seed = 0;

  /// Throws UnknownDesign (name outside mix-p2, mix-p8, moe-p2, moe-p8).
  static SimDesign builtin(const std::string& name, int n = 200);
};

/// Seed for the MoE gating coefficients of the built-in designs.
inline constexpr std::uint64_t kDesignSeed = 20240611;

struct SimData {
  Dataset data;
  std::vector<int> labels;  // true 0-based components
};

/// Draws n observations. MoE designs draw X with an intercept column and
/// q - 1 standard normal covariates.
SimData generate(const SimDesign& design, RngState& rng);

struct ErrorRecord {
  /// perm[k] = estimated component matched to true component k.
  std::vector<int> perm;
  std::optional<double> pi_error;    // (1/K) ||pi_hat - pi||_1
  std::optional<double> beta_error;  // (1/K) sum_k ||beta_hat_k - beta_k||^2 after re-referencing
  double nu_error = 0.0;             // (1/K) ||nu_hat - nu||_1
  double sigma_error = 0.0;          // (1/K) sum_k ||Sigma_hat_k - Sigma_k||_F^2
};

/// Errors under the Hungarian matching of Sigma in Frobenius distance.
/// Weights are compared when both sides have them (an intercept-only MoE
/// estimate stands for the weights softmax(beta)); gating coefficients when
/// both are MoE with the same q. Throws DimensionMismatch.
ErrorRecord eval_errors(const Params& estimate, const Params& truth);

struct StudyRow {
  std::string design;
  int rep = 0;
  std::string method;
  std::string metric;
  double value = 0.0;
  bool failed = false;
};

struct StudyConfig {
  int reps = 100;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::Bayes, Method::Em, Method::BayesMoe, Method::EmMoe};
  FitOptions fit;
};

/// Per replicate: generate from rng(seed).derive(rep), fit every method with
/// K = design.K, record errors, ESS and acceptance rates (Bayesian) or
/// convergence (EM). Fit failures become rows with failed = true. Rows come
/// out in replicate order.
std::vector<StudyRow> run_study(const SimDesign& design, const StudyConfig& config);

}  // namespace wishmix
