#include "wishmix/selection.hpp"

#include "wishmix/error.hpp"
#include "wishmix/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace wishmix {

double bic(double loglik_hat, int K, int p, int q, Family family, int n) {
  return -2.0 * loglik_hat + model_dimension(K, p, q, family) * std::log(static_cast<double>(n));
}

double icl(double bic_value, const Matrix& responsibilities) {
  double ent = 0.0;
  for (Eigen::Index i = 0; i < responsibilities.rows(); ++i)
    for (Eigen::Index k = 0; k < responsibilities.cols(); ++k) {
      const double r = responsibilities(i, k);
      if (r > 0.0) ent -= r * std::log(r);
    }
  return bic_value + 2.0 * ent;
}

std::string_view to_string(LooMethod method) { return method == LooMethod::Psis ? "psis" : "raw"; }

LooMethod loo_method_from_string(std::string_view name) {
  if (name == "psis") return LooMethod::Psis;
  if (name == "raw") return LooMethod::Raw;
  fail(ErrorKind::ConfigError, "unknown LOO method '" + std::string(name) + "' (expected psis or raw)");
}

ParetoFit gpd_fit(const std::vector<double>& x) {
  const auto n = static_cast<int>(x.size());
  constexpr double kPrior = 3.0;
  const int m = 30 + static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  const double xstar = x[static_cast<std::size_t>(std::floor(n / 4.0 + 0.5)) - 1];
  std::vector<double> theta(static_cast<std::size_t>(m)), ltheta(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const double th = 1.0 / x.back() + (1.0 - std::sqrt(m / (j + 0.5))) / kPrior / xstar;
    double kk = 0.0;
    for (double v : x) kk += std::log1p(-th * v);
    kk /= n;
    theta[static_cast<std::size_t>(j)] = th;
    ltheta[static_cast<std::size_t>(j)] = n * (std::log(-th / kk) - kk - 1.0);
  }
  const double lse = log_sum_exp(std::span<const double>(ltheta));
  double theta_hat = 0.0;
  for (int j = 0; j < m; ++j)
    theta_hat += theta[static_cast<std::size_t>(j)] * std::exp(ltheta[static_cast<std::size_t>(j)] - lse);
  double k = 0.0;
  for (double v : x) k += std::log1p(-theta_hat * v);
  k /= n;
  const double sigma = -k / theta_hat;
  // Weakly informative prior pulling k toward 0.5.
  k = k * n / (n + 10.0) + 10.0 * 0.5 / (n + 10.0);
  return {k, sigma};
}

double gpd_quantile(double prob, double k, double sigma) {
  if (std::abs(k) < 1e-12) return -sigma * std::log1p(-prob);
  return sigma * std::expm1(-k * std::log1p(-prob)) / k;
}

SmoothedWeights psis_smooth(const Vector& log_ratios) {
  const auto T = static_cast<int>(log_ratios.size());
  SmoothedWeights out;
  out.log_weights = log_ratios.array() - log_ratios.maxCoeff();
  Vector& lw = out.log_weights;
  const int tail = static_cast<int>(std::ceil(std::min(0.2 * T, 3.0 * std::sqrt(static_cast<double>(T)))));
  if (tail >= 5 && tail < T) {
    std::vector<int> ord(static_cast<std::size_t>(T));
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return lw(a) < lw(b); });
    const int first = T - tail;
    const double lo = lw(ord[static_cast<std::size_t>(first)]), hi = lw(ord.back());
    if (std::abs(hi - lo) >= std::numeric_limits<double>::epsilon() / 100.0) {
      const double cutoff = lw(ord[static_cast<std::size_t>(first - 1)]);
      const double exp_cutoff = std::exp(cutoff);
      std::vector<double> exceed(static_cast<std::size_t>(tail));
      for (int j = 0; j < tail; ++j) exceed[static_cast<std::size_t>(j)] = std::exp(lw(ord[static_cast<std::size_t>(first + j)])) - exp_cutoff;
      const ParetoFit fit = gpd_fit(exceed);
      if (std::isfinite(fit.k) && fit.sigma > 0.0) {
        out.khat = fit.k;
        for (int j = 0; j < tail; ++j) {
          const double prob = (j + 0.5) / tail;
          lw(ord[static_cast<std::size_t>(first + j)]) = std::log(gpd_quantile(prob, fit.k, fit.sigma) + exp_cutoff);
        }
      } else {
        // The profile estimator broke down; treat the tail as unreliable.
        out.khat = 1.0;
      }
    }
  }
  lw = lw.cwiseMin(0.0);
  lw.array() -= log_sum_exp(lw);
  return out;
}

Matrix pointwise_loglik(const Dataset& data, const Chain& chain) {
  const auto T = static_cast<Eigen::Index>(chain.draws.size());
  Matrix out(T, data.n());
#pragma omp parallel for schedule(static)
  for (Eigen::Index t = 0; t < T; ++t) {
    const Params params = chain.draw_params(static_cast<std::size_t>(t));
    out.row(t) = kernels::serial::row_log_sum_exp(log_weight_matrix(data, params)).transpose();
  }
  return out;
}

LooResult elpd_loo(const Matrix& pointwise, LooMethod method) {
  const Eigen::Index T = pointwise.rows(), n = pointwise.cols();
  if (T < 100) fail(ErrorKind::ChainTooShort, "elpd_loo: need at least 100 draws, got " + std::to_string(T));
  LooResult res;
  res.method = method;
  res.pointwise.resize(n);
  if (method == LooMethod::Psis) res.diagnostics.khat.resize(n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector ll = pointwise.col(i);
    if (method == LooMethod::Raw) {
      const Vector neg = -ll;
      res.pointwise(i) = -(log_sum_exp(neg) - std::log(static_cast<double>(T)));
    } else {
      const SmoothedWeights w = psis_smooth(-ll);
      res.pointwise(i) = log_sum_exp(Vector(w.log_weights + ll));
      res.diagnostics.khat(i) = w.khat;
    }
  }
  res.elpd = pairwise_sum(std::span<const double>(res.pointwise.data(), static_cast<std::size_t>(n)));
  const double mean = res.elpd / static_cast<double>(n);
  const double var = n > 1 ? (res.pointwise.array() - mean).square().sum() / static_cast<double>(n - 1) : 0.0;
  res.se = std::sqrt(static_cast<double>(n) * var);
  if (method == LooMethod::Psis) res.diagnostics.n_high = static_cast<int>((res.diagnostics.khat.array() > 0.7).count());
  return res;
}

LooResult elpd_loo(const Dataset& data, const Chain& chain, LooMethod method) {
  if (chain.draws.size() < 100) {
    fail(ErrorKind::ChainTooShort, "elpd_loo: need at least 100 draws, got " + std::to_string(chain.draws.size()));
  }
  return elpd_loo(pointwise_loglik(data, chain), method);
}

std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::Bic: return "bic";
    case Criterion::Icl: return "icl";
    case Criterion::Elpd: return "elpd";
  }
  return "?";
}

Criterion criterion_from_string(std::string_view name) {
  if (name == "bic") return Criterion::Bic;
  if (name == "icl") return Criterion::Icl;
  if (name == "elpd") return Criterion::Elpd;
  fail(ErrorKind::ConfigError, "unknown criterion '" + std::string(name) + "' (expected bic, icl or elpd)");
}

CriterionReport select_k(std::vector<CriterionRow> rows) {
  if (rows.empty()) fail(ErrorKind::ConfigError, "select_k: no rows");
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.K < b.K; });
  for (std::size_t j = 1; j < rows.size(); ++j) {
    if (rows[j].K != rows[j - 1].K + 1) fail(ErrorKind::ConfigError, "select_k: K range is not contiguous");
  }
  CriterionReport rep;
  auto choose = [&](Criterion c, auto get, bool minimize) {
    for (const auto& r : rows)
      if (!get(r)) return;
    int best = rows.front().K;
    double bv = *get(rows.front());
    for (const auto& r : rows) {
      const double v = *get(r);
      if (minimize ? v < bv : v > bv) {
        bv = v;
        best = r.K;
      }
    }
    rep.chosen[c] = best;
  };
  choose(Criterion::Bic, [](const CriterionRow& r) { return r.bic; }, true);
  choose(Criterion::Icl, [](const CriterionRow& r) { return r.icl; }, true);
  choose(Criterion::Elpd, [](const CriterionRow& r) { return r.elpd; }, false);

  std::map<int, int> votes;
  for (const auto& [c, k] : rep.chosen) ++votes[k];
  int best_votes = 0;
  for (const auto& [k, v] : votes) {
    if (v > best_votes) {
      best_votes = v;
      rep.recommended = k;
    }
  }
  rep.rows = std::move(rows);
  return rep;
}

double cluster_purity(const std::vector<int>& assignments, const std::vector<std::string>& classes) {
  if (assignments.size() != classes.size()) {
    fail(ErrorKind::LengthMismatch, "cluster_purity: " + std::to_string(assignments.size()) + " assignments vs " +
                                        std::to_string(classes.size()) + " classes");
  }
  if (assignments.empty()) return 1.0;
  std::map<int, std::unordered_map<std::string, int>> table;
  for (std::size_t i = 0; i < assignments.size(); ++i) ++table[assignments[i]][classes[i]];
  long total = 0;
  for (const auto& [k, counts] : table) {
    int mx = 0;
    for (const auto& [c, v] : counts) mx = std::max(mx, v);
    total += mx;
  }
  return static_cast<double>(total) / static_cast<double>(assignments.size());
}

double cluster_purity(const std::vector<int>& assignments, const std::vector<int>& classes) {
  std::vector<std::string> names;
  names.reserve(classes.size());
  for (int c : classes) names.push_back(std::to_string(c));
  return cluster_purity(assignments, names);
}

}  // namespace wishmix
