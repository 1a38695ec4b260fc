#include "wishmix/em.hpp"

#include "wishmix/cluster_util.hpp"
#include "wishmix/error.hpp"
#include "wishmix/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace wishmix {

void EmConfig::validate() const {
  if (max_iter < 1 || restarts < 1 || beta_max_iter < 1) {
    fail(ErrorKind::ConfigError, "em: max_iter, restarts and beta_max_iter must be >= 1");
  }
  if (!(tol_loglik > 0.0) || !(nu_upper > 1.0) || !(monotone_slack >= 0.0)) {
    fail(ErrorKind::ConfigError, "em: tolerances must be positive");
  }
}

Responsibilities make_responsibilities(const Dataset& data, Matrix r) {
  if (r.rows() != data.n()) fail(ErrorKind::DimensionMismatch, "responsibilities: row count differs from n");
  Responsibilities out;
  const Eigen::Index K = r.cols();
  const int p = data.p();
  out.nk = r.colwise().sum().transpose();
  const Matrix m_vec = r.transpose() * data.vec_stack();  // K x p^2, row-major vec per component
  out.M.resize(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k) {
    Matrix m(p, p);
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < p; ++b) m(a, b) = m_vec(k, a * p + b);
    out.M[static_cast<std::size_t>(k)] = 0.5 * (m + m.transpose());
  }
  out.wavg_logdet = (r.transpose() * data.logdets()).cwiseQuotient(out.nk);
  out.r = std::move(r);
  return out;
}

Responsibilities e_step(const Dataset& data, const Params& params) {
  Matrix lw = log_weight_matrix(data, params);
  const Vector lse = kernels::parallel::row_log_sum_exp(lw);
  for (Eigen::Index i = 0; i < lw.rows(); ++i) lw.row(i) = (lw.row(i).array() - lse(i)).exp();
  Responsibilities out = make_responsibilities(data, std::move(lw));
  out.loglik = pairwise_sum(std::span<const double>(lse.data(), static_cast<std::size_t>(lse.size())));
  return out;
}

double gating_objective(const Matrix& r, const Matrix& x, const Matrix& beta, double ridge) {
  const Matrix lp = gating_log_probs(x, beta);
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index k = 0; k < r.cols(); ++k)
      if (r(i, k) > 0.0) total += r(i, k) * lp(i, k);
  return total - ridge * beta.squaredNorm();
}

Matrix gating_gradient(const Matrix& r, const Matrix& x, const Matrix& beta, double ridge) {
  const Matrix pi = gating_log_probs(x, beta).array().exp();
  const Eigen::Index km1 = beta.cols();
  return x.transpose() * (r.leftCols(km1) - pi.leftCols(km1)) - 2.0 * ridge * beta;
}

BetaFit m_step_beta(const Matrix& r, const Matrix& x, const Matrix& beta_init, int max_iter) {
  constexpr double kRidge = 1e-8;
  const Eigen::Index n = x.rows(), q = x.cols(), km1 = beta_init.cols();
  if (r.rows() != n || r.cols() != km1 + 1 || beta_init.rows() != q) {
    fail(ErrorKind::DimensionMismatch, "m_step_beta: r, X and beta disagree");
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (q > n || qr.rank() != q) fail(ErrorKind::RankDeficientDesign, "m_step_beta: X is not of full column rank");

  BetaFit fit{beta_init, false, 0, 0.0};
  if (km1 == 0) {
    fit.converged = true;
    return fit;
  }
  const Eigen::Index dim = q * km1;
  double obj = gating_objective(r, x, fit.beta, kRidge);
  for (int it = 0; it < max_iter; ++it) {
    const Matrix grad = gating_gradient(r, x, fit.beta, kRidge);
    fit.grad_max = grad.cwiseAbs().maxCoeff();
    if (fit.grad_max < 1e-8) {
      fit.converged = true;
      return fit;
    }
    ++fit.iterations;
    // Negative Hessian: blocks sum_i pi_ik (delta_kl - pi_il) x_i x_i^T, plus the ridge.
    const Matrix pi = gating_log_probs(x, fit.beta).array().exp();
    Matrix info = Matrix::Zero(dim, dim);
    for (Eigen::Index k = 0; k < km1; ++k) {
      for (Eigen::Index l = k; l < km1; ++l) {
        Vector w = -pi.col(k).cwiseProduct(pi.col(l));
        if (k == l) w += pi.col(k);
        const Matrix block = x.transpose() * w.asDiagonal() * x;
        info.block(k * q, l * q, q, q) = block;
        info.block(l * q, k * q, q, q) = block.transpose();
      }
    }
    info.diagonal().array() += 2.0 * kRidge;
    const Vector g = Eigen::Map<const Vector>(grad.data(), dim);
    const Eigen::LDLT<Matrix> ldlt(info);
    Vector step = ldlt.solve(g);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) step = g;
    // Step halving until the objective does not decrease. Close to the optimum
    // the change drops below rounding, so a step that keeps the objective within
    // that noise is taken when it shrinks the gradient.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(obj) + 1.0);
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h < 40; ++h, t *= 0.5) {
      Matrix cand = fit.beta + t * Eigen::Map<const Matrix>(step.data(), q, km1);
      const double c = gating_objective(r, x, cand, kRidge);
      const bool better = c > obj;
      const bool flat = !better && c >= obj - noise &&
                        gating_gradient(r, x, cand, kRidge).cwiseAbs().maxCoeff() < fit.grad_max;
      if (better || flat) {
        moved = true;
        fit.beta = std::move(cand);
        obj = std::max(obj, c);
        break;
      }
    }
    if (!moved) break;
  }
  fit.grad_max = gating_gradient(r, x, fit.beta, kRidge).cwiseAbs().maxCoeff();
  fit.converged = fit.grad_max < 1e-8;
  return fit;
}

std::vector<SpdMatrix> m_step_sigma(const Responsibilities& resp, const Vector& nu) {
  const Eigen::Index K = resp.nk.size();
  const double n = static_cast<double>(resp.r.rows());
  std::vector<SpdMatrix> out;
  out.reserve(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!(resp.nk(k) >= 1e-8 * n)) {
      fail(ErrorKind::EmptyComponent, "m_step_sigma: component " + std::to_string(k + 1) + " has collapsed");
    }
    out.emplace_back(resp.M[static_cast<std::size_t>(k)] / (resp.nk(k) * nu(k)));
  }
  return out;
}

double nu_score(double nu, int p, double wavg_logdet, double logdet_sbar) {
  return wavg_logdet - logdet_sbar + p * std::log(nu) - p * std::numbers::ln2 - multidigamma(p, 0.5 * nu);
}

NuFit m_step_nu(const Responsibilities& resp, int k, int p, const EmConfig& config, double nu_start) {
  const auto kk = static_cast<Eigen::Index>(k);
  if (!(resp.nk(kk) > 0.0)) fail(ErrorKind::EmptyComponent, "m_step_nu: empty component");
  const SpdMatrix sbar(resp.M[static_cast<std::size_t>(k)] / resp.nk(kk));
  const double wl = resp.wavg_logdet(kk), ls = sbar.logdet();
  auto g = [&](double nu) { return nu_score(nu, p, wl, ls); };

  double lo = EmConfig::nu_floor(p), hi = config.nu_upper;
  NuFit fit;
  if (g(hi) >= 0.0) return {hi, true, 0};
  if (g(lo) <= 0.0) return {lo, true, 0};
  double nu = (nu_start > lo && nu_start < hi) ? nu_start : p + 2.0;
  for (fit.iterations = 1; fit.iterations <= 200; ++fit.iterations) {
    const double gv = g(nu);
    if (gv == 0.0) break;
    if (gv > 0.0) lo = nu;
    else hi = nu;
    const double dg = p / nu - 0.5 * multitrigamma(p, 0.5 * nu);
    double next = nu - gv / dg;
    if (!(next > lo && next < hi)) next = std::sqrt(lo * hi);  // geometric bisection over a wide bracket
    if (std::abs(next - nu) <= 1e-15 * nu || hi - lo <= 4e-16 * hi) {
      nu = next;
      break;
    }
    nu = next;
  }
  fit.nu = nu;
  return fit;
}

namespace {

Matrix smoothed_kmeans_r(const Dataset& data, int K, RngState& rng) {
  const std::vector<int> labels = kmeans_labels(data.vec_stack(), K, rng);
  Matrix r = Matrix::Constant(data.n(), K, 0.1 / K);
  for (int i = 0; i < data.n(); ++i) r(i, labels[static_cast<std::size_t>(i)]) += 0.9;
  return r;
}

}  // namespace

Params em_initial_params(const Dataset& data, int K, Family family, RngState& rng) {
  if (K < 1) fail(ErrorKind::ConfigError, "em: K must be >= 1");
  if (data.n() < K) fail(ErrorKind::DegenerateData, "em: fewer observations than components");
  const Responsibilities resp = make_responsibilities(data, smoothed_kmeans_r(data, K, rng));
  const Vector nu = Vector::Constant(K, data.p() + 2.0);
  std::vector<SpdMatrix> sigma = m_step_sigma(resp, nu);
  if (family == Family::Mixture) {
    return MixtureParams{resp.nk / static_cast<double>(data.n()), nu, std::move(sigma), std::nullopt};
  }
  const Matrix& x = data.covariates();
  const BetaFit bf = m_step_beta(resp.r, x, Matrix::Zero(x.cols(), K - 1));
  return MoeParams{bf.beta, nu, std::move(sigma), std::nullopt};
}

EmResult run_em_from(const Dataset& data, Params init, const EmConfig& config) {
  config.validate();
  EmResult res;
  res.params = std::move(init);
  const int p = data.p();
  const Family family = family_of(res.params);
  const int K = static_cast<int>(nu_of(res.params).size());
  const Matrix* x = family == Family::Moe ? &data.covariates() : nullptr;

  res.resp = e_step(data, res.params);
  res.loglik_trace.push_back(res.resp.loglik);
  for (int it = 1; it <= config.max_iter; ++it) {
    // M-step: gating, then nu, then Sigma (which needs the new nu).
    Vector nu(K);
    for (int k = 0; k < K; ++k) {
      const NuFit nf = m_step_nu(res.resp, k, p, config, nu_of(res.params)(k));
      nu(k) = nf.nu;
      res.nu_no_root += nf.no_root;
    }
    std::vector<SpdMatrix> sigma = m_step_sigma(res.resp, nu);
    if (family == Family::Mixture) {
      res.params = MixtureParams{res.resp.nk / static_cast<double>(data.n()), nu, std::move(sigma), std::nullopt};
    } else {
      const BetaFit bf = m_step_beta(res.resp.r, *x, std::get<MoeParams>(res.params).beta, config.beta_max_iter);
      res.beta_nonconverged += !bf.converged;
      res.params = MoeParams{bf.beta, nu, std::move(sigma), std::nullopt};
    }
    if (family == Family::Mixture) {
      // Guard the simplex check against rounding in n_k / n.
      auto& mp = std::get<MixtureParams>(res.params);
      mp.pi /= mp.pi.sum();
    }

    res.resp = e_step(data, res.params);
    const double prev = res.loglik_trace.back();
    const double cur = res.resp.loglik;
    res.loglik_trace.push_back(cur);
    res.iterations = it;
    if (!std::isfinite(cur)) fail(ErrorKind::DomainError, "em: non-finite log-likelihood");
    if (cur < prev - config.monotone_slack) ++res.monotone_violations;
    if (std::abs(cur - prev) < config.tol_loglik * std::abs(prev)) {
      res.converged = true;
      break;
    }
  }
  return res;
}

EmResult run_em(const Dataset& data, int K, Family family, const EmConfig& config, RngState& rng) {
  config.validate();
  if (family == Family::Moe) data.covariates();
  std::vector<EmResult> results(static_cast<std::size_t>(config.restarts));
  std::vector<EmRestart> outcomes(static_cast<std::size_t>(config.restarts));

#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < config.restarts; ++r) {
    const auto ri = static_cast<std::size_t>(r);
    try {
      RngState sub = rng.derive(static_cast<std::uint64_t>(r));
      results[ri] = run_em_from(data, em_initial_params(data, K, family, sub), config);
      outcomes[ri] = {false, "", results[ri].loglik(), results[ri].iterations, results[ri].converged};
    } catch (const Error& e) {
      outcomes[ri] = {true, std::string(to_string(e.kind())) + ": " + e.what(), 0.0, 0, false};
    }
  }

  int best = -1;
  for (int r = 0; r < config.restarts; ++r) {
    const auto& o = outcomes[static_cast<std::size_t>(r)];
    if (o.failed) continue;
    if (best < 0 || o.final_loglik > outcomes[static_cast<std::size_t>(best)].final_loglik) best = r;
  }
  if (best < 0) {
    std::string why = outcomes.front().failure;
    fail(ErrorKind::AllRestartsFailed, "em: all " + std::to_string(config.restarts) + " restarts failed (" + why + ")");
  }
  EmResult out = std::move(results[static_cast<std::size_t>(best)]);
  out.restart = best;
  out.restarts = std::move(outcomes);
  return out;
}

}  // namespace wishmix
