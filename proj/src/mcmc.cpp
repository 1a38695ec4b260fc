#include "wishmix/mcmc.hpp"

#include "wishmix/cluster_util.hpp"
#include "wishmix/error.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

namespace wishmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t idx(Eigen::Index i) { return static_cast<std::size_t>(i); }

}  // namespace

void SamplerConfig::validate() const {
  if (iterations < 1) fail(ErrorKind::ConfigError, "sampler: iterations must be >= 1");
  if (burnin < 0 || burnin >= iterations) fail(ErrorKind::ConfigError, "sampler: need 0 <= burnin < iterations");
  if (thin < 1) fail(ErrorKind::ConfigError, "sampler: thin must be >= 1");
  if (label_thin_factor < 1) fail(ErrorKind::ConfigError, "sampler: label_thin_factor must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    fail(ErrorKind::ConfigError, "sampler: target acceptance must lie in (0, 1)");
  }
  if (kept_draws() < 1) fail(ErrorKind::ConfigError, "sampler: no draws would be kept");
}

double Chain::acceptance_rate_nu(int k) const {
  const auto a = attempts_nu[static_cast<std::size_t>(k)];
  return a > 0 ? static_cast<double>(accept_nu[static_cast<std::size_t>(k)]) / static_cast<double>(a) : 0.0;
}

double Chain::acceptance_rate_beta(int block) const {
  const auto a = attempts_beta[static_cast<std::size_t>(block)];
  return a > 0 ? static_cast<double>(accept_beta[static_cast<std::size_t>(block)]) / static_cast<double>(a)
               : 0.0;
}

std::vector<std::string> Chain::parameter_names() const {
  std::vector<std::string> names;
  if (family == Family::Mixture) {
    for (int k = 1; k <= K; ++k) names.push_back("pi_" + std::to_string(k));
  } else {
    for (int k = 1; k < K; ++k)
      for (int j = 1; j <= q; ++j) names.push_back("beta_" + std::to_string(j) + "_" + std::to_string(k));
  }
  for (int k = 1; k <= K; ++k) names.push_back("nu_" + std::to_string(k));
  for (int k = 1; k <= K; ++k)
    for (int i = 1; i <= p; ++i)
      for (int j = i; j <= p; ++j)
        names.push_back("sigma_" + std::to_string(k) + "_" + std::to_string(i) + "_" + std::to_string(j));
  names.push_back("loglik");
  return names;
}

Matrix Chain::draws_matrix() const {
  const auto cols = static_cast<Eigen::Index>(parameter_names().size());
  Matrix out(static_cast<Eigen::Index>(draws.size()), cols);
  for (std::size_t t = 0; t < draws.size(); ++t) {
    const Draw& d = draws[t];
    Eigen::Index c = 0;
    const auto row = static_cast<Eigen::Index>(t);
    if (family == Family::Mixture) {
      for (int k = 0; k < K; ++k) out(row, c++) = d.pi(k);
    } else {
      for (int k = 0; k < K - 1; ++k)
        for (int j = 0; j < q; ++j) out(row, c++) = d.beta(j, k);
    }
    for (int k = 0; k < K; ++k) out(row, c++) = d.nu(k);
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) out(row, c++) = d.sigma[static_cast<std::size_t>(k)](i, j);
    out(row, c++) = d.loglik;
  }
  return out;
}

Params Chain::draw_params(std::size_t t) const {
  const Draw& d = draws.at(t);
  std::vector<SpdMatrix> sigma;
  for (const auto& s : d.sigma) sigma.emplace_back(s);
  if (family == Family::Mixture) return MixtureParams{d.pi, d.nu, std::move(sigma), std::nullopt};
  return MoeParams{d.beta, d.nu, std::move(sigma), std::nullopt};
}

ClusterStats cluster_stats(const Dataset& data, const std::vector<int>& labels, int K) {
  if (static_cast<int>(labels.size()) != data.n()) {
    fail(ErrorKind::DimensionMismatch, "cluster_stats: label count differs from n");
  }
  ClusterStats st;
  st.counts = Eigen::VectorXi::Zero(K);
  st.scatter.assign(static_cast<std::size_t>(K), Matrix::Zero(data.p(), data.p()));
  st.logdet_sum = Vector::Zero(K);
  for (int i = 0; i < data.n(); ++i) {
    const int k = labels[static_cast<std::size_t>(i)];
    ++st.counts(k);
    st.scatter[static_cast<std::size_t>(k)] += data.matrix(i).matrix();
    st.logdet_sum(k) += data.logdets()(i);
  }
  return st;
}

void gibbs_step_labels(const Matrix& log_density, const Vector& alpha, std::vector<int>& labels,
                       Eigen::VectorXi& counts, RngState& rng) {
  const Eigen::Index K = log_density.cols();
  std::vector<double> w(idx(K));
  for (Eigen::Index i = 0; i < log_density.rows(); ++i) {
    int& z = labels[idx(i)];
    --counts(z);
    for (Eigen::Index k = 0; k < K; ++k) w[idx(k)] = log_density(i, k) + std::log(alpha(k) + counts(k));
    z = draw_categorical_from_logweights(rng, w);
    ++counts(z);
  }
}

void categorical_step_labels(const Matrix& log_weights, std::vector<int>& labels, RngState& rng) {
  const Eigen::Index K = log_weights.cols();
  std::vector<double> w(idx(K));
  for (Eigen::Index i = 0; i < log_weights.rows(); ++i) {
    for (Eigen::Index k = 0; k < K; ++k) w[idx(k)] = log_weights(i, k);
    labels[idx(i)] = draw_categorical_from_logweights(rng, w);
  }
}

Vector gibbs_step_weights(const Eigen::VectorXi& counts, const Vector& alpha, RngState& rng) {
  return draw_dirichlet(rng, alpha + counts.cast<double>());
}

std::vector<SpdMatrix> gibbs_step_scales(const ClusterStats& stats, const Vector& nu,
                                         const Hyperparams& hyper, RngState& rng) {
  const Matrix psi_inv = hyper.psi0.inverse();
  std::vector<SpdMatrix> out;
  out.reserve(stats.scatter.size());
  for (std::size_t k = 0; k < stats.scatter.size(); ++k) {
    const auto nk = stats.counts(static_cast<Eigen::Index>(k));
    if (nk == 0) {
      out.push_back(draw_inverse_wishart(rng, hyper.nu0, SpdMatrix(psi_inv)));
    } else {
      const double df = hyper.nu0 + nk * nu(static_cast<Eigen::Index>(k));
      out.push_back(draw_inverse_wishart(rng, df, SpdMatrix(psi_inv + stats.scatter[k])));
    }
  }
  return out;
}

double nu_log_posterior(double nu, int p, long n_k, double logdet_sum, double sigma_logdet,
                        const Hyperparams& hyper) {
  if (!(nu > p - 1)) return kNegInf;
  double lp = (hyper.a_nu - 1.0) * std::log(nu) - hyper.b_nu * nu;
  if (n_k > 0) {
    lp += 0.5 * (nu - p - 1) * logdet_sum -
          static_cast<double>(n_k) *
              (0.5 * nu * p * std::numbers::ln2 + 0.5 * nu * sigma_logdet + log_multigamma(p, 0.5 * nu));
  }
  return lp;
}

NuStep mh_step_nu(int p, long n_k, double logdet_sum, const SpdMatrix& sigma_k, double nu,
                  const Hyperparams& hyper, double scale, RngState& rng) {
  const double log_prop = std::log(nu) + scale * draw_normal(rng);
  const double prop = std::exp(log_prop);
  const double u = draw_uniform(rng);
  if (!(prop > p - 1)) return {nu, false, 0.0};
  const double log_alpha =
      nu_log_posterior(prop, p, n_k, logdet_sum, sigma_k.logdet(), hyper) + log_prop -
      nu_log_posterior(nu, p, n_k, logdet_sum, sigma_k.logdet(), hyper) - std::log(nu);
  const double accept_prob = log_alpha >= 0.0 ? 1.0 : std::exp(log_alpha);
  if (std::log(u) < log_alpha) return {prop, true, accept_prob};
  return {nu, false, accept_prob};
}

namespace {

double label_gating_loglik(const Matrix& x, const Matrix& beta, const std::vector<int>& labels) {
  const Matrix lp = gating_log_probs(x, beta);
  std::vector<double> terms(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) terms[i] = lp(static_cast<Eigen::Index>(i), labels[i]);
  return pairwise_sum(terms);
}

}  // namespace

BetaStep mh_step_beta(const Matrix& x, const std::vector<int>& labels, const Matrix& beta,
                      const Hyperparams& hyper, const Vector& scales, bool joint, RngState& rng) {
  if (x.rows() != static_cast<Eigen::Index>(labels.size()) || x.cols() != beta.rows()) {
    fail(ErrorKind::DimensionMismatch, "mh_step_beta: X, labels and beta disagree");
  }
  BetaStep out{beta, {}, {}};
  const Eigen::Index q = beta.rows(), blocks = beta.cols();
  if (blocks == 0) return out;
  double current = label_gating_loglik(x, out.beta, labels);
  const double inv2s2 = 0.5 / hyper.sigma_beta2;

  auto try_move = [&](const Matrix& proposal, double log_prior_delta) {
    const double cand = label_gating_loglik(x, proposal, labels);
    const double log_alpha = cand - current + log_prior_delta;
    const double u = draw_uniform(rng);
    out.accept_prob.push_back(log_alpha >= 0.0 ? 1.0 : std::exp(log_alpha));
    const bool ok = std::log(u) < log_alpha;
    out.accepted.push_back(ok);
    if (ok) {
      out.beta = proposal;
      current = cand;
    }
  };

  if (joint) {
    Matrix prop = out.beta;
    for (Eigen::Index k = 0; k < blocks; ++k)
      for (Eigen::Index j = 0; j < q; ++j) prop(j, k) += scales(0) * draw_normal(rng);
    try_move(prop, -inv2s2 * (prop.squaredNorm() - out.beta.squaredNorm()));
    return out;
  }
  for (Eigen::Index k = 0; k < blocks; ++k) {
    Matrix prop = out.beta;
    for (Eigen::Index j = 0; j < q; ++j) prop(j, k) += scales(k) * draw_normal(rng);
    try_move(prop, -inv2s2 * (prop.col(k).squaredNorm() - out.beta.col(k).squaredNorm()));
  }
  return out;
}

namespace {

struct SamplerRun {
  const Dataset& data;
  const Hyperparams& hyper;
  const SamplerConfig& config;
  RngState& rng;
  Family family;
  int K;
  int p;

  std::vector<int> labels;
  Eigen::VectorXi counts;
  Vector pi;
  Matrix beta;
  Vector nu;
  std::vector<SpdMatrix> sigma;
  Vector log_scale_nu;
  Vector log_scale_beta;

  void recount() {
    counts.setZero(K);
    for (int z : labels) ++counts(z);
  }

  Matrix log_prior() const {
    if (family == Family::Moe) return gating_log_probs(data.covariates(), beta);
    return pi.array().log().matrix().transpose();
  }

  Matrix with_prior(const Matrix& log_density) const {
    const Matrix lp = log_prior();
    if (lp.rows() == 1) return log_density.rowwise() + lp.row(0);
    return log_density + lp;
  }

  void initialize() {
    labels = kmeans_labels(data.vec_stack(), K, rng);
    recount();
    pi = counts.cast<double>() / static_cast<double>(data.n());
    nu = config.fixed_nu ? *config.fixed_nu : Vector::Constant(K, p + 2.0);
    const ClusterStats st = cluster_stats(data, labels, K);
    sigma.clear();
    for (int k = 0; k < K; ++k) {
      if (st.counts(k) == 0) {
        sigma.push_back(SpdMatrix::identity(p));
      } else {
        sigma.emplace_back(st.scatter[static_cast<std::size_t>(k)] / (st.counts(k) * nu(k)));
      }
    }
    if (family == Family::Moe) beta = Matrix::Zero(data.q(), K - 1);
    log_scale_nu = Vector::Constant(K, std::log(hyper.prop_scale_nu));
    const Eigen::Index nb = config.joint_beta ? 1 : K - 1;
    log_scale_beta = Vector::Constant(nb, std::log(hyper.prop_scale_beta));
  }

  static void adapt(double& log_scale, double accept_prob, double target, int t) {
    const double gamma = std::pow(static_cast<double>(t) + 1.0, -0.6);
    log_scale = std::clamp(log_scale + gamma * (accept_prob - target), std::log(1e-4), std::log(50.0));
  }

  Chain run() {
    Chain chain;
    chain.family = family;
    chain.K = K;
    chain.p = p;
    chain.q = family == Family::Moe ? data.q() : 0;
    chain.config = config;
    chain.seed = rng.seed();
    chain.stream = rng.stream();
    chain.accept_nu.assign(static_cast<std::size_t>(K), 0);
    chain.attempts_nu.assign(static_cast<std::size_t>(K), 0);
    const std::size_t nb = family == Family::Moe ? static_cast<std::size_t>(log_scale_beta.size()) : 0;
    chain.accept_beta.assign(nb, 0);
    chain.attempts_beta.assign(nb, 0);
    chain.loglik_trace.resize(config.iterations);
    chain.draws.reserve(static_cast<std::size_t>(config.kept_draws()));

    Matrix log_density = log_density_matrix(data, nu, sigma);
    for (int t = 1; t <= config.iterations; ++t) {
      const bool burning = t <= config.burnin;
      const bool tune = burning && config.adapt;

      // Step 1: labels.
      if (family == Family::Mixture && config.collapsed_labels) {
        gibbs_step_labels(log_density, hyper.alpha, labels, counts, rng);
      } else {
        categorical_step_labels(with_prior(log_density), labels, rng);
        recount();
      }

      // Step 2: weights or gating coefficients.
      if (family == Family::Mixture) {
        pi = gibbs_step_weights(counts, hyper.alpha, rng);
      } else {
        const Vector scales = log_scale_beta.array().exp();
        BetaStep bs = mh_step_beta(data.covariates(), labels, beta, hyper, scales, config.joint_beta, rng);
        beta = std::move(bs.beta);
        for (std::size_t b = 0; b < bs.accepted.size(); ++b) {
          if (tune) adapt(log_scale_beta(static_cast<Eigen::Index>(b)), bs.accept_prob[b], config.target_accept, t);
          if (!burning) {
            ++chain.attempts_beta[b];
            if (bs.accepted[b]) ++chain.accept_beta[b];
          }
        }
      }

      // Step 3: scale matrices.
      const ClusterStats st = cluster_stats(data, labels, K);
      sigma = gibbs_step_scales(st, nu, hyper, rng);

      // Step 4: degrees of freedom.
      if (!config.fixed_nu) {
        for (int k = 0; k < K; ++k) {
          const NuStep ns = mh_step_nu(p, st.counts(k), st.logdet_sum(k), sigma[static_cast<std::size_t>(k)],
                                       nu(k), hyper, std::exp(log_scale_nu(k)), rng);
          nu(k) = ns.nu;
          if (tune) adapt(log_scale_nu(k), ns.accept_prob, config.target_accept, t);
          if (!burning) {
            ++chain.attempts_nu[static_cast<std::size_t>(k)];
            if (ns.accepted) ++chain.accept_nu[static_cast<std::size_t>(k)];
          }
        }
      }

      log_density = log_density_matrix(data, nu, sigma);
      const double ll = loglik_from_log_weights(with_prior(log_density));
      chain.loglik_trace(t - 1) = ll;

      if (!burning && (t - config.burnin) % config.thin == 0) {
        Draw d;
        if (family == Family::Mixture) d.pi = pi;
        else d.beta = beta;
        d.nu = nu;
        for (const auto& s : sigma) d.sigma.push_back(s.matrix());
        d.loglik = ll;
        chain.draws.push_back(std::move(d));
        if ((t - config.burnin) % (config.thin * config.label_thin_factor) == 0) {
          chain.labels.push_back(labels);
          chain.label_draw_index.push_back(static_cast<int>(chain.draws.size()) - 1);
        }
      }
    }
    chain.scale_nu = log_scale_nu.array().exp();
    chain.scale_beta = family == Family::Moe ? Vector(log_scale_beta.array().exp()) : Vector();
    return chain;
  }
};

void check_sampler_inputs(const Dataset& data, const Hyperparams& hyper, int K, const SamplerConfig& config) {
  if (K < 1) fail(ErrorKind::ConfigError, "sampler: K must be >= 1");
  if (data.n() < K) fail(ErrorKind::DegenerateData, "sampler: fewer observations than components");
  config.validate();
  hyper.validate(data.p(), K);
  if (config.fixed_nu) {
    if (config.fixed_nu->size() != K) fail(ErrorKind::ConfigError, "sampler: fixed_nu must have K entries");
    if ((config.fixed_nu->array() <= data.p() - 1).any()) {
      fail(ErrorKind::ConfigError, "sampler: fixed_nu entries must exceed p-1");
    }
  }
}

}  // namespace

Chain run_mixture_sampler(const Dataset& data, const Hyperparams& hyper, int K, const SamplerConfig& config,
                          RngState& rng) {
  check_sampler_inputs(data, hyper, K, config);
  SamplerRun run{data, hyper, config, rng, Family::Mixture, K, data.p(), {}, {}, {}, {}, {}, {}, {}, {}};
  run.initialize();
  return run.run();
}

Chain run_moe_sampler(const Dataset& data, const Hyperparams& hyper, int K, const SamplerConfig& config,
                      RngState& rng) {
  data.covariates();
  check_sampler_inputs(data, hyper, K, config);
  SamplerRun run{data, hyper, config, rng, Family::Moe, K, data.p(), {}, {}, {}, {}, {}, {}, {}, {}};
  run.initialize();
  return run.run();
}

double ess(const Vector& trace) {
  const Eigen::Index n = trace.size();
  if (n < 10) fail(ErrorKind::TooShort, "ess: need at least 10 values");
  const double mean = trace.mean();
  const Vector centered = trace.array() - mean;
  const double c0 = centered.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0) || c0 <= 1e-300 * (mean * mean + 1.0)) return 1.0;

  std::size_t len = 1;
  while (len < static_cast<std::size_t>(2 * n)) len <<= 1;
  std::vector<double> padded(len, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) padded[idx(i)] = centered(i);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  fft.fwd(freq, padded);
  for (auto& f : freq) f = std::norm(f);
  std::vector<double> acov;
  fft.inv(acov, freq);
  const double a0 = acov[0];
  auto rho = [&](Eigen::Index t) { return acov[idx(t)] / a0; };

  // Geyer: sums of adjacent autocorrelation pairs, truncated at the first
  // non-positive pair and forced to be non-increasing.
  double sum_pairs = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    double g = rho(2 * m) + rho(2 * m + 1);
    if (!(g > 0.0)) break;
    g = std::min(g, prev);
    sum_pairs += g;
    prev = g;
  }
  const double tau = -1.0 + 2.0 * sum_pairs;
  const double nd = static_cast<double>(n);
  if (!(tau > 0.0)) return nd;
  return std::clamp(nd / tau, 1.0, nd);
}

Chain relabel_chain(const Chain& chain) {
  if (chain.draws.empty()) fail(ErrorKind::ChainTooShort, "relabel_chain: empty chain");
  Chain out = chain;
  const int K = chain.K;
  if (K == 1) return out;
  const std::vector<Matrix>& ref = chain.draws.front().sigma;
  std::vector<std::vector<int>> perms(chain.draws.size());
  Matrix cost(K, K);
  for (std::size_t t = 0; t < chain.draws.size(); ++t) {
    const Draw& d = chain.draws[t];
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < K; ++j)
        cost(k, j) = (d.sigma[static_cast<std::size_t>(j)] - ref[static_cast<std::size_t>(k)]).norm();
    const std::vector<int> perm = min_cost_assignment(cost);
    Draw& o = out.draws[t];
    for (int k = 0; k < K; ++k) {
      const auto src = static_cast<std::size_t>(perm[static_cast<std::size_t>(k)]);
      o.nu(k) = d.nu(static_cast<Eigen::Index>(src));
      o.sigma[static_cast<std::size_t>(k)] = d.sigma[src];
      if (chain.family == Family::Mixture) o.pi(k) = d.pi(static_cast<Eigen::Index>(src));
    }
    if (chain.family == Family::Moe) {
      Matrix full = Matrix::Zero(d.beta.rows(), K);
      full.leftCols(K - 1) = d.beta;
      const Vector base = full.col(perm[static_cast<std::size_t>(K - 1)]);
      for (int k = 0; k < K - 1; ++k) o.beta.col(k) = full.col(perm[static_cast<std::size_t>(k)]) - base;
    }
    perms[t] = perm;
  }
  for (std::size_t s = 0; s < out.labels.size(); ++s) {
    const auto& perm = perms[static_cast<std::size_t>(out.label_draw_index[s])];
    std::vector<int> inverse(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) inverse[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = k;
    for (int& z : out.labels[s]) z = inverse[static_cast<std::size_t>(z)];
  }
  return out;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double prob) {
  const double h = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

ParameterSummary summarize_trace(const std::string& name, const Vector& trace) {
  if (trace.size() == 0) fail(ErrorKind::ChainTooShort, "summarize_trace: empty trace");
  ParameterSummary ps;
  ps.name = name;
  ps.mean = trace.mean();
  std::vector<double> sorted(trace.data(), trace.data() + trace.size());
  std::sort(sorted.begin(), sorted.end());
  ps.lower = quantile_sorted(sorted, 0.025);
  ps.upper = quantile_sorted(sorted, 0.975);
  ps.ess = trace.size() >= 10 ? ess(trace) : static_cast<double>(trace.size());
  return ps;
}

PosteriorSummary summarize_chain(const Chain& chain) {
  if (chain.draws.empty()) fail(ErrorKind::ChainTooShort, "summarize_chain: empty chain");
  PosteriorSummary out;
  const Matrix m = chain.draws_matrix();
  const auto names = chain.parameter_names();
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.parameters.push_back(summarize_trace(names[idx(c)], m.col(c)));

  const double count = static_cast<double>(chain.draws.size());
  Vector nu = Vector::Zero(chain.K);
  std::vector<Matrix> sigma(static_cast<std::size_t>(chain.K), Matrix::Zero(chain.p, chain.p));
  Vector pi = Vector::Zero(chain.K);
  Matrix beta = Matrix::Zero(chain.q, std::max(0, chain.K - 1));
  for (const Draw& d : chain.draws) {
    nu += d.nu;
    for (int k = 0; k < chain.K; ++k) sigma[static_cast<std::size_t>(k)] += d.sigma[static_cast<std::size_t>(k)];
    if (chain.family == Family::Mixture) pi += d.pi;
    else beta += d.beta;
  }
  std::vector<SpdMatrix> sig;
  for (auto& s : sigma) sig.emplace_back(s / count);
  if (chain.family == Family::Mixture) {
    pi /= pi.sum();
    out.point = MixtureParams{pi, nu / count, std::move(sig), std::nullopt};
  } else {
    out.point = MoeParams{beta / count, nu / count, std::move(sig), std::nullopt};
  }
  for (int k = 0; k < chain.K; ++k) out.accept_nu.push_back(chain.acceptance_rate_nu(k));
  for (std::size_t b = 0; b < chain.attempts_beta.size(); ++b) {
    out.accept_beta.push_back(chain.acceptance_rate_beta(static_cast<int>(b)));
  }
  return out;
}

}  // namespace wishmix
