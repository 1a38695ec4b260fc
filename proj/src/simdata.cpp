#include "wishmix/simdata.hpp"

#include "wishmix/cluster_util.hpp"
#include "wishmix/error.hpp"

#include <cmath>
#include <limits>

namespace wishmix {

namespace {

Matrix ar_matrix(int p, double rho) {
  Matrix m(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) m(i, j) = std::pow(rho, std::abs(i - j));
  return m;
}

// Weights implied by an estimate, when it has shared ones.
std::optional<Vector> shared_weights(const Params& params) {
  if (const auto* mp = std::get_if<MixtureParams>(&params)) return mp->pi;
  const auto& moe = std::get<MoeParams>(params);
  if (moe.q() != 1) return std::nullopt;
  return gating_probs(Vector::Ones(1), moe.beta);
}

}  // namespace

SimDesign SimDesign::builtin(const std::string& name, int n) {
  SimDesign d;
  d.name = name;
  d.n = n;
  d.K = 3;
  d.seed = kDesignSeed;
  if (name == "mix-p2" || name == "moe-p2") {
    d.p = 2;
  } else if (name == "mix-p8" || name == "moe-p8") {
    d.p = 8;
  } else {
    fail(ErrorKind::UnknownDesign, "unknown design '" + name + "' (expected mix-p2, mix-p8, moe-p2 or moe-p8)");
  }
  d.family = name.starts_with("moe") ? Family::Moe : Family::Mixture;

  Vector nu(3);
  std::vector<SpdMatrix> sigma;
  if (d.p == 2) {
    nu << 8.0, 12.0, 3.0;
    Matrix s1(2, 2), s2(2, 2), s3(2, 2);
    s1 << 0.5, 0.2, 0.2, 0.7;
    s2 << 2.0, 0.6, 0.6, 1.5;
    s3 << 4.0, 0.2, 0.2, 3.0;
    sigma = {SpdMatrix(s1, JitterPolicy::Forbid), SpdMatrix(s2, JitterPolicy::Forbid),
             SpdMatrix(s3, JitterPolicy::Forbid)};
  } else {
    nu << 9.0, 20.0, 14.0;
    for (double rho : {0.5, 0.2, 0.8}) sigma.emplace_back(ar_matrix(8, rho), JitterPolicy::Forbid);
  }

  if (d.family == Family::Mixture) {
    Vector pi(3);
    pi << 0.35, 0.40, 0.25;
    d.truth = MixtureParams{pi, nu, std::move(sigma), std::nullopt};
  } else {
    constexpr int q = 3;
    RngState rng(kDesignSeed);
    Matrix beta(q, 2);
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < q; ++j) beta(j, k) = -2.0 + 4.0 * draw_uniform(rng);
    d.truth = MoeParams{beta, nu, std::move(sigma), std::nullopt};
  }
  return d;
}

SimData generate(const SimDesign& design, RngState& rng) {
  SimData out;
  std::vector<SpdMatrix> mats;
  mats.reserve(static_cast<std::size_t>(design.n));
  out.labels.reserve(static_cast<std::size_t>(design.n));
  const Vector& nu = nu_of(design.truth);
  const auto& sigma = sigma_of(design.truth);

  if (const auto* mp = std::get_if<MixtureParams>(&design.truth)) {
    const Vector logpi = mp->pi.array().log();
    for (int i = 0; i < design.n; ++i) {
      const int z = draw_categorical_from_logweights(rng, std::span<const double>(logpi.data(), logpi.size()));
      out.labels.push_back(z);
      mats.push_back(draw_wishart(rng, nu(z), sigma[static_cast<std::size_t>(z)]));
    }
    out.data = Dataset(std::move(mats));
    return out;
  }

  const auto& moe = std::get<MoeParams>(design.truth);
  const int q = moe.q();
  Matrix x(design.n, q);
  std::vector<std::string> names{"intercept"};
  for (int j = 1; j < q; ++j) names.push_back("x" + std::to_string(j));
  for (int i = 0; i < design.n; ++i) {
    x(i, 0) = 1.0;
    for (int j = 1; j < q; ++j) x(i, j) = draw_normal(rng);
    const Vector logpi = gating_probs(x.row(i).transpose(), moe.beta).array().log();
    const int z = draw_categorical_from_logweights(rng, std::span<const double>(logpi.data(), logpi.size()));
    out.labels.push_back(z);
    mats.push_back(draw_wishart(rng, nu(z), sigma[static_cast<std::size_t>(z)]));
  }
  out.data = Dataset(std::move(mats), x, names);
  return out;
}

ErrorRecord eval_errors(const Params& estimate, const Params& truth) {
  const Vector& nu_hat = nu_of(estimate);
  const Vector& nu = nu_of(truth);
  const auto& sig_hat = sigma_of(estimate);
  const auto& sig = sigma_of(truth);
  const auto K = static_cast<int>(nu.size());
  if (nu_hat.size() != nu.size()) fail(ErrorKind::DimensionMismatch, "eval_errors: K differs");
  if (sig_hat.front().dim() != sig.front().dim()) fail(ErrorKind::DimensionMismatch, "eval_errors: p differs");

  Matrix cost(K, K);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < K; ++j)
      cost(k, j) = (sig_hat[static_cast<std::size_t>(j)].matrix() - sig[static_cast<std::size_t>(k)].matrix()).norm();
  ErrorRecord rec;
  rec.perm = min_cost_assignment(cost);

  for (int k = 0; k < K; ++k) {
    const int j = rec.perm[static_cast<std::size_t>(k)];
    rec.nu_error += std::abs(nu_hat(j) - nu(k));
    rec.sigma_error +=
        (sig_hat[static_cast<std::size_t>(j)].matrix() - sig[static_cast<std::size_t>(k)].matrix()).squaredNorm();
  }
  rec.nu_error /= K;
  rec.sigma_error /= K;

  const auto w_hat = shared_weights(estimate);
  const auto w = shared_weights(truth);
  if (w_hat && w) {
    double e = 0.0;
    for (int k = 0; k < K; ++k) e += std::abs((*w_hat)(rec.perm[static_cast<std::size_t>(k)]) - (*w)(k));
    rec.pi_error = e / K;
  }

  const auto* moe_hat = std::get_if<MoeParams>(&estimate);
  const auto* moe = std::get_if<MoeParams>(&truth);
  if (moe_hat && moe) {
    if (moe_hat->q() != moe->q()) fail(ErrorKind::DimensionMismatch, "eval_errors: q differs");
    const Matrix full_hat = moe_hat->full_beta();
    const Matrix full = moe->full_beta();
    const Vector base = full_hat.col(rec.perm[static_cast<std::size_t>(K - 1)]);
    double e = 0.0;
    for (int k = 0; k < K; ++k) e += (full_hat.col(rec.perm[static_cast<std::size_t>(k)]) - base - full.col(k)).squaredNorm();
    rec.beta_error = e / K;
  }
  return rec;
}

namespace {

std::vector<StudyRow> study_replicate(const SimDesign& design, const StudyConfig& config, int rep) {
  const RngState rep_rng = RngState(config.seed).derive(static_cast<std::uint64_t>(rep));
  RngState data_rng = rep_rng.derive(0);
  const SimData sim = generate(design, data_rng);
  std::vector<StudyRow> rows;

  for (Method method : config.methods) {
    const std::string mname(to_string(method));
    auto add = [&](const std::string& metric, double value, bool failed = false) {
      rows.push_back({design.name, rep, mname, metric, value, failed});
    };
    try {
      RngState fit_rng = rep_rng.derive(1 + static_cast<std::uint64_t>(method));
      const FitReport fit = fit_model(sim.data, method, design.K, config.fit, fit_rng);
      const bool failed = !fit.converged;
      const ErrorRecord err = eval_errors(fit.point, design.truth);
      if (err.pi_error) add("pi_error", *err.pi_error, failed);
      if (err.beta_error) add("beta_error", *err.beta_error, failed);
      add("nu_error", err.nu_error, failed);
      add("sigma_error", err.sigma_error, failed);
      add("loglik", fit.loglik, failed);
      if (fit.chain) {
        for (int k = 0; k < design.K; ++k) {
          const int j = err.perm[static_cast<std::size_t>(k)];
          const std::string est_name = "nu_" + std::to_string(j + 1);
          for (const auto& ps : fit.summary->parameters)
            if (ps.name == est_name) add("ess_nu_" + std::to_string(k + 1), ps.ess);
          add("accept_nu_" + std::to_string(k + 1), fit.chain->acceptance_rate_nu(j));
        }
        for (std::size_t b = 0; b < fit.chain->attempts_beta.size(); ++b)
          add("accept_beta_" + std::to_string(b + 1), fit.chain->acceptance_rate_beta(static_cast<int>(b)));
      } else {
        add("converged", fit.converged ? 1.0 : 0.0, failed);
        add("iterations", fit.iterations, failed);
      }
    } catch (const Error&) {
      add("error", std::numeric_limits<double>::quiet_NaN(), true);
    }
  }
  return rows;
}

}  // namespace

std::vector<StudyRow> run_study(const SimDesign& design, const StudyConfig& config) {
  if (config.reps < 1) fail(ErrorKind::ConfigError, "study: reps must be >= 1");
  std::vector<std::vector<StudyRow>> per_rep(static_cast<std::size_t>(config.reps));
#pragma omp parallel for schedule(dynamic)
  for (int rep = 0; rep < config.reps; ++rep) {
    per_rep[static_cast<std::size_t>(rep)] = study_replicate(design, config, rep);
  }
  std::vector<StudyRow> rows;
  for (auto& r : per_rep) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

}  // namespace wishmix
