#include "wishmix/fit.hpp"

#include "wishmix/error.hpp"

#include <algorithm>

namespace wishmix {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Bayes: return "bayes";
    case Method::Em: return "em";
    case Method::BayesMoe: return "bayes-moe";
    case Method::EmMoe: return "em-moe";
  }
  return "?";
}

Method method_from_string(std::string_view name) {
  for (Method m : {Method::Bayes, Method::Em, Method::BayesMoe, Method::EmMoe})
    if (to_string(m) == name) return m;
  fail(ErrorKind::ConfigError,
       "unknown method '" + std::string(name) + "' (expected bayes, em, bayes-moe or em-moe)");
}

Family family_of(Method method) {
  return method == Method::Bayes || method == Method::Em ? Family::Mixture : Family::Moe;
}

bool is_bayesian(Method method) { return method == Method::Bayes || method == Method::BayesMoe; }

Dataset prepare_for_method(const Dataset& data, Method method, std::vector<std::string>* warnings) {
  if (family_of(method) == Family::Mixture) return data;
  if (data.has_covariates()) return data;
  if (warnings) warnings->push_back("dataset has no covariates; fitting with an intercept-only gating model");
  return data.with_intercept_only();
}

namespace {

void fill_point_summaries(FitReport& rep, const Dataset& data) {
  const Responsibilities resp = e_step(data, rep.point);
  rep.loglik = resp.loglik;
  rep.responsibilities = resp.r;
  rep.map_labels.resize(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) {
    Eigen::Index k = 0;
    resp.r.row(i).maxCoeff(&k);
    rep.map_labels[static_cast<std::size_t>(i)] = static_cast<int>(k);
  }
  rep.bic = bic(rep.loglik, rep.K, rep.p, rep.q, family_of(rep.method), rep.n);
  rep.icl = icl(rep.bic, rep.responsibilities);
}

}  // namespace

FitReport fit_model(const Dataset& input, Method method, int K, const FitOptions& options, RngState& rng) {
  FitReport rep;
  rep.method = method;
  rep.seed = rng.seed();
  const Dataset data = prepare_for_method(input, method, &rep.warnings);
  rep.K = K;
  rep.p = data.p();
  rep.n = data.n();
  rep.q = family_of(method) == Family::Moe ? data.q() : 0;

  if (is_bayesian(method)) {
    const Hyperparams hyper = options.hyper.value_or(Hyperparams::defaults(data.p(), K));
    Chain raw = method == Method::Bayes ? run_mixture_sampler(data, hyper, K, options.sampler, rng)
                                        : run_moe_sampler(data, hyper, K, options.sampler, rng);
    rep.chain = relabel_chain(raw);
    rep.summary = summarize_chain(*rep.chain);
    rep.point = rep.summary->point;
    for (int k = 0; k < K; ++k) {
      const double a = rep.chain->acceptance_rate_nu(k);
      if (!options.sampler.fixed_nu && (a < 0.15 || a > 0.5)) {
        rep.warnings.push_back("nu_" + std::to_string(k + 1) + " acceptance rate " + std::to_string(a) +
                               " is outside [0.15, 0.5]");
      }
    }
  } else {
    EmResult em = run_em(data, K, family_of(method), options.em, rng);
    rep.point = std::move(em.params);
    rep.loglik_trace = std::move(em.loglik_trace);
    rep.restart = em.restart;
    rep.iterations = em.iterations;
    rep.converged = em.converged;
    rep.monotone_violations = em.monotone_violations;
    rep.nu_no_root = em.nu_no_root;
    rep.beta_nonconverged = em.beta_nonconverged;
    rep.restarts = std::move(em.restarts);
    if (!rep.converged) rep.warnings.push_back("EM reached max_iter without meeting the tolerance");
    if (rep.nu_no_root > 0) rep.warnings.push_back("nu update clamped to a bracket end at least once");
  }
  fill_point_summaries(rep, data);
  return rep;
}

CriterionRow criterion_row(const Dataset& input, const FitReport& fit, const std::set<Criterion>& wanted,
                           LooMethod loo_method) {
  CriterionRow row;
  row.K = fit.K;
  row.loglik = fit.loglik;
  if (wanted.count(Criterion::Bic)) row.bic = fit.bic;
  if (wanted.count(Criterion::Icl)) row.icl = fit.icl;
  if (wanted.count(Criterion::Elpd) && fit.chain) {
    const Dataset data = prepare_for_method(input, fit.method);
    const LooResult loo = elpd_loo(data, *fit.chain, loo_method);
    row.elpd = loo.elpd;
    row.elpd_se = loo.se;
    row.khat_high = loo.diagnostics.n_high;
  }
  return row;
}

}  // namespace wishmix
