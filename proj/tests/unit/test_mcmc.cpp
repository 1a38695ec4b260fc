#include <doctest.h>

#include "test_support.hpp"
#include "wishmix/error.hpp"
#include "wishmix/mcmc.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace wishmix;
using doctest::Approx;

namespace {

SpdMatrix scalar(double v) { return SpdMatrix(Matrix::Constant(1, 1, v)); }

// Standard error of the mean of a correlated series by non-overlapping batch means.
double batch_se(const std::vector<double>& x, int batches = 100) {
  const std::size_t len = x.size() / static_cast<std::size_t>(batches);
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += x[static_cast<std::size_t>(b) * len + i];
    means.push_back(s / static_cast<double>(len));
  }
  return test::moments(means).se;
}

double mean_of(const std::vector<double>& x) { return test::moments(x).mean; }

// p = 1 Wishart log-density, written as a gamma density in s with shape nu/2 and scale 2 sigma2.
double gamma_form_logpdf(double s, double nu, double sigma2) {
  const double shape = 0.5 * nu, scale = 2.0 * sigma2;
  return (shape - 1.0) * std::log(s) - s / scale - shape * std::log(scale) - std::lgamma(shape);
}

Dataset p1_dataset(const std::vector<double>& values) {
  std::vector<Matrix> raw;
  for (double v : values) raw.push_back(Matrix::Constant(1, 1, v));
  return Dataset::from_raw(raw);
}

// Two clusters of 2x2 Wishart data with very different scales.
Dataset separated_dataset(RngState& rng, int n, std::vector<int>* truth = nullptr) {
  Matrix s1(2, 2), s2(2, 2);
  s1 << 0.5, 0.2, 0.2, 0.7;
  s2 << 4.0, 0.2, 0.2, 3.0;
  std::vector<SpdMatrix> mats;
  for (int i = 0; i < n; ++i) {
    const int z = i % 2;
    mats.push_back(draw_wishart(rng, z == 0 ? 8.0 : 12.0, SpdMatrix(z == 0 ? s1 : s2)));
    if (truth) truth->push_back(z);
  }
  return Dataset(std::move(mats));
}

SamplerConfig short_config(int iterations, int burnin) {
  SamplerConfig c;
  c.iterations = iterations;
  c.burnin = burnin;
  return c;
}

}  // namespace

TEST_CASE("SamplerConfig validation") {
  SamplerConfig c = short_config(100, 50);
  CHECK_NOTHROW(c.validate());
  CHECK(c.kept_draws() == 50);
  c.thin = 3;
  CHECK(c.kept_draws() == 16);
  c.burnin = 100;
  CHECK_THROWS_AS(c.validate(), Error);
  c = short_config(100, 50);
  c.thin = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("gibbs_step_labels: symmetric single observation") {
  RngState rng(1);
  const Matrix log_dens = Matrix::Constant(1, 2, -3.0);
  const Vector alpha = Vector::Ones(2);
  std::vector<int> labels{0};
  Eigen::VectorXi counts(2);
  counts << 1, 0;
  std::vector<double> ones;
  for (int t = 0; t < 100000; ++t) {
    gibbs_step_labels(log_dens, alpha, labels, counts, rng);
    ones.push_back(labels[0] == 1 ? 1.0 : 0.0);
  }
  const auto m = test::moments(ones);
  CHECK(std::abs(m.mean - 0.5) < 3 * m.se);
  CHECK(counts.sum() == 1);
}

TEST_CASE("gibbs_step_labels: dominance when the log-weight gap exceeds 50") {
  RngState rng(2);
  Matrix log_dens(3, 2);
  log_dens << 0.0, -60.0, 0.0, -55.0, -70.0, 0.0;
  std::vector<int> labels{1, 1, 0};
  Eigen::VectorXi counts(2);
  counts << 1, 2;
  for (int t = 0; t < 1000; ++t) {
    gibbs_step_labels(log_dens, Vector::Ones(2), labels, counts, rng);
    CHECK(labels == std::vector<int>{0, 0, 1});
  }
}

TEST_CASE("collapsed labels match Monte Carlo marginalization over Dirichlet weights") {
  // n = 2, K = 2, p = 1 with (nu, Sigma) held fixed: p(z) is proportional to
  // f(S_1|z_1) f(S_2|z_2) E[pi_{z_1} pi_{z_2}] under pi ~ Dirichlet(alpha).
  const std::vector<double> s = {0.8, 3.1};
  const double nu[2] = {4.0, 6.0}, sig[2] = {0.3, 0.9};
  const double alpha[2] = {0.7, 1.6};
  Matrix log_dens(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) log_dens(i, k) = gamma_form_logpdf(s[static_cast<std::size_t>(i)], nu[k], sig[k]);

  std::mt19937_64 gen(12345);
  std::gamma_distribution<double> g0(alpha[0], 1.0), g1(alpha[1], 1.0);
  double moment[2][2] = {{0, 0}, {0, 0}};
  const int draws = 1000000;
  for (int t = 0; t < draws; ++t) {
    const double a = g0(gen), b = g1(gen);
    const double p0 = a / (a + b), p1 = 1.0 - p0;
    moment[0][0] += p0 * p0;
    moment[0][1] += p0 * p1;
    moment[1][1] += p1 * p1;
  }
  moment[1][0] = moment[0][1];
  double target[4], total = 0.0;
  for (int z1 = 0; z1 < 2; ++z1)
    for (int z2 = 0; z2 < 2; ++z2) {
      target[2 * z1 + z2] = std::exp(log_dens(0, z1) + log_dens(1, z2)) * moment[z1][z2] / draws;
      total += target[2 * z1 + z2];
    }
  for (double& t : target) t /= total;

  RngState rng(3);
  std::vector<int> labels{0, 0};
  Eigen::VectorXi counts(2);
  counts << 2, 0;
  const Vector alpha_v = Eigen::Vector2d(alpha[0], alpha[1]);
  std::vector<std::vector<double>> freq(4);
  for (int t = 0; t < 200000; ++t) {
    gibbs_step_labels(log_dens, alpha_v, labels, counts, rng);
    const int cfg = 2 * labels[0] + labels[1];
    for (int c = 0; c < 4; ++c) freq[static_cast<std::size_t>(c)].push_back(c == cfg ? 1.0 : 0.0);
  }
  for (int c = 0; c < 4; ++c) {
    CAPTURE(c);
    CHECK(std::abs(mean_of(freq[static_cast<std::size_t>(c)]) - target[c]) < 3 * batch_se(freq[static_cast<std::size_t>(c)]));
  }
}

TEST_CASE("gibbs_step_weights") {
  RngState rng(4);
  Eigen::VectorXi counts(2);
  counts << 10, 0;
  std::vector<double> p1, p2;
  for (int t = 0; t < 100000; ++t) {
    const Vector pi = gibbs_step_weights(counts, Vector::Ones(2), rng);
    p1.push_back(pi(0));
    p2.push_back(pi(1));
  }
  const auto m1 = test::moments(p1), m2 = test::moments(p2);
  CHECK(std::abs(m1.mean - 11.0 / 12.0) < 3 * m1.se);
  CHECK(std::abs(m2.mean - 1.0 / 12.0) < 3 * m2.se);

  counts << 5, 5;
  std::vector<double> a, b;
  for (int t = 0; t < 100000; ++t) {
    const Vector pi = gibbs_step_weights(counts, Vector::Ones(2), rng);
    a.push_back(pi(0));
    b.push_back(pi(1));
  }
  CHECK(std::abs(mean_of(a) - mean_of(b)) < 3 * std::sqrt(2.0) * test::moments(a).se);
}

TEST_CASE("gibbs_step_scales: p = 1 posterior matches the grid inverse-gamma") {
  const std::vector<double> values = {0.9, 2.2, 1.4, 3.0, 0.6};
  const Dataset data = p1_dataset(values);
  const std::vector<int> labels(values.size(), 0);
  const ClusterStats st = cluster_stats(data, labels, 1);
  CHECK(st.counts(0) == 5);
  CHECK(st.scatter[0](0, 0) == Approx(8.1));

  Hyperparams h = Hyperparams::defaults(1, 1);
  h.psi0 = scalar(2.0);
  const double nu = 4.0;
  const double df = h.nu0 + 5 * nu, scale = 0.5 + 8.1;
  // Density of sigma2: proportional to sigma2^{-(df/2 + 1)} exp(-scale / (2 sigma2)).
  const test::GridCdf cdf([&](double x) { return -(0.5 * df + 1.0) * std::log(x) - scale / (2.0 * x); },
                          1e-4, 5.0, 400001);
  RngState rng(5);
  std::vector<double> draws;
  for (int t = 0; t < 100000; ++t) draws.push_back(gibbs_step_scales(st, Vector::Constant(1, nu), h, rng)[0](0, 0));
  CHECK(test::ks_statistic(draws, cdf) < 0.01);
}

TEST_CASE("gibbs_step_scales: empty clusters draw from the prior; n_k = 1 adds S") {
  RngState rng(6);
  Hyperparams h = Hyperparams::defaults(2, 2);
  std::vector<Matrix> raw = {Matrix::Identity(2, 2)};
  const Dataset d2 = Dataset::from_raw(raw);
  const ClusterStats st = cluster_stats(d2, {0}, 2);
  CHECK(st.counts(1) == 0);

  // Empty component: Sigma^{-1} ~ W(nu0, psi0) so E[Sigma^{-1}] = nu0 I = 4 I.
  // Occupied with S = psi0^{-1} = I and nu = 5: E[Sigma] = 2 I / (nu0 + nu - p - 1) = 2 I / 6.
  std::vector<double> empty_inv, occ;
  for (int t = 0; t < 100000; ++t) {
    const auto s = gibbs_step_scales(st, Eigen::Vector2d(5.0, 5.0), h, rng);
    empty_inv.push_back(s[1].inverse()(0, 0));
    occ.push_back(s[0](1, 1));
  }
  const auto me = test::moments(empty_inv), mo = test::moments(occ);
  CHECK(std::abs(me.mean - 4.0) < 3 * me.se);
  CHECK(std::abs(mo.mean - 2.0 / 6.0) < 3 * mo.se);
}

TEST_CASE("mh_step_nu basics") {
  RngState rng(7);
  const Hyperparams h = Hyperparams::defaults(2, 1);
  const SpdMatrix sig = SpdMatrix::identity(2);
  const NuStep tiny = mh_step_nu(2, 10, 3.0, sig, 5.0, h, 1e-12, rng);
  CHECK(tiny.accept_prob > 0.999);
  CHECK(tiny.accepted);

  const NuStep zero = mh_step_nu(2, 10, 3.0, sig, 5.0, h, 0.0, rng);
  CHECK(zero.accepted);
  CHECK(zero.nu == Approx(5.0).epsilon(1e-15));

  CHECK(nu_log_posterior(1.0, 2, 10, 3.0, 0.0, h) == -std::numeric_limits<double>::infinity());
  int guarded = 0;
  for (int t = 0; t < 10000; ++t) {
    const NuStep s = mh_step_nu(2, 10, 3.0, sig, 1.05, h, 1.0, rng);
    CHECK(s.nu > 1.0);
    if (s.accept_prob == 0.0) {
      ++guarded;
      CHECK_FALSE(s.accepted);
      CHECK(s.nu == 1.05);
    }
  }
  CHECK(guarded > 0);
}

TEST_CASE("mh_step_nu targets the 1-D grid posterior (p = 1)") {
  RngState data_rng(8);
  std::vector<double> values;
  for (int i = 0; i < 20; ++i) values.push_back(draw_wishart(data_rng, 5.0, scalar(1.0))(0, 0));
  double L = 0.0;
  for (double v : values) L += std::log(v);
  const double sigma2 = 1.0;
  Hyperparams h = Hyperparams::defaults(1, 1);
  h.a_nu = 1.2;
  h.b_nu = 0.05;
  // Independent target: sum of p = 1 Wishart log-densities plus the gamma log-prior.
  auto log_target = [&](double nu) {
    double t = (h.a_nu - 1.0) * std::log(nu) - h.b_nu * nu;
    for (double v : values) t += gamma_form_logpdf(v, nu, sigma2);
    return t;
  };
  const test::GridCdf cdf(log_target, 1e-6, 60.0, 600001);
  RngState rng(9);
  double nu = 3.0;
  std::vector<double> kept;
  const SpdMatrix sig = scalar(sigma2);
  for (int t = 0; t < 5000; ++t) nu = mh_step_nu(1, 20, L, sig, nu, h, 0.6, rng).nu;
  for (int t = 0; t < 300000; ++t) {
    nu = mh_step_nu(1, 20, L, sig, nu, h, 0.6, rng).nu;
    if (t % 3 == 0) kept.push_back(nu);
  }
  CHECK(test::ks_statistic(kept, cdf) < 0.02);
}

TEST_CASE("mh_step_beta basics") {
  RngState rng(10);
  Matrix x(4, 2);
  x << 1, 0.1, 1, -0.5, 1, 1.2, 1, 0.3;
  const std::vector<int> labels{0, 1, 0, 2};
  Matrix beta(2, 2);
  beta << 0.2, -0.1, 0.4, 0.3;
  Hyperparams h = Hyperparams::defaults(2, 3);
  const BetaStep s = mh_step_beta(x, labels, beta, h, Vector::Zero(2), false, rng);
  CHECK(s.accepted == std::vector<bool>{true, true});
  CHECK(s.beta == beta);
  const BetaStep j = mh_step_beta(x, labels, beta, h, Vector::Zero(1), true, rng);
  CHECK(j.accepted.size() == 1);
  CHECK(j.accepted[0]);
  CHECK_THROWS_AS(mh_step_beta(x, {0, 1}, beta, h, Vector::Zero(2), false, rng), Error);

  // Flat prior, labels all in class 1: moves that raise beta_1 (the class-1
  // logit) are always accepted, moves that lower it are sometimes rejected.
  h.sigma_beta2 = 1e12;
  Matrix x1 = Matrix::Ones(30, 1);
  const std::vector<int> all0(30, 0);
  int up_acc = 0, up = 0, down_acc = 0, down = 0;
  for (int t = 0; t < 20000; ++t) {
    const Matrix b0 = Matrix::Zero(1, 1);
    const BetaStep r = mh_step_beta(x1, all0, b0, h, Vector::Constant(1, 0.3), false, rng);
    const double proposed_dir = r.accepted[0] ? r.beta(0, 0) : (r.accept_prob[0] < 1.0 ? -1.0 : 1.0);
    if (proposed_dir > 0) {
      ++up;
      up_acc += r.accepted[0];
    } else {
      ++down;
      down_acc += r.accepted[0];
    }
  }
  CHECK(static_cast<double>(up_acc) / up >= static_cast<double>(down_acc) / down);
  CHECK(up_acc == up);
}

TEST_CASE("mh_step_beta targets the 1-D grid posterior (K = 2, q = 1, n = 200)") {
  RngState data_rng(11);
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) labels.push_back(draw_uniform(data_rng) < 0.7 ? 0 : 1);
  int n0 = 0;
  for (int z : labels) n0 += z == 0;
  Hyperparams h = Hyperparams::defaults(1, 2);
  h.sigma_beta2 = 4.0;
  // pi_1 = 1 / (1 + e^{-b}); target = n0 log pi_1 + n1 log(1 - pi_1) - b^2 / (2 sigma^2).
  auto log_target = [&](double b) {
    const double l1 = -std::log1p(std::exp(-b)), l2 = -std::log1p(std::exp(b));
    return n0 * l1 + (200 - n0) * l2 - b * b / (2.0 * h.sigma_beta2);
  };
  const test::GridCdf cdf(log_target, -3.0, 5.0, 400001);
  const Matrix x = Matrix::Ones(200, 1);
  RngState rng(12);
  Matrix beta = Matrix::Zero(1, 1);
  std::vector<double> kept;
  for (int t = 0; t < 2000; ++t) beta = mh_step_beta(x, labels, beta, h, Vector::Constant(1, 0.4), false, rng).beta;
  for (int t = 0; t < 200000; ++t) {
    beta = mh_step_beta(x, labels, beta, h, Vector::Constant(1, 0.4), false, rng).beta;
    if (t % 2 == 0) kept.push_back(beta(0, 0));
  }
  CHECK(test::ks_statistic(kept, cdf) < 0.03);
}

TEST_CASE("run_mixture_sampler: invariants, storage and determinism") {
  RngState data_rng(13);
  const Dataset data = separated_dataset(data_rng, 120);
  const Hyperparams h = Hyperparams::defaults(2, 2);
  SamplerConfig c = short_config(600, 200);
  c.thin = 2;
  c.label_thin_factor = 5;
  RngState r1(99), r2(99);
  const Chain a = run_mixture_sampler(data, h, 2, c, r1);
  const Chain b = run_mixture_sampler(data, h, 2, c, r2);
  CHECK(a.draws.size() == 200);
  CHECK(a.labels.size() == 40);
  CHECK(a.label_draw_index.front() == 4);
  CHECK(a.loglik_trace.size() == 600);
  CHECK(a.loglik_trace == b.loglik_trace);
  CHECK(a.draws_matrix() == b.draws_matrix());
  CHECK(a.loglik_trace.allFinite());
  for (const Draw& d : a.draws) {
    CHECK(std::abs(d.pi.sum() - 1.0) < 1e-12);
    CHECK((d.pi.array() >= 0.0).all());
    CHECK((d.nu.array() > 1.0).all());
    for (const Matrix& s : d.sigma) CHECK(Eigen::LLT<Matrix>(s).info() == Eigen::Success);
  }
  for (int k = 0; k < 2; ++k) {
    CHECK(a.acceptance_rate_nu(k) >= 0.0);
    CHECK(a.acceptance_rate_nu(k) <= 1.0);
    CHECK(a.attempts_nu[static_cast<std::size_t>(k)] == 400);
  }
  CHECK(a.parameter_names().size() == static_cast<std::size_t>(a.draws_matrix().cols()));
  CHECK(a.parameter_names()[4] == "sigma_1_1_1");

  SamplerConfig longer = c;
  longer.iterations = 900;
  RngState r3(99);
  const Chain l = run_mixture_sampler(data, h, 2, longer, r3);
  CHECK(l.scale_nu == a.scale_nu);

  SamplerConfig bad = c;
  bad.fixed_nu = Vector::Constant(2, 0.5);
  CHECK_THROWS_AS(run_mixture_sampler(data, h, 2, bad, r3), Error);
  CHECK_THROWS_AS(run_mixture_sampler(data, h, 500, c, r3), Error);
}

TEST_CASE("run_mixture_sampler recovers well-separated components") {
  RngState data_rng(14);
  std::vector<int> truth;
  const Dataset data = separated_dataset(data_rng, 300, &truth);
  const Hyperparams h = Hyperparams::defaults(2, 2);
  RngState rng(15);
  const Chain chain = relabel_chain(run_mixture_sampler(data, h, 2, short_config(3000, 1000), rng));
  const auto summary = summarize_chain(chain);
  const auto& point = std::get<MixtureParams>(summary.point);
  const int small = point.sigma[0].matrix().trace() < point.sigma[1].matrix().trace() ? 0 : 1;
  CHECK(point.pi(small) == Approx(0.5).epsilon(0.1));
  CHECK(std::abs(point.nu(small) - 8.0) < 2.5);
  CHECK(std::abs(point.nu(1 - small) - 12.0) < 3.5);
  CHECK(std::abs(point.sigma[static_cast<std::size_t>(small)](0, 0) - 0.5) < 0.1);
  for (double r : summary.accept_nu) {
    CHECK(r > 0.15);
    CHECK(r < 0.5);
  }
}

TEST_CASE("K = 1 with fixed nu: posterior mean of Sigma matches the conjugate closed form") {
  RngState data_rng(16);
  std::vector<SpdMatrix> mats;
  Matrix s(2, 2);
  s << 1.0, 0.3, 0.3, 0.8;
  for (int i = 0; i < 40; ++i) mats.push_back(draw_wishart(data_rng, 6.0, SpdMatrix(s)));
  const Dataset data(mats);
  const Hyperparams h = Hyperparams::defaults(2, 1);
  SamplerConfig c = short_config(20000, 100);
  c.fixed_nu = Vector::Constant(1, 6.0);
  RngState rng(17);
  const Chain chain = run_mixture_sampler(data, h, 1, c, rng);
  Matrix total = Matrix::Identity(2, 2);
  for (const auto& m : mats) total += m.matrix();
  const Matrix expect = total / (h.nu0 + 40 * 6.0 - 2 - 1);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      std::vector<double> x;
      for (const Draw& d : chain.draws) x.push_back(d.sigma[0](i, j));
      CHECK(std::abs(mean_of(x) - expect(i, j)) < 3 * batch_se(x));
    }
  for (const Draw& d : chain.draws) CHECK(d.nu(0) == 6.0);
}

TEST_CASE("explicit and collapsed label schemes agree on a tiny fixed-parameter instance") {
  // Both schemes target the same posterior; compare the weight of the small-scale component.
  RngState data_rng(18);
  const Dataset data = separated_dataset(data_rng, 40);
  const Hyperparams h = Hyperparams::defaults(2, 2);
  SamplerConfig c = short_config(12000, 2000);
  RngState r1(19), r2(20);
  const Chain col = relabel_chain(run_mixture_sampler(data, h, 2, c, r1));
  c.collapsed_labels = false;
  const Chain exp = relabel_chain(run_mixture_sampler(data, h, 2, c, r2));
  auto small_pi = [](const Chain& ch) {
    std::vector<double> v;
    const int small = ch.draws[0].sigma[0].trace() < ch.draws[0].sigma[1].trace() ? 0 : 1;
    for (const Draw& d : ch.draws) v.push_back(d.pi(small));
    return v;
  };
  const auto a = small_pi(col), b = small_pi(exp);
  CHECK(std::abs(mean_of(a) - mean_of(b)) < 3 * std::hypot(batch_se(a), batch_se(b)));
}

TEST_CASE("run_moe_sampler: determinism, invariants and errors") {
  RngState data_rng(21);
  const Dataset base = separated_dataset(data_rng, 100);
  Matrix x(100, 2);
  for (int i = 0; i < 100; ++i) x.row(i) << 1.0, draw_normal(data_rng);
  const Dataset data(base.matrices(), x);
  const Hyperparams h = Hyperparams::defaults(2, 2);
  const SamplerConfig c = short_config(500, 200);
  RngState r1(22), r2(22);
  const Chain a = run_moe_sampler(data, h, 2, c, r1);
  const Chain b = run_moe_sampler(data, h, 2, c, r2);
  CHECK(a.draws_matrix() == b.draws_matrix());
  CHECK(a.family == Family::Moe);
  CHECK(a.q == 2);
  CHECK(a.draws.front().beta.rows() == 2);
  CHECK(a.draws.front().beta.cols() == 1);
  CHECK(a.parameter_names().front() == "beta_1_1");
  CHECK(a.attempts_beta.size() == 1);
  CHECK(a.loglik_trace.allFinite());
  for (const Draw& d : a.draws) CHECK((d.nu.array() > 1.0).all());

  SamplerConfig joint = c;
  joint.joint_beta = true;
  RngState r3(23);
  CHECK(run_moe_sampler(data, Hyperparams::defaults(2, 3), 3, joint, r3).attempts_beta.size() == 1);

  try {
    run_moe_sampler(base, h, 2, c, r3);
    FAIL("expected MissingCovariates");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingCovariates);
  }
}

TEST_CASE("ess") {
  RngState rng(24);
  Vector iid(10000);
  for (Eigen::Index i = 0; i < iid.size(); ++i) iid(i) = draw_normal(rng);
  const double e = ess(iid);
  CHECK(e >= 8000.0);
  CHECK(e <= 10000.0);

  const double rho = 0.9;
  Vector ar(100000);
  ar(0) = draw_normal(rng) / std::sqrt(1 - rho * rho);
  for (Eigen::Index i = 1; i < ar.size(); ++i) ar(i) = rho * ar(i - 1) + draw_normal(rng);
  const double closed = 100000.0 * (1 - rho) / (1 + rho);
  CHECK(std::abs(ess(ar) - closed) < 0.25 * closed);

  CHECK(ess(Vector::Constant(50, 3.0)) == 1.0);
  CHECK_THROWS_AS(ess(Vector::Zero(9)), Error);
}

TEST_CASE("relabel_chain restores a manual swap and is a no-op for K = 1") {
  Chain chain;
  chain.family = Family::Mixture;
  chain.K = 2;
  chain.p = 1;
  for (int t = 0; t < 6; ++t) {
    Draw d;
    d.pi = Eigen::Vector2d(0.3, 0.7);
    d.nu = Eigen::Vector2d(4.0, 9.0);
    d.sigma = {Matrix::Constant(1, 1, 0.5 + 0.01 * t), Matrix::Constant(1, 1, 3.0)};
    if (t == 3) {
      std::swap(d.pi(0), d.pi(1));
      std::swap(d.nu(0), d.nu(1));
      std::swap(d.sigma[0], d.sigma[1]);
    }
    chain.draws.push_back(d);
  }
  chain.labels = {{0, 1, 1}, {1, 0, 0}};
  chain.label_draw_index = {0, 3};
  const Chain out = relabel_chain(chain);
  for (const Draw& d : out.draws) {
    CHECK(d.pi(0) == 0.3);
    CHECK(d.nu(1) == 9.0);
    CHECK(d.sigma[1](0, 0) == 3.0);
  }
  CHECK(out.labels[1] == std::vector<int>{0, 1, 1});

  Chain moe;
  moe.family = Family::Moe;
  moe.K = 3;
  moe.p = 1;
  moe.q = 1;
  Draw d0;
  d0.nu = Eigen::Vector3d(4, 5, 6);
  d0.sigma = {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 5.0), Matrix::Constant(1, 1, 10.0)};
  d0.beta = Matrix(1, 2);
  d0.beta << 1.0, 2.0;
  Draw d1 = d0;  // components 2 and 3 swapped: the baseline moves
  d1.sigma = {d0.sigma[0], d0.sigma[2], d0.sigma[1]};
  d1.nu = Eigen::Vector3d(4, 6, 5);
  d1.beta << 1.0 - 2.0, 0.0 - 2.0;
  moe.draws = {d0, d1};
  const Chain mo = relabel_chain(moe);
  CHECK(mo.draws[1].beta(0, 0) == Approx(1.0));
  CHECK(mo.draws[1].beta(0, 1) == Approx(2.0));
  CHECK(mo.draws[1].nu(2) == 6.0);

  Chain single = chain;
  single.K = 1;
  for (Draw& d : single.draws) {
    d.pi = Vector::Ones(1);
    d.nu = Vector::Constant(1, 4.0);
    d.sigma.resize(1);
  }
  single.labels.clear();
  single.label_draw_index.clear();
  CHECK(relabel_chain(single).draws_matrix() == single.draws_matrix());
}

TEST_CASE("summarize_chain intervals bracket the means") {
  RngState data_rng(25);
  const Dataset data = separated_dataset(data_rng, 60);
  RngState rng(26);
  const Chain chain = relabel_chain(run_mixture_sampler(data, Hyperparams::defaults(2, 2), 2, short_config(800, 300), rng));
  const auto s = summarize_chain(chain);
  CHECK(s.parameters.size() == chain.parameter_names().size());
  for (const auto& p : s.parameters) {
    CHECK(p.lower <= p.mean);
    CHECK(p.mean <= p.upper);
    CHECK(p.ess >= 1.0);
    CHECK(p.ess <= 500.0);
  }
  CHECK_NOTHROW(std::get<MixtureParams>(s.point).validate(2));
}
