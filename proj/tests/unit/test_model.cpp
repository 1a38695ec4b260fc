#include <doctest.h>

#include "test_support.hpp"
#include "wishmix/cluster_util.hpp"
#include "wishmix/error.hpp"
#include "wishmix/kernels.hpp"
#include "wishmix/model.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace wishmix;
using doctest::Approx;

namespace {

SpdMatrix scalar(double v) { return SpdMatrix(Matrix::Constant(1, 1, v)); }

// Wishart log-density written out independently in long double with an
// explicit determinant and inverse (p <= 3 only).
long double oracle_log_wishart(const Matrix& s, double nu, const Matrix& sigma) {
  const int p = static_cast<int>(s.rows());
  const long double det_s = s.determinant();
  const long double det_sig = sigma.determinant();
  const Matrix sig_inv = sigma.inverse();
  long double tr = 0.0L;
  for (int j = 0; j < p; ++j)
    for (int k = 0; k < p; ++k) tr += static_cast<long double>(sig_inv(j, k)) * s(k, j);
  long double lmg = p * (p - 1) / 4.0L * std::log(std::numbers::pi_v<long double>);
  for (int j = 1; j <= p; ++j) lmg += std::lgamma(static_cast<long double>(nu) / 2 + (1 - j) / 2.0L);
  return (nu - p - 1) / 2.0L * std::log(det_s) - tr / 2 - nu * p / 2.0L * std::log(2.0L) -
         nu / 2.0L * std::log(det_sig) - lmg;
}

Dataset small_dataset(RngState& rng, int n, int p) {
  std::vector<SpdMatrix> mats;
  for (int i = 0; i < n; ++i) mats.emplace_back(test::random_spd(rng, p));
  return Dataset(std::move(mats));
}

MixtureParams random_mixture(RngState& rng, int K, int p) {
  MixtureParams m;
  m.pi = draw_dirichlet(rng, Vector::Constant(K, 2.0));
  m.nu.resize(K);
  for (int k = 0; k < K; ++k) {
    m.nu(k) = p + 1.0 + 6.0 * draw_uniform(rng);
    m.sigma.emplace_back(test::random_spd(rng, p) / (p + 3.0));
  }
  return m;
}

}  // namespace

TEST_CASE("log_wishart_density p = 1 reduces to a gamma density") {
  // scipy.stats.gamma.logpdf, tests/oracles/special_values.py
  CHECK(log_wishart_density(scalar(2.0), 4.0, scalar(1.0)) == Approx(-1.6931471805599454).epsilon(1e-13));
  CHECK(log_wishart_density(scalar(0.7), 7.0, scalar(2.5)) == Approx(-7.865693655713257).epsilon(1e-13));
  CHECK_THROWS_AS(log_wishart_density(scalar(1.0), 0.0, scalar(1.0)), Error);
  CHECK_THROWS_AS(log_wishart_density(SpdMatrix::identity(3), 2.0, SpdMatrix::identity(3)), Error);
}

TEST_CASE("log_wishart_density integrates to one for p = 1") {
  const double nu = 5.0;
  const SpdMatrix sig = scalar(1.0);
  // Substitution s = exp(t) removes the integrable singularity at 0 and the long tail.
  const double lo = std::log(1e-12), hi = std::log(200.0);
  const int nodes = 400001;
  const double h = (hi - lo) / (nodes - 1);
  double total = 0.0;
  for (int j = 0; j < nodes; ++j) {
    const double t = lo + j * h;
    const double w = (j == 0 || j == nodes - 1) ? 0.5 : 1.0;
    total += w * std::exp(log_wishart_density(scalar(std::exp(t)), nu, sig) + t);
  }
  CHECK(std::abs(total * h - 1.0) < 1e-6);
}

TEST_CASE("log_wishart_density agrees with a direct long-double oracle") {
  RngState rng(17);
  for (int p : {1, 2, 3}) {
    for (int rep = 0; rep < 30; ++rep) {
      const Matrix s = test::random_spd(rng, p);
      const Matrix sig = test::random_spd(rng, p);
      const double nu = p - 1 + 0.2 + 15.0 * draw_uniform(rng);
      const double got = log_wishart_density(SpdMatrix(s), nu, SpdMatrix(sig));
      CHECK(got == Approx(static_cast<double>(oracle_log_wishart(s, nu, sig))).epsilon(1e-11));
    }
  }
}

TEST_CASE("log_wishart_density scale change of variables") {
  // S -> cS, Sigma -> c Sigma shifts the log-density by -p(p+1)/2 log c.
  RngState rng(3);
  for (int p : {1, 2, 4}) {
    const Matrix s = test::random_spd(rng, p);
    const Matrix sig = test::random_spd(rng, p);
    const double nu = p + 3.5, c = 2.7;
    const double base = log_wishart_density(SpdMatrix(s), nu, SpdMatrix(sig));
    const double scaled = log_wishart_density(SpdMatrix(c * s), nu, SpdMatrix(c * sig));
    CHECK(scaled - base == Approx(-0.5 * p * (p + 1) * std::log(c)).epsilon(1e-11));
  }
}

TEST_CASE("log_wishart_density stays finite near the boundary and for ill-conditioned inputs") {
  RngState rng(4);
  for (int p : {1, 2, 5, 8}) {
    for (int rep = 0; rep < 20; ++rep) {
      Eigen::HouseholderQR<Matrix> qr(Matrix::NullaryExpr(p, p, [&]() { return draw_normal(rng); }));
      const Matrix q = qr.householderQ();
      Vector ev(p);
      for (int j = 0; j < p; ++j) ev(j) = std::pow(10.0, 8.0 * j / std::max(1, p - 1) - 4.0);
      const Matrix sig = q * ev.asDiagonal() * q.transpose();
      const Matrix s = test::random_spd(rng, p);
      const double nu = p - 1 + 1e-6 + (rep % 2 == 0 ? 0.0 : 10.0 * draw_uniform(rng));
      CHECK(std::isfinite(log_wishart_density(SpdMatrix(s), nu, SpdMatrix(0.5 * (sig + sig.transpose())))));
    }
  }
}

TEST_CASE("gating_probs") {
  Matrix beta = Matrix::Zero(2, 3);
  Vector x(2);
  x << 1.0, -0.4;
  Vector pr = gating_probs(x, beta);
  for (int k = 0; k < 4; ++k) CHECK(pr(k) == Approx(0.25));

  Matrix b1(1, 1);
  b1 << std::log(3.0);
  Vector x1 = Vector::Ones(1);
  Vector p1 = gating_probs(x1, b1);
  CHECK(p1(0) == Approx(0.75).epsilon(1e-14));
  CHECK(p1(1) == Approx(0.25).epsilon(1e-14));

  // A common shift of every linear predictor (including the zero baseline)
  // is the same as subtracting a constant from the K-1 free columns relative
  // to an implicit shift of the baseline; compare against the explicit softmax.
  RngState rng(6);
  Matrix b(3, 2);
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 2; ++k) b(j, k) = draw_normal(rng);
  Vector xr(3);
  xr << 1.0, draw_normal(rng), draw_normal(rng);
  const double c = 123.4;
  Vector eta(3);
  eta << xr.dot(b.col(0)) + c, xr.dot(b.col(1)) + c, c;
  Vector manual = (eta.array() - eta.maxCoeff()).exp();
  manual /= manual.sum();
  Vector got = gating_probs(xr, b);
  for (int k = 0; k < 3; ++k) CHECK(got(k) == Approx(manual(k)).epsilon(1e-13));
  CHECK(std::abs(got.sum() - 1.0) < 1e-12);

  Matrix xs(2, 3);
  xs.row(0) = xr.transpose();
  xs.row(1) << 1.0, 50.0, -80.0;
  Matrix lg = gating_log_probs(xs, b);
  for (int k = 0; k < 3; ++k) CHECK(lg(0, k) == Approx(std::log(got(k))).epsilon(1e-12));
  CHECK(std::abs(lg.row(1).array().exp().sum() - 1.0) < 1e-12);
}

TEST_CASE("loglik_mixture special cases") {
  RngState rng(21);
  const Dataset data = small_dataset(rng, 12, 2);
  MixtureParams one;
  one.pi = Vector::Ones(1);
  one.nu = Vector::Constant(1, 5.0);
  one.sigma = {SpdMatrix(test::random_spd(rng, 2) / 4.0)};
  double direct = 0.0;
  for (int i = 0; i < data.n(); ++i) direct += log_wishart_density(data.matrix(i), 5.0, one.sigma[0]);
  CHECK(loglik_mixture(data, one) == Approx(direct).epsilon(1e-13));

  MixtureParams two;
  two.pi = Vector(2);
  two.pi << 0.3, 0.7;
  two.nu = Vector::Constant(2, 5.0);
  two.sigma = {one.sigma[0], one.sigma[0]};
  CHECK(loglik_mixture(data, two) == Approx(direct).epsilon(1e-13));
}

TEST_CASE("loglik_mixture and loglik_moe match brute-force summation") {
  RngState rng(22);
  const int n = 3, p = 2, K = 2;
  std::vector<Matrix> raw;
  for (int i = 0; i < n; ++i) raw.push_back(test::random_spd(rng, p));
  Matrix x(n, 2);
  x << 1.0, 0.3, 1.0, -1.2, 1.0, 2.0;
  const Dataset data = Dataset::from_raw(raw, x);

  const MixtureParams mix = random_mixture(rng, K, p);
  long double expect = 0.0L;
  for (int i = 0; i < n; ++i) {
    long double s = 0.0L;
    for (int k = 0; k < K; ++k)
      s += mix.pi(k) * std::exp(oracle_log_wishart(raw[static_cast<std::size_t>(i)], mix.nu(k), mix.sigma[static_cast<std::size_t>(k)].matrix()));
    expect += std::log(s);
  }
  CHECK(loglik_mixture(data, mix) == Approx(static_cast<double>(expect)).epsilon(1e-11));

  MoeParams moe;
  moe.beta = Matrix(2, 1);
  moe.beta << 0.4, -0.9;
  moe.nu = mix.nu;
  moe.sigma = mix.sigma;
  expect = 0.0L;
  for (int i = 0; i < n; ++i) {
    const long double eta = 0.4L * x(i, 0) - 0.9L * x(i, 1);
    const long double p1 = std::exp(eta) / (1.0L + std::exp(eta));
    const long double w[2] = {p1, 1.0L - p1};
    long double s = 0.0L;
    for (int k = 0; k < K; ++k)
      s += w[k] * std::exp(oracle_log_wishart(raw[static_cast<std::size_t>(i)], moe.nu(k), moe.sigma[static_cast<std::size_t>(k)].matrix()));
    expect += std::log(s);
  }
  CHECK(loglik_moe(data, moe) == Approx(static_cast<double>(expect)).epsilon(1e-11));
}

TEST_CASE("loglik_moe reductions") {
  RngState rng(23);
  const Dataset base = small_dataset(rng, 20, 3);
  const Dataset data = base.with_intercept_only();
  const MixtureParams mix = random_mixture(rng, 3, 3);

  MoeParams zero;
  zero.beta = Matrix::Zero(1, 2);
  zero.nu = mix.nu;
  zero.sigma = mix.sigma;
  MixtureParams uniform = mix;
  uniform.pi = Vector::Constant(3, 1.0 / 3.0);
  CHECK(loglik_moe(data, zero) == Approx(loglik_mixture(base, uniform)).epsilon(1e-12));

  // Intercept-only beta_k = log(pi_k / pi_K) reproduces the mixture weights.
  MoeParams matched = zero;
  for (int k = 0; k < 2; ++k) matched.beta(0, k) = std::log(mix.pi(k) / mix.pi(2));
  CHECK(std::abs(loglik_moe(data, matched) - loglik_mixture(base, mix)) < 1e-10);

  MoeParams one;
  one.beta = Matrix::Zero(1, 0);
  one.nu = mix.nu.head(1);
  one.sigma = {mix.sigma[0]};
  double direct = 0.0;
  for (int i = 0; i < data.n(); ++i) direct += log_wishart_density(data.matrix(i), mix.nu(0), mix.sigma[0]);
  CHECK(loglik_moe(data, one) == Approx(direct).epsilon(1e-13));

  try {
    loglik_moe(base, zero);
    FAIL("expected MissingCovariates");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingCovariates);
  }
}

TEST_CASE("loglik_mixture is invariant to joint label permutation") {
  RngState rng(24);
  const Dataset data = small_dataset(rng, 30, 2);
  for (int rep = 0; rep < 20; ++rep) {
    const MixtureParams m = random_mixture(rng, 4, 2);
    MixtureParams perm = m;
    const int order[4] = {2, 0, 3, 1};
    for (int k = 0; k < 4; ++k) {
      perm.pi(k) = m.pi(order[k]);
      perm.nu(k) = m.nu(order[k]);
      perm.sigma[static_cast<std::size_t>(k)] = m.sigma[static_cast<std::size_t>(order[k])];
    }
    // Re-normalizing the permuted weights can move the sum by an ulp.
    perm.pi /= perm.pi.sum();
    const double a = loglik_mixture(data, m), b = loglik_mixture(data, perm);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("serial and parallel log-weight kernels are bit-identical") {
  RngState rng(25);
  const Dataset data = small_dataset(rng, 700, 3);
  const MixtureParams m = random_mixture(rng, 3, 3);
  std::vector<kernels::ComponentTerms> comps;
  for (int k = 0; k < 3; ++k) comps.push_back(kernels::component_terms(m.nu(k), m.sigma[static_cast<std::size_t>(k)]));
  const Matrix prior = m.pi.array().log().matrix().transpose();
  const Matrix a = kernels::serial::log_weight_matrix(data.vec_stack(), data.logdets(), comps, prior);
  const Matrix b = kernels::parallel::log_weight_matrix(data.vec_stack(), data.logdets(), comps, prior);
  CHECK(a == b);
  CHECK(kernels::serial::row_log_sum_exp(a) == kernels::parallel::row_log_sum_exp(b));
  for (int i = 0; i < 5; ++i) {
    CHECK(a(i, 1) == Approx(std::log(m.pi(1)) + log_wishart_density(data.matrix(i), m.nu(1), m.sigma[1])).epsilon(1e-12));
  }
}

TEST_CASE("model_dimension") {
  CHECK(model_dimension(3, 2, 3, Family::Moe) == 18);
  CHECK(model_dimension(1, 1, 5, Family::Moe) == 2);
  CHECK(model_dimension(3, 2, 0, Family::Mixture) == 14);
}

TEST_CASE("Dataset validation") {
  std::vector<Matrix> raw = {Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2)};
  const Dataset d = Dataset::from_raw(raw);
  CHECK(d.n() == 2);
  CHECK(d.p() == 2);
  CHECK(d.q() == 0);
  CHECK(d.logdets()(1) == Approx(2.0 * std::log(2.0)));

  std::vector<Matrix> singular = raw;
  singular[1] = Matrix::Zero(2, 2);
  try {
    Dataset::from_raw(singular);
    FAIL("expected DegenerateData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateData);
    CHECK(std::string(e.what()).find("matrices[1]") != std::string::npos);
  }

  Matrix no_intercept(2, 1);
  no_intercept << 0.5, 1.0;
  CHECK_THROWS_AS(Dataset::from_raw(raw, no_intercept), Error);
  Matrix dup(2, 2);
  dup << 1.0, 1.0, 1.0, 1.0;
  try {
    Dataset::from_raw(raw, dup);
    FAIL("expected RankDeficientDesign");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::RankDeficientDesign);
  }
  CHECK(d.with_intercept_only().covariate_names() == std::vector<std::string>{"intercept"});
}

TEST_CASE("Hyperparams defaults are valid") {
  for (int p : {1, 2, 8}) {
    const auto h = Hyperparams::defaults(p, 3);
    CHECK_NOTHROW(h.validate(p, 3));
    CHECK(h.a_nu / h.b_nu > p - 1);
  }
}

TEST_CASE("k-means labels and assignment") {
  RngState rng(26);
  RowMatrix pts(60, 2);
  for (int i = 0; i < 60; ++i) {
    const double cx = (i % 3) * 10.0;
    pts(i, 0) = cx + 0.1 * draw_normal(rng);
    pts(i, 1) = 0.1 * draw_normal(rng);
  }
  const auto labels = kmeans_labels(pts, 3, rng);
  for (int i = 3; i < 60; ++i) CHECK(labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i % 3)]);
  CHECK(labels[0] != labels[1]);
  CHECK(labels[1] != labels[2]);
  CHECK(labels[0] != labels[2]);

  Matrix cost(3, 3);
  cost << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  const auto perm = min_cost_assignment(cost);
  double total = 0.0;
  for (int r = 0; r < 3; ++r) total += cost(r, perm[static_cast<std::size_t>(r)]);
  CHECK(total == 5.0);
}
