#include "wishmix/rng.hpp"

#include "wishmix/error.hpp"

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace wishmix {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngState::RngState(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(mix64(seed + kGolden) ^ (stream * kGolden + 1))) {}

RngState::result_type RngState::operator()() {
  const std::uint64_t c = counter_++;
  return mix64(mix64(c * kGolden + key_) ^ key_);
}

RngState RngState::derive(std::uint64_t id) const {
  return RngState(seed_, mix64(stream_ * 0x632be59bd9b4e019ULL + id + 1));
}

double draw_uniform(RngState& rng) {
  // (k + 0.5) / 2^53 lies strictly inside (0, 1).
  const std::uint64_t k = rng() >> 11;
  return (static_cast<double>(k) + 0.5) * 0x1.0p-53;
}

double draw_normal(RngState& rng, double mean, double sd) {
  if (!(sd >= 0.0)) fail(ErrorKind::DomainError, "draw_normal: sd must be nonnegative");
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return mean + sd * dist(rng);
}

double draw_gamma(RngState& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    fail(ErrorKind::DomainError, "draw_gamma: shape and rate must be positive");
  }
  boost::random::gamma_distribution<double> dist(shape, 1.0);
  return dist(rng) / rate;
}

double draw_chi_square(RngState& rng, double df) {
  if (!(df > 0.0)) fail(ErrorKind::DomainError, "draw_chi_square: df must be positive");
  return draw_gamma(rng, 0.5 * df, 0.5);
}

namespace {

// Lower-triangular Bartlett factor A with A A^T ~ W_p(nu, I).
Matrix bartlett_factor(RngState& rng, double nu, int p) {
  Matrix a = Matrix::Zero(p, p);
  for (int j = 0; j < p; ++j) {
    a(j, j) = std::sqrt(draw_chi_square(rng, nu - j));
    for (int i = j + 1; i < p; ++i) a(i, j) = draw_normal(rng);
  }
  return a;
}

void check_df(double df, int p, const char* who) {
  if (!(df > p - 1)) {
    fail(ErrorKind::DomainError, std::string(who) + ": degrees of freedom must exceed p-1, got " +
                                     std::to_string(df) + " with p=" + std::to_string(p));
  }
}

}  // namespace

SpdMatrix draw_wishart(RngState& rng, double nu, const SpdMatrix& scale) {
  const int p = scale.dim();
  check_df(nu, p, "draw_wishart");
  const Matrix a = bartlett_factor(rng, nu, p);
  const Matrix la = scale.chol() * a.triangularView<Eigen::Lower>();
  return SpdMatrix(la * la.transpose());
}

SpdMatrix draw_inverse_wishart(RngState& rng, double df, const SpdMatrix& scale_param) {
  const int p = scale_param.dim();
  check_df(df, p, "draw_inverse_wishart");
  // With Psi = U U^T, C = U^{-T} factors Psi^{-1}; W = C A A^T C^T and
  // W^{-1} = (U A^{-T})(U A^{-T})^T.
  const Matrix a = bartlett_factor(rng, df, p);
  const Matrix a_inv_t =
      a.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
  const Matrix t = scale_param.chol() * a_inv_t;
  return SpdMatrix(t * t.transpose());
}

Vector draw_dirichlet(RngState& rng, const Vector& alpha) {
  if (alpha.size() == 0) fail(ErrorKind::DomainError, "draw_dirichlet: empty alpha");
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    if (!(alpha(k) > 0.0) || !std::isfinite(alpha(k))) {
      fail(ErrorKind::DomainError, "draw_dirichlet: all alpha must be positive and finite");
    }
  }
  if (alpha.size() == 1) return Vector::Ones(1);
  Vector g(alpha.size());
  for (Eigen::Index k = 0; k < alpha.size(); ++k) g(k) = draw_gamma(rng, alpha(k), 1.0);
  const double total = g.sum();
  if (!(total > 0.0)) {
    // Every gamma underflowed (all shapes tiny); fall back to the largest shape.
    Eigen::Index best = 0;
    alpha.maxCoeff(&best);
    Vector out = Vector::Zero(alpha.size());
    out(best) = 1.0;
    return out;
  }
  return g / total;
}

int draw_categorical_from_logweights(RngState& rng, std::span<const double> logw) {
  if (logw.empty()) fail(ErrorKind::DomainError, "draw_categorical: empty weight vector");
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logw) {
    if (std::isnan(v)) fail(ErrorKind::DomainError, "draw_categorical: NaN log-weight");
    mx = std::max(mx, v);
  }
  if (mx == -std::numeric_limits<double>::infinity()) {
    fail(ErrorKind::AllMinusInfinity, "draw_categorical: every log-weight is -inf");
  }
  if (mx == std::numeric_limits<double>::infinity()) {
    fail(ErrorKind::DomainError, "draw_categorical: +inf log-weight");
  }
  double total = 0.0;
  for (double v : logw) total += std::exp(v - mx);
  const double u = draw_uniform(rng) * total;
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t k = 0; k < logw.size(); ++k) {
    const double w = std::exp(logw[k] - mx);
    if (w > 0.0) last_positive = static_cast<int>(k);
    acc += w;
    if (u < acc) return static_cast<int>(k);
  }
  return last_positive;
}

}  // namespace wishmix
