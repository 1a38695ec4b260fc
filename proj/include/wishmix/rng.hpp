#pragma once

#include "wishmix/numcore.hpp"

#include <cstdint>
#include <span>

namespace wishmix {

/// Counter-based 64-bit generator: draw t of stream s under seed x is a pure
/// hash of (x, s, t). Child streams derived with derive() are independent
/// without any shared state, which is how parallel chains, restarts and
/// replicates get their randomness.
///
/// Satisfies UniformRandomBitGenerator.
class RngState {
 public:
  using result_type = std::uint64_t;

  explicit RngState(std::uint64_t seed = 0, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

  /// Independent stream keyed by (this stream, id). Does not advance *this.
  RngState derive(std::uint64_t id) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Uniform on the open interval (0, 1) with 53 random bits.
double draw_uniform(RngState& rng);
double draw_normal(RngState& rng, double mean = 0.0, double sd = 1.0);
/// Gamma with the given shape and rate (mean shape/rate).
double draw_gamma(RngState& rng, double shape, double rate);
double draw_chi_square(RngState& rng, double df);

/// W ~ W_p(nu, scale), E[W] = nu * scale, by the Bartlett construction.
SpdMatrix draw_wishart(RngState& rng, double nu, const SpdMatrix& scale);

/// Sigma = W^{-1} with W ~ W_p(df, scale_param^{-1}); E[Sigma] = scale_param / (df - p - 1).
/// This is the parametrization under which the conjugate update reads
/// IW(nu0 + n nu, Psi + sum S_i).
SpdMatrix draw_inverse_wishart(RngState& rng, double df, const SpdMatrix& scale_param);

Vector draw_dirichlet(RngState& rng, const Vector& alpha);

/// Index k with probability proportional to exp(logw[k]).
int draw_categorical_from_logweights(RngState& rng, std::span<const double> logw);

}  // namespace wishmix
