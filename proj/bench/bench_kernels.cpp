// Serial reference kernels against their OpenMP counterparts.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include "wishmix/kernels.hpp"
#include "wishmix/rng.hpp"
#include "wishmix/simdata.hpp"

#include <benchmark/benchmark.h>

using namespace wishmix;

namespace {

struct Fixture {
  Dataset data;
  std::vector<kernels::ComponentTerms> comps;
  Matrix log_prior;

  Fixture(int n, const char* design) {
    RngState rng(1);
    const SimDesign d = SimDesign::builtin(design, n);
    data = generate(d, rng).data;
    for (int k = 0; k < d.K; ++k)
      comps.push_back(kernels::component_terms(nu_of(d.truth)(k), sigma_of(d.truth)[static_cast<std::size_t>(k)]));
    log_prior = Matrix::Constant(1, d.K, -std::log(static_cast<double>(d.K)));
  }
};

const Fixture& fixture(int n, bool p8) {
  static const Fixture f2_small(1000, "mix-p2"), f2_large(100000, "mix-p2");
  static const Fixture f8_small(1000, "mix-p8"), f8_large(100000, "mix-p8");
  if (p8) return n > 1000 ? f8_large : f8_small;
  return n > 1000 ? f2_large : f2_small;
}

template <bool Parallel>
void BM_LogWeightMatrix(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)), state.range(1) == 8);
  for (auto _ : state) {
    Matrix out = Parallel ? kernels::parallel::log_weight_matrix(f.data.vec_stack(), f.data.logdets(), f.comps, f.log_prior)
                          : kernels::serial::log_weight_matrix(f.data.vec_stack(), f.data.logdets(), f.comps, f.log_prior);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_RowLogSumExp(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)), state.range(1) == 8);
  const Matrix lw = kernels::serial::log_weight_matrix(f.data.vec_stack(), f.data.logdets(), f.comps, f.log_prior);
  for (auto _ : state) {
    Vector out = Parallel ? kernels::parallel::row_log_sum_exp(lw) : kernels::serial::row_log_sum_exp(lw);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_TraceProdBatch(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)), state.range(1) == 8);
  const Eigen::RowVectorXd a = f.comps.front().vec_inv_scale;
  for (auto _ : state) {
    Vector out = Parallel ? kernels::parallel::trace_prod_batch(a, f.data.vec_stack())
                          : kernels::serial::trace_prod_batch(a, f.data.vec_stack());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void sizes(benchmark::internal::Benchmark* b) {
  for (int p : {2, 8})
    for (int n : {1000, 100000}) b->Args({n, p});
}

}  // namespace

BENCHMARK(BM_LogWeightMatrix<false>)->Name("log_weight_matrix/serial")->Apply(sizes);
BENCHMARK(BM_LogWeightMatrix<true>)->Name("log_weight_matrix/parallel")->Apply(sizes);
BENCHMARK(BM_RowLogSumExp<false>)->Name("row_log_sum_exp/serial")->Apply(sizes);
BENCHMARK(BM_RowLogSumExp<true>)->Name("row_log_sum_exp/parallel")->Apply(sizes);
BENCHMARK(BM_TraceProdBatch<false>)->Name("trace_prod_batch/serial")->Apply(sizes);
BENCHMARK(BM_TraceProdBatch<true>)->Name("trace_prod_batch/parallel")->Apply(sizes);

BENCHMARK_MAIN();
