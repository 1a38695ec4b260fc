#include "wishmix/cluster_util.hpp"

#include "wishmix/error.hpp"

#include <algorithm>
#include <limits>

namespace wishmix {

namespace {

struct KmeansRun {
  Eigen::VectorXi labels;
  double sse = std::numeric_limits<double>::infinity();
};

Eigen::Index draw_index(RngState& rng, Eigen::Index n) {
  return std::min(static_cast<Eigen::Index>(draw_uniform(rng) * static_cast<double>(n)), n - 1);
}

KmeansRun kmeans_once(const RowMatrix& x, int k, RngState& rng, int max_iter) {
  const Eigen::Index n = x.rows();
  RowMatrix centers(k, x.cols());

  // k-means++ seeding
  Vector d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  centers.row(0) = x.row(draw_index(rng, n));
  for (int c = 1; c < k; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      d2(i) = std::min(d2(i), (x.row(i) - centers.row(c - 1)).squaredNorm());
    }
    const double total = d2.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double u = draw_uniform(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = draw_index(rng, n);
    }
    centers.row(c) = x.row(pick);
  }

  Eigen::VectorXi labels = Eigen::VectorXi::Constant(n, -1);
  Eigen::VectorXi counts(k);
  Vector dist(n);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      dist(i) = (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (labels(i) != best) {
        labels(i) = static_cast<int>(best);
        changed = true;
      }
    }
    // Refill empty clusters with the point farthest from its center.
    counts.setZero();
    for (Eigen::Index i = 0; i < n; ++i) ++counts(labels(i));
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0) continue;
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts(labels(i)) > 1 && dist(i) > far_d) {
          far_d = dist(i);
          far = i;
        }
      }
      --counts(labels(far));
      labels(far) = c;
      counts(c) = 1;
      dist(far) = 0.0;
      changed = true;
    }
    centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) centers.row(labels(i)) += x.row(i);
    for (int c = 0; c < k; ++c) centers.row(c) /= counts(c);
    if (!changed) break;
  }

  KmeansRun run;
  run.sse = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) run.sse += (x.row(i) - centers.row(labels(i))).squaredNorm();
  run.labels = std::move(labels);
  return run;
}

}  // namespace

std::vector<int> kmeans_labels(const RowMatrix& points, int k, RngState& rng, int n_init, int max_iter) {
  if (k < 1) fail(ErrorKind::ConfigError, "kmeans: k must be >= 1");
  if (points.rows() < k) fail(ErrorKind::DegenerateData, "kmeans: fewer points than clusters");
  if (k == 1) return std::vector<int>(static_cast<std::size_t>(points.rows()), 0);
  KmeansRun best;
  for (int r = 0; r < std::max(1, n_init); ++r) {
    KmeansRun run = kmeans_once(points, k, rng, max_iter);
    if (run.sse < best.sse) best = std::move(run);
  }
  return std::vector<int>(best.labels.data(), best.labels.data() + best.labels.size());
}

std::vector<int> min_cost_assignment(const Matrix& cost) {
  if (cost.cols() != cost.rows()) fail(ErrorKind::DimensionMismatch, "min_cost_assignment: cost must be square");
  const std::size_t n = static_cast<std::size_t>(cost.rows());
  if (n == 0) return {};
  auto c = [&](std::size_t i, std::size_t j) {
    return cost(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1));
  };
  // Potentials-based Hungarian method; rows and columns are 1-based, index 0 is a sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> perm(n, 0);
  for (std::size_t j = 1; j <= n; ++j) perm[match[j] - 1] = static_cast<int>(j - 1);
  return perm;
}

}  // namespace wishmix
