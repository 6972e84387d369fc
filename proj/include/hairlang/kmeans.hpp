#pragma once

#include "hairlang/common.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace hairlang {

// Row-major point set: one descriptor per row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Clustering {
  std::vector<int> assignments;
  PointMatrix centroids;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each Lloyd update
  int iterations = 0;

  int cluster_count() const { return static_cast<int>(centroids.rows()); }
};

struct KMeansOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-7;
};

namespace detail {

inline double squared_distance(const PointMatrix& a, Eigen::Index i, const PointMatrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// k-means++ seeding. Stops early once every point coincides with a chosen
// center, so the center count is min(k, #distinct points).
inline PointMatrix kmeanspp_seed(const PointMatrix& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  std::vector<Eigen::Index> chosen;
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  chosen.push_back(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = squared_distance(x, i, x, chosen[0]);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(chosen.size()) < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    if (total <= 0.0) break;
    double target = unit(rng) * total;
    Eigen::Index next = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      target -= d2[static_cast<std::size_t>(i)];
      if (target < 0.0 && d2[static_cast<std::size_t>(i)] > 0.0) {
        next = i;
        break;
      }
    }
    while (d2[static_cast<std::size_t>(next)] <= 0.0) --next;
    chosen.push_back(next);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], squared_distance(x, i, x, next));
  }
  PointMatrix c(static_cast<Eigen::Index>(chosen.size()), x.cols());
  for (std::size_t j = 0; j < chosen.size(); ++j) c.row(static_cast<Eigen::Index>(j)) = x.row(chosen[j]);
  return c;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed seed;
// ties in assignment go to the lowest centroid index.
inline Clustering kmeans(const PointMatrix& x, int k, std::uint64_t seed, const KMeansOptions& opt = {}) {
  if (k < 1) throw Error(Errc::invalid_argument, "k must be >= 1");
  if (x.rows() == 0) throw Error(Errc::invalid_argument, "no points to cluster");
  const Eigen::Index n = x.rows();
  std::mt19937_64 rng(seed);

  Clustering c;
  c.centroids = detail::kmeanspp_seed(x, k, rng);
  const Eigen::Index kc = c.centroids.rows();
  c.assignments.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n));

  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iterations; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Eigen::Index j = 0; j < kc; ++j) {
        const double d = detail::squared_distance(x, i, c.centroids, j);
        if (d < best) {
          best = d;
          arg = static_cast<int>(j);
        }
      }
      c.assignments[static_cast<std::size_t>(i)] = arg;
      dist[static_cast<std::size_t>(i)] = best;
    }

    std::vector<Eigen::Index> counts(static_cast<std::size_t>(kc), 0);
    for (int a : c.assignments) ++counts[static_cast<std::size_t>(a)];
    // Empty clusters take the point farthest from its current centroid.
    for (Eigen::Index j = 0; j < kc; ++j) {
      if (counts[static_cast<std::size_t>(j)] != 0) continue;
      Eigen::Index far = -1;
      double far_d = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(c.assignments[static_cast<std::size_t>(i)])] > 1 &&
            dist[static_cast<std::size_t>(i)] > far_d) {
          far_d = dist[static_cast<std::size_t>(i)];
          far = i;
        }
      }
      if (far < 0) continue;
      --counts[static_cast<std::size_t>(c.assignments[static_cast<std::size_t>(far)])];
      c.assignments[static_cast<std::size_t>(far)] = static_cast<int>(j);
      counts[static_cast<std::size_t>(j)] = 1;
      dist[static_cast<std::size_t>(far)] = 0.0;
    }

    // Fixed-order accumulation keeps the update independent of scheduling.
    PointMatrix sums = PointMatrix::Zero(kc, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) sums.row(c.assignments[static_cast<std::size_t>(i)]) += x.row(i);
    for (Eigen::Index j = 0; j < kc; ++j)
      if (counts[static_cast<std::size_t>(j)] > 0)
        c.centroids.row(j) = sums.row(j) / static_cast<double>(counts[static_cast<std::size_t>(j)]);

    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      inertia += detail::squared_distance(x, i, c.centroids, c.assignments[static_cast<std::size_t>(i)]);
    c.inertia_history.push_back(inertia);
    c.inertia = inertia;
    c.iterations = it + 1;
    if (inertia == 0.0) break;
    if (std::isfinite(previous) && previous - inertia <= opt.relative_tolerance * previous) break;
    previous = inertia;
  }
  return c;
}

}  // namespace hairlang
