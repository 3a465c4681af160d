// Copyright 2026 The cfeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Exact uniform-marginal transport as an integer min-cost flow.
//
// Scaling both marginals by rows*cols turns them into integers: every source
// row supplies `cols` units and every target column demands `rows`. The flow
// is routed by successive shortest augmenting paths (Dijkstra with node
// potentials) on the dense bipartite residual graph, which yields an optimal
// vertex of the transportation polytope.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "cfeval/transport.hpp"

namespace cfeval {

TransportPlan solve_ot_exact(const Eigen::MatrixXd& cost) {
  if (cost.rows() < 1 || cost.cols() < 1) throw ArgumentError("transport cost must be non-empty");
  if (cost.hasNaN()) throw NumericError("transport cost contains NaN");
  if (!cost.allFinite()) throw NumericError("transport cost contains infinite entries");

  const auto r = static_cast<std::size_t>(cost.rows());
  const auto c = static_cast<std::size_t>(cost.cols());
  const std::size_t n = r + c;  // rows first, then columns
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<long long> supply(r, static_cast<long long>(c));
  std::vector<long long> demand(c, static_cast<long long>(r));
  std::vector<long long> flow(r * c, 0);
  auto x = [&](std::size_t i, std::size_t j) -> long long& { return flow[i * c + j]; };

  // Potentials keep every residual arc's reduced cost non-negative.
  std::vector<double> pot(n, 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    double m = kInf;
    for (std::size_t i = 0; i < r; ++i) {
      m = std::min(m, cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    pot[r + j] = m;
  }

  std::vector<double> dist(n);
  std::vector<std::size_t> pred(n);
  std::vector<char> done(n);
  std::size_t augmentations = 0;
  long long remaining = static_cast<long long>(r * c);

  while (remaining > 0) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    std::fill(pred.begin(), pred.end(), n);
    // Min-heap on (label, node); ties pop the lowest node index.
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (std::size_t i = 0; i < r; ++i) {
      if (supply[i] > 0) {
        dist[i] = 0.0;
        heap.emplace(0.0, i);
      }
    }
    auto relax = [&](std::size_t from, std::size_t to, double reduced) {
      if (dist[from] + reduced < dist[to]) {
        dist[to] = dist[from] + reduced;
        pred[to] = from;
        heap.emplace(dist[to], to);
      }
    };
    std::size_t sink = n;
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (done[u] || d > dist[u]) continue;
      done[u] = 1;
      // Labels beyond the first deficit column are capped below, so the
      // search can stop here.
      if (u >= r && demand[u - r] > 0) {
        sink = u;
        break;
      }
      if (u < r) {
        for (std::size_t j = 0; j < c; ++j) {
          const std::size_t v = r + j;
          if (done[v]) continue;
          relax(u, v,
                std::max(0.0, cost(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(j)) +
                                  pot[u] - pot[v]));
        }
      } else {
        const std::size_t j = u - r;
        for (std::size_t i = 0; i < r; ++i) {
          if (done[i] || x(i, j) == 0) continue;
          relax(u, i,
                std::max(0.0, -cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                                  pot[u] - pot[i]));
        }
      }
    }
    if (sink == n) throw NumericError("exact transport: no augmenting path (internal error)");

    long long push = demand[sink - r];
    std::size_t v = sink;
    while (pred[v] != n) {
      const std::size_t u = pred[v];
      if (u >= r) push = std::min(push, x(v, u - r));  // backward arc column -> row
      v = u;
    }
    push = std::min(push, supply[v]);
    const std::size_t start = v;

    v = sink;
    while (pred[v] != n) {
      const std::size_t u = pred[v];
      if (u < r) {
        x(u, v - r) += push;
      } else {
        x(v, u - r) -= push;
      }
      v = u;
    }
    supply[start] -= push;
    demand[sink - r] -= push;
    remaining -= push;
    ++augmentations;

    const double cap = dist[sink];
    for (std::size_t k = 0; k < n; ++k) pot[k] += std::min(dist[k], cap);
  }

  TransportPlan out;
  out.plan.resize(cost.rows(), cost.cols());
  const double scale = 1.0 / static_cast<double>(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      out.plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(x(i, j)) * scale;
    }
  }
  out.cost = (cost.array() * out.plan.array()).sum();
  out.residual = marginal_residual(out.plan);
  out.iterations = augmentations;
  out.exact = true;
  return out;
}

}  // namespace cfeval
