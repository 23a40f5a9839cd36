#include "min_cost_flow.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include "wregress/errors.hpp"

namespace wregress::detail {

namespace {

constexpr double kMassEps = 1e-15;
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

Matrix solve_transportation(const Vector& supply, const Vector& demand, const Matrix& cost) {
  const Eigen::Index ns = supply.size();
  const Eigen::Index nt = demand.size();
  if (cost.rows() != ns || cost.cols() != nt) {
    throw DimensionError("transportation: cost matrix shape does not match marginals");
  }
  Matrix flow = Matrix::Zero(ns, nt);
  if (ns == 0 || nt == 0) return flow;
  if (!cost.allFinite()) throw NumericalError("transportation: non-finite cost");

  Vector left = supply;
  Vector need = demand;

  // Node layout: sources [0, ns), sinks [ns, ns + nt).
  const Eigen::Index nv = ns + nt;
  std::vector<double> pot(nv, 0.0);
  for (Eigen::Index j = 0; j < nt; ++j) pot[ns + j] = cost.col(j).minCoeff();

  std::vector<double> dist(nv);
  std::vector<Eigen::Index> pred(nv);
  std::vector<char> done(nv);

  for (;;) {
    bool any_supply = false;
    for (Eigen::Index i = 0; i < ns; ++i) {
      if (left[i] > kMassEps) any_supply = true;
    }
    if (!any_supply) break;

    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(pred.begin(), pred.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (Eigen::Index i = 0; i < ns; ++i) {
      if (left[i] > kMassEps) dist[i] = 0.0;
    }

    Eigen::Index target = -1;
    double target_dist = kInf;
    for (;;) {
      Eigen::Index u = -1;
      double best = kInf;
      for (Eigen::Index v = 0; v < nv; ++v) {
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = v;
        }
      }
      if (u < 0) break;
      done[u] = 1;
      if (u >= ns && need[u - ns] > kMassEps) {
        target = u;
        target_dist = best;
        break;
      }
      if (u < ns) {
        for (Eigen::Index j = 0; j < nt; ++j) {
          const Eigen::Index v = ns + j;
          if (done[v]) continue;
          const double rc = std::max(0.0, cost(u, j) + pot[u] - pot[v]);
          if (best + rc < dist[v]) {
            dist[v] = best + rc;
            pred[v] = u;
          }
        }
      } else {
        const Eigen::Index j = u - ns;
        for (Eigen::Index i = 0; i < ns; ++i) {
          if (done[i] || flow(i, j) <= kMassEps) continue;
          const double rc = std::max(0.0, -cost(i, j) + pot[u] - pot[i]);
          if (best + rc < dist[i]) {
            dist[i] = best + rc;
            pred[i] = u;
          }
        }
      }
    }
    if (target < 0) break;  // remaining supply is rounding residue

    for (Eigen::Index v = 0; v < nv; ++v) {
      pot[v] += done[v] ? dist[v] : target_dist;
    }

    // Bottleneck along the path.
    double delta = need[target - ns];
    Eigen::Index v = target;
    while (pred[v] >= 0) {
      const Eigen::Index u = pred[v];
      if (u >= ns) delta = std::min(delta, flow(v, u - ns));  // reverse arc sink u -> source v
      v = u;
    }
    delta = std::min(delta, left[v]);

    v = target;
    while (pred[v] >= 0) {
      const Eigen::Index u = pred[v];
      if (u < ns) {
        flow(u, v - ns) += delta;
      } else {
        flow(v, u - ns) -= delta;
        if (flow(v, u - ns) < kMassEps) flow(v, u - ns) = 0.0;
      }
      v = u;
    }
    left[v] -= delta;
    need[target - ns] -= delta;
  }
  return flow;
}

}  // namespace wregress::detail
