#include "cttx/comb.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cttx/error.hpp"

namespace cttx {

NodeIndex guarded_floor(double x, double dt) {
  return static_cast<NodeIndex>(std::floor(x / dt + 1e-9));
}

CombGrid CombGrid::build(double t0, double T, double s, double r, double dt) {
  for (double v : {t0, T, s, r, dt}) {
    if (!std::isfinite(v)) throw GridError("build_grid: non-finite argument");
  }
  if (!(t0 < T)) throw GridError("build_grid: need t0 < T");
  if (!(s > 0.0) || !(r > 0.0)) throw GridError("build_grid: history lengths s, r must be positive");
  if (!(dt > 0.0)) throw GridError("build_grid: dt must be positive");
  if (dt >= T - t0) {
    throw GridError("build_grid: dt = " + std::to_string(dt) + " is not smaller than T - t0");
  }
  CombGrid g;
  g.t0_ = t0;
  g.T_ = T;
  g.s_ = s;
  g.r_ = r;
  g.dt_ = dt;
  g.n_lo_ = guarded_floor(t0, dt);
  g.n_hi_ = guarded_floor(T, dt);
  g.w_ = guarded_floor(std::max(s, r), dt);
  g.k_ = guarded_floor(s, dt);
  g.l_ = guarded_floor(r, dt);
  if (g.tau() < 1) throw GridError("build_grid: tau < 1");
  return g;
}

double CombGrid::node(NodeIndex i) const { return time_at(node_index(i)); }

NodeIndex CombGrid::node_index(NodeIndex i) const {
  if (i < 0 || i >= tau()) {
    throw IndexError("CombGrid::node: step " + std::to_string(i) + " outside [0, " +
                     std::to_string(tau()) + ")");
  }
  return n_hi_ - i;
}

std::vector<NodeIndex> CombGrid::history_indices(NodeIndex i, NodeIndex len) const {
  const NodeIndex target = node_index(i);
  if (len < 0) throw GridError("history_nodes: negative history length");
  const NodeIndex lowest = target - len - 1;
  if (lowest < lowest_history_index()) {
    throw GridError("history_nodes: history of length " + std::to_string(len) + " at step " +
                    std::to_string(i) + " runs below the comb");
  }
  std::vector<NodeIndex> out;
  out.reserve(static_cast<std::size_t>(len + 1));
  for (NodeIndex idx = lowest; idx < target; ++idx) out.push_back(idx);
  return out;
}

std::vector<double> CombGrid::history_nodes(NodeIndex i, NodeIndex len) const {
  std::vector<double> out;
  for (NodeIndex idx : history_indices(i, len)) out.push_back(time_at(idx));
  return out;
}

std::vector<double> CombGrid::comb_set() const {
  std::vector<double> out;
  for (NodeIndex idx = n_lo_ - w_ + 1; idx <= n_hi_; ++idx) out.push_back(time_at(idx));
  return out;
}

bool refines(double dt_fine, double dt_coarse) {
  if (!(dt_fine > 0.0) || !(dt_coarse > 0.0)) return false;
  const double ratio = dt_coarse / dt_fine;
  const double m = std::round(ratio);
  return m >= 1.0 && std::abs(ratio - m) <= 1e-12 * std::max(1.0, ratio);
}

}  // namespace cttx
