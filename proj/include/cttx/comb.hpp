#pragma once

#include <cstdint>
#include <vector>

namespace cttx {

using NodeIndex = std::int64_t;

/// floor(x / dt) with a 1e-9 guard so that e.g. 0.3 / 0.1 floors to 3.
NodeIndex guarded_floor(double x, double dt);

/// Uniform comb grid over [t0, T) with histories of length s (destination)
/// and r (source) below t0.
///
/// Every time is reconstructed as integer_index * dt, never accumulated, so
/// nested grids share nodes exactly. Step i (0 <= i < tau) targets node
/// (n_hi - i) * dt; its history of length len occupies the len + 1 nodes
/// immediately before it.
class CombGrid {
 public:
  static CombGrid build(double t0, double T, double s, double r, double dt);

  double t0() const { return t0_; }
  double T() const { return T_; }
  double s() const { return s_; }
  double r() const { return r_; }
  double dt() const { return dt_; }
  NodeIndex n_lo() const { return n_lo_; }
  NodeIndex n_hi() const { return n_hi_; }
  NodeIndex w() const { return w_; }
  NodeIndex tau() const { return n_hi_ - n_lo_; }
  NodeIndex k() const { return k_; }
  NodeIndex l() const { return l_; }

  double time_at(NodeIndex index) const { return static_cast<double>(index) * dt_; }

  /// Target node of step i: (n_hi - i) * dt.
  double node(NodeIndex i) const;
  /// Grid index of node(i).
  NodeIndex node_index(NodeIndex i) const;

  /// The len + 1 history nodes of step i, increasing in time.
  std::vector<double> history_nodes(NodeIndex i, NodeIndex len) const;
  std::vector<NodeIndex> history_indices(NodeIndex i, NodeIndex len) const;

  /// Lowest grid index a history may reach (n_lo - w).
  NodeIndex lowest_history_index() const { return n_lo_ - w_; }

  /// The comb set D_dt as printed: indices n_lo - w + 1 .. n_hi.
  std::vector<double> comb_set() const;

 private:
  CombGrid() = default;

  double t0_ = 0, T_ = 0, s_ = 0, r_ = 0, dt_ = 0;
  NodeIndex n_lo_ = 0, n_hi_ = 0, w_ = 0, k_ = 0, l_ = 0;
};

inline CombGrid build_grid(double t0, double T, double s, double r, double dt) {
  return CombGrid::build(t0, T, s, r, dt);
}

/// True iff dt_coarse is an integer multiple of dt_fine (relative tol 1e-12).
bool refines(double dt_fine, double dt_coarse);

}  // namespace cttx
