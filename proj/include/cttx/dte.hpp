#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cttx/comb.hpp"
#include "cttx/paths.hpp"

namespace cttx {

using Symbol = std::int64_t;

/// Marker for a KL divergence that is infinite (p puts mass where q has none).
inline constexpr double kInfiniteKl = std::numeric_limits<double>::infinity();

/// Finite-support pmf; stored sorted by symbol.
class Pmf {
 public:
  Pmf(std::vector<Symbol> support, std::vector<double> probs);
  static Pmf point_mass(Symbol s) { return Pmf({s}, {1.0}); }

  const std::vector<Symbol>& support() const { return support_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return support_.size(); }
  /// Probability of `s` (0 outside the support).
  double prob(Symbol s) const;
  double entropy() const;

 private:
  std::vector<Symbol> support_;
  std::vector<double> probs_;
};

/// Sum p ln(p/q) in nats with 0 ln(0/q) = 0; kInfiniteKl if p is not << q.
double kl_divergence(const Pmf& p, const Pmf& q);

/// Sum of per-factor KL divergences of two product measures.
double product_kl(std::span<const Pmf> ps, std::span<const Pmf> qs);

/// Same quantity by enumerating the product space; exponential in the number
/// of factors, meant for cross-validation.
double product_kl_direct(std::span<const Pmf> ps, std::span<const Pmf> qs);

/// Conditioning context of one step: the destination history and, for the
/// joint conditional, the source history.
struct HistoryKey {
  std::vector<Symbol> x_hist;
  std::optional<std::vector<Symbol>> y_hist;

  auto operator<=>(const HistoryKey&) const = default;
  bool operator==(const HistoryKey&) const = default;
};

struct CondEntry {
  Pmf pmf;
  double weight;
};

/// Conditional pmfs of the target symbol per context, with context weights.
class CondPmfTable {
 public:
  explicit CondPmfTable(std::map<HistoryKey, CondEntry> entries);

  const std::map<HistoryKey, CondEntry>& entries() const { return entries_; }
  const CondEntry* find(const HistoryKey& key) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<HistoryKey, CondEntry> entries_;
};

/// One atom of an exact joint pmf over (target, x-history, y-history).
struct JointOutcome {
  Symbol target;
  std::vector<Symbol> x_hist;
  std::vector<Symbol> y_hist;
  double prob;
};

/// Joint-context and x-only tables implied by an exact joint pmf.
std::pair<CondPmfTable, CondPmfTable> tables_from_joint(std::span<const JointOutcome> joint);

/// Schreiber's transfer entropy computed directly from the joint pmf:
/// sum p(x, xh, yh) ln[p(x | xh, yh) / p(x | xh)], histories of k + 1 and
/// l + 1 symbols.
double schreiber_te(std::span<const JointOutcome> joint, std::size_t k, std::size_t l);

/// E over joint contexts of KL(p(. | xh, yh) || p(. | xh)).
double te_step(const CondPmfTable& joint, const CondPmfTable& x_only);

enum class Conditioning { x_only, x_and_y };

/// How histories are read off the paths for plug-in estimation.
struct HistorySpec {
  /// History lengths in grid steps (len + 1 nodes); defaults to grid k and l.
  std::optional<NodeIndex> x_len;
  std::optional<NodeIndex> y_len;
  /// Encode the x-history and target relative to X at the latest history node.
  bool x_relative = false;
  /// Encode the y-history relative to the same X value.
  bool y_relative_to_x = false;
  /// Additive smoothing over the step's observed target alphabet; 0 = raw counts.
  double laplace = 0.0;
};

/// Empirical conditional pmfs at step i of the grid; contexts never observed
/// are absent.
CondPmfTable estimate_cond_table(std::span<const ProcessPair> ensemble, const CombGrid& grid,
                                 NodeIndex i, Conditioning conditioning,
                                 const HistorySpec& spec = {});

struct StepValue {
  NodeIndex i;
  double node_time;
  double te;
  double stderr;
};

/// TE in nats. In plug-in mode stderr is the standard error of the per-path
/// log-ratio; in exact mode it is 0 and n_paths is 0.
struct TEEstimate {
  double value = 0.0;
  double stderr = 0.0;
  std::size_t n_paths = 0;
  std::vector<StepValue> per_step;
};

/// Exact tables (joint, x-only) for step i of a grid.
using ExactStepTables =
    std::function<std::pair<CondPmfTable, CondPmfTable>(const CombGrid&, NodeIndex)>;

/// Sum over i = 0..tau-1 of the exact per-step TE.
TEEstimate te_comb_sum(const ExactStepTables& tables, const CombGrid& grid);

/// Plug-in comb sum over an ensemble of pairs.
TEEstimate te_comb_sum(std::span<const ProcessPair> ensemble, const CombGrid& grid,
                       const HistorySpec& spec = {});

/// `i,node_time,te_nats` rows.
std::string per_step_csv(const TEEstimate& est);
nlohmann::json to_json(const TEEstimate& est);

}  // namespace cttx
