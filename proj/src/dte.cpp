#include "cttx/dte.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "cttx/error.hpp"
#include "cttx/parallel.hpp"
#include "format.hpp"

namespace cttx {

// ---------------------------------------------------------------------------
// Pmf and KL
// ---------------------------------------------------------------------------

Pmf::Pmf(std::vector<Symbol> support, std::vector<double> probs) {
  if (support.size() != probs.size() || support.empty()) {
    throw ContractError("Pmf: support and probabilities must be non-empty and of equal length");
  }
  std::vector<std::size_t> order(support.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return support[a] < support[b]; });
  support_.reserve(order.size());
  probs_.reserve(order.size());
  double total = 0.0;
  for (std::size_t idx : order) {
    const double p = probs[idx];
    if (!std::isfinite(p) || p < 0.0) throw ContractError("Pmf: probabilities must be finite and >= 0");
    if (!support_.empty() && support_.back() == support[idx]) {
      throw ContractError("Pmf: duplicate symbol " + std::to_string(support[idx]));
    }
    support_.push_back(support[idx]);
    probs_.push_back(p);
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ContractError("Pmf: probabilities sum to " + format_double(total));
  }
}

double Pmf::prob(Symbol s) const {
  const auto it = std::lower_bound(support_.begin(), support_.end(), s);
  if (it == support_.end() || *it != s) return 0.0;
  return probs_[static_cast<std::size_t>(it - support_.begin())];
}

double Pmf::entropy() const {
  double h = 0.0;
  for (double p : probs_) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double kl_divergence(const Pmf& p, const Pmf& q) {
  double kl = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double pj = p.probs()[j];
    if (pj == 0.0) continue;
    const double qj = q.prob(p.support()[j]);
    if (qj == 0.0) return kInfiniteKl;
    kl += pj * std::log(pj / qj);
  }
  return kl;
}

double product_kl(std::span<const Pmf> ps, std::span<const Pmf> qs) {
  if (ps.size() != qs.size()) throw ContractError("product_kl: factor count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double kl = kl_divergence(ps[i], qs[i]);
    if (kl == kInfiniteKl) return kInfiniteKl;
    total += kl;
  }
  return total;
}

double product_kl_direct(std::span<const Pmf> ps, std::span<const Pmf> qs) {
  if (ps.size() != qs.size()) throw ContractError("product_kl_direct: factor count mismatch");
  if (ps.empty()) return 0.0;
  std::vector<std::size_t> idx(ps.size(), 0);
  double total = 0.0;
  for (;;) {
    double p = 1.0;
    double q = 1.0;
    for (std::size_t f = 0; f < ps.size(); ++f) {
      p *= ps[f].probs()[idx[f]];
      q *= qs[f].prob(ps[f].support()[idx[f]]);
    }
    if (p > 0.0) {
      if (q == 0.0) return kInfiniteKl;
      total += p * std::log(p / q);
    }
    std::size_t f = 0;
    while (f < ps.size() && ++idx[f] == ps[f].size()) idx[f++] = 0;
    if (f == ps.size()) break;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Tables and exact TE
// ---------------------------------------------------------------------------

CondPmfTable::CondPmfTable(std::map<HistoryKey, CondEntry> entries) : entries_(std::move(entries)) {
  double total = 0.0;
  for (const auto& [key, entry] : entries_) {
    if (!std::isfinite(entry.weight) || entry.weight < 0.0) {
      throw ContractError("CondPmfTable: context weights must be finite and >= 0");
    }
    total += entry.weight;
  }
  if (entries_.empty() || std::abs(total - 1.0) > 1e-9) {
    throw ContractError("CondPmfTable: context weights sum to " + format_double(total));
  }
}

const CondEntry* CondPmfTable::find(const HistoryKey& key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

using SymbolMass = std::map<Symbol, double>;

Pmf normalized(const SymbolMass& mass, double total) {
  std::vector<Symbol> support;
  std::vector<double> probs;
  for (const auto& [s, m] : mass) {
    support.push_back(s);
    probs.push_back(m / total);
  }
  // Re-normalize the rounding residue of the division.
  const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (double& p : probs) p /= sum;
  return Pmf(std::move(support), std::move(probs));
}

CondPmfTable table_from_mass(const std::map<HistoryKey, SymbolMass>& mass) {
  double grand = 0.0;
  std::map<HistoryKey, double> totals;
  for (const auto& [key, m] : mass) {
    double t = 0.0;
    for (const auto& [s, v] : m) t += v;
    totals[key] = t;
    grand += t;
  }
  std::map<HistoryKey, CondEntry> entries;
  for (const auto& [key, m] : mass) {
    const double t = totals[key];
    if (t <= 0.0) continue;
    entries.emplace(key, CondEntry{normalized(m, t), t / grand});
  }
  return CondPmfTable(std::move(entries));
}

void check_joint(std::span<const JointOutcome> joint) {
  if (joint.empty()) throw ContractError("joint pmf is empty");
  double total = 0.0;
  for (const auto& o : joint) {
    if (!std::isfinite(o.prob) || o.prob < 0.0) throw ContractError("joint pmf: invalid probability");
    total += o.prob;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ContractError("joint pmf sums to " + format_double(total));
  }
}

}  // namespace

std::pair<CondPmfTable, CondPmfTable> tables_from_joint(std::span<const JointOutcome> joint) {
  check_joint(joint);
  std::map<HistoryKey, SymbolMass> xy;
  std::map<HistoryKey, SymbolMass> x;
  for (const auto& o : joint) {
    if (o.prob == 0.0) continue;
    xy[HistoryKey{o.x_hist, o.y_hist}][o.target] += o.prob;
    x[HistoryKey{o.x_hist, std::nullopt}][o.target] += o.prob;
  }
  return {table_from_mass(xy), table_from_mass(x)};
}

double schreiber_te(std::span<const JointOutcome> joint, std::size_t k, std::size_t l) {
  check_joint(joint);
  using Hist = std::vector<Symbol>;
  std::map<std::pair<Hist, Hist>, double> p_xh_yh;
  std::map<std::pair<Symbol, Hist>, double> p_x_xh;
  std::map<Hist, double> p_xh;
  for (const auto& o : joint) {
    if (o.x_hist.size() != k + 1 || o.y_hist.size() != l + 1) {
      throw ContractError("schreiber_te: history lengths must be k + 1 and l + 1");
    }
    p_xh_yh[{o.x_hist, o.y_hist}] += o.prob;
    p_x_xh[{o.target, o.x_hist}] += o.prob;
    p_xh[o.x_hist] += o.prob;
  }
  // Collapse duplicate atoms before forming the ratio.
  std::map<std::tuple<Symbol, Hist, Hist>, double> atoms;
  for (const auto& o : joint) atoms[{o.target, o.x_hist, o.y_hist}] += o.prob;

  double te = 0.0;
  for (const auto& [key, p] : atoms) {
    if (p == 0.0) continue;
    const auto& [target, xh, yh] = key;
    const double cond_xy = p / p_xh_yh.at({xh, yh});
    const double cond_x = p_x_xh.at({target, xh}) / p_xh.at(xh);
    if (cond_x == 0.0) {
      throw std::logic_error("schreiber_te: conditional of a common joint lost absolute continuity");
    }
    te += p * std::log(cond_xy / cond_x);
  }
  return te;
}

double te_step(const CondPmfTable& joint, const CondPmfTable& x_only) {
  double te = 0.0;
  for (const auto& [key, entry] : joint.entries()) {
    const CondEntry* marginal = x_only.find(HistoryKey{key.x_hist, std::nullopt});
    if (marginal == nullptr) {
      throw ContractError("te_step: x-history context missing from the x-only table");
    }
    const double kl = kl_divergence(entry.pmf, marginal->pmf);
    if (kl == kInfiniteKl) return kInfiniteKl;
    te += entry.weight * kl;
  }
  return te;
}

// ---------------------------------------------------------------------------
// Plug-in estimation
// ---------------------------------------------------------------------------

namespace {

struct SymbolsHash {
  std::size_t operator()(const std::vector<Symbol>& v) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (Symbol s : v) {
      h ^= static_cast<std::uint64_t>(s) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

struct StepLayout {
  std::vector<double> x_nodes;
  std::vector<double> y_nodes;
  double target_node;
};

StepLayout layout_for(const CombGrid& grid, NodeIndex i, const HistorySpec& spec) {
  const NodeIndex x_len = spec.x_len.value_or(grid.k());
  const NodeIndex y_len = spec.y_len.value_or(grid.l());
  return StepLayout{grid.history_nodes(i, x_len), grid.history_nodes(i, y_len), grid.node(i)};
}

struct ContextCounts {
  std::vector<std::pair<Symbol, double>> counts;  // sorted by symbol
  double total = 0.0;

  void add(Symbol s) {
    auto it = std::lower_bound(counts.begin(), counts.end(), s,
                               [](const auto& e, Symbol v) { return e.first < v; });
    if (it == counts.end() || it->first != s) it = counts.insert(it, {s, 0.0});
    it->second += 1.0;
    total += 1.0;
  }
  double count(Symbol s) const {
    auto it = std::lower_bound(counts.begin(), counts.end(), s,
                               [](const auto& e, Symbol v) { return e.first < v; });
    return (it == counts.end() || it->first != s) ? 0.0 : it->second;
  }
};

/// Symbol counts of one step over an ensemble.
class StepCounter {
 public:
  StepCounter(std::span<const ProcessPair> ensemble, const StepLayout& layout,
              const HistorySpec& spec)
      : spec_(spec), n_paths_(ensemble.size()) {
    path_xy_.resize(n_paths_);
    path_target_.resize(n_paths_);
    std::vector<Symbol> key;
    std::vector<Symbol> x_key;
    const std::size_t nx = layout.x_nodes.size();
    for (std::size_t p = 0; p < n_paths_; ++p) {
      const ProcessPair& pair = ensemble[p];
      key.clear();
      for (double t : layout.x_nodes) key.push_back(pair.x.eval(t));
      const Symbol base = spec.x_relative ? key.back() : 0;
      const Symbol y_base = spec.y_relative_to_x ? key.back() : 0;
      if (spec.x_relative) {
        for (auto& v : key) v -= base;
      }
      for (double t : layout.y_nodes) key.push_back(pair.y.eval(t) - y_base);
      const Symbol target = pair.x.eval(layout.target_node) - base;

      auto [it, inserted] = xy_index_.try_emplace(key, xy_.size());
      if (inserted) {
        x_key.assign(key.begin(), key.begin() + static_cast<std::ptrdiff_t>(nx));
        auto [xit, xins] = x_index_.try_emplace(x_key, x_.size());
        if (xins) x_.emplace_back();
        xy_.emplace_back();
        xy_parent_.push_back(xit->second);
      }
      const std::size_t ctx = it->second;
      xy_[ctx].add(target);
      x_[xy_parent_[ctx]].add(target);
      path_xy_[p] = ctx;
      path_target_[p] = target;
      if (!std::binary_search(alphabet_.begin(), alphabet_.end(), target)) {
        alphabet_.insert(std::lower_bound(alphabet_.begin(), alphabet_.end(), target), target);
      }
    }
  }

  double prob_xy(std::size_t ctx, Symbol s) const { return smoothed(xy_[ctx], s); }
  double prob_x(std::size_t xctx, Symbol s) const { return smoothed(x_[xctx], s); }

  /// Plug-in TE of the step and the per-path log-ratios.
  double evaluate(std::vector<double>& log_ratio) const {
    log_ratio.resize(n_paths_);
    for (std::size_t p = 0; p < n_paths_; ++p) {
      const std::size_t ctx = path_xy_[p];
      const double pxy = prob_xy(ctx, path_target_[p]);
      const double px = prob_x(xy_parent_[ctx], path_target_[p]);
      if (px == 0.0) {
        throw std::logic_error("plug-in tables from common counts lost absolute continuity");
      }
      log_ratio[p] = std::log(pxy / px);
    }
    double te = 0.0;
    const double n = static_cast<double>(n_paths_);
    for (std::size_t ctx = 0; ctx < xy_.size(); ++ctx) {
      const std::size_t parent = xy_parent_[ctx];
      double kl = 0.0;
      for (Symbol s : support(xy_[ctx])) {
        const double p = prob_xy(ctx, s);
        if (p > 0.0) kl += p * std::log(p / prob_x(parent, s));
      }
      te += (xy_[ctx].total / n) * kl;
    }
    return te;
  }

  CondPmfTable table(Conditioning conditioning, std::size_t nx) const {
    std::map<HistoryKey, CondEntry> entries;
    const double n = static_cast<double>(n_paths_);
    if (conditioning == Conditioning::x_and_y) {
      for (const auto& [key, ctx] : xy_index_) {
        HistoryKey hk{{key.begin(), key.begin() + static_cast<std::ptrdiff_t>(nx)},
                      std::vector<Symbol>(key.begin() + static_cast<std::ptrdiff_t>(nx), key.end())};
        entries.emplace(std::move(hk), CondEntry{pmf_of(xy_[ctx]), xy_[ctx].total / n});
      }
    } else {
      for (const auto& [key, ctx] : x_index_) {
        entries.emplace(HistoryKey{key, std::nullopt}, CondEntry{pmf_of(x_[ctx]), x_[ctx].total / n});
      }
    }
    return CondPmfTable(std::move(entries));
  }

 private:
  double smoothed(const ContextCounts& c, Symbol s) const {
    const double a = spec_.laplace;
    return (c.count(s) + a) / (c.total + a * static_cast<double>(alphabet_.size()));
  }

  std::vector<Symbol> support(const ContextCounts& c) const {
    if (spec_.laplace > 0.0) return alphabet_;
    std::vector<Symbol> out;
    for (const auto& [s, n] : c.counts) out.push_back(s);
    return out;
  }

  Pmf pmf_of(const ContextCounts& c) const {
    std::vector<Symbol> sup = support(c);
    std::vector<double> probs;
    for (Symbol s : sup) probs.push_back(smoothed(c, s));
    const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
    for (double& p : probs) p /= sum;
    return Pmf(std::move(sup), std::move(probs));
  }

  HistorySpec spec_;
  std::size_t n_paths_;
  std::unordered_map<std::vector<Symbol>, std::size_t, SymbolsHash> xy_index_;
  std::unordered_map<std::vector<Symbol>, std::size_t, SymbolsHash> x_index_;
  std::vector<ContextCounts> xy_;
  std::vector<ContextCounts> x_;
  std::vector<std::size_t> xy_parent_;
  std::vector<std::size_t> path_xy_;
  std::vector<Symbol> path_target_;
  std::vector<Symbol> alphabet_;
};

double stderr_of(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0) / n);
}

}  // namespace

CondPmfTable estimate_cond_table(std::span<const ProcessPair> ensemble, const CombGrid& grid,
                                 NodeIndex i, Conditioning conditioning, const HistorySpec& spec) {
  if (ensemble.empty()) throw ContractError("estimate_cond_table: empty ensemble");
  const StepLayout layout = layout_for(grid, i, spec);
  const StepCounter counter(ensemble, layout, spec);
  return counter.table(conditioning, layout.x_nodes.size());
}

TEEstimate te_comb_sum(const ExactStepTables& tables, const CombGrid& grid) {
  TEEstimate est;
  for (NodeIndex i = 0; i < grid.tau(); ++i) {
    const auto [joint, x_only] = tables(grid, i);
    const double te = te_step(joint, x_only);
    est.per_step.push_back(StepValue{i, grid.node(i), te, 0.0});
    est.value += te;
  }
  return est;
}

TEEstimate te_comb_sum(std::span<const ProcessPair> ensemble, const CombGrid& grid,
                       const HistorySpec& spec) {
  if (ensemble.empty()) throw ContractError("te_comb_sum: empty ensemble");
  const std::size_t n = ensemble.size();
  const auto tau = static_cast<std::size_t>(grid.tau());
  // Fixed step blocks, so the reduction order does not depend on thread count.
  const std::size_t n_blocks = std::min<std::size_t>(tau, 32);
  const std::size_t block_len = (tau + n_blocks - 1) / n_blocks;

  std::vector<StepValue> per_step(tau);
  std::vector<std::vector<double>> partial(n_blocks, std::vector<double>(n, 0.0));
  parallel_blocks(n_blocks, [&](std::size_t b) {
    std::vector<double> log_ratio;
    const std::size_t lo = b * block_len;
    const std::size_t hi = std::min(tau, lo + block_len);
    for (std::size_t step = lo; step < hi; ++step) {
      const auto i = static_cast<NodeIndex>(step);
      const StepCounter counter(ensemble, layout_for(grid, i, spec), spec);
      const double te = counter.evaluate(log_ratio);
      for (std::size_t p = 0; p < n; ++p) partial[b][p] += log_ratio[p];
      per_step[step] = StepValue{i, grid.node(i), te, stderr_of(log_ratio)};
    }
  });

  std::vector<double> per_path(n, 0.0);
  for (const auto& part : partial) {
    for (std::size_t p = 0; p < n; ++p) per_path[p] += part[p];
  }
  TEEstimate est;
  est.n_paths = n;
  est.per_step = std::move(per_step);
  for (const auto& s : est.per_step) est.value += s.te;
  est.stderr = stderr_of(per_path);
  return est;
}

std::string per_step_csv(const TEEstimate& est) {
  std::string out = "i,node_time,te_nats\n";
  for (const auto& s : est.per_step) {
    out += std::to_string(s.i) + "," + format_double(s.node_time) + "," + format_double(s.te) + "\n";
  }
  return out;
}

nlohmann::json to_json(const TEEstimate& est) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : est.per_step) {
    steps.push_back({{"i", s.i}, {"node_time", s.node_time}, {"te_nats", s.te}, {"stderr", s.stderr}});
  }
  return nlohmann::json{{"value", est.value},
                        {"divergent", std::isinf(est.value)},
                        {"stderr", est.stderr},
                        {"n_paths", est.n_paths},
                        {"per_step", steps}};
}

}  // namespace cttx
