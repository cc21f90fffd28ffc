#include "recomed/cluster.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "recomed/error.hpp"
#include "recomed/random.hpp"

namespace recomed {

using nlohmann::json;

Partition Partition::from_labels(const std::map<MedId, std::size_t>& labels) {
  Partition p;
  std::map<std::size_t, std::size_t> dense;  // raw label -> canonical id
  // Map iteration visits members in ascending id order, so first sight of a
  // label is its smallest member.
  for (const auto& [id, label] : labels) {
    auto [it, inserted] = dense.emplace(label, p.communities.size());
    if (inserted) p.communities.emplace_back();
    p.communities[it->second].push_back(id);
    p.assignment.emplace(id, it->second);
  }
  return p;
}

OutlierSet dbscan_outliers(const SimGraph& g, double eps, std::size_t min_pts) {
  if (!(eps > 0.0 && eps <= 1.0)) throw Error("eps must lie in (0, 1]");
  if (min_pts < 1) throw Error("min_pts must be at least 1");
  std::map<MedId, std::vector<MedId>> near;
  for (MedId v : g.nodes) near[v];
  for (const auto& [key, w] : g.edges) {
    if (1.0 - w <= eps + kDistanceTolerance) {
      near[key.first].push_back(key.second);
      near[key.second].push_back(key.first);
    }
  }
  std::set<MedId> core;
  for (const auto& [v, nb] : near) {
    if (nb.size() + 1 >= min_pts) core.insert(v);
  }
  OutlierSet out{{}, eps, min_pts};
  for (const auto& [v, nb] : near) {
    if (core.count(v)) continue;
    bool border = std::any_of(nb.begin(), nb.end(), [&](MedId u) { return core.count(u) > 0; });
    if (!border) out.med_ids.insert(v);
  }
  return out;
}

double modularity(const SimGraph& g, const Partition& p, double resolution, const std::set<MedId>& excluded) {
  if (!(resolution > 0.0)) throw Error("resolution must be positive");
  for (MedId v : g.nodes) {
    if (excluded.count(v)) continue;
    if (!p.assignment.count(v)) throw Error("partition missing node " + std::to_string(v));
  }
  std::vector<double> intra(p.communities.size(), 0.0), degree(p.communities.size(), 0.0);
  double total = 0.0;
  for (const auto& [key, w] : g.edges) {
    if (excluded.count(key.first) || excluded.count(key.second)) continue;
    auto a = p.assignment.find(key.first);
    auto b = p.assignment.find(key.second);
    if (a == p.assignment.end() || b == p.assignment.end()) throw Error("partition missing an edge endpoint");
    total += w;
    degree[a->second] += w;
    degree[b->second] += w;
    if (a->second == b->second) intra[a->second] += w;
  }
  if (total == 0.0) return 0.0;
  double q = 0.0;
  for (std::size_t c = 0; c < intra.size(); ++c) {
    double s = degree[c] / (2.0 * total);
    q += intra[c] / total - resolution * s * s;
  }
  return q;
}

namespace {

// Aggregated level graph. self_weight is the intra weight folded into a node,
// degree the summed original degree of its members.
struct LevelGraph {
  std::size_t n = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> adj;  // no self loops
  std::vector<double> self_weight;
  std::vector<double> degree;
};

class LocalMover {
 public:
  LocalMover(const LevelGraph& g, double total, double resolution)
      : g_(g), total_(total), gamma_(resolution), comm_(g.n), tot_(g.n), in_(g.n), neigh_(g.n, 0.0) {
    for (std::size_t i = 0; i < g.n; ++i) {
      comm_[i] = i;
      tot_[i] = g.degree[i];
      in_[i] = g.self_weight[i];
    }
    q_ = 0.0;
    for (std::size_t c = 0; c < g.n; ++c) q_ += term(c);
  }

  // One sweep in `order`; returns whether any node moved.
  bool pass(const std::vector<std::size_t>& order) {
    bool moved = false;
    for (std::size_t i : order) {
      const std::size_t old_c = comm_[i];
      touched_.clear();
      for (auto [j, w] : g_.adj[i]) {
        std::size_t c = comm_[j];
        if (neigh_[c] == 0.0) touched_.push_back(c);
        neigh_[c] += w;
      }
      const double k_i = g_.degree[i];
      const double k_old = neigh_[old_c];

      q_ -= term(old_c);
      tot_[old_c] -= k_i;
      in_[old_c] -= k_old + g_.self_weight[i];
      q_ += term(old_c);

      auto gain = [&](std::size_t c) { return neigh_[c] - gamma_ * tot_[c] * k_i / (2.0 * total_); };
      std::size_t best = old_c;
      double best_gain = gain(old_c);
      std::sort(touched_.begin(), touched_.end());
      for (std::size_t c : touched_) {
        if (c == old_c) continue;
        double gc = gain(c);
        if (gc > best_gain + 1e-12) {
          best = c;
          best_gain = gc;
        }
      }

      q_ -= term(best);
      tot_[best] += k_i;
      in_[best] += neigh_[best] + g_.self_weight[i];
      q_ += term(best);
      comm_[i] = best;
      if (best != old_c) moved = true;

      for (std::size_t c : touched_) neigh_[c] = 0.0;
    }
    return moved;
  }

  double modularity() const { return q_; }
  const std::vector<std::size_t>& communities() const { return comm_; }

 private:
  double term(std::size_t c) const {
    double s = tot_[c] / (2.0 * total_);
    return in_[c] / total_ - gamma_ * s * s;
  }

  const LevelGraph& g_;
  double total_;
  double gamma_;
  std::vector<std::size_t> comm_;
  std::vector<double> tot_;
  std::vector<double> in_;
  std::vector<double> neigh_;
  std::vector<std::size_t> touched_;
  double q_ = 0.0;
};

Partition flatten(const std::vector<MedId>& ids, const std::vector<std::size_t>& node_to_comm) {
  std::map<MedId, std::size_t> labels;
  for (std::size_t i = 0; i < ids.size(); ++i) labels.emplace(ids[i], node_to_comm[i]);
  return Partition::from_labels(labels);
}

}  // namespace

LouvainResult louvain_detailed(const SimGraph& g, const OutlierSet& exclude, const LouvainOptions& options) {
  if (!(options.resolution > 0.0)) throw Error("resolution must be positive");
  std::vector<MedId> ids;
  std::unordered_map<MedId, std::size_t> index;
  for (MedId v : g.nodes) {
    if (exclude.med_ids.count(v)) continue;
    index.emplace(v, ids.size());
    ids.push_back(v);
  }
  if (ids.empty()) throw Error("louvain: graph is empty after exclusion");

  LevelGraph level;
  level.n = ids.size();
  level.adj.resize(level.n);
  level.self_weight.assign(level.n, 0.0);
  level.degree.assign(level.n, 0.0);
  double total = 0.0;
  for (const auto& [key, w] : g.edges) {
    auto a = index.find(key.first);
    auto b = index.find(key.second);
    if (a == index.end() || b == index.end()) continue;
    level.adj[a->second].push_back({b->second, w});
    level.adj[b->second].push_back({a->second, w});
    level.degree[a->second] += w;
    level.degree[b->second] += w;
    total += w;
  }

  std::vector<std::size_t> membership(ids.size());
  std::iota(membership.begin(), membership.end(), 0);
  LouvainResult result;
  if (total == 0.0) {
    result.partition = flatten(ids, membership);
    result.modularity = 0.0;
    return result;
  }

  Rng rng(options.seed);
  constexpr std::size_t kMaxPasses = 1000;
  while (true) {
    LocalMover mover(level, total, options.resolution);
    std::vector<std::size_t> order(level.n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(std::span<std::size_t>(order), rng);

    bool any_move = false;
    for (std::size_t pass = 0; pass < kMaxPasses; ++pass) {
      double before = mover.modularity();
      bool moved = mover.pass(order);
      any_move = any_move || moved;
      if (options.trace) {
        std::vector<std::size_t> flat(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) flat[i] = mover.communities()[membership[i]];
        double recomputed = modularity(g, flatten(ids, flat), options.resolution, exclude.med_ids);
        result.trace.push_back({result.levels, mover.modularity(), recomputed});
      }
      if (!moved || mover.modularity() - before < 1e-12) break;
    }
    ++result.levels;

    // Dense renumbering in order of first appearance by node index.
    const auto& comm = mover.communities();
    std::vector<std::size_t> dense(level.n, SIZE_MAX);
    std::size_t n_comm = 0;
    for (std::size_t i = 0; i < level.n; ++i) {
      if (dense[comm[i]] == SIZE_MAX) dense[comm[i]] = n_comm++;
    }
    for (auto& m : membership) m = dense[comm[m]];
    if (!any_move || n_comm == level.n) break;

    LevelGraph next;
    next.n = n_comm;
    next.adj.resize(n_comm);
    next.self_weight.assign(n_comm, 0.0);
    next.degree.assign(n_comm, 0.0);
    std::vector<std::map<std::size_t, double>> links(n_comm);
    for (std::size_t i = 0; i < level.n; ++i) {
      std::size_t ci = dense[comm[i]];
      next.self_weight[ci] += level.self_weight[i];
      next.degree[ci] += level.degree[i];
      for (auto [j, w] : level.adj[i]) {
        std::size_t cj = dense[comm[j]];
        if (ci == cj) {
          if (i < j) next.self_weight[ci] += w;
        } else {
          links[ci][cj] += w;
        }
      }
    }
    for (std::size_t c = 0; c < n_comm; ++c) {
      for (auto [d, w] : links[c]) next.adj[c].push_back({d, w});
    }
    level = std::move(next);
  }

  result.partition = flatten(ids, membership);
  result.modularity = modularity(g, result.partition, options.resolution, exclude.med_ids);

  std::vector<std::size_t> singleton(ids.size());
  std::iota(singleton.begin(), singleton.end(), 0);
  Partition singletons = flatten(ids, singleton);
  double q_single = modularity(g, singletons, options.resolution, exclude.med_ids);
  if (result.modularity < q_single) {
    result.partition = std::move(singletons);
    result.modularity = q_single;
  }
  return result;
}

Partition louvain(const SimGraph& g, const OutlierSet& exclude, double resolution, std::uint64_t seed) {
  return louvain_detailed(g, exclude, {resolution, seed, false}).partition;
}

json partition_to_json(const Partition& p) {
  json assignment = json::array();
  for (const auto& [id, c] : p.assignment) assignment.push_back({id, c});
  return {{"communities", p.communities}, {"assignment", std::move(assignment)}};
}

Partition partition_from_json(const json& doc) {
  std::map<MedId, std::size_t> labels;
  for (const auto& row : doc.at("assignment")) labels.emplace(row.at(0).get<MedId>(), row.at(1).get<std::size_t>());
  Partition p = Partition::from_labels(labels);
  if (p.communities != doc.at("communities").get<std::vector<std::vector<MedId>>>()) {
    throw Error("partition communities disagree with assignment");
  }
  return p;
}

}  // namespace recomed
