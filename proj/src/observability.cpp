#include "gridse/observability.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>

namespace gridse {

bool is_observable(const MeasurementMatrix& h) {
  return numeric_rank(h.entries) == h.entries.cols();
}

bool attack_feasible(const MeasurementMatrix& h, const std::vector<int>& adversary) {
  std::vector<int> rows;
  for (int id : adversary) rows.push_back(h.row_of(id));
  const Matrix rest = drop_rows(h.entries, rows);
  return numeric_rank(rest) < h.entries.cols();
}

bool is_critical_set(const MeasurementMatrix& h, const std::vector<int>& critical) {
  if (critical.empty()) return false;
  if (!attack_feasible(h, critical)) return false;
  // Leave-one-out subsets are the maximal strict subsets; rank monotonicity
  // under row deletion makes checking them sufficient.
  for (size_t skip = 0; skip < critical.size(); ++skip) {
    std::vector<int> sub;
    for (size_t i = 0; i < critical.size(); ++i)
      if (i != skip) sub.push_back(critical[i]);
    if (!sub.empty() && attack_feasible(h, sub)) return false;
    if (sub.empty() && numeric_rank(h.entries) < h.entries.cols()) return false;
  }
  return true;
}

std::vector<int> affected_states(const MeasurementMatrix& h) {
  std::vector<int> buses;
  for (long j = 0; j < h.entries.cols(); ++j)
    if (h.entries.col(j).cwiseAbs().maxCoeff() > 1e-12)
      buses.push_back(h.state_buses[static_cast<size_t>(j)]);
  return buses;
}

namespace {

Matrix affected_columns(const MeasurementMatrix& h, const std::vector<int>& affected) {
  Matrix sub(h.entries.rows(), static_cast<long>(affected.size()));
  for (size_t k = 0; k < affected.size(); ++k) {
    auto it = std::find(h.state_buses.begin(), h.state_buses.end(), affected[k]);
    if (it == h.state_buses.end())
      throw ModelError("state bus " + std::to_string(affected[k]) + " not in matrix");
    sub.col(static_cast<long>(k)) = h.entries.col(it - h.state_buses.begin());
  }
  return sub;
}

}  // namespace

bool partial_observable(const MeasurementMatrix& h_o, const std::vector<int>& affected) {
  if (affected.empty()) return true;
  const Matrix sub = affected_columns(h_o, affected);
  return numeric_rank(sub) == static_cast<int>(affected.size());
}

bool is_critical_wrt(const MeasurementMatrix& h_o, const std::vector<int>& affected,
                     const std::vector<int>& critical) {
  if (critical.empty()) return false;
  auto observable_without = [&](const std::vector<int>& removed) {
    std::vector<int> rows;
    for (int id : removed) rows.push_back(h_o.row_of(id));
    const Matrix rest = drop_rows(affected_columns(h_o, affected), rows);
    return numeric_rank(rest) == static_cast<int>(affected.size());
  };
  if (observable_without(critical)) return false;
  for (size_t skip = 0; skip < critical.size(); ++skip) {
    std::vector<int> sub;
    for (size_t i = 0; i < critical.size(); ++i)
      if (i != skip) sub.push_back(critical[i]);
    if (!observable_without(sub)) return false;
  }
  return true;
}

// -------------------------------------------------- rainbow spanning tree

namespace {

// Candidate tree edge: an underlying line covered by one specific sensor.
struct Candidate {
  int line = -1;  // index into the edge list (vertex pair)
  int sensor = -1;
};

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[static_cast<size_t>(a)] != a) {
      parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
      a = parent[static_cast<size_t>(a)];
    }
    return a;
  }
  bool join(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<size_t>(a)] = b;
    return true;
  }
};

// Maximum common independent set of the graphic matroid (forest over the
// underlying edges) and the partition matroid (at most one candidate per
// sensor), grown by shortest augmenting paths in the exchange graph.
class RainbowForest {
 public:
  RainbowForest(int num_vertices, std::vector<std::pair<int, int>> edges,
                std::vector<Candidate> candidates)
      : nv_(num_vertices), edges_(std::move(edges)), cand_(std::move(candidates)),
        in_set_(cand_.size(), 0) {}

  // Returns chosen candidate indices; maximum common independent set.
  std::vector<int> solve() {
    greedy_seed();
    bool grew = true;
    while (grew) {
      grew = augment();
    }
    std::vector<int> out;
    for (size_t i = 0; i < cand_.size(); ++i)
      if (in_set_[i]) out.push_back(static_cast<int>(i));
    return out;
  }

 private:
  void greedy_seed() {
    UnionFind uf(nv_);
    std::vector<char> used;
    for (size_t i = 0; i < cand_.size(); ++i) {
      const int s = cand_[i].sensor;
      if (static_cast<size_t>(s) >= used.size()) used.resize(static_cast<size_t>(s) + 1, 0);
      if (used[static_cast<size_t>(s)]) continue;
      const auto& e = edges_[static_cast<size_t>(cand_[i].line)];
      if (uf.find(e.first) == uf.find(e.second)) continue;
      uf.join(e.first, e.second);
      used[static_cast<size_t>(s)] = 1;
      in_set_[i] = 1;
    }
  }

  bool forest_ok(const std::vector<char>& sel) const {
    UnionFind uf(nv_);
    for (size_t i = 0; i < cand_.size(); ++i)
      if (sel[i]) {
        const auto& e = edges_[static_cast<size_t>(cand_[i].line)];
        if (!uf.join(e.first, e.second)) return false;
      }
    return true;
  }
  bool partition_ok(const std::vector<char>& sel) const {
    std::vector<char> used;
    for (size_t i = 0; i < cand_.size(); ++i)
      if (sel[i]) {
        const int s = cand_[i].sensor;
        if (static_cast<size_t>(s) >= used.size()) used.resize(static_cast<size_t>(s) + 1, 0);
        if (used[static_cast<size_t>(s)]) return false;
        used[static_cast<size_t>(s)] = 1;
      }
    return true;
  }

  bool augment() {
    const size_t n = cand_.size();
    // BFS over the exchange graph from M1-addable elements to M2-addable ones.
    std::vector<int> prev(n, -2);
    std::deque<int> queue;
    for (size_t y = 0; y < n; ++y) {
      if (in_set_[y]) continue;
      std::vector<char> trial = in_set_;
      trial[y] = 1;
      if (forest_ok(trial)) {
        prev[y] = -1;
        queue.push_back(static_cast<int>(y));
      }
    }
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      if (!in_set_[static_cast<size_t>(u)]) {
        std::vector<char> trial = in_set_;
        trial[static_cast<size_t>(u)] = 1;
        if (partition_ok(trial)) {
          // Augmenting path found; flip along it.
          for (int v = u; v != -1; v = prev[static_cast<size_t>(v)])
            in_set_[static_cast<size_t>(v)] ^= 1;
          return true;
        }
        // u not in set: arcs u -> x for x in set with I - x + u indep in M2.
        for (size_t x = 0; x < n; ++x) {
          if (!in_set_[x] || prev[x] != -2) continue;
          std::vector<char> t = in_set_;
          t[x] = 0;
          t[static_cast<size_t>(u)] = 1;
          if (partition_ok(t)) {
            prev[x] = u;
            queue.push_back(static_cast<int>(x));
          }
        }
      } else {
        // u in set: arcs u -> y for y not in set with I - u + y indep in M1.
        for (size_t y = 0; y < n; ++y) {
          if (in_set_[y] || prev[y] != -2) continue;
          std::vector<char> t = in_set_;
          t[static_cast<size_t>(u)] = 0;
          t[y] = 1;
          if (forest_ok(t)) {
            prev[y] = u;
            queue.push_back(static_cast<int>(y));
          }
        }
      }
    }
    return false;
  }

  int nv_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<Candidate> cand_;
  std::vector<char> in_set_;
};

// Core criterion: over the graph (vertex count nv, `lines` as vertex-index
// pairs with their case line ids), does a spanning tree exist whose every
// edge carries a distinct sensor from `sensors`? Flow sensors sit on their
// line; each injection sensor may cover one incident line.
std::optional<TreeWitness> covered_spanning_tree(
    const GridCase& c, const std::vector<int>& line_ids,
    const std::vector<std::pair<int, int>>& edge_verts, int nv,
    const std::vector<int>& sensors) {
  if (nv == 0) return std::nullopt;
  // Connectivity over all listed edges is necessary.
  {
    UnionFind uf(nv);
    int comps = nv;
    for (const auto& e : edge_verts)
      if (uf.join(e.first, e.second)) --comps;
    if (comps != 1) return std::nullopt;
  }
  std::vector<Candidate> cands;
  for (int sid : sensors) {
    const SensorSpec& s = c.sensors()[static_cast<size_t>(sid)];
    if (s.kind == SensorSpec::Kind::Flow) {
      const int li = c.flow_line(sid);
      auto it = std::find(line_ids.begin(), line_ids.end(), li);
      if (it != line_ids.end())
        cands.push_back({static_cast<int>(it - line_ids.begin()), sid});
    } else {
      for (int li : c.lines_at(s.bus)) {
        if (!c.lines()[static_cast<size_t>(li)].connected) continue;
        auto it = std::find(line_ids.begin(), line_ids.end(), li);
        if (it != line_ids.end())
          cands.push_back({static_cast<int>(it - line_ids.begin()), sid});
      }
    }
  }
  RainbowForest rf(nv, edge_verts, cands);
  const std::vector<int> chosen = rf.solve();
  if (static_cast<int>(chosen.size()) != nv - 1) return std::nullopt;
  TreeWitness w;
  for (int ci : chosen) {
    const int line_pos = cands[static_cast<size_t>(ci)].line;
    w.tree_lines.push_back(line_ids[static_cast<size_t>(line_pos)]);
    w.cover.emplace_back(line_ids[static_cast<size_t>(line_pos)],
                         cands[static_cast<size_t>(ci)].sensor);
  }
  return w;
}

}  // namespace

ObservabilityReport spanning_tree_observable(const GridCase& c,
                                             const std::vector<int>& sensors) {
  std::vector<int> line_ids;
  std::vector<std::pair<int, int>> edge_verts;
  for (int li = 0; li < c.line_count(); ++li) {
    const Line& l = c.lines()[static_cast<size_t>(li)];
    if (!l.connected) continue;
    line_ids.push_back(li);
    edge_verts.emplace_back(c.bus_index(l.from), c.bus_index(l.to));
  }
  ObservabilityReport rep;
  rep.state_dim = c.dc_state_dim();
  auto w = covered_spanning_tree(c, line_ids, edge_verts, c.bus_count(), sensors);
  rep.observable = w.has_value();
  rep.rank = rep.observable ? rep.state_dim : -1;
  rep.witness = std::move(w);
  return rep;
}

ObservabilityReport spanning_tree_observable(const GridCase& c, const ReducedNetwork& net,
                                             const std::vector<int>* cover_sensors) {
  ObservabilityReport rep;
  rep.state_dim = static_cast<int>(net.vertices.size()) - 1;
  rep.affected_buses = net.vertices;
  // The reduced network must contain the angle reference; otherwise the
  // affected states are determined only up to a common shift.
  if (std::find(net.vertices.begin(), net.vertices.end(), c.reference_bus()) ==
      net.vertices.end()) {
    rep.observable = false;
    return rep;
  }
  auto vpos = [&](int bus) {
    auto it = std::lower_bound(net.vertices.begin(), net.vertices.end(), bus);
    return static_cast<int>(it - net.vertices.begin());
  };
  std::vector<std::pair<int, int>> edge_verts;
  for (int li : net.lines) {
    const Line& l = c.lines()[static_cast<size_t>(li)];
    edge_verts.emplace_back(vpos(l.from), vpos(l.to));
  }
  const std::vector<int>& cover = cover_sensors ? *cover_sensors : net.sensors;
  auto w = covered_spanning_tree(c, net.lines, edge_verts,
                                 static_cast<int>(net.vertices.size()), cover);
  rep.observable = w.has_value();
  rep.rank = rep.observable ? rep.state_dim : -1;
  rep.witness = std::move(w);
  return rep;
}

bool check_partial_conditions(const GridCase& c, const std::vector<int>& observed,
                              const std::vector<int>& critical) {
  if (critical.empty() || observed.empty()) return false;
  for (int id : critical)
    if (std::find(observed.begin(), observed.end(), id) == observed.end())
      return false;
  const MeasurementMatrix h_o = dc_jacobian(c, &observed);
  const std::vector<int> x_o = affected_states(h_o);
  if (!partial_observable(h_o, x_o)) return false;
  if (!is_critical_wrt(h_o, x_o, critical)) return false;
  const MeasurementMatrix h = dc_jacobian(c);
  return attack_feasible(h, critical);
}

namespace {

// Condition 1 of the power-grid corollary: C is exactly the set of all flow
// sensors on some cutset plus all injection sensors on the cutset endpoints.
bool cut_condition(const GridCase& c, const std::vector<int>& critical) {
  std::vector<char> in_c(static_cast<size_t>(c.sensor_count()), 0);
  for (int id : critical) in_c[static_cast<size_t>(id)] = 1;

  // Sensors indexed per line / per bus.
  std::vector<std::vector<int>> flows_on(static_cast<size_t>(c.line_count()));
  std::vector<int> inj_at(static_cast<size_t>(c.bus_count()), -1);
  for (int sid = 0; sid < c.sensor_count(); ++sid) {
    const SensorSpec& s = c.sensors()[static_cast<size_t>(sid)];
    if (s.kind == SensorSpec::Kind::Flow)
      flows_on[static_cast<size_t>(c.flow_line(sid))].push_back(sid);
    else
      inj_at[static_cast<size_t>(c.bus_index(s.bus))] = sid;
  }

  // Lines allowed on the cut: all their flow sensors and endpoint injections
  // must already belong to C.
  auto endpoint_inj_ok = [&](const Line& l) {
    for (int bus : {l.from, l.to}) {
      const int sid = inj_at[static_cast<size_t>(c.bus_index(bus))];
      if (sid >= 0 && !in_c[static_cast<size_t>(sid)]) return false;
    }
    return true;
  };
  std::vector<char> allowed(static_cast<size_t>(c.line_count()), 0);
  for (int li = 0; li < c.line_count(); ++li) {
    const Line& l = c.lines()[static_cast<size_t>(li)];
    if (!l.connected) continue;
    bool ok = endpoint_inj_ok(l);
    for (int sid : flows_on[static_cast<size_t>(li)])
      ok = ok && in_c[static_cast<size_t>(sid)];
    allowed[static_cast<size_t>(li)] = ok;
  }

  // Every flow sensor in C must sit on an allowed line; every injection in C
  // must later appear at a cut endpoint.
  std::vector<char> required_line(static_cast<size_t>(c.line_count()), 0);
  std::vector<int> required_inj_bus;
  for (int id : critical) {
    const SensorSpec& s = c.sensors()[static_cast<size_t>(id)];
    if (s.kind == SensorSpec::Kind::Flow) {
      const int li = c.flow_line(id);
      if (!allowed[static_cast<size_t>(li)]) return false;
      required_line[static_cast<size_t>(li)] = 1;
    } else {
      required_inj_bus.push_back(s.bus);
    }
  }

  // Components of the grid after deleting the allowed lines.
  UnionFind uf(c.bus_count());
  for (int li = 0; li < c.line_count(); ++li) {
    const Line& l = c.lines()[static_cast<size_t>(li)];
    if (!l.connected || allowed[static_cast<size_t>(li)]) continue;
    uf.join(c.bus_index(l.from), c.bus_index(l.to));
  }
  std::vector<int> comp_of(static_cast<size_t>(c.bus_count()));
  std::vector<int> roots;
  for (int i = 0; i < c.bus_count(); ++i) {
    const int r = uf.find(i);
    auto it = std::find(roots.begin(), roots.end(), r);
    if (it == roots.end()) {
      roots.push_back(r);
      comp_of[static_cast<size_t>(i)] = static_cast<int>(roots.size()) - 1;
    } else {
      comp_of[static_cast<size_t>(i)] = static_cast<int>(it - roots.begin());
    }
  }
  const int k = static_cast<int>(roots.size());
  if (k < 2) return false;
  if (k > 20)
    throw ModelError("cut search: too many components for exhaustive bipartition");

  // Try every bipartition of the components; the crossing edges are all
  // allowed lines by construction.
  for (unsigned mask = 1; mask < (1u << (k - 1)); ++mask) {
    auto side = [&](int bus_idx) {
      const int comp = comp_of[static_cast<size_t>(bus_idx)];
      return comp == k - 1 ? 0 : static_cast<int>((mask >> comp) & 1u);
    };
    std::vector<int> cut_lines;
    for (int li = 0; li < c.line_count(); ++li) {
      const Line& l = c.lines()[static_cast<size_t>(li)];
      if (!l.connected) continue;
      if (side(c.bus_index(l.from)) != side(c.bus_index(l.to)))
        cut_lines.push_back(li);
    }
    if (cut_lines.empty()) continue;
    bool ok = true;
    std::vector<char> on_cut(static_cast<size_t>(c.line_count()), 0);
    for (int li : cut_lines) {
      if (!allowed[static_cast<size_t>(li)]) { ok = false; break; }
      on_cut[static_cast<size_t>(li)] = 1;
    }
    if (!ok) continue;
    // C's flow lines must all cross.
    for (int li = 0; li < c.line_count() && ok; ++li)
      if (required_line[static_cast<size_t>(li)] && !on_cut[static_cast<size_t>(li)])
        ok = false;
    if (!ok) continue;
    // C's injections must all sit at cut endpoints; endpoint injections
    // outside C are excluded by `allowed` already.
    std::vector<char> endpoint(static_cast<size_t>(c.bus_count()), 0);
    for (int li : cut_lines) {
      const Line& l = c.lines()[static_cast<size_t>(li)];
      endpoint[static_cast<size_t>(c.bus_index(l.from))] = 1;
      endpoint[static_cast<size_t>(c.bus_index(l.to))] = 1;
    }
    for (int bus : required_inj_bus)
      if (!endpoint[static_cast<size_t>(c.bus_index(bus))]) { ok = false; break; }
    if (ok) return true;
  }
  return false;
}

}  // namespace

bool check_graph_conditions(const GridCase& c, const std::vector<int>& observed,
                            const std::vector<int>& critical) {
  if (critical.empty() || observed.empty()) return false;
  for (int id : critical)
    if (std::find(observed.begin(), observed.end(), id) == observed.end())
      return false;
  if (!cut_condition(c, critical)) return false;

  const ReducedNetwork net = reduced_network(c, observed);
  std::vector<int> base;
  for (int id : observed)
    if (std::find(critical.begin(), critical.end(), id) == critical.end())
      base.push_back(id);
  for (int s : critical) {
    std::vector<int> cover = base;
    cover.push_back(s);
    if (!spanning_tree_observable(c, net, &cover).observable) return false;
  }
  return true;
}

std::string report_to_text(const ObservabilityReport& r, const GridCase* labels) {
  std::ostringstream out;
  out << "verdict: " << (r.observable ? "observable" : "unobservable")
      << " (rank " << r.rank << " of " << r.state_dim << ")\n";
  if (!r.affected_buses.empty()) {
    out << "affected buses:";
    for (int b : r.affected_buses) out << " " << b;
    out << "\n";
  }
  if (r.witness) {
    out << "witness tree:\n";
    for (const auto& [line, sensor] : r.witness->cover) {
      out << "  line " << line;
      if (labels) {
        const Line& l = labels->lines()[static_cast<size_t>(line)];
        out << " (" << l.from << "-" << l.to << ")";
        out << " <- " << labels->sensors()[static_cast<size_t>(sensor)].label();
      } else {
        out << " <- sensor " << sensor;
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace gridse
